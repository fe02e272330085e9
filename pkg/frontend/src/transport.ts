/** Transport abstraction: the view model only sees this surface. */

import type { ClientCommand, ServerEvent } from "./protocol";

export interface Transport {
  send(cmd: ClientCommand): void;
  onEvent(handler: (event: ServerEvent) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}

/**
 * Browser transport over a WebSocket bridge. Each WebSocket frame carries
 * one JSON message (the bridge handles the length-delimited TCP framing;
 * see the README for a one-line websocat invocation).
 */
export class WebSocketTransport implements Transport {
  private handlers: ((event: ServerEvent) => void)[] = [];
  private closeHandlers: (() => void)[] = [];
  private ws: WebSocket;

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.onmessage = (event: MessageEvent) => {
      const parsed = JSON.parse(String(event.data)) as ServerEvent;
      for (const handler of this.handlers) handler(parsed);
    };
    this.ws.onclose = () => {
      for (const handler of this.closeHandlers) handler();
    };
  }

  send(cmd: ClientCommand): void {
    this.ws.send(JSON.stringify(cmd));
  }

  onEvent(handler: (event: ServerEvent) => void): void {
    this.handlers.push(handler);
  }

  onClose(handler: () => void): void {
    this.closeHandlers.push(handler);
  }

  close(): void {
    this.ws.close();
  }
}
