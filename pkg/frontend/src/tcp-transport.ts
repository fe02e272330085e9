/** Node transport speaking the service's native TCP framing (tests, tooling). */

import * as net from "node:net";
import { FrameDecoder, encodeFrame } from "./protocol";
import type { ClientCommand, ServerEvent } from "./protocol";
import type { Transport } from "./transport";

export class TcpTransport implements Transport {
  private handlers: ((event: ServerEvent) => void)[] = [];
  private closeHandlers: (() => void)[] = [];
  private decoder = new FrameDecoder();
  private socket: net.Socket;

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.on("data", (chunk: Buffer) => {
      for (const event of this.decoder.push(new Uint8Array(chunk))) {
        for (const handler of this.handlers) handler(event);
      }
    });
    socket.on("close", () => {
      for (const handler of this.closeHandlers) handler();
    });
  }

  static connect(host: string, port: number): Promise<TcpTransport> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port }, () => resolve(new TcpTransport(socket)));
      socket.once("error", reject);
    });
  }

  send(cmd: ClientCommand): void {
    this.socket.write(encodeFrame(cmd));
  }

  onEvent(handler: (event: ServerEvent) => void): void {
    this.handlers.push(handler);
  }

  onClose(handler: () => void): void {
    this.closeHandlers.push(handler);
  }

  close(): void {
    this.socket.destroy();
  }
}
