/**
 * Wire protocol shared with the session service.
 *
 * Transport framing is length-delimited JSON: each message is one UTF-8
 * encoded JSON object prefixed with its byte length in ASCII decimal and a
 * newline. The first inbound message is always `hello`, which carries
 * proto_version and the camera scale used for all mm <-> pixel conversion.
 */

export const PROTO_VERSION = 1;

export interface CameraInfo {
  optical_center: number[];
  width: number;
  height: number;
  scale: number; // mm per pixel
}

export interface HelloEvent {
  type: "hello";
  proto_version: number;
  camera: CameraInfo;
  eye_silhouette: { center_px: number[]; radius_px: number };
  config: { tick_hz: number; replan_hz: number; [key: string]: unknown };
}

export interface AckEvent {
  type: "ack";
  tick: number;
  cmd_seq: number;
  ok: boolean;
  error?: string;
  message?: string;
}

export interface StateTickEvent {
  type: "state_tick";
  tick: number;
  t: number;
  mode: "idle" | "navigating" | "localizing" | "vessel";
  paused: boolean;
  tool: { p: number[]; axis: number[]; v: number[] };
  shadow: number[] | null;
  plan: number[][] | null;
  goal_pixel: number[] | null;
  sclera_residual_mm: number;
}

export interface FitUpdateEvent {
  type: "fit_update";
  tick: number;
  fit: { center: number[]; radius: number; inliers: number; total: number; [key: string]: unknown };
}

export interface GoalReachedEvent {
  type: "goal_reached";
  tick: number;
  entry: {
    pixel: number[];
    x_err_mm: number;
    y_err_mm: number;
    x_err_px: number;
    y_err_px: number;
    sclera_mean_mm: number;
    sclera_max_mm: number;
    replans: number;
  };
}

export interface VesselDoneEvent {
  type: "vessel_done";
  tick: number;
  vessel: { tracking_err_mm: number[]; penetrations: number; [key: string]: unknown };
}

export interface ErrorEvent {
  type: "error";
  tick: number;
  code: string;
  message: string;
}

export interface BenchmarkResultEvent {
  type: "benchmark_result";
  tick: number;
  report: Record<string, unknown>;
}

export type ServerEvent =
  | HelloEvent
  | AckEvent
  | StateTickEvent
  | FitUpdateEvent
  | GoalReachedEvent
  | VesselDoneEvent
  | ErrorEvent
  | BenchmarkResultEvent;

export type ClientCommand =
  | { type: "click_goal"; pixel: [number, number] }
  | { type: "set_weights"; w_s?: number; w_e?: number; replan_hz?: number }
  | { type: "start_localization"; samples?: number }
  | { type: "set_vessel_path"; pixels: [number, number][] }
  | { type: "pause" }
  | { type: "resume" }
  | { type: "reset" }
  | { type: "run_benchmark"; count?: number; noise_sigma?: number };

/** Encode one message in the transport framing. */
export function encodeFrame(msg: ClientCommand | ServerEvent): Uint8Array {
  const payload = new TextEncoder().encode(JSON.stringify(msg));
  const header = new TextEncoder().encode(`${payload.length}\n`);
  const out = new Uint8Array(header.length + payload.length);
  out.set(header, 0);
  out.set(payload, header.length);
  return out;
}

/**
 * Incremental frame decoder. Feed it raw chunks in arrival order; it yields
 * complete messages and buffers partial ones across chunk boundaries.
 */
export class FrameDecoder {
  private buffer = new Uint8Array(0);

  push(chunk: Uint8Array): ServerEvent[] {
    const merged = new Uint8Array(this.buffer.length + chunk.length);
    merged.set(this.buffer, 0);
    merged.set(chunk, this.buffer.length);
    this.buffer = merged;

    const out: ServerEvent[] = [];
    for (;;) {
      const newline = this.buffer.indexOf(0x0a);
      if (newline < 0) break;
      const header = new TextDecoder().decode(this.buffer.subarray(0, newline));
      const length = Number.parseInt(header, 10);
      if (!Number.isFinite(length) || length < 0) {
        throw new Error(`bad frame header: ${JSON.stringify(header)}`);
      }
      const end = newline + 1 + length;
      if (this.buffer.length < end) break;
      const body = new TextDecoder().decode(this.buffer.subarray(newline + 1, end));
      out.push(JSON.parse(body) as ServerEvent);
      this.buffer = this.buffer.subarray(end);
    }
    return out;
  }
}
