/**
 * Operator-console state: a pixel-space mirror of the session stream.
 *
 * All geometry from the service arrives in mm and is converted with the
 * camera scale from the handshake (px = mm / scale). Stale state ticks
 * (tick index not past the last applied one) are discarded. Commands are
 * tracked in a FIFO so nothing renders as applied before its ack arrives:
 * a click paints a pending marker that is confirmed or rolled back (with a
 * toast) when the acknowledgement lands.
 */

import type {
  AckEvent,
  ClientCommand,
  GoalReachedEvent,
  HelloEvent,
  ServerEvent,
  StateTickEvent,
} from "./protocol";
import type { Transport } from "./transport";

export type ClickMode = "goal" | "vessel";

export interface PixelPoint {
  x: number;
  y: number;
}

export interface Marker extends PixelPoint {
  kind: "goal" | "vessel";
  pending: boolean;
}

export interface Toast {
  text: string;
  id: number;
}

export interface BenchmarkSquare {
  target: PixelPoint;
  landing: PixelPoint | null;
}

interface PendingCommand {
  cmd: ClientCommand;
  marker: Marker | null;
}

export class ViewModel {
  connection: "connecting" | "connected" | "disconnected" = "connecting";
  proto = 0;
  scale = 0.04; // mm per pixel, replaced by the handshake value
  imageWidth = 640;
  imageHeight = 480;
  opticalCenter: number[] = [0, 0, 20];
  silhouette: { center: PixelPoint; radiusPx: number } | null = null;
  fitCircle: { center: PixelPoint; radiusPx: number; inliers: number; total: number } | null = null;

  mode: StateTickEvent["mode"] = "idle";
  paused = false;
  lastTick = -1;
  simTime = 0;
  toolPx: PixelPoint = { x: 0, y: 0 };
  toolZMm = 0;
  shadowPx: PixelPoint | null = null;
  shadowGapMm: number | null = null;
  planPx: PixelPoint[] = [];
  goalMarker: Marker | null = null;
  vesselDraft: PixelPoint[] = [];
  scleraResidualMm = 0;
  scleraCeilingMm = 0.704;

  lastGoalResult: GoalReachedEvent["entry"] | null = null;
  benchmarkSquares: BenchmarkSquare[] = [];
  toasts: Toast[] = [];
  clickMode: ClickMode = "goal";

  private transport: Transport | null = null;
  private pending: PendingCommand[] = [];
  private toastCounter = 0;

  attach(transport: Transport): void {
    this.transport = transport;
    transport.onEvent((event) => this.applyEvent(event));
    transport.onClose(() => {
      this.connection = "disconnected";
    });
  }

  /** Pixel position of a mm point via the handshake camera. */
  mmToPixel(point: number[]): PixelPoint {
    return {
      x: (point[0] - this.opticalCenter[0]) / this.scale + this.imageWidth / 2,
      y: (point[1] - this.opticalCenter[1]) / this.scale + this.imageHeight / 2,
    };
  }

  applyEvent(event: ServerEvent): void {
    switch (event.type) {
      case "hello":
        this.applyHello(event);
        break;
      case "state_tick":
        this.applyStateTick(event);
        break;
      case "ack":
        this.applyAck(event);
        break;
      case "fit_update":
        this.fitCircle = {
          center: this.mmToPixel(event.fit.center),
          radiusPx: event.fit.radius / this.scale,
          inliers: event.fit.inliers,
          total: event.fit.total,
        };
        break;
      case "goal_reached":
        this.lastGoalResult = event.entry;
        this.goalMarker = null;
        break;
      case "vessel_done":
        this.pushToast(
          `vessel done: tracking ${event.vessel.tracking_err_mm
            .map((v) => v.toFixed(3))
            .join("/")} mm, ${event.vessel.penetrations} penetrations`
        );
        this.vesselDraft = [];
        break;
      case "error":
        this.pushToast(`${event.code}: ${event.message}`);
        break;
      case "benchmark_result": {
        const goals = (event.report as { goals?: { pixel: number[]; landing_px: number[] | null }[] }).goals ?? [];
        this.benchmarkSquares = goals.map((g) => ({
          target: { x: g.pixel[0], y: g.pixel[1] },
          landing: g.landing_px ? { x: g.landing_px[0], y: g.landing_px[1] } : null,
        }));
        break;
      }
    }
  }

  private applyHello(event: HelloEvent): void {
    this.connection = "connected";
    this.proto = event.proto_version;
    this.scale = event.camera.scale;
    this.imageWidth = event.camera.width;
    this.imageHeight = event.camera.height;
    this.opticalCenter = event.camera.optical_center;
    this.silhouette = {
      center: { x: event.eye_silhouette.center_px[0], y: event.eye_silhouette.center_px[1] },
      radiusPx: event.eye_silhouette.radius_px,
    };
  }

  private applyStateTick(event: StateTickEvent): void {
    if (event.tick <= this.lastTick) {
      return; // stale tick
    }
    this.lastTick = event.tick;
    this.simTime = event.t;
    this.mode = event.mode;
    this.paused = event.paused;
    this.toolPx = this.mmToPixel(event.tool.p);
    this.toolZMm = event.tool.p[2];
    this.shadowPx = event.shadow ? this.mmToPixel(event.shadow) : null;
    this.shadowGapMm = event.shadow
      ? Math.hypot(
          event.tool.p[0] - event.shadow[0],
          event.tool.p[1] - event.shadow[1],
          event.tool.p[2] - event.shadow[2]
        )
      : null;
    this.planPx = (event.plan ?? []).map((p) => this.mmToPixel(p));
    this.scleraResidualMm = event.sclera_residual_mm;
    if (event.goal_pixel && this.goalMarker && !this.goalMarker.pending) {
      // echo of the accepted goal: keep the marker glued to the service's view
      this.goalMarker.x = event.goal_pixel[0];
      this.goalMarker.y = event.goal_pixel[1];
    }
  }

  private applyAck(event: AckEvent): void {
    const pending = this.pending.shift();
    if (!pending) return;
    if (event.ok) {
      if (pending.marker) pending.marker.pending = false;
      return;
    }
    // rejected: roll back whatever the command painted optimistically
    if (pending.marker) {
      if (pending.marker.kind === "goal" && this.goalMarker === pending.marker) {
        this.goalMarker = null;
      } else if (pending.marker.kind === "vessel") {
        this.vesselDraft = this.vesselDraft.filter(
          (p) => p.x !== pending.marker!.x || p.y !== pending.marker!.y
        );
      }
    }
    this.pushToast(`${event.error ?? "rejected"}: ${event.message ?? ""}`);
  }

  private send(cmd: ClientCommand, marker: Marker | null = null): void {
    this.pending.push({ cmd, marker });
    this.transport?.send(cmd);
  }

  /** Handle a canvas click; returns the command that was sent, if any. */
  onClick(pixel: PixelPoint, mode: ClickMode = this.clickMode): ClientCommand | null {
    if (this.connection !== "connected") return null;
    if (mode === "goal") {
      const marker: Marker = { x: pixel.x, y: pixel.y, kind: "goal", pending: true };
      this.goalMarker = marker;
      this.lastGoalResult = null;
      const cmd: ClientCommand = { type: "click_goal", pixel: [pixel.x, pixel.y] };
      this.send(cmd, marker);
      return cmd;
    }
    // vessel mode accumulates locally; nothing is sent until followVessel()
    this.vesselDraft.push({ x: pixel.x, y: pixel.y });
    return null;
  }

  /** Send the accumulated vessel path in click order. */
  followVessel(): ClientCommand | null {
    if (this.vesselDraft.length < 2) {
      this.pushToast("vessel path needs at least 2 points");
      return null;
    }
    const cmd: ClientCommand = {
      type: "set_vessel_path",
      pixels: this.vesselDraft.map((p) => [p.x, p.y] as [number, number]),
    };
    this.send(cmd);
    return cmd;
  }

  setWeights(update: { w_s?: number; w_e?: number; replan_hz?: number }): void {
    this.send({ type: "set_weights", ...update });
  }

  startLocalization(samples = 30): void {
    this.send({ type: "start_localization", samples });
  }

  runBenchmark(count = 50): void {
    this.send({ type: "run_benchmark", count });
  }

  pause(): void {
    this.send({ type: "pause" });
  }

  resume(): void {
    this.send({ type: "resume" });
  }

  reset(): void {
    this.vesselDraft = [];
    this.benchmarkSquares = [];
    this.lastGoalResult = null;
    this.goalMarker = null;
    this.send({ type: "reset" });
  }

  private pushToast(text: string): void {
    this.toasts.push({ text, id: this.toastCounter++ });
    if (this.toasts.length > 4) this.toasts.shift();
  }

  dismissToast(id: number): void {
    this.toasts = this.toasts.filter((t) => t.id !== id);
  }
}
