import { describe, expect, it } from "vitest";
import type { ClientCommand, ServerEvent, StateTickEvent } from "../src/protocol";
import type { Transport } from "../src/transport";
import { ViewModel } from "../src/viewmodel";

class FakeTransport implements Transport {
  sent: ClientCommand[] = [];
  private handler: ((event: ServerEvent) => void) | null = null;
  private closer: (() => void) | null = null;

  send(cmd: ClientCommand): void {
    this.sent.push(cmd);
  }
  onEvent(handler: (event: ServerEvent) => void): void {
    this.handler = handler;
  }
  onClose(handler: () => void): void {
    this.closer = handler;
  }
  close(): void {
    this.closer?.();
  }
  emit(event: ServerEvent): void {
    this.handler?.(event);
  }
}

const hello: ServerEvent = {
  type: "hello",
  proto_version: 1,
  camera: { optical_center: [0, 0, 20], width: 640, height: 480, scale: 0.04 },
  eye_silhouette: { center_px: [320, 240], radius_px: 317.5 },
  config: { tick_hz: 100, replan_hz: 5 },
};

function tick(overrides: Partial<StateTickEvent> = {}): StateTickEvent {
  return {
    type: "state_tick",
    tick: 1,
    t: 0.01,
    mode: "idle",
    paused: false,
    tool: { p: [0, 0, 3], axis: [1, 0, 0], v: [0, 0, 0] },
    shadow: [0, 0, 0],
    plan: null,
    goal_pixel: null,
    sclera_residual_mm: 0.001,
    ...overrides,
  };
}

function connected(): { vm: ViewModel; transport: FakeTransport } {
  const vm = new ViewModel();
  const transport = new FakeTransport();
  vm.attach(transport);
  transport.emit(hello);
  return { vm, transport };
}

describe("handshake", () => {
  it("adopts the camera scale and silhouette", () => {
    const { vm } = connected();
    expect(vm.connection).toBe("connected");
    expect(vm.scale).toBeCloseTo(0.04);
    expect(vm.silhouette?.radiusPx).toBeCloseTo(317.5);
  });

  it("marks disconnect and freezes state", () => {
    const { vm, transport } = connected();
    transport.emit(tick({ tick: 5 }));
    transport.close();
    expect(vm.connection).toBe("disconnected");
    expect(vm.lastTick).toBe(5);
  });
});

describe("state ticks", () => {
  it("mirrors mm payloads in pixels via the handshake scale", () => {
    const { vm, transport } = connected();
    transport.emit(tick({ tool: { p: [1.0, -2.0, 3.0], axis: [1, 0, 0], v: [0, 0, 0] } }));
    expect(vm.toolPx.x).toBeCloseTo(320 + 1.0 / 0.04);
    expect(vm.toolPx.y).toBeCloseTo(240 - 2.0 / 0.04);
    expect(vm.toolZMm).toBeCloseTo(3.0);
  });

  it("discards stale ticks", () => {
    const { vm, transport } = connected();
    transport.emit(tick({ tick: 10, mode: "navigating" }));
    transport.emit(tick({ tick: 9, mode: "idle" }));
    expect(vm.mode).toBe("navigating");
    expect(vm.lastTick).toBe(10);
  });

  it("computes the shadow gap", () => {
    const { vm, transport } = connected();
    transport.emit(tick({ tool: { p: [0, 0, 2], axis: [1, 0, 0], v: [0, 0, 0] }, shadow: [0, 0, 0] }));
    expect(vm.shadowGapMm).toBeCloseTo(2.0);
  });
});

describe("click handling and acknowledgements", () => {
  it("sends click_goal and paints a pending marker", () => {
    const { vm, transport } = connected();
    const cmd = vm.onClick({ x: 300, y: 250 }, "goal");
    expect(cmd).toEqual({ type: "click_goal", pixel: [300, 250] });
    expect(transport.sent).toHaveLength(1);
    expect(vm.goalMarker?.pending).toBe(true);
  });

  it("confirms the marker only after the ack", () => {
    const { vm, transport } = connected();
    vm.onClick({ x: 300, y: 250 }, "goal");
    expect(vm.goalMarker?.pending).toBe(true);
    transport.emit({ type: "ack", tick: 1, cmd_seq: 1, ok: true });
    expect(vm.goalMarker?.pending).toBe(false);
  });

  it("rolls back and toasts on rejection", () => {
    const { vm, transport } = connected();
    vm.onClick({ x: 639, y: 240 }, "goal");
    transport.emit({ type: "ack", tick: 1, cmd_seq: 1, ok: false, error: "GoalOffRetina", message: "missed" });
    expect(vm.goalMarker).toBeNull();
    expect(vm.toasts.some((t) => t.text.includes("GoalOffRetina"))).toBe(true);
  });

  it("round-trips the goal coordinate within a pixel", () => {
    const { vm, transport } = connected();
    vm.onClick({ x: 310.4, y: 251.7 }, "goal");
    transport.emit({ type: "ack", tick: 1, cmd_seq: 1, ok: true });
    // service echoes the accepted goal pixel on subsequent ticks
    transport.emit(tick({ tick: 2, mode: "navigating", goal_pixel: [310.4, 251.7] }));
    expect(Math.abs(vm.goalMarker!.x - 310.4)).toBeLessThanOrEqual(1.0);
    expect(Math.abs(vm.goalMarker!.y - 251.7)).toBeLessThanOrEqual(1.0);
  });

  it("ignores clicks while disconnected", () => {
    const vm = new ViewModel();
    expect(vm.onClick({ x: 10, y: 10 }, "goal")).toBeNull();
  });
});

describe("vessel path drafting", () => {
  it("accumulates clicks locally and sends them in order", () => {
    const { vm, transport } = connected();
    vm.onClick({ x: 280, y: 200 }, "vessel");
    vm.onClick({ x: 300, y: 225 }, "vessel");
    vm.onClick({ x: 320, y: 245 }, "vessel");
    expect(transport.sent).toHaveLength(0); // nothing sent until follow
    const cmd = vm.followVessel();
    expect(cmd).toEqual({
      type: "set_vessel_path",
      pixels: [
        [280, 200],
        [300, 225],
        [320, 245],
      ],
    });
  });

  it("requires at least two points", () => {
    const { vm, transport } = connected();
    vm.onClick({ x: 280, y: 200 }, "vessel");
    expect(vm.followVessel()).toBeNull();
    expect(transport.sent).toHaveLength(0);
    expect(vm.toasts.length).toBeGreaterThan(0);
  });
});

describe("results and overlays", () => {
  it("stores the goal_reached readout", () => {
    const { vm, transport } = connected();
    transport.emit({
      type: "goal_reached",
      tick: 100,
      entry: {
        pixel: [320, 240],
        x_err_mm: 0.004,
        y_err_mm: 0.015,
        x_err_px: 0.1,
        y_err_px: 0.38,
        sclera_mean_mm: 0.0,
        sclera_max_mm: 0.0,
        replans: 8,
      },
    });
    expect(vm.lastGoalResult?.x_err_mm).toBeCloseTo(0.004);
  });

  it("maps benchmark goals to target/landing squares", () => {
    const { vm, transport } = connected();
    transport.emit({
      type: "benchmark_result",
      tick: 1,
      report: {
        goals: [
          { pixel: [300, 200], landing_px: [300.5, 200.2] },
          { pixel: [340, 280], landing_px: null },
        ],
      },
    });
    expect(vm.benchmarkSquares).toHaveLength(2);
    expect(vm.benchmarkSquares[0].landing?.x).toBeCloseTo(300.5);
    expect(vm.benchmarkSquares[1].landing).toBeNull();
  });
});
