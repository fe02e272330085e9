/**
 * Canvas scene rendering: retina silhouette, vessel overlay, tool tip and
 * shadow (the gap closes as the tip descends), plan polyline, goal and
 * vessel markers, benchmark squares, and the sclera-residual gauge.
 *
 * Drawing goes through the Scene2D subset of CanvasRenderingContext2D so
 * tests can substitute a recording stub.
 */

import type { ViewModel, PixelPoint } from "./viewmodel";

export interface Scene2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
}

export const COLORS = {
  background: "#10141a",
  retina: "#7a2e2e",
  retinaEdge: "#b25050",
  vesselDecor: "#5a1f1f",
  fit: "#58a6ff",
  tool: "#e6edf3",
  shadow: "#606a76",
  plan: "#3fb950",
  goalPending: "#d29922",
  goalConfirmed: "#3fb950",
  vesselDraft: "#d2a8ff",
  benchTarget: "#ffffff",
  benchLanding: "#1f6feb",
  gaugeOk: "#3fb950",
  gaugeBad: "#f85149",
  text: "#e6edf3",
  banner: "#f85149",
};

function circle(ctx: Scene2D, p: PixelPoint, r: number, color: string, fill: boolean): void {
  ctx.beginPath();
  ctx.arc(p.x, p.y, r, 0, Math.PI * 2);
  if (fill) {
    ctx.fillStyle = color;
    ctx.fill();
  } else {
    ctx.strokeStyle = color;
    ctx.stroke();
  }
}

function polyline(ctx: Scene2D, points: PixelPoint[], color: string, width: number): void {
  if (points.length < 2) return;
  ctx.beginPath();
  ctx.moveTo(points[0].x, points[0].y);
  for (let i = 1; i < points.length; i++) {
    ctx.lineTo(points[i].x, points[i].y);
  }
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.stroke();
  ctx.lineWidth = 1;
}

/** Deterministic decorative vessel forks inside the silhouette. */
export function vesselDecorPoints(center: PixelPoint, radiusPx: number, seed = 7): PixelPoint[][] {
  let state = seed >>> 0;
  const rand = () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
  const branches: PixelPoint[][] = [];
  for (let b = 0; b < 6; b++) {
    const angle = (b / 6) * Math.PI * 2 + rand() * 0.6;
    let x = center.x;
    let y = center.y;
    let heading = angle;
    const pts: PixelPoint[] = [{ x, y }];
    const steps = 8 + Math.floor(rand() * 5);
    for (let s = 0; s < steps; s++) {
      heading += (rand() - 0.5) * 0.7;
      const len = radiusPx * (0.06 + rand() * 0.07);
      x += Math.cos(heading) * len;
      y += Math.sin(heading) * len;
      if (Math.hypot(x - center.x, y - center.y) > radiusPx * 0.92) break;
      pts.push({ x, y });
    }
    branches.push(pts);
  }
  return branches;
}

export function renderScene(ctx: Scene2D, vm: ViewModel): void {
  ctx.globalAlpha = 1;
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, vm.imageWidth, vm.imageHeight);

  if (vm.silhouette) {
    circle(ctx, vm.silhouette.center, vm.silhouette.radiusPx, COLORS.retina, true);
    circle(ctx, vm.silhouette.center, vm.silhouette.radiusPx, COLORS.retinaEdge, false);
    for (const branch of vesselDecorPoints(vm.silhouette.center, vm.silhouette.radiusPx)) {
      polyline(ctx, branch, COLORS.vesselDecor, 3);
    }
  }
  if (vm.fitCircle) {
    ctx.setLineDash([6, 4]);
    circle(ctx, vm.fitCircle.center, vm.fitCircle.radiusPx, COLORS.fit, false);
    ctx.setLineDash([]);
  }

  for (const sq of vm.benchmarkSquares) {
    ctx.strokeStyle = COLORS.benchTarget;
    ctx.strokeRect(sq.target.x - 3, sq.target.y - 3, 6, 6);
    if (sq.landing) {
      ctx.fillStyle = COLORS.benchLanding;
      ctx.fillRect(sq.landing.x - 2, sq.landing.y - 2, 4, 4);
    }
  }

  if (vm.planPx.length > 1) {
    polyline(ctx, vm.planPx, COLORS.plan, 2);
  }

  for (const p of vm.vesselDraft) {
    circle(ctx, p, 4, COLORS.vesselDraft, false);
  }
  if (vm.vesselDraft.length > 1) {
    polyline(ctx, vm.vesselDraft, COLORS.vesselDraft, 1);
  }

  if (vm.goalMarker) {
    const color = vm.goalMarker.pending ? COLORS.goalPending : COLORS.goalConfirmed;
    circle(ctx, vm.goalMarker, 6, color, false);
    circle(ctx, vm.goalMarker, 1.5, color, true);
  }

  // shadow first, then the tip, with the depth-cue gap line between them
  if (vm.shadowPx) {
    circle(ctx, vm.shadowPx, 4, COLORS.shadow, true);
    polyline(ctx, [vm.shadowPx, vm.toolPx], COLORS.shadow, 1);
  }
  circle(ctx, vm.toolPx, 4, COLORS.tool, true);

  drawScleraGauge(ctx, vm);
  drawStatus(ctx, vm);
  drawToasts(ctx, vm);

  if (vm.connection === "disconnected") {
    ctx.globalAlpha = 0.85;
    ctx.fillStyle = COLORS.banner;
    ctx.fillRect(0, vm.imageHeight / 2 - 18, vm.imageWidth, 36);
    ctx.globalAlpha = 1;
    ctx.fillStyle = COLORS.text;
    ctx.font = "16px monospace";
    ctx.fillText("DISCONNECTED - frame frozen", vm.imageWidth / 2 - 120, vm.imageHeight / 2 + 5);
  }
}

function drawScleraGauge(ctx: Scene2D, vm: ViewModel): void {
  const w = 120;
  const x = vm.imageWidth - w - 12;
  const y = 12;
  const frac = Math.min(1, vm.scleraResidualMm / vm.scleraCeilingMm);
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(x - 2, y - 2, w + 4, 14);
  ctx.strokeStyle = COLORS.text;
  ctx.strokeRect(x, y, w, 10);
  ctx.fillStyle = frac < 0.5 ? COLORS.gaugeOk : COLORS.gaugeBad;
  ctx.fillRect(x, y, w * frac, 10);
  ctx.fillStyle = COLORS.text;
  ctx.font = "10px monospace";
  ctx.fillText(`sclera ${vm.scleraResidualMm.toFixed(3)} mm`, x, y + 22);
}

function drawStatus(ctx: Scene2D, vm: ViewModel): void {
  ctx.fillStyle = COLORS.text;
  ctx.font = "12px monospace";
  const status = `${vm.mode}${vm.paused ? " (paused)" : ""}  t=${vm.simTime.toFixed(2)}s  z=${vm.toolZMm.toFixed(2)}mm`;
  ctx.fillText(status, 12, 20);
  if (vm.shadowGapMm !== null) {
    ctx.fillText(`shadow gap ${vm.shadowGapMm.toFixed(2)} mm`, 12, 36);
  }
  if (vm.lastGoalResult) {
    const e = vm.lastGoalResult;
    ctx.fillText(
      `goal reached: x ${e.x_err_mm.toFixed(3)} mm  y ${e.y_err_mm.toFixed(3)} mm  (${e.replans} replans)`,
      12,
      52
    );
  }
}

function drawToasts(ctx: Scene2D, vm: ViewModel): void {
  let y = vm.imageHeight - 16;
  for (const toast of vm.toasts.slice().reverse()) {
    ctx.globalAlpha = 0.9;
    ctx.fillStyle = COLORS.banner;
    ctx.fillRect(8, y - 14, Math.max(160, toast.text.length * 7 + 16), 18);
    ctx.globalAlpha = 1;
    ctx.fillStyle = COLORS.text;
    ctx.font = "11px monospace";
    ctx.fillText(toast.text, 16, y - 1);
    y -= 24;
  }
}
