/**
 * Browser entry point: wires the canvas, click modes, sliders, and task
 * buttons to the view model and renders at the display refresh rate.
 *
 * Connects through a WebSocket bridge in front of the service's TCP
 * endpoint (see README). The ?ws= query parameter overrides the bridge URL.
 */

import { renderScene } from "./renderer";
import { WebSocketTransport } from "./transport";
import { ViewModel } from "./viewmodel";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const canvas = el<HTMLCanvasElement>("scene");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas context unavailable");

  const vm = new ViewModel();
  const params = new URLSearchParams(window.location.search);
  const url = params.get("ws") ?? `ws://${window.location.hostname || "127.0.0.1"}:7465`;
  vm.attach(new WebSocketTransport(url));

  canvas.addEventListener("click", (event: MouseEvent) => {
    const rect = canvas.getBoundingClientRect();
    const pixel = {
      x: ((event.clientX - rect.left) / rect.width) * vm.imageWidth,
      y: ((event.clientY - rect.top) / rect.height) * vm.imageHeight,
    };
    vm.onClick(pixel);
  });

  const modeGoal = el<HTMLButtonElement>("mode-goal");
  const modeVessel = el<HTMLButtonElement>("mode-vessel");
  const syncModeButtons = () => {
    modeGoal.classList.toggle("active", vm.clickMode === "goal");
    modeVessel.classList.toggle("active", vm.clickMode === "vessel");
  };
  modeGoal.onclick = () => {
    vm.clickMode = "goal";
    syncModeButtons();
  };
  modeVessel.onclick = () => {
    vm.clickMode = "vessel";
    syncModeButtons();
  };
  syncModeButtons();

  el<HTMLButtonElement>("follow").onclick = () => vm.followVessel();
  el<HTMLButtonElement>("localize").onclick = () => vm.startLocalization();
  el<HTMLButtonElement>("benchmark").onclick = () => vm.runBenchmark(50);
  el<HTMLButtonElement>("pause").onclick = () => (vm.paused ? vm.resume() : vm.pause());
  el<HTMLButtonElement>("reset").onclick = () => vm.reset();

  const bindSlider = (id: string, labelId: string, apply: (value: number) => void) => {
    const slider = el<HTMLInputElement>(id);
    const label = el<HTMLSpanElement>(labelId);
    const update = () => {
      const value = Number(slider.value);
      label.textContent = slider.id === "replan" ? `${value} Hz` : `1e${value}`;
      apply(slider.id === "replan" ? value : 10 ** value);
    };
    slider.onchange = update;
    label.textContent = slider.id === "replan" ? `${slider.value} Hz` : `1e${slider.value}`;
  };
  bindSlider("w-s", "w-s-label", (v) => vm.setWeights({ w_s: v }));
  bindSlider("w-e", "w-e-label", (v) => vm.setWeights({ w_e: v }));
  bindSlider("replan", "replan-label", (v) => vm.setWeights({ replan_hz: v }));

  const statusLine = el<HTMLSpanElement>("connection");
  const frame = () => {
    renderScene(ctx, vm);
    statusLine.textContent = vm.connection;
    statusLine.className = vm.connection;
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

window.addEventListener("load", main);
