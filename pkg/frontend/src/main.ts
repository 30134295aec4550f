// DOM wiring for the steering console.

import { connect, LiveBinding } from "./client.js";
import { DriveDirection, DriveMethod } from "./protocol.js";
import { draw, drawStrokeGauge } from "./render.js";
import { ConsoleViewModel } from "./viewmodel.js";

const vm = new ConsoleViewModel();
let binding: LiveBinding | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const statusEl = el<HTMLSpanElement>("status");
const canvas = el<HTMLCanvasElement>("plane");
const gauge = el<HTMLCanvasElement>("stroke-gauge");
const formError = el<HTMLSpanElement>("form-error");

function sessionUrl(): string {
  const id = (el<HTMLInputElement>("session-id").value || "").trim();
  const base = window.location.origin.replace(/^http/, "ws");
  return `${base}/ws/${id}`;
}

async function defaultSessionId(): Promise<string | null> {
  try {
    const response = await fetch("/sessions");
    const body = (await response.json()) as { sessions: string[] };
    return body.sessions[0] ?? null;
  } catch {
    return null;
  }
}

function reconnect(): void {
  binding?.close();
  binding = connect(sessionUrl(), vm);
}

function readForm(): void {
  vm.setFormField("method", el<HTMLSelectElement>("method").value as DriveMethod);
  vm.setFormField(
    "direction",
    el<HTMLSelectElement>("direction").value as DriveDirection,
  );
  vm.setFormField("frequency", Number(el<HTMLInputElement>("frequency").value));
  vm.setFormField("duty", Number(el<HTMLInputElement>("duty").value));
  vm.setFormField("current", Number(el<HTMLInputElement>("current").value));
  formError.textContent = vm.formValid
    ? ""
    : [...vm.formErrors.values()][0];
}

function sendForm(verbs: { pause?: boolean; resume?: boolean; reset?: boolean } = {}): void {
  readForm();
  if (!vm.sendControl(verbs)) {
    if (!vm.formValid) {
      formError.textContent = [...vm.formErrors.values()][0];
    } else {
      formError.textContent = "not connected";
    }
  }
}

el<HTMLButtonElement>("apply").addEventListener("click", () => sendForm());
el<HTMLButtonElement>("pause").addEventListener("click", () => sendForm({ pause: true }));
el<HTMLButtonElement>("resume").addEventListener("click", () => sendForm({ resume: true }));
el<HTMLButtonElement>("reset").addEventListener("click", () => sendForm({ reset: true }));
el<HTMLButtonElement>("connect").addEventListener("click", reconnect);
for (const id of ["frequency", "duty", "current"]) {
  el<HTMLInputElement>(id).addEventListener("input", readForm);
}

function refresh(): void {
  statusEl.textContent = vm.connection;
  statusEl.className = `status ${vm.connection}`;
  const readout = vm.readout();
  el<HTMLSpanElement>("readout-t").textContent =
    readout.t === null ? "-" : readout.t.toFixed(2) + " s";
  el<HTMLSpanElement>("readout-speed").textContent =
    readout.speedMms === null ? "-" : readout.speedMms.toFixed(2) + " mm/s";
  el<HTMLSpanElement>("readout-deviation").textContent =
    readout.deviationDeg === null || readout.deviationDeg === undefined
      ? "-"
      : readout.deviationDeg.toFixed(1) + " deg";
  if (vm.lastError !== null) {
    formError.textContent = `${vm.lastError.field ?? ""} ${vm.lastError.message}`;
  }
  const ctx = canvas.getContext("2d");
  if (ctx !== null) draw(ctx, vm, canvas.width, canvas.height);
  const gaugeCtx = gauge.getContext("2d");
  if (gaugeCtx !== null) drawStrokeGauge(gaugeCtx, vm, gauge.width, gauge.height);
  requestAnimationFrame(refresh);
}

(async () => {
  const id = await defaultSessionId();
  if (id !== null) {
    el<HTMLInputElement>("session-id").value = id;
    reconnect();
  }
  readForm();
  requestAnimationFrame(refresh);
})();
