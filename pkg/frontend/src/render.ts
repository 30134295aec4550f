// Top-down canvas rendering: trail, capsule glyph, tilt reference lines.

import { ConsoleViewModel } from "./viewmodel.js";

const REFERENCE_DEVIATION_DEG = 22;

export interface Viewport {
  /** metres per canvas pixel */
  scale: number;
  centerX: number;
  centerY: number;
}

export function fitViewport(
  vm: ConsoleViewModel,
  width: number,
  height: number,
): Viewport {
  // Keep the whole trail plus a margin in view, at least a 40 mm window.
  let minX = -0.02, maxX = 0.02, minY = -0.02, maxY = 0.02;
  for (const p of vm.trail.all()) {
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  const span = Math.max(maxX - minX, maxY - minY) * 1.2;
  return {
    scale: span / Math.min(width, height),
    centerX: (minX + maxX) / 2,
    centerY: (minY + maxY) / 2,
  };
}

function toPx(
  view: Viewport, width: number, height: number, x: number, y: number,
): [number, number] {
  // +y in the plane is the capsule's left; canvas y grows downward.
  return [
    width / 2 + (x - view.centerX) / view.scale,
    height / 2 - (y - view.centerY) / view.scale,
  ];
}

export function draw(
  ctx: CanvasRenderingContext2D,
  vm: ConsoleViewModel,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, width, height);
  const view = fitViewport(vm, width, height);
  const px = (x: number, y: number) => toPx(view, width, height, x, y);

  // Tilt reference: dashed rays at +/-22 deg from the capsule axis.
  const heading = vm.latest?.heading ?? 0;
  const origin = vm.trail.all()[0] ?? { x: 0, y: 0 };
  ctx.setLineDash([6, 6]);
  ctx.strokeStyle = "#31415a";
  ctx.lineWidth = 1;
  for (const sign of [-1, 1]) {
    const angle = heading + (sign * REFERENCE_DEVIATION_DEG * Math.PI) / 180;
    const [x0, y0] = px(origin.x, origin.y);
    const [x1, y1] = px(
      origin.x + 0.2 * Math.cos(angle),
      origin.y + 0.2 * Math.sin(angle),
    );
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    ctx.stroke();
  }
  ctx.setLineDash([]);

  // Trail (gaps lift the pen).
  ctx.strokeStyle = "#43d17c";
  ctx.lineWidth = 2;
  ctx.beginPath();
  let penDown = false;
  for (const p of vm.trail.all()) {
    const [cx, cy] = px(p.x, p.y);
    if (p.gap || !penDown) {
      ctx.moveTo(cx, cy);
      penDown = true;
    } else {
      ctx.lineTo(cx, cy);
    }
  }
  ctx.stroke();

  // Capsule glyph: rounded body plus heading arrow.
  const state = vm.latest;
  if (state !== null) {
    const [cx, cy] = px(state.x, state.y);
    const bodyPx = Math.max(10, 0.017 / view.scale / 2);
    ctx.save();
    ctx.translate(cx, cy);
    ctx.rotate(-state.heading);
    ctx.fillStyle = "#d8e1ec";
    ctx.beginPath();
    ctx.ellipse(0, 0, bodyPx, bodyPx * 0.45, 0, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#ff9d3b";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(0, 0);
    ctx.lineTo(bodyPx * 1.6, 0);
    ctx.lineTo(bodyPx * 1.3, -bodyPx * 0.2);
    ctx.moveTo(bodyPx * 1.6, 0);
    ctx.lineTo(bodyPx * 1.3, bodyPx * 0.2);
    ctx.stroke();
    ctx.restore();
  }
}

/** Stroke-phase gauge: magnet position between the back and front stops. */
export function drawStrokeGauge(
  ctx: CanvasRenderingContext2D,
  vm: ConsoleViewModel,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10141a";
  ctx.fillRect(0, 0, width, height);
  ctx.strokeStyle = "#31415a";
  ctx.strokeRect(4, height / 2 - 6, width - 8, 12);
  const phase = vm.readout().strokePhase;
  if (phase !== null) {
    const clamped = Math.max(-1, Math.min(1, phase));
    const x = width / 2 + (clamped * (width - 20)) / 2;
    ctx.fillStyle = "#ff9d3b";
    ctx.beginPath();
    ctx.arc(x, height / 2, 5, 0, 2 * Math.PI);
    ctx.fill();
  }
}
