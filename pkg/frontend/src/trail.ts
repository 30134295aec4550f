// Trajectory trail: a time-bounded ring of recent positions.

export interface TrailPoint {
  t: number;
  x: number;
  y: number;
  /** Marks a discontinuity: the first point after a reconnect or reset. */
  gap: boolean;
}

/**
 * Ring buffer of recent capsule positions ordered by time.
 *
 * Keeps roughly `windowSeconds` of telemetry; when the buffer outgrows
 * `maxPoints`, older points are decimated (every second point dropped)
 * rather than truncated, so the tail keeps its shape.
 */
export class Trail {
  private points: TrailPoint[] = [];
  private pendingGap = false;

  constructor(
    readonly windowSeconds: number = 10,
    readonly maxPoints: number = 2400,
  ) {}

  /** Mark the next appended point as discontinuous (reconnect, reset). */
  markGap(): void {
    this.pendingGap = true;
  }

  push(t: number, x: number, y: number): void {
    const last = this.points[this.points.length - 1];
    if (last !== undefined && t < last.t) {
      // Time went backwards (session reset): restart the trail with a gap.
      this.points = [];
      this.pendingGap = true;
    }
    this.points.push({ t, x, y, gap: this.pendingGap });
    this.pendingGap = false;
    const horizon = t - this.windowSeconds;
    let firstKept = 0;
    while (firstKept < this.points.length - 1 && this.points[firstKept].t < horizon) {
      firstKept += 1;
    }
    if (firstKept > 0) {
      this.points.splice(0, firstKept);
      this.points[0].gap = true;
    }
    if (this.points.length > this.maxPoints) {
      // Decimate the older half, never dropping gap markers.
      const half = Math.floor(this.points.length / 2);
      const kept: TrailPoint[] = [];
      for (let i = 0; i < half; i++) {
        if (i % 2 === 0 || this.points[i].gap) kept.push(this.points[i]);
      }
      this.points = kept.concat(this.points.slice(half));
    }
  }

  clear(): void {
    this.points = [];
    this.pendingGap = false;
  }

  get length(): number {
    return this.points.length;
  }

  all(): readonly TrailPoint[] {
    return this.points;
  }

  latest(): TrailPoint | undefined {
    return this.points[this.points.length - 1];
  }

  /** Net displacement over the most recent `seconds` of trail. */
  displacement(seconds: number): { dx: number; dy: number } | null {
    if (this.points.length < 2) return null;
    const last = this.points[this.points.length - 1];
    let first = this.points[0];
    for (const p of this.points) {
      if (p.t >= last.t - seconds) {
        first = p;
        break;
      }
    }
    if (first.t >= last.t) return null;
    return { dx: last.x - first.x, dy: last.y - first.y };
  }
}
