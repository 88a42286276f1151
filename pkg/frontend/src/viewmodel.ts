// Double-buffered view state: the render loop interpolates between the two
// most recent frames for smooth motion at low tick rates, while HUD numbers
// always come from the raw latest frame.

import { StateFrame } from "./protocol";
import { clusterColor } from "./palette";

export type ConnectionStatus =
  | "connecting"
  | "connected"
  | "controlling"
  | "retrying"
  | "closed";

export interface Hud {
  rTotal: number;
  nC: number;
  tick: number;
  tickRate: number;
  status: ConnectionStatus;
  decimated: boolean;
  points: number;
}

const RATE_WINDOW = 20;

export class ViewModel {
  prev: StateFrame | null = null;
  latest: StateFrame | null = null;
  status: ConnectionStatus = "connecting";
  maxRenderPoints: number;

  private arrivals: number[] = [];
  private now: () => number;

  constructor(maxRenderPoints = 8192, now: () => number = () => performance.now()) {
    this.maxRenderPoints = maxRenderPoints;
    this.now = now;
  }

  /** Accept a complete frame; stale or duplicate ticks are dropped so the
   *  buffer's ticks strictly increase. Returns whether the frame was taken. */
  pushFrame(frame: StateFrame): boolean {
    if (this.latest !== null && frame.tick <= this.latest.tick) return false;
    this.prev = this.latest;
    this.latest = frame;
    this.arrivals.push(this.now());
    if (this.arrivals.length > RATE_WINDOW) this.arrivals.shift();
    return true;
  }

  setStatus(status: ConnectionStatus) {
    this.status = status;
  }

  /** Point count of the frame that will be rendered (after decimation). */
  renderCount(): number {
    if (!this.latest) return 0;
    return Math.min(this.latest.points.length, this.maxRenderPoints);
  }

  decimated(): boolean {
    return this.latest !== null && this.latest.points.length > this.maxRenderPoints;
  }

  private renderStride(): number {
    if (!this.latest) return 1;
    return Math.ceil(this.latest.points.length / this.maxRenderPoints);
  }

  /** Interpolated positions, flat xyz. alpha 0 -> previous frame, 1 -> latest.
   *  Falls back to the latest frame alone after a reset changes the point
   *  set (the farthest-point subset is fixed per object, so equal length
   *  means index-aligned points). */
  positionsAt(alpha: number, out?: Float32Array): Float32Array {
    const latest = this.latest;
    if (!latest) return out ?? new Float32Array(0);
    const stride = this.renderStride();
    const n = this.renderCount();
    const buf = out && out.length === n * 3 ? out : new Float32Array(n * 3);
    const prev = this.prev;
    const lerp = prev !== null && prev.points.length === latest.points.length;
    const a = Math.max(0, Math.min(1, alpha));
    for (let i = 0; i < n; i++) {
      const p = latest.points[i * stride]!;
      let x = p[0], y = p[1], z = p[2];
      if (lerp) {
        const q = prev!.points[i * stride]!;
        x = q[0] + (x - q[0]) * a;
        y = q[1] + (y - q[1]) * a;
        z = q[2] + (z - q[2]) * a;
      }
      buf[i * 3] = x;
      buf[i * 3 + 1] = y;
      buf[i * 3 + 2] = z;
    }
    return buf;
  }

  /** Per-point RGB from the latest frame's cluster ids (never interpolated). */
  colors(out?: Float32Array): Float32Array {
    const latest = this.latest;
    if (!latest) return out ?? new Float32Array(0);
    const stride = this.renderStride();
    const n = this.renderCount();
    const buf = out && out.length === n * 3 ? out : new Float32Array(n * 3);
    for (let i = 0; i < n; i++) {
      const c = clusterColor(latest.clusters[i * stride]!);
      buf[i * 3] = c[0];
      buf[i * 3 + 1] = c[1];
      buf[i * 3 + 2] = c[2];
    }
    return buf;
  }

  /** Received-frame rate over the recent arrival window, Hz. */
  tickRate(): number {
    const t = this.arrivals;
    if (t.length < 2) return 0;
    const span = t[t.length - 1]! - t[0]!;
    return span > 0 ? ((t.length - 1) * 1000) / span : 0;
  }

  hud(): Hud {
    const f = this.latest;
    return {
      rTotal: f ? f.reward.R_total : 0,
      nC: f ? f.reward.N_C : 0,
      tick: f ? f.tick : -1,
      tickRate: this.tickRate(),
      status: this.status,
      decimated: this.decimated(),
      points: f ? f.points.length : 0,
    };
  }
}
