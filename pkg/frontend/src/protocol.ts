// Wire types for the teleop service protocol (JSON text frames over WebSocket).

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // xyzw

export interface StateFrame {
  type: "state";
  tick: number;
  points: Vec3[];
  clusters: number[];
  knife: { pos: Vec3; quat: Quat };
  reward: { R_total: number; N_C: number };
}

export interface AckMsg {
  type: "ack";
  what: string;
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type ServerMsg = StateFrame | AckMsg | ErrorMsg;

export type GoalKind = "slice" | "stick" | "dice";

export interface TwistMsg {
  type: "twist";
  v: Vec3;
  w: Vec3;
}

export type ClientMsg =
  | TwistMsg
  | { type: "cut_commit" }
  | { type: "reset"; object: Record<string, unknown> }
  | { type: "goal"; spec: { kind: GoalKind; thickness?: number } }
  | { type: "claim_control" };

function isVec(x: unknown, n: number): boolean {
  return Array.isArray(x) && x.length === n && x.every((v) => Number.isFinite(v));
}

/** Parse one server frame; null for anything malformed or incomplete.
 *  A state frame only counts as complete when every point has a cluster id,
 *  so a truncated frame is dropped rather than rendered half-colored. */
export function parseServerMsg(raw: string): ServerMsg | null {
  let msg: any;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  switch (msg.type) {
    case "ack":
      return typeof msg.what === "string" ? (msg as AckMsg) : null;
    case "error":
      return typeof msg.message === "string" ? (msg as ErrorMsg) : null;
    case "state": {
      if (!Number.isInteger(msg.tick) || msg.tick < 0) return null;
      if (!Array.isArray(msg.points) || !Array.isArray(msg.clusters)) return null;
      if (msg.points.length !== msg.clusters.length) return null;
      if (!msg.points.every((p: unknown) => isVec(p, 3))) return null;
      if (!msg.clusters.every((c: unknown) => Number.isInteger(c))) return null;
      if (!msg.knife || !isVec(msg.knife.pos, 3) || !isVec(msg.knife.quat, 4)) return null;
      const r = msg.reward;
      if (!r || !Number.isFinite(r.R_total) || !Number.isInteger(r.N_C)) return null;
      return msg as StateFrame;
    }
    default:
      return null;
  }
}

export function encodeClientMsg(msg: ClientMsg): string {
  return JSON.stringify(msg);
}
