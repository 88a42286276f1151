// Mouse/keyboard to protocol commands. Pure functions so scripted playback
// can verify the mapping without a DOM.

import { ClientMsg, TwistMsg, Vec3 } from "./protocol";

export interface CameraBasis {
  right: Vec3;   // screen +x in world space
  up: Vec3;      // screen +y (up) in world space
  forward: Vec3; // into the screen
}

export interface InputSample {
  dx: number;      // pointer delta, px
  dy: number;      // pointer delta, px (down is positive, as in DOM events)
  wheel: number;   // wheel delta, notches
  rotate: boolean; // rotation modifier held
}

export interface Sensitivity {
  linear: number;  // m/s per px
  depth: number;   // m/s per wheel notch
  angular: number; // rad/s per px
}

export const DEFAULT_SENSITIVITY: Sensitivity = {
  linear: 0.004,
  depth: 0.05,
  angular: 0.01,
};

const scaled = (b: Vec3, s: number): Vec3 => [b[0] * s, b[1] * s, b[2] * s];
const added = (a: Vec3, b: Vec3): Vec3 => [a[0] + b[0], a[1] + b[1], a[2] + b[2]];

/** Map one input sample to a twist command.
 *  Plain drag translates in the camera plane (screen up means world "up"
 *  along the camera's up axis), wheel translates along the view axis, and
 *  drag with the rotation modifier spins the blade instead of moving it. */
export function inputToTwist(
  s: InputSample,
  cam: CameraBasis,
  sens: Sensitivity = DEFAULT_SENSITIVITY,
): TwistMsg {
  let v: Vec3 = [0, 0, 0];
  let w: Vec3 = [0, 0, 0];
  if (s.rotate) {
    // horizontal drag yaws about camera up, vertical drag pitches about right
    w = added(scaled(cam.up, s.dx * sens.angular),
              scaled(cam.right, s.dy * sens.angular));
  } else {
    v = added(scaled(cam.right, s.dx * sens.linear),
              scaled(cam.up, -s.dy * sens.linear));
  }
  v = added(v, scaled(cam.forward, s.wheel * sens.depth));
  return { type: "twist", v, w };
}

export interface HotkeyContext {
  objectSpec: Record<string, unknown>; // respawn target for reset
  goalThickness: number;
}

/** Discrete commands: C commits a cut, R respawns the object, 1/2/3 pick
 *  the slice/stick/dice goal. Unbound keys map to null. */
export function hotkeyCommand(key: string, ctx: HotkeyContext): ClientMsg | null {
  switch (key.toLowerCase()) {
    case "c":
      return { type: "cut_commit" };
    case "r":
      return { type: "reset", object: ctx.objectSpec };
    case "1":
      return { type: "goal", spec: { kind: "slice", thickness: ctx.goalThickness } };
    case "2":
      return { type: "goal", spec: { kind: "stick", thickness: ctx.goalThickness } };
    case "3":
      return { type: "goal", spec: { kind: "dice", thickness: ctx.goalThickness } };
    default:
      return null;
  }
}
