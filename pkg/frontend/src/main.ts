// Browser entry point: wires the websocket session, frame buffer, renderer
// and pointer/keyboard input together.

import { DEFAULT_SENSITIVITY, InputSample, hotkeyCommand, inputToTwist } from "./input";
import { Session } from "./net";
import { Renderer } from "./render";
import { ViewModel } from "./viewmodel";

const DEFAULT_URL = "ws://127.0.0.1:8765";
// matches the serve command's built-in scene; R respawns this block
const DEFAULT_OBJECT = {
  type: "box", center: [0.5, 0.24, 0.5], size: [0.4, 0.2, 0.3],
};
const GOAL_THICKNESS = 0.1;
const TWIST_SEND_MS = 50;

function serviceUrl(): string {
  return new URLSearchParams(location.search).get("ws") ?? DEFAULT_URL;
}

const canvas = document.getElementById("view") as HTMLCanvasElement;
const hud = document.getElementById("hud") as HTMLElement;
const claim = document.getElementById("claim") as HTMLButtonElement;

canvas.width = window.innerWidth;
canvas.height = window.innerHeight;

const vm = new ViewModel();
const renderer = new Renderer(canvas, hud, vm);
renderer.setGoalGhost("slice", GOAL_THICKNESS);

const session = new Session(serviceUrl(), {
  onMsg: (msg) => {
    if (msg.type === "state") {
      if (vm.pushFrame(msg)) renderer.noteFrame(msg, performance.now());
    } else if (msg.type === "error") {
      console.warn("server:", msg.message);
    }
  },
  onStatus: (status) => {
    vm.setStatus(status);
    claim.disabled = status !== "connected";
    claim.textContent = status === "controlling" ? "controlling" : "claim control";
  },
});
session.open();
claim.addEventListener("click", () => session.claimControl());

window.addEventListener("resize", () => {
  canvas.width = window.innerWidth;
  canvas.height = window.innerHeight;
  renderer.resize(canvas.width, canvas.height);
});

// Pointer deltas accumulate between sends so the twist rate stays fixed
// regardless of pointermove event frequency.
const accum: InputSample = { dx: 0, dy: 0, wheel: 0, rotate: false };
let wasMoving = false;

canvas.addEventListener("pointerdown", (e) => canvas.setPointerCapture(e.pointerId));
canvas.addEventListener("pointermove", (e) => {
  if (e.buttons === 0) return;
  accum.dx += e.movementX;
  accum.dy += e.movementY;
  accum.rotate = e.shiftKey || (e.buttons & 2) !== 0;
});
canvas.addEventListener("wheel", (e) => {
  accum.wheel += Math.sign(e.deltaY);
  e.preventDefault();
}, { passive: false });
canvas.addEventListener("contextmenu", (e) => e.preventDefault());

window.addEventListener("keydown", (e) => {
  const cmd = hotkeyCommand(e.key, {
    objectSpec: DEFAULT_OBJECT, goalThickness: GOAL_THICKNESS,
  });
  if (!cmd) return;
  session.send(cmd);
  if (cmd.type === "goal") renderer.setGoalGhost(cmd.spec.kind, GOAL_THICKNESS);
});

setInterval(() => {
  if (!session.controlling) return;
  const moving = accum.dx !== 0 || accum.dy !== 0 || accum.wheel !== 0;
  // one trailing zero twist stops the knife when input ends
  if (!moving && !wasMoving) return;
  session.send(inputToTwist(accum, renderer.cameraBasis(), DEFAULT_SENSITIVITY));
  accum.dx = 0;
  accum.dy = 0;
  accum.wheel = 0;
  wasMoving = moving;
}, TWIST_SEND_MS);

renderer.start();
