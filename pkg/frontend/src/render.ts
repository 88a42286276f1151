// three.js view: particle sprites colored by cluster, knife gizmo, goal
// ghost, and the DOM HUD. All simulation data arrives via the ViewModel.

import * as THREE from "three";
import { ViewModel } from "./viewmodel";
import { GoalKind, StateFrame, Vec3 } from "./protocol";

const DOMAIN_CENTER = new THREE.Vector3(0.5, 0.25, 0.5);
// visual gizmo only; the server owns the real blade geometry
const KNIFE_DIMS = new THREE.Vector3(0.42, 0.21, 0.006);

export class Renderer {
  readonly camera: THREE.PerspectiveCamera;

  private vm: ViewModel;
  private hudEl: HTMLElement;
  private renderer: THREE.WebGLRenderer;
  private scene = new THREE.Scene();
  private geometry = new THREE.BufferGeometry();
  private positions: Float32Array;
  private colors: Float32Array;
  private knife: THREE.LineSegments;
  private goalGroup = new THREE.Group();
  private lastArrival = 0;
  private lastTickGap = 50; // ms between the two buffered frames
  private lastSeenTick = -1;
  private frames = 0;
  private fpsWindowStart = performance.now();
  private fps = 0;

  constructor(canvas: HTMLCanvasElement, hudEl: HTMLElement, vm: ViewModel) {
    this.vm = vm;
    this.hudEl = hudEl;
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setSize(canvas.clientWidth, canvas.clientHeight, false);
    this.scene.background = new THREE.Color(0x10131a);

    this.camera = new THREE.PerspectiveCamera(
      45, canvas.clientWidth / canvas.clientHeight, 0.01, 20);
    this.camera.position.set(1.35, 0.85, 1.45);
    this.camera.lookAt(DOMAIN_CENTER);

    const n = vm.maxRenderPoints;
    this.positions = new Float32Array(n * 3);
    this.colors = new Float32Array(n * 3);
    this.geometry.setAttribute(
      "position", new THREE.BufferAttribute(this.positions, 3).setUsage(THREE.DynamicDrawUsage));
    this.geometry.setAttribute(
      "color", new THREE.BufferAttribute(this.colors, 3).setUsage(THREE.DynamicDrawUsage));
    this.geometry.setDrawRange(0, 0);
    this.scene.add(new THREE.Points(
      this.geometry,
      new THREE.PointsMaterial({ size: 0.012, vertexColors: true })));

    this.knife = new THREE.LineSegments(
      new THREE.EdgesGeometry(new THREE.BoxGeometry(
        KNIFE_DIMS.x, KNIFE_DIMS.y, KNIFE_DIMS.z)),
      new THREE.LineBasicMaterial({ color: 0xe8e8e8 }));
    this.scene.add(this.knife);

    const floor = new THREE.GridHelper(1.0, 16, 0x2a2f3a, 0x1c212b);
    floor.position.set(0.5, 3 / 64, 0.5);
    this.scene.add(floor);
    this.scene.add(this.goalGroup);
  }

  /** Screen axes in world space, for mapping pointer motion to twists. */
  cameraBasis(): { right: Vec3; up: Vec3; forward: Vec3 } {
    const m = this.camera.matrixWorld.elements;
    return {
      right: [m[0]!, m[1]!, m[2]!],
      up: [m[4]!, m[5]!, m[6]!],
      forward: [-m[8]!, -m[9]!, -m[10]!],
    };
  }

  /** Translucent slab stack sketching the requested goal decomposition. */
  setGoalGhost(kind: GoalKind, thickness: number) {
    this.goalGroup.clear();
    const mat = new THREE.MeshBasicMaterial({
      color: 0x3fa7ff, transparent: true, opacity: 0.08, depthWrite: false });
    const axes: ("x" | "z" | "y")[] =
      kind === "slice" ? ["x"] : kind === "stick" ? ["x", "z"] : ["x", "z", "y"];
    for (const axis of axes) {
      for (let c = thickness / 2; c < 1; c += 2 * thickness) {
        const dims = new THREE.Vector3(1, 1, 1);
        dims[axis] = thickness;
        const slab = new THREE.Mesh(
          new THREE.BoxGeometry(dims.x, Math.min(dims.y, 0.5), dims.z), mat);
        const pos = DOMAIN_CENTER.clone();
        pos[axis] = c;
        slab.position.copy(pos);
        this.goalGroup.add(slab);
      }
    }
  }

  noteFrame(frame: StateFrame, arrivalMs: number) {
    if (this.lastSeenTick >= 0 && this.lastArrival > 0) {
      const gap = arrivalMs - this.lastArrival;
      if (gap > 1 && gap < 2000) this.lastTickGap = gap;
    }
    this.lastSeenTick = frame.tick;
    this.lastArrival = arrivalMs;
  }

  /** One animation step; alpha advances with wall time between ticks. */
  drawOnce(nowMs: number) {
    const alpha = this.lastArrival
      ? Math.min(1, (nowMs - this.lastArrival) / this.lastTickGap)
      : 1;
    const n = this.vm.renderCount();
    if (n > 0) {
      this.vm.positionsAt(alpha, this.positions.subarray(0, n * 3));
      this.vm.colors(this.colors.subarray(0, n * 3));
      this.geometry.attributes.position!.needsUpdate = true;
      this.geometry.attributes.color!.needsUpdate = true;
      this.geometry.setDrawRange(0, n);
      this.geometry.computeBoundingSphere();
    }
    const f = this.vm.latest;
    if (f) {
      this.knife.position.set(f.knife.pos[0], f.knife.pos[1], f.knife.pos[2]);
      this.knife.quaternion.set(
        f.knife.quat[0], f.knife.quat[1], f.knife.quat[2], f.knife.quat[3]);
    }
    this.renderer.render(this.scene, this.camera);

    this.frames += 1;
    if (nowMs - this.fpsWindowStart >= 1000) {
      this.fps = (this.frames * 1000) / (nowMs - this.fpsWindowStart);
      this.frames = 0;
      this.fpsWindowStart = nowMs;
      this.updateHud();
    }
  }

  private updateHud() {
    const h = this.vm.hud();
    this.hudEl.textContent =
      `R_total ${h.rTotal.toFixed(3)}   N_C ${h.nC}   ` +
      `tick ${h.tick} @ ${h.tickRate.toFixed(1)}/s   ` +
      `render ${this.fps.toFixed(0)} fps   ${h.status}` +
      (h.decimated ? `   [decimated ${h.points} pts]` : "");
  }

  resize(width: number, height: number) {
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
  }

  start() {
    const loop = (t: number) => {
      this.drawOnce(t);
      requestAnimationFrame(loop);
    };
    requestAnimationFrame(loop);
  }
}
