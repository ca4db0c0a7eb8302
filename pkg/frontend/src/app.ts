/** Browser wiring: keyboard steering, map canvas, controls, event stream.
 *
 * Keys: W/S or Up/Down move along the heading, A/D strafe, Q/E (or
 * Left/Right) turn, R toggles rejected candidates. Clicking the map turns
 * the camera to face the clicked point. Strategy and k/d_min/d_max controls
 * ride along with the next step request; the server echoes the effective
 * config.
 */

import { GatewayClient, openStepEvents } from "./client.js";
import { drawMap, drawPanorama, drawSparkline } from "./render.js";
import {
  ViewState,
  applyStepResult,
  initialViewState,
  toggleRejected,
} from "./state.js";
import { StepResult } from "./types.js";
import { ViewportTransform, makeTransform, screenToWorld, zoom } from "./viewport.js";

const MOVE_STEP = 0.5; // meters per keypress
const TURN_STEP = Math.PI / 18; // 10 degrees

interface PendingConfig {
  strategy?: string;
  k?: number;
  d_min?: number;
  d_max?: number;
}

interface AppElements {
  map: HTMLCanvasElement;
  sparkline: HTMLCanvasElement;
  panorama: HTMLCanvasElement;
  hoverPanorama: HTMLCanvasElement;
  banner: HTMLElement;
  status: HTMLElement;
  strategy: HTMLSelectElement;
  k: HTMLInputElement;
  dMin: HTMLInputElement;
  dMax: HTMLInputElement;
}

export class SteeringApp {
  private view: ViewState = initialViewState();
  private transform: ViewportTransform;
  private sessionId: string | null = null;
  private worldBounds: number[] | null = null;
  private pending: PendingConfig = {};
  private unsubscribe: (() => void) | null = null;

  constructor(
    private readonly client: GatewayClient,
    private readonly els: AppElements,
    private readonly baseUrl: string,
  ) {
    this.transform = makeTransform(
      { x: 30, y: 30 },
      10,
      els.map.width,
      els.map.height,
    );
  }

  async start(createRequest: unknown): Promise<void> {
    const created = await this.client.createSession(createRequest);
    this.sessionId = created.session_id;
    this.worldBounds = created.state.world.bounds;
    const [x0, y0, x1, y1] = this.worldBounds as [number, number, number, number];
    this.transform = makeTransform(
      { x: (x0 + x1) / 2, y: (y0 + y1) / 2 },
      Math.min(this.els.map.width / (x1 - x0), this.els.map.height / (y1 - y0)) * 0.9,
      this.els.map.width,
      this.els.map.height,
    );
    this.unsubscribe = openStepEvents(this.baseUrl, this.sessionId, (result) =>
      this.onStepResult(result),
    );
    this.bindControls();
    this.redraw();
  }

  stop(): void {
    this.unsubscribe?.();
    this.unsubscribe = null;
  }

  private onStepResult(result: StepResult): void {
    this.view = applyStepResult(this.view, result);
    this.redraw();
  }

  private configPayload(): { retrieval?: object; overlap?: object } {
    const out: { retrieval?: object; overlap?: object } = {};
    const { strategy, k, d_min, d_max } = this.pending;
    if (strategy !== undefined || k !== undefined) {
      out.retrieval = {
        ...(strategy !== undefined ? { strategy } : {}),
        ...(k !== undefined ? { k } : {}),
      };
    }
    if (d_min !== undefined || d_max !== undefined) {
      out.overlap = {
        ...(d_min !== undefined ? { d_min } : {}),
        ...(d_max !== undefined ? { d_max } : {}),
      };
    }
    this.pending = {};
    return out;
  }

  private async sendStep(body: object): Promise<void> {
    if (!this.sessionId) {
      return;
    }
    try {
      // the event stream also delivers this result; applying here keeps the
      // UI live even if the stream lags, and the reducer is idempotent per
      // step because it replaces rather than accumulates fan state
      const result = await this.client.step(this.sessionId, {
        ...body,
        ...this.configPayload(),
      });
      this.onStepResult(result);
    } catch (err) {
      this.els.banner.textContent = err instanceof Error ? err.message : String(err);
      this.els.banner.hidden = false;
    }
  }

  private bindControls(): void {
    window.addEventListener("keydown", (ev) => {
      const key = ev.key.toLowerCase();
      const yaw = this.view.camera?.yaw ?? 0;
      const forward = { dx: MOVE_STEP * Math.cos(yaw), dy: MOVE_STEP * Math.sin(yaw) };
      const left = { dx: -MOVE_STEP * Math.sin(yaw), dy: MOVE_STEP * Math.cos(yaw) };
      if (key === "w" || key === "arrowup") {
        void this.sendStep({ delta: forward });
      } else if (key === "s" || key === "arrowdown") {
        void this.sendStep({ delta: { dx: -forward.dx, dy: -forward.dy } });
      } else if (key === "a") {
        void this.sendStep({ delta: left });
      } else if (key === "d") {
        void this.sendStep({ delta: { dx: -left.dx, dy: -left.dy } });
      } else if (key === "q" || key === "arrowleft") {
        void this.sendStep({ delta: { dyaw: TURN_STEP } });
      } else if (key === "e" || key === "arrowright") {
        void this.sendStep({ delta: { dyaw: -TURN_STEP } });
      } else if (key === "r") {
        this.view = toggleRejected(this.view);
        this.redraw();
      }
    });

    this.els.map.addEventListener("click", (ev) => {
      const rect = this.els.map.getBoundingClientRect();
      const world = screenToWorld(this.transform, {
        x: ev.clientX - rect.left,
        y: ev.clientY - rect.top,
      });
      const cam = this.view.camera;
      if (!cam) {
        return;
      }
      const face = Math.atan2(world.y - cam.y, world.x - cam.x);
      void this.sendStep({ target: { x: cam.x, y: cam.y, yaw: face, fov: cam.fov } });
    });

    this.els.map.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const rect = this.els.map.getBoundingClientRect();
      this.transform = zoom(this.transform, ev.deltaY < 0 ? 1.15 : 1 / 1.15, {
        x: ev.clientX - rect.left,
        y: ev.clientY - rect.top,
      });
      this.redraw();
    });

    this.els.strategy.addEventListener("change", () => {
      this.pending.strategy = this.els.strategy.value;
    });
    this.els.k.addEventListener("change", () => {
      this.pending.k = Number(this.els.k.value);
    });
    this.els.dMin.addEventListener("change", () => {
      this.pending.d_min = Number(this.els.dMin.value);
    });
    this.els.dMax.addEventListener("change", () => {
      this.pending.d_max = Number(this.els.dMax.value);
    });
  }

  private redraw(): void {
    const ctx = this.els.map.getContext("2d");
    if (ctx) {
      drawMap(ctx, this.transform, this.view, this.worldBounds);
    }
    const sctx = this.els.sparkline.getContext("2d");
    if (sctx) {
      drawSparkline(sctx, this.view, this.els.sparkline.width, this.els.sparkline.height);
    }
    const pctx = this.els.panorama.getContext("2d");
    if (pctx) {
      drawPanorama(
        pctx,
        this.view.panorama,
        this.els.panorama.width,
        this.els.panorama.height,
        this.view.effectiveConfig?.d_max ?? 20,
      );
    }
    const hctx = this.els.hoverPanorama.getContext("2d");
    if (hctx) {
      drawPanorama(
        hctx,
        this.view.hoveredPanorama,
        this.els.hoverPanorama.width,
        this.els.hoverPanorama.height,
        this.view.effectiveConfig?.d_max ?? 20,
      );
    }
    this.els.banner.hidden = this.view.errorBanner === null;
    if (this.view.errorBanner !== null) {
      this.els.banner.textContent = this.view.errorBanner;
    }
    const cfg = this.view.effectiveConfig;
    const cov = this.view.coverageHistory.at(-1);
    this.els.status.textContent =
      `step ${this.view.step}` +
      (cov !== undefined ? ` | coverage ${cov.toFixed(3)}` : "") +
      (cfg ? ` | ${cfg.strategy} k=${cfg.k} d=[${cfg.d_min}, ${cfg.d_max}]` : "") +
      (this.view.clamped ? " | clamped at world edge" : "");
  }
}

export function bootstrap(): void {
  const byId = <T extends HTMLElement>(id: string): T => {
    const el = document.getElementById(id);
    if (!el) {
      throw new Error(`missing element #${id}`);
    }
    return el as T;
  };
  const baseUrl = (window as unknown as { COVIS_BASE_URL?: string }).COVIS_BASE_URL ?? "";
  const app = new SteeringApp(
    new GatewayClient(baseUrl),
    {
      map: byId<HTMLCanvasElement>("map"),
      sparkline: byId<HTMLCanvasElement>("sparkline"),
      panorama: byId<HTMLCanvasElement>("panorama"),
      hoverPanorama: byId<HTMLCanvasElement>("hover-panorama"),
      banner: byId("banner"),
      status: byId("status"),
      strategy: byId<HTMLSelectElement>("strategy"),
      k: byId<HTMLInputElement>("k"),
      dMin: byId<HTMLInputElement>("d-min"),
      dMax: byId<HTMLInputElement>("d-max"),
    },
    baseUrl,
  );
  void app.start({ world: { seed: 0, bounds: [0, 0, 60, 60] } });
}
