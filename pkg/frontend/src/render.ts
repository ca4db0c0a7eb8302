/** Canvas drawing for the top-down map, coverage sparkline, and panorama
 * strip. Pure functions of (context, transform, view state). */

import { REJECT_COLOR, ViewState, sparklinePoints } from "./state.js";
import { ViewportTransform, worldToScreen } from "./viewport.js";

function tracePolygon(
  ctx: CanvasRenderingContext2D,
  t: ViewportTransform,
  polygon: number[][],
): void {
  ctx.beginPath();
  polygon.forEach(([x, y], i) => {
    const p = worldToScreen(t, { x: x!, y: y! });
    if (i === 0) {
      ctx.moveTo(p.x, p.y);
    } else {
      ctx.lineTo(p.x, p.y);
    }
  });
  ctx.closePath();
}

export function drawMap(
  ctx: CanvasRenderingContext2D,
  t: ViewportTransform,
  state: ViewState,
  worldBounds: number[] | null,
): void {
  ctx.clearRect(0, 0, t.width, t.height);
  ctx.save();

  if (worldBounds && worldBounds.length === 4) {
    const [x0, y0, x1, y1] = worldBounds as [number, number, number, number];
    const a = worldToScreen(t, { x: x0, y: y0 });
    const b = worldToScreen(t, { x: x1, y: y1 });
    ctx.strokeStyle = "#555";
    ctx.strokeRect(Math.min(a.x, b.x), Math.min(a.y, b.y), Math.abs(b.x - a.x), Math.abs(b.y - a.y));
  }

  for (const fan of state.fans) {
    tracePolygon(ctx, t, fan.polygon);
    ctx.fillStyle = fan.color + "33";
    ctx.fill();
    ctx.strokeStyle = fan.color;
    ctx.lineWidth = fan.isMostRecent ? 2.5 : 1;
    ctx.stroke();
    if (fan.isMostRecent) {
      const apex = fan.polygon[0]!;
      const p = worldToScreen(t, { x: apex[0]!, y: apex[1]! });
      ctx.fillStyle = fan.color;
      ctx.font = "11px sans-serif";
      ctx.fillText("recent", p.x + 4, p.y - 4);
    }
  }

  if (state.showRejected) {
    ctx.setLineDash([4, 3]);
    ctx.strokeStyle = REJECT_COLOR;
    ctx.fillStyle = REJECT_COLOR;
    ctx.font = "10px sans-serif";
    for (const rej of state.rejected) {
      const p = worldToScreen(t, { x: rej.pose.x, y: rej.pose.y });
      ctx.strokeRect(p.x - 3, p.y - 3, 6, 6);
      const label =
        rej.distance === null ? rej.reason : `${rej.reason} @ ${rej.distance.toFixed(1)}m`;
      ctx.fillText(label, p.x + 5, p.y + 3);
    }
    ctx.setLineDash([]);
  }

  if (state.targetFan) {
    tracePolygon(ctx, t, state.targetFan);
    ctx.fillStyle = "#ffffff22";
    ctx.fill();
    ctx.strokeStyle = "#fff";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }

  if (state.camera) {
    const p = worldToScreen(t, state.camera);
    ctx.fillStyle = "#fff";
    ctx.beginPath();
    ctx.arc(p.x, p.y, 4, 0, 2 * Math.PI);
    ctx.fill();
  }

  ctx.restore();
}

export function drawSparkline(
  ctx: CanvasRenderingContext2D,
  state: ViewState,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  const pts = sparklinePoints(state);
  if (pts.length === 0) {
    return;
  }
  ctx.strokeStyle = "#2db4a0";
  ctx.beginPath();
  pts.forEach((v, i) => {
    const x = pts.length === 1 ? width / 2 : (i / (pts.length - 1)) * width;
    const y = height - v * (height - 2) - 1;
    if (i === 0) {
      ctx.moveTo(x, y);
    } else {
      ctx.lineTo(x, y);
    }
  });
  ctx.stroke();
}

/** Panorama strip: one column per sample; hue keyed by landmark id, empty
 * columns dark. */
export function drawPanorama(
  ctx: CanvasRenderingContext2D,
  panorama: { ids: number[]; depths: (number | null)[] } | null,
  width: number,
  height: number,
  maxDepth: number,
): void {
  ctx.clearRect(0, 0, width, height);
  if (!panorama || panorama.ids.length === 0) {
    return;
  }
  const colWidth = width / panorama.ids.length;
  panorama.ids.forEach((id, i) => {
    const depth = panorama.depths[i] ?? null;
    if (id < 0 || depth === null) {
      ctx.fillStyle = "#1b1b22";
    } else {
      const hue = (id * 47) % 360;
      const light = 65 - 40 * Math.min(depth / maxDepth, 1);
      ctx.fillStyle = `hsl(${hue}, 60%, ${light}%)`;
    }
    ctx.fillRect(i * colWidth, 0, Math.ceil(colWidth), height);
  });
}
