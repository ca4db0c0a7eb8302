/** Affine world (meters) <-> screen (pixels) mapping for the top-down map.
 *
 * The transform's center maps to the viewport midpoint; screen y grows
 * downward while world y grows upward, so the y axis is flipped after the
 * optional rotation. The inverse is exact up to floating-point noise, well
 * inside the half-pixel round-trip budget.
 */

export interface Point {
  x: number;
  y: number;
}

export interface ViewportTransform {
  center: Point; // world meters shown at the viewport midpoint
  scale: number; // pixels per meter, > 0
  rotation: number; // radians, counterclockwise in world space
  width: number; // viewport pixels
  height: number;
}

export function makeTransform(
  center: Point,
  scale: number,
  width: number,
  height: number,
  rotation = 0,
): ViewportTransform {
  if (!(scale > 0)) {
    throw new Error(`scale must be positive, got ${scale}`);
  }
  return { center, scale, rotation, width, height };
}

export function worldToScreen(t: ViewportTransform, p: Point): Point {
  const dx = p.x - t.center.x;
  const dy = p.y - t.center.y;
  const c = Math.cos(t.rotation);
  const s = Math.sin(t.rotation);
  const rx = dx * c - dy * s;
  const ry = dx * s + dy * c;
  return {
    x: t.width / 2 + rx * t.scale,
    y: t.height / 2 - ry * t.scale,
  };
}

export function screenToWorld(t: ViewportTransform, p: Point): Point {
  const rx = (p.x - t.width / 2) / t.scale;
  const ry = -(p.y - t.height / 2) / t.scale;
  const c = Math.cos(t.rotation);
  const s = Math.sin(t.rotation);
  return {
    x: t.center.x + rx * c + ry * s,
    y: t.center.y - rx * s + ry * c,
  };
}

/** Pan by a screen-space pixel delta (e.g. mouse drag). */
export function pan(t: ViewportTransform, dxPx: number, dyPx: number): ViewportTransform {
  const before = screenToWorld(t, { x: t.width / 2, y: t.height / 2 });
  const after = screenToWorld(t, { x: t.width / 2 + dxPx, y: t.height / 2 + dyPx });
  return {
    ...t,
    center: {
      x: t.center.x + (before.x - after.x),
      y: t.center.y + (before.y - after.y),
    },
  };
}

/** Zoom by a factor keeping the given screen point fixed. */
export function zoom(t: ViewportTransform, factor: number, at: Point): ViewportTransform {
  if (!(factor > 0)) {
    throw new Error(`zoom factor must be positive, got ${factor}`);
  }
  const anchor = screenToWorld(t, at);
  const scaled = { ...t, scale: t.scale * factor };
  const moved = worldToScreen(scaled, anchor);
  return pan(scaled, at.x - moved.x, at.y - moved.y);
}
