/** Planar vector helpers (millimetre units, y-down map frame). */

export interface Vec2 {
  x: number;
  y: number;
}

export const ZERO: Vec2 = { x: 0, y: 0 };

export function vec(x: number, y: number): Vec2 {
  return { x, y };
}

export function add(a: Vec2, b: Vec2): Vec2 {
  return { x: a.x + b.x, y: a.y + b.y };
}

export function sub(a: Vec2, b: Vec2): Vec2 {
  return { x: a.x - b.x, y: a.y - b.y };
}

export function scale(a: Vec2, s: number): Vec2 {
  return { x: a.x * s, y: a.y * s };
}

export function norm(a: Vec2): number {
  return Math.hypot(a.x, a.y);
}

export function clampNorm(a: Vec2, maxNorm: number): Vec2 {
  const n = norm(a);
  if (n <= maxNorm || n === 0) return a;
  return scale(a, maxNorm / n);
}

export function lerp(a: Vec2, b: Vec2, t: number): Vec2 {
  return { x: a.x + (b.x - a.x) * t, y: a.y + (b.y - a.y) * t };
}
