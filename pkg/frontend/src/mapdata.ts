/** Zone map parsing and point-to-zone queries (client-side mirror). */

import type { Vec2 } from "./vec.js";

export interface Zone {
  id: string;
  name: string;
  kind: "organelle" | "background";
  polygon: Vec2[];
  color: [number, number, number];
  infoText: string;
}

export interface ZoneMap {
  widthMm: number;
  heightMm: number;
  zones: Zone[];
  backgroundZoneId: string;
}

export function parseMap(doc: unknown): ZoneMap {
  const d = doc as {
    version: number;
    width_mm: number;
    height_mm: number;
    zones: Array<{
      id: string;
      name?: string;
      kind: "organelle" | "background";
      polygon?: [number, number][];
      color?: [number, number, number];
      info_text?: string;
    }>;
  };
  if (d.version !== 1) throw new Error(`unsupported map version ${d.version}`);
  const zones: Zone[] = d.zones.map((z) => ({
    id: z.id,
    name: z.name ?? z.id,
    kind: z.kind,
    polygon: (z.polygon ?? []).map(([x, y]) => ({ x, y })),
    color: z.color ?? [128, 128, 128],
    infoText: z.info_text ?? "",
  }));
  const background = zones.find((z) => z.kind === "background");
  if (!background) throw new Error("map has no background zone");
  return {
    widthMm: d.width_mm,
    heightMm: d.height_mm,
    zones,
    backgroundZoneId: background.id,
  };
}

const EDGE_EPS = 1e-9;

function onSegment(p: Vec2, a: Vec2, b: Vec2): boolean {
  const abx = b.x - a.x;
  const aby = b.y - a.y;
  const len = Math.hypot(abx, aby);
  if (len === 0) return Math.hypot(p.x - a.x, p.y - a.y) <= EDGE_EPS;
  const cross = Math.abs(abx * (p.y - a.y) - aby * (p.x - a.x));
  if (cross / len > EDGE_EPS) return false;
  const dot = (p.x - a.x) * abx + (p.y - a.y) * aby;
  return dot >= -EDGE_EPS * len && dot <= len * len + EDGE_EPS * len;
}

export function pointInPolygon(p: Vec2, poly: Vec2[]): boolean {
  const n = poly.length;
  for (let i = 0; i < n; i++) {
    if (onSegment(p, poly[i], poly[(i + 1) % n])) return true;
  }
  let inside = false;
  for (let i = 0; i < n; i++) {
    const a = poly[i];
    const b = poly[(i + 1) % n];
    if (a.y > p.y !== b.y > p.y) {
      const xAt = a.x + ((p.y - a.y) * (b.x - a.x)) / (b.y - a.y);
      if (p.x < xAt) inside = !inside;
    }
  }
  return inside;
}

/** First containing organelle in file order, else the background zone. */
export function locate(map: ZoneMap, p: Vec2): string {
  for (const z of map.zones) {
    if (z.kind !== "organelle") continue;
    if (pointInPolygon(p, z.polygon)) return z.id;
  }
  return map.backgroundZoneId;
}

export function zoneById(map: ZoneMap, id: string): Zone | undefined {
  return map.zones.find((z) => z.id === id);
}

export function clampToMap(map: ZoneMap, p: Vec2): Vec2 {
  return {
    x: Math.min(Math.max(p.x, 0), map.widthMm),
    y: Math.min(Math.max(p.y, 0), map.heightMm),
  };
}

export async function sha256Hex(data: ArrayBuffer): Promise<string> {
  const digest = await crypto.subtle.digest("SHA-256", data);
  return Array.from(new Uint8Array(digest))
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}
