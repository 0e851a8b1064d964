/** Canvas renderer: map zones, own robot, interpolated partner ghost with a
 * staleness indicator, rubber-band overlay (width tracks the pull force) and
 * a screen-shake pulse when consensus is entered. */

import type { ZoneMap } from "./mapdata.js";
import type { Vec2 } from "./vec.js";

export interface RenderModel {
  map: ZoneMap;
  selfP: Vec2 | null;
  selfZone: string;
  role: string;
  ghostP: Vec2 | null;
  ghostStaleMs: number | null;
  partnerPresent: boolean;
  bandForce: number;
  bandMax: number;
  shake: number; // 0..1 pulse envelope
  mode: string;
}

const PX_PER_MM = 3;

export function mmToPx(p: Vec2): Vec2 {
  return { x: p.x * PX_PER_MM, y: p.y * PX_PER_MM };
}

export function pxToMm(p: Vec2): Vec2 {
  return { x: p.x / PX_PER_MM, y: p.y / PX_PER_MM };
}

export function canvasSize(map: ZoneMap): { w: number; h: number } {
  return { w: map.widthMm * PX_PER_MM, h: map.heightMm * PX_PER_MM };
}

function rgba(color: [number, number, number], alpha: number): string {
  return `rgba(${color[0]},${color[1]},${color[2]},${alpha})`;
}

export function draw(ctx: CanvasRenderingContext2D, model: RenderModel): void {
  const { map } = model;
  const { w, h } = canvasSize(map);
  ctx.save();
  if (model.shake > 0) {
    const amp = 6 * model.shake;
    ctx.translate((Math.random() * 2 - 1) * amp, (Math.random() * 2 - 1) * amp);
  }
  const background = map.zones.find((z) => z.kind === "background");
  ctx.fillStyle = background ? rgba(background.color, 1) : "#eef";
  ctx.fillRect(-10, -10, w + 20, h + 20);

  for (const zone of map.zones) {
    if (zone.kind !== "organelle") continue;
    const active = zone.id === model.selfZone;
    ctx.beginPath();
    zone.polygon.forEach((v, i) => {
      const q = mmToPx(v);
      if (i === 0) ctx.moveTo(q.x, q.y);
      else ctx.lineTo(q.x, q.y);
    });
    ctx.closePath();
    ctx.fillStyle = rgba(zone.color, active ? 0.95 : 0.65);
    ctx.fill();
    ctx.lineWidth = active ? 4 : 1.5;
    ctx.strokeStyle = active ? "#222" : "rgba(40,40,40,0.5)";
    ctx.stroke();
    const centroid = zone.polygon.reduce(
      (acc, v) => ({ x: acc.x + v.x / zone.polygon.length, y: acc.y + v.y / zone.polygon.length }),
      { x: 0, y: 0 },
    );
    const c = mmToPx(centroid);
    ctx.fillStyle = "rgba(20,20,20,0.85)";
    ctx.font = "13px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(zone.name, c.x, c.y);
  }

  // rubber band under the robots
  if (model.selfP && model.ghostP && model.bandForce > 0) {
    const a = mmToPx(model.selfP);
    const b = mmToPx(model.ghostP);
    const width = 1 + (model.bandForce / model.bandMax) * 9;
    ctx.beginPath();
    ctx.moveTo(a.x, a.y);
    ctx.lineTo(b.x, b.y);
    ctx.lineWidth = width;
    ctx.strokeStyle = "rgba(220,40,40,0.75)";
    ctx.stroke();
  }

  if (model.ghostP) {
    const g = mmToPx(model.ghostP);
    const stale = model.ghostStaleMs ?? 0;
    const fade = model.partnerPresent ? Math.max(0.25, 1 - stale / 3000) : 0.2;
    ctx.beginPath();
    ctx.arc(g.x, g.y, 12, 0, Math.PI * 2);
    ctx.fillStyle = `rgba(70,70,200,${0.5 * fade})`;
    ctx.fill();
    ctx.lineWidth = 2;
    ctx.setLineDash([4, 3]);
    ctx.strokeStyle = `rgba(70,70,200,${fade})`;
    ctx.stroke();
    ctx.setLineDash([]);
    if (!model.partnerPresent || stale > 1500) {
      ctx.fillStyle = "rgba(180,30,30,0.9)";
      ctx.font = "11px sans-serif";
      ctx.fillText(model.partnerPresent ? "stale" : "offline", g.x, g.y - 18);
    }
  }

  if (model.selfP) {
    const s = mmToPx(model.selfP);
    ctx.beginPath();
    ctx.arc(s.x, s.y, 12, 0, Math.PI * 2);
    ctx.fillStyle = "#16a34a";
    ctx.fill();
    ctx.lineWidth = 2.5;
    ctx.strokeStyle = "#0b4f23";
    ctx.stroke();
    ctx.fillStyle = "#fff";
    ctx.font = "bold 12px sans-serif";
    ctx.textAlign = "center";
    ctx.textBaseline = "middle";
    ctx.fillText(model.role, s.x, s.y);
    ctx.textBaseline = "alphabetic";
  }
  ctx.restore();
}
