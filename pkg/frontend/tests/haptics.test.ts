import { describe, expect, it } from "vitest";

import {
  HapticPipeline,
  colocationForce,
  consensusState,
  vibrationForce,
  type PartnerView,
} from "../src/haptics.js";
import { parseMap } from "../src/mapdata.js";
import type { CouplingParams, VibrationParams } from "../src/protocol.js";
import { norm } from "../src/vec.js";

const CP: CouplingParams = {
  k: 0.05,
  deadzone_mm: 10,
  f_max: 2.0,
  stale_ms: 500,
  decay_ms: 250,
  symmetric: true,
};
const VP: VibrationParams = { amplitude: 0.3, freq_hz: 15 };

const MAP = parseMap({
  version: 1,
  width_mm: 297,
  height_mm: 210,
  zones: [
    {
      id: "nucleus",
      kind: "organelle",
      polygon: [
        [100, 80],
        [200, 80],
        [200, 130],
        [100, 130],
      ],
      color: [100, 0, 100],
    },
    { id: "cytosol", kind: "background", polygon: [], color: [240, 240, 230] },
  ],
});

function partner(x: number, y: number, zone = "cytosol", t = 1000): PartnerView {
  return { pose: { p: { x, y }, thetaRad: 0 }, zoneId: zone, receivedTms: t };
}

describe("co-location force", () => {
  it("is zero at zero separation and inside the deadzone", () => {
    expect(colocationForce({ x: 50, y: 50 }, partner(50, 50), 1000, CP)).toEqual({ x: 0, y: 0 });
    expect(colocationForce({ x: 50, y: 50 }, partner(55, 50), 1000, CP)).toEqual({ x: 0, y: 0 });
  });

  it("applies the clamped spring law", () => {
    const f = colocationForce({ x: 50, y: 50 }, partner(110, 50), 1000, CP);
    expect(f.x).toBeCloseTo(2.0, 12); // min(0.05*(60-10), 2.0)
    expect(f.y).toBe(0);
    const f2 = colocationForce({ x: 50, y: 50 }, partner(90, 50), 1000, CP);
    expect(f2.x).toBeCloseTo(1.5, 12);
  });

  it("decays linearly once stale and vanishes at the endpoint", () => {
    const half = colocationForce({ x: 50, y: 50 }, partner(110, 50, "cytosol", 1000), 1625, CP);
    expect(half.x).toBeCloseTo(1.0, 9);
    const gone = colocationForce({ x: 50, y: 50 }, partner(110, 50, "cytosol", 1000), 1750, CP);
    expect(gone).toEqual({ x: 0, y: 0 });
  });

  it("is antisymmetric", () => {
    for (let i = 0; i < 200; i++) {
      const ax = Math.random() * 297;
      const ay = Math.random() * 210;
      const bx = Math.random() * 297;
      const by = Math.random() * 210;
      const fab = colocationForce({ x: ax, y: ay }, partner(bx, by), 1000, CP);
      const fba = colocationForce({ x: bx, y: by }, partner(ax, ay), 1000, CP);
      // IEEE equality (treats +0 and -0 as equal, unlike Object.is)
      expect(fab.x === -fba.x).toBe(true);
      expect(fab.y === -fba.y).toBe(true);
    }
  });
});

describe("consensus", () => {
  it("requires the same organelle; background never counts", () => {
    expect(consensusState("nucleus", "nucleus", MAP)).toBe(true);
    expect(consensusState("nucleus", "cytosol", MAP)).toBe(false);
    expect(consensusState("cytosol", "cytosol", MAP)).toBe(false);
  });

  it("vibration is bounded and alternates axes", () => {
    expect(vibrationForce(false, 123, VP)).toEqual({ x: 0, y: 0 });
    const f17 = vibrationForce(true, 17, VP);
    expect(f17.x).toBeCloseTo(0.3 * Math.sin((2 * Math.PI * 15 * 17) / 1000), 12);
    let sawY = false;
    for (let t = 0; t < 500; t++) {
      const f = vibrationForce(true, t, VP);
      expect(norm(f)).toBeLessThanOrEqual(VP.amplitude + 1e-12);
      if (Math.abs(f.y) > 1e-9) sawY = true;
    }
    expect(sawY).toBe(true);
  });

  it("pipeline fires edges exactly on transitions", () => {
    const pipe = new HapticPipeline("consensus", CP, VP, MAP);
    const p = { x: 150, y: 100 };
    expect(pipe.tick(p, false, "nucleus", partner(150, 100, "cytosol"), 100).edge).toBe("none");
    expect(pipe.tick(p, false, "nucleus", partner(150, 100, "nucleus"), 200).edge).toBe("entered");
    expect(pipe.tick(p, false, "nucleus", partner(150, 100, "nucleus"), 300).edge).toBe("none");
    expect(pipe.tick(p, false, "nucleus", partner(150, 100, "cytosol"), 400).edge).toBe("exited");
  });

  it("modes are mutually exclusive", () => {
    const coloc = new HapticPipeline("co_location", CP, VP, MAP);
    const out = coloc.tick({ x: 10, y: 10 }, false, "nucleus", partner(200, 200, "nucleus"), 500);
    expect(out.edge).toBe("none"); // never a consensus edge in co-location
    const cons = new HapticPipeline("consensus", CP, VP, MAP);
    const far = cons.tick({ x: 10, y: 10 }, false, "nucleus", partner(290, 200, "nucleus"), 500);
    expect(norm(far.force)).toBeLessThanOrEqual(VP.amplitude + 1e-12); // never attraction
    const none = new HapticPipeline("none", CP, VP, MAP);
    expect(none.tick({ x: 10, y: 10 }, false, "nucleus", partner(200, 200, "nucleus"), 500).force)
      .toEqual({ x: 0, y: 0 });
  });
});
