import { describe, expect, it } from "vitest";

import {
  EnvelopeSender,
  LineBuffer,
  ProtocolError,
  decodeLine,
  encodeEnvelope,
  type Envelope,
} from "../src/protocol.js";

describe("envelope codec", () => {
  it("round-trips an envelope", () => {
    const env: Envelope = {
      v: 1,
      type: "pose",
      seq: 7,
      t_ms: 1234,
      from: "A",
      payload: { x_mm: 10.5, y_mm: 20.25, theta_rad: 0 },
    };
    expect(decodeLine(encodeEnvelope(env).trimEnd())).toEqual(env);
  });

  it("accepts any field order", () => {
    const line = '{"payload":{"zone_id":"nucleus"},"from":"B","t_ms":5,"seq":1,"type":"zone","v":1}';
    const env = decodeLine(line);
    expect(env.type).toBe("zone");
    expect(env.from).toBe("B");
  });

  it("rejects version mismatch, unknown kinds and bad senders", () => {
    expect(() =>
      decodeLine('{"v":2,"type":"pose","seq":1,"t_ms":0,"from":"A","payload":{}}'),
    ).toThrow(ProtocolError);
    expect(() =>
      decodeLine('{"v":1,"type":"warp","seq":1,"t_ms":0,"from":"A","payload":{}}'),
    ).toThrow(ProtocolError);
    expect(() =>
      decodeLine('{"v":1,"type":"pose","seq":1,"t_ms":0,"from":"C","payload":{}}'),
    ).toThrow(ProtocolError);
    expect(() => decodeLine("garbage")).toThrow(ProtocolError);
  });
});

describe("line buffer", () => {
  it("waits for the newline terminator", () => {
    const buf = new LineBuffer();
    expect(buf.feed('{"v":1,')).toEqual([]);
    expect(buf.pending).toBeGreaterThan(0);
    const lines = buf.feed('"x":2}\n{"y":3}\n{"partial":');
    expect(lines).toEqual(['{"v":1,"x":2}', '{"y":3}']);
    expect(buf.pending).toBeGreaterThan(0);
  });
});

describe("envelope sender", () => {
  it("numbers envelopes monotonically and stamps the clock", () => {
    const sent: string[] = [];
    let clock = 500;
    const sender = new EnvelopeSender((line) => sent.push(line), "B", () => clock);
    sender.send("zone", { zone_id: "nucleus" });
    clock = 750;
    sender.send("agree", { q_id: "q1", zone_id: "nucleus" });
    const envs = sent.map((l) => decodeLine(l.trimEnd()));
    expect(envs.map((e) => e.seq)).toEqual([1, 2]);
    expect(envs.map((e) => e.t_ms)).toEqual([500, 750]);
    expect(envs.every((e) => e.from === "B")).toBe(true);
  });
});
