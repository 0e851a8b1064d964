/** Protocol-level integration: drives raw envelopes over TCP against the real
 * session server to prove the gate lives server-side — a modified client
 * cannot obtain an accepted submit_result without two matching votes from
 * co-located robots. */
import { createHash } from "node:crypto";
import { spawn, type ChildProcess } from "node:child_process";
import { readFileSync } from "node:fs";
import { createConnection, type Socket } from "node:net";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { LineBuffer, decodeLine, type Envelope } from "../src/protocol.js";

const repoRoot = join(dirname(fileURLToPath(import.meta.url)), "..", "..");
const mapPath = join(repoRoot, "src", "tactix", "data", "cell_a4.map.json");
const MAP_HASH = createHash("sha256").update(readFileSync(mapPath)).digest("hex");

let server: ChildProcess;
let tcpPort = 0;

class RawClient {
  sock!: Socket;
  buffer = new LineBuffer();
  inbox: Envelope[] = [];
  role = "A";
  seq = 0;

  async connect(port: number): Promise<void> {
    await new Promise<void>((resolve, reject) => {
      this.sock = createConnection({ host: "127.0.0.1", port }, resolve);
      this.sock.once("error", reject);
      this.sock.on("data", (chunk) => {
        for (const line of this.buffer.feed(chunk.toString("utf-8"))) {
          try {
            this.inbox.push(decodeLine(line));
          } catch {
            // count nothing; the server never sends malformed lines
          }
        }
      });
    });
  }

  send(type: Envelope["type"], payload: Record<string, unknown>): void {
    this.seq += 1;
    const env = { v: 1, type, seq: this.seq, t_ms: 0, from: this.role, payload };
    this.sock.write(JSON.stringify(env) + "\n");
  }

  async expect(pred: (e: Envelope) => boolean, timeoutMs = 8000): Promise<Envelope> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const hit = this.inbox.find(pred);
      if (hit) {
        this.inbox.splice(this.inbox.indexOf(hit), 1);
        return hit;
      }
      if (Date.now() > deadline) {
        throw new Error(`timed out; inbox kinds: ${this.inbox.map((e) => e.type).join(",")}`);
      }
      await new Promise((r) => setTimeout(r, 20));
    }
  }

  /** Drop queued broadcasts (e.g. the partner's rejections) before acting. */
  drain(type: Envelope["type"]): void {
    this.inbox = this.inbox.filter((e) => e.type !== type);
  }

  close(): void {
    this.sock.destroy();
  }
}

beforeAll(async () => {
  server = spawn(
    "python3",
    [
      "-u", "-m", "tactix.cli", "serve",
      "--mode", "co_location",
      "--port", "0", "--http-port", "0",
      "--session-id", "ts-gate",
      "--out", join(repoRoot, "frontend", ".test-run"),
    ],
    { cwd: repoRoot, stdio: ["ignore", "pipe", "pipe"] },
  );
  await new Promise<void>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("server banner timeout")), 15000);
    let text = "";
    server.stdout!.on("data", (chunk) => {
      text += chunk.toString();
      const m = /tcp\s+127\.0\.0\.1:(\d+)/.exec(text);
      if (m) {
        tcpPort = Number(m[1]);
        clearTimeout(timer);
        resolve();
      }
    });
    server.on("exit", () => reject(new Error("server exited early")));
  });
}, 20000);

afterAll(() => {
  server?.kill("SIGINT");
});

describe("server-side agreement gate over raw envelopes", () => {
  it("never accepts without two matching votes from co-located robots", async () => {
    const a = new RawClient();
    const b = new RawClient();
    await a.connect(tcpPort);
    const helloA = await a.expect((e) => e.type === "hello");
    a.role = String(helloA.payload.role);
    a.send("hello", { map_hash: MAP_HASH });
    await b.connect(tcpPort);
    const helloB = await b.expect((e) => e.type === "hello");
    b.role = String(helloB.payload.role);
    b.send("hello", { map_hash: MAP_HASH });
    await a.expect((e) => e.type === "session_start");
    await b.expect((e) => e.type === "session_start");

    // both report zones; A tries to cheat with a lone vote
    a.send("zone", { zone_id: "nucleus" });
    b.send("zone", { zone_id: "golgi" });
    a.send("quiz_nav", { q_id: "q1" });
    a.send("agree", { q_id: "q1", zone_id: "nucleus" });
    const lone = await a.expect((e) => e.type === "submit_result");
    expect(lone.payload.accepted).toBe(false);
    expect(lone.payload.reason).toBe("awaiting_partner");

    // a modified client repeating its own vote still cannot pass the gate
    a.send("agree", { q_id: "q1", zone_id: "nucleus" });
    const spam = await a.expect((e) => e.type === "submit_result");
    expect(spam.payload.accepted).toBe(false);

    // partner votes but stands elsewhere: rejected, not accepted
    await b.expect((e) => e.type === "submit_result"); // A's first rejection, broadcast
    b.drain("submit_result");
    b.send("agree", { q_id: "q1", zone_id: "nucleus" });
    const apart = await b.expect((e) => e.type === "submit_result");
    expect(apart.payload.accepted).toBe(false);
    expect(apart.payload.reason).toBe("not_colocated");

    // only genuine co-location with matching votes passes, and both hear it
    b.send("zone", { zone_id: "nucleus" });
    b.send("agree", { q_id: "q1", zone_id: "nucleus" });
    const accepted = await b.expect((e) => e.type === "submit_result" && e.payload.accepted === true);
    expect(accepted.payload.correct).toBe(true);
    const echoed = await a.expect((e) => e.type === "submit_result" && e.payload.accepted === true);
    expect(echoed.payload.q_id).toBe("q1");

    // a second question answered while standing on the wrong zone for it:
    // the gate accepts (they are together and agreed) but grades it wrong
    a.send("quiz_nav", { q_id: "q2" });
    a.send("agree", { q_id: "q2", zone_id: "nucleus" });
    b.send("agree", { q_id: "q2", zone_id: "nucleus" });
    const wrongPlace = await b.expect(
      (e) => e.type === "submit_result" && e.payload.q_id === "q2" && e.payload.accepted === true,
    );
    expect(wrongPlace.payload.correct).toBe(false); // q2's answer is not the nucleus

    a.close();
    b.close();
  }, 30000);
});
