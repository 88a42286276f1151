import { describe, expect, it } from "vitest";
import { Session, WsLike } from "../src/net";
import { ServerMsg } from "../src/protocol";
import { ConnectionStatus } from "../src/viewmodel";

class FakeWs implements WsLike {
  readyState = 0; // CONNECTING
  sent: string[] = [];
  closed = false;
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;

  send(data: string) { this.sent.push(data); }
  close() { this.closed = true; }

  serverOpens() { this.readyState = 1; this.onopen?.(); }
  serverSends(obj: unknown) { this.onmessage?.({ data: JSON.stringify(obj) }); }
  serverCloses() { this.readyState = 3; this.onclose?.(); }
}

function harness() {
  const sockets: FakeWs[] = [];
  const msgs: ServerMsg[] = [];
  const statuses: ConnectionStatus[] = [];
  const timers: { fn: () => void; ms: number }[] = [];
  const session = new Session("ws://test", {
    onMsg: (m) => msgs.push(m),
    onStatus: (s) => statuses.push(s),
  }, {
    factory: () => { const ws = new FakeWs(); sockets.push(ws); return ws; },
    schedule: (fn, ms) => timers.push({ fn, ms }),
  });
  return { session, sockets, msgs, statuses, timers };
}

const ack = { type: "ack", what: "claim_control" };
const frame = {
  type: "state", tick: 1, points: [[0, 0, 0]], clusters: [255],
  knife: { pos: [0, 0, 0], quat: [0, 0, 0, 1] }, reward: { R_total: 0, N_C: 1 },
};

describe("Session", () => {
  it("forwards parsed server messages and drops malformed ones", () => {
    const h = harness();
    h.session.open();
    h.sockets[0]!.serverOpens();
    h.sockets[0]!.serverSends(frame);
    h.sockets[0]!.onmessage?.({ data: "{broken" });
    h.sockets[0]!.serverSends({ type: "state", tick: 2, points: [[0, 0, 0]], clusters: [] });
    expect(h.msgs).toHaveLength(1);
    expect(h.msgs[0]!.type).toBe("state");
  });

  it("reports control once the claim is acked", () => {
    const h = harness();
    h.session.open();
    h.sockets[0]!.serverOpens();
    expect(h.session.claimControl()).toBe(true);
    expect(JSON.parse(h.sockets[0]!.sent[0]!)).toEqual({ type: "claim_control" });
    expect(h.session.controlling).toBe(false);
    h.sockets[0]!.serverSends(ack);
    expect(h.session.controlling).toBe(true);
    expect(h.statuses.at(-1)).toBe("controlling");
  });

  it("drops sends while the socket is not open instead of throwing", () => {
    const h = harness();
    h.session.open();
    expect(h.session.send({ type: "cut_commit" })).toBe(false);
    expect(h.sockets[0]!.sent).toHaveLength(0);
  });

  it("retries with growing, capped backoff and surfaces the status", () => {
    const h = harness();
    h.session.open();
    h.sockets[0]!.serverOpens();
    expect(h.statuses).toEqual(["connecting", "connected"]);

    // each dropped connection schedules the next attempt one step later
    const expected = [500, 1000, 2000, 4000, 8000, 8000];
    for (let i = 0; i < expected.length; i++) {
      h.sockets[i]!.serverCloses();
      expect(h.timers[i]!.ms).toBe(expected[i]);
      h.timers[i]!.fn();
      expect(h.statuses.at(-1)).toBe("retrying");
    }
    expect(h.sockets).toHaveLength(expected.length + 1);

    // a successful reconnect resets the backoff ladder
    h.sockets.at(-1)!.serverOpens();
    expect(h.statuses.at(-1)).toBe("connected");
    h.sockets.at(-1)!.serverCloses();
    expect(h.timers.at(-1)!.ms).toBe(500);
  });

  it("stops retrying after a user close", () => {
    const h = harness();
    h.session.open();
    h.sockets[0]!.serverOpens();
    const timersBefore = h.timers.length;
    h.session.close();
    h.sockets[0]!.serverCloses();
    expect(h.timers.length).toBe(timersBefore);
    expect(h.statuses.at(-1)).toBe("closed");
  });
});
