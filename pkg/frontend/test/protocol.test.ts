import { describe, expect, it } from "vitest";
import { encodeClientMsg, parseServerMsg } from "../src/protocol";

const frame = (over: Record<string, unknown> = {}) => JSON.stringify({
  type: "state",
  tick: 7,
  points: [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]],
  clusters: [0, 255],
  knife: { pos: [0.5, 0.3, 0.5], quat: [0, 0, 0, 1] },
  reward: { R_total: 1.25, N_C: 2 },
  ...over,
});

describe("parseServerMsg", () => {
  it("accepts a complete state frame", () => {
    const msg = parseServerMsg(frame());
    expect(msg).not.toBeNull();
    if (msg?.type !== "state") throw new Error("expected state");
    expect(msg.tick).toBe(7);
    expect(msg.points).toHaveLength(2);
    expect(msg.reward.N_C).toBe(2);
  });

  it("accepts ack and error messages", () => {
    expect(parseServerMsg('{"type":"ack","what":"claim_control"}'))
      .toEqual({ type: "ack", what: "claim_control" });
    expect(parseServerMsg('{"type":"error","message":"nope"}'))
      .toEqual({ type: "error", message: "nope" });
  });

  it("rejects malformed json and unknown types", () => {
    expect(parseServerMsg("{not json")).toBeNull();
    expect(parseServerMsg('"state"')).toBeNull();
    expect(parseServerMsg('{"type":"telemetry"}')).toBeNull();
    expect(parseServerMsg('{"type":"ack"}')).toBeNull();
  });

  it("rejects incomplete frames rather than rendering partial data", () => {
    expect(parseServerMsg(frame({ clusters: [0] }))).toBeNull(); // length mismatch
    expect(parseServerMsg(frame({ points: [[0.1, 0.2]], clusters: [0] }))).toBeNull();
    expect(parseServerMsg(frame({ tick: 1.5 }))).toBeNull();
    expect(parseServerMsg(frame({ tick: -1 }))).toBeNull();
    expect(parseServerMsg(frame({ knife: { pos: [0, 0, 0], quat: [0, 0, 1] } }))).toBeNull();
    expect(parseServerMsg(frame({ reward: { R_total: "x", N_C: 0 } }))).toBeNull();
    expect(parseServerMsg(frame({ reward: { R_total: 0 } }))).toBeNull();
    expect(parseServerMsg(frame({ points: [[0.1, 0.2, Number.NaN], [0, 0, 0]] }))).toBeNull();
  });

  it("accepts cluster ids across the uint8 range", () => {
    const msg = parseServerMsg(frame({ clusters: [31, 255] }));
    expect(msg?.type).toBe("state");
  });
});

describe("encodeClientMsg", () => {
  it("round-trips through json with the wire field names", () => {
    expect(JSON.parse(encodeClientMsg({ type: "twist", v: [0, -1.2, 0], w: [0, 0, 0] })))
      .toEqual({ type: "twist", v: [0, -1.2, 0], w: [0, 0, 0] });
    expect(JSON.parse(encodeClientMsg({ type: "cut_commit" }))).toEqual({ type: "cut_commit" });
    expect(JSON.parse(encodeClientMsg({ type: "claim_control" })))
      .toEqual({ type: "claim_control" });
    expect(JSON.parse(encodeClientMsg({
      type: "reset", object: { type: "box", center: [0.5, 0.24, 0.5], size: [0.4, 0.2, 0.3] },
    }))).toHaveProperty("object.type", "box");
    expect(JSON.parse(encodeClientMsg({
      type: "goal", spec: { kind: "dice", thickness: 0.08 },
    }))).toEqual({ type: "goal", spec: { kind: "dice", thickness: 0.08 } });
  });
});
