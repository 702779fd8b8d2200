import { describe, expect, it } from "vitest";

import { ProtocolError, decodeFrame, encodeFrame, field, makeFrame } from "../src/protocol.js";

describe("frame codec", () => {
  it("round-trips a frame", () => {
    const frame = makeFrame("utterance", { agent: "Ebba", action: "say", args: "hello" });
    expect(decodeFrame(encodeFrame(frame))).toEqual(frame);
  });

  it("escapes tabs, newlines and backslashes", () => {
    const frame = makeFrame("utterance", { args: "a\tb\nc\\d" });
    const line = encodeFrame(frame);
    expect(line).not.toContain("\n");
    expect(line.split("\t").length).toBe(2); // type + one field
    expect(field(decodeFrame(line), "args")).toBe("a\tb\nc\\d");
  });

  it("rejects unknown frame types", () => {
    expect(() => decodeFrame("FOO\tx=1")).toThrow(ProtocolError);
  });

  it("rejects malformed fields", () => {
    expect(() => decodeFrame("state\tnoequals")).toThrow(ProtocolError);
  });

  it("rejects empty lines", () => {
    expect(() => decodeFrame("")).toThrow(ProtocolError);
  });

  it("parses server-style state frames", () => {
    const frame = decodeFrame("state\tscene=q2\tbeat=3\tplayed=q1,q5\tfinished=0");
    expect(frame.type).toBe("state");
    expect(field(frame, "scene")).toBe("q2");
    expect(field(frame, "played")).toBe("q1,q5");
  });
});
