/**
 * Wire protocol codec: one frame per line, tab-separated key=value fields.
 *
 *     FRAME-TYPE<TAB>k=v<TAB>k=v...
 *
 * Mirrors the server codec exactly, including escaping of tabs, newlines
 * and backslashes inside values.
 */

export const PROTOCOL_VERSION = "1";

export const FRAME_TYPES = [
  "hello",
  "state",
  "utterance",
  "value",
  "scene",
  "intervention",
  "error",
  "input",
] as const;

export type FrameType = (typeof FRAME_TYPES)[number];

export interface Frame {
  type: FrameType;
  fields: [string, string][];
}

export function field(frame: Frame, key: string): string | undefined {
  for (const [k, v] of frame.fields) {
    if (k === key) return v;
  }
  return undefined;
}

function escapeValue(text: string): string {
  return text
    .replace(/\\/g, "\\\\")
    .replace(/\t/g, "\\t")
    .replace(/\n/g, "\\n")
    .replace(/\r/g, "\\r");
}

function unescapeValue(text: string): string {
  let out = "";
  for (let i = 0; i < text.length; i++) {
    const c = text[i];
    if (c === "\\" && i + 1 < text.length) {
      const next = text[i + 1];
      out += next === "t" ? "\t" : next === "n" ? "\n" : next === "r" ? "\r" : next;
      i++;
    } else {
      out += c;
    }
  }
  return out;
}

export function encodeFrame(frame: Frame): string {
  const parts = [frame.type as string];
  for (const [k, v] of frame.fields) {
    parts.push(`${k}=${escapeValue(v)}`);
  }
  return parts.join("\t");
}

export function makeFrame(type: FrameType, fields: Record<string, string | number>): Frame {
  return {
    type,
    fields: Object.entries(fields).map(([k, v]) => [k, String(v)] as [string, string]),
  };
}

export class ProtocolError extends Error {}

export function decodeFrame(line: string): Frame {
  const trimmed = line.replace(/[\r\n]+$/, "");
  if (!trimmed) throw new ProtocolError("empty frame");
  const parts = trimmed.split("\t");
  const type = parts[0];
  if (!(FRAME_TYPES as readonly string[]).includes(type)) {
    throw new ProtocolError(`unknown frame type '${type}'`);
  }
  const fields: [string, string][] = [];
  for (const part of parts.slice(1)) {
    const eq = part.indexOf("=");
    if (eq < 0) throw new ProtocolError(`malformed field '${part}'`);
    fields.push([part.slice(0, eq), unescapeValue(part.slice(eq + 1))]);
  }
  return { type: type as FrameType, fields };
}
