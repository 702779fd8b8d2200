"""Session wire protocol: one frame per line, tab-separated key=value fields.

    FRAME-TYPE<TAB>k=v<TAB>k=v...

Frame types: hello, state, utterance, value, scene, intervention, error,
input. The same payload travels over a raw TCP stream (newline-terminated
lines) or a WebSocket (one text message per frame).
"""

from __future__ import annotations

import asyncio
from dataclasses import dataclass

from .errors import ProtocolViolationError

PROTOCOL_VERSION = "1"

FRAME_TYPES = (
    "hello",
    "state",
    "utterance",
    "value",
    "scene",
    "intervention",
    "error",
    "input",
)


@dataclass(frozen=True)
class Frame:
    type: str
    fields: tuple  # ordered (key, value) pairs

    def get(self, key: str, default=None):
        for k, v in self.fields:
            if k == key:
                return v
        return default


def frame(type_: str, **fields) -> Frame:
    return Frame(type_, tuple((k, str(v)) for k, v in fields.items()))


def _escape(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"t": "\t", "n": "\n", "r": "\r", "\\": "\\"}.get(nxt, nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def encode_frame(f: Frame) -> str:
    parts = [f.type]
    for k, v in f.fields:
        parts.append(f"{k}={_escape(v)}")
    return "\t".join(parts)


def decode_frame(line: str) -> Frame:
    line = line.rstrip("\r\n")
    if not line:
        raise ProtocolViolationError("empty frame")
    parts = line.split("\t")
    type_ = parts[0]
    if type_ not in FRAME_TYPES:
        raise ProtocolViolationError(f"unknown frame type {type_!r}")
    fields = []
    for part in parts[1:]:
        key, sep, value = part.partition("=")
        if not sep:
            raise ProtocolViolationError(f"malformed field {part!r}")
        fields.append((key, _unescape(value)))
    return Frame(type_, tuple(fields))


# ---------------------------------------------------------------------------
# raw TCP carrier


async def serve_tcp(session_factory, host: str, port: int):
    """One-client-at-a-time TCP server speaking newline-delimited frames.

    `session_factory()` must return an object with `.hello_frames()`,
    `.handle_input(text) -> list[Frame]`, and `.finished` (bool).
    """
    busy = asyncio.Lock()

    async def handle(reader, writer):
        if busy.locked():
            writer.write((encode_frame(frame("error", reason="busy")) + "\n").encode())
            await writer.drain()
            writer.close()
            return
        async with busy:
            session = session_factory()
            try:
                raw = await reader.readline()
                try:
                    hello = decode_frame(raw.decode())
                    if hello.type != "hello":
                        raise ProtocolViolationError("expected hello")
                except ProtocolViolationError as exc:
                    writer.write((encode_frame(frame("error", reason=str(exc))) + "\n").encode())
                    await writer.drain()
                    writer.close()
                    return
                for f in session.hello_frames():
                    writer.write((encode_frame(f) + "\n").encode())
                await writer.drain()
                while not session.finished:
                    raw = await reader.readline()
                    if not raw:
                        break
                    try:
                        incoming = decode_frame(raw.decode())
                        if incoming.type != "input":
                            raise ProtocolViolationError(f"unexpected {incoming.type}")
                    except ProtocolViolationError as exc:
                        writer.write(
                            (encode_frame(frame("error", reason=str(exc))) + "\n").encode()
                        )
                        await writer.drain()
                        continue  # session persists; the bad frame is dropped
                    for f in session.handle_input(incoming.get("text", "")):
                        writer.write((encode_frame(f) + "\n").encode())
                    await writer.drain()
            finally:
                writer.close()

    return await asyncio.start_server(handle, host, port)
