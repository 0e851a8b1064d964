"""Live network front end for the session server.

Two listeners share one SessionServer instance on one asyncio loop:

* a raw TCP endpoint speaking the newline-JSON envelope protocol (used by
  scripted agents and protocol-level tests), and
* an HTTP endpoint serving the session assets (map/activity JSON, the web
  client's static files) plus the WebSocket upgrade at /ws/session/{id},
  carrying the identical newline-JSON framing inside text frames.

All SessionServer calls happen on the loop thread, which preserves the
single-writer discipline the state machine expects.
"""
from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

from .activity import Activity
from .protocol import LineDecoder, ProtocolError, SessionConfig
from .server import SessionServer
from .trace import TraceWriter
from .zonemap import ZoneMap

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
TICK_INTERVAL_S = 0.1

CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


class _TcpConn:
    def __init__(self, writer: asyncio.StreamWriter) -> None:
        self.writer = writer

    def send_line(self, line: bytes) -> None:
        if not self.writer.is_closing():
            self.writer.write(line)

    def close(self) -> None:
        if not self.writer.is_closing():
            self.writer.close()


class _WsConn:
    def __init__(self, writer: asyncio.StreamWriter) -> None:
        self.writer = writer

    def send_line(self, line: bytes) -> None:
        if not self.writer.is_closing():
            self.writer.write(_ws_frame(0x1, line))

    def close(self) -> None:
        if not self.writer.is_closing():
            self.writer.write(_ws_frame(0x8, b""))
            self.writer.close()


def _ws_frame(opcode: int, payload: bytes) -> bytes:
    head = bytearray([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head.append(n)
    elif n < 65536:
        head.append(126)
        head += n.to_bytes(2, "big")
    else:
        head.append(127)
        head += n.to_bytes(8, "big")
    return bytes(head) + payload


def _ws_accept(key: str) -> str:
    digest = hashlib.sha1((key + WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


@dataclass
class RealtimeEndpoints:
    tcp_port: int
    http_port: int


class RealtimeSessionServer:
    """Owns the listeners, the clock and the shared SessionServer."""

    def __init__(
        self,
        config: SessionConfig,
        zone_map: ZoneMap,
        activity: Activity,
        map_bytes: bytes,
        activity_bytes: bytes,
        recorder: TraceWriter | None = None,
        web_dir: str | Path | None = None,
    ) -> None:
        self.config = config
        self.session = SessionServer(config, zone_map, activity, recorder=recorder)
        self.map_bytes = map_bytes
        self.activity_bytes = activity_bytes
        self.web_dir = Path(web_dir) if web_dir else None
        self._t0 = time.monotonic()
        self._tcp_server: asyncio.AbstractServer | None = None
        self._http_server: asyncio.AbstractServer | None = None
        self._tick_task: asyncio.Task | None = None

    def now_ms(self) -> float:
        return (time.monotonic() - self._t0) * 1000.0

    async def start(self, tcp_port: int, http_port: int, host: str = "127.0.0.1") -> RealtimeEndpoints:
        self._tcp_server = await asyncio.start_server(self._handle_tcp, host, tcp_port)
        self._http_server = await asyncio.start_server(self._handle_http, host, http_port)
        self._tick_task = asyncio.create_task(self._tick_loop())
        return RealtimeEndpoints(
            tcp_port=self._tcp_server.sockets[0].getsockname()[1],
            http_port=self._http_server.sockets[0].getsockname()[1],
        )

    async def close(self) -> None:
        if self._tick_task is not None:
            self._tick_task.cancel()
            try:
                await self._tick_task
            except asyncio.CancelledError:
                pass
        for srv in (self._tcp_server, self._http_server):
            if srv is not None:
                srv.close()
                await srv.wait_closed()
        self.session.close()

    async def _tick_loop(self) -> None:
        while True:
            await asyncio.sleep(TICK_INTERVAL_S)
            self.session.tick(self.now_ms())

    # -- raw TCP protocol ---------------------------------------------------------

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        conn = _TcpConn(writer)
        self.session.on_connect(conn, self.now_ms())
        decoder = LineDecoder()
        try:
            while True:
                data = await reader.read(4096)
                if not data:
                    break
                try:
                    lines = decoder.feed(data)
                except ProtocolError:
                    break
                for line in lines:
                    self.session.on_line(conn, line, self.now_ms())
                await writer.drain()
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            self.session.on_disconnect(conn, self.now_ms())
            if not writer.is_closing():
                writer.close()

    # -- HTTP + WebSocket ---------------------------------------------------------

    async def _handle_http(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            head = await asyncio.wait_for(reader.readuntil(b"\r\n\r\n"), timeout=10.0)
        except (asyncio.TimeoutError, asyncio.IncompleteReadError, asyncio.LimitOverrunError):
            writer.close()
            return
        try:
            request_line, headers = _parse_http_head(head)
            method, path, _ = request_line.split(" ", 2)
        except ValueError:
            await self._respond(writer, 400, b"bad request")
            return

        if headers.get("upgrade", "").lower() == "websocket":
            await self._handle_ws(reader, writer, path, headers)
            return
        if method != "GET":
            await self._respond(writer, 405, b"method not allowed")
            return
        await self._serve_static(writer, path)

    async def _handle_ws(
        self,
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
        path: str,
        headers: dict[str, str],
    ) -> None:
        expected = f"/ws/session/{self.config.session_id}"
        key = headers.get("sec-websocket-key")
        if path != expected or key is None:
            await self._respond(writer, 404, b"unknown session")
            return
        writer.write(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {_ws_accept(key)}\r\n\r\n"
            ).encode("ascii")
        )
        await writer.drain()

        conn = _WsConn(writer)
        self.session.on_connect(conn, self.now_ms())
        decoder = LineDecoder()
        fragments = bytearray()
        try:
            while True:
                frame = await _read_ws_frame(reader)
                if frame is None:
                    break
                fin, opcode, payload = frame
                if opcode == 0x8:  # close
                    writer.write(_ws_frame(0x8, b""))
                    break
                if opcode == 0x9:  # ping
                    writer.write(_ws_frame(0xA, payload))
                    await writer.drain()
                    continue
                if opcode == 0xA:  # pong
                    continue
                fragments += payload
                if not fin:
                    continue
                data = bytes(fragments)
                fragments.clear()
                for line in decoder.feed(data):
                    self.session.on_line(conn, line, self.now_ms())
                await writer.drain()
        except (ConnectionError, ProtocolError, asyncio.IncompleteReadError):
            pass
        finally:
            self.session.on_disconnect(conn, self.now_ms())
            if not writer.is_closing():
                writer.close()

    async def _serve_static(self, writer: asyncio.StreamWriter, path: str) -> None:
        path = path.split("?", 1)[0]
        if path == "/session":
            body = json.dumps(
                {
                    "session_id": self.config.session_id,
                    "mode": self.config.mode.value,
                    "map_url": "/assets/map.json",
                    "activity_url": "/assets/activity.json",
                    "ws_path": f"/ws/session/{self.config.session_id}",
                }
            ).encode("utf-8")
            await self._respond(writer, 200, body, "application/json")
            return
        if path == "/assets/map.json":
            await self._respond(writer, 200, self.map_bytes, "application/json")
            return
        if path == "/assets/activity.json":
            await self._respond(writer, 200, self.activity_bytes, "application/json")
            return
        if self.web_dir is not None:
            rel = path.lstrip("/") or "index.html"
            target = (self.web_dir / rel).resolve()
            if target.is_relative_to(self.web_dir.resolve()) and target.is_file():
                ctype = CONTENT_TYPES.get(target.suffix, "application/octet-stream")
                await self._respond(writer, 200, target.read_bytes(), ctype)
                return
        await self._respond(writer, 404, b"not found")

    @staticmethod
    async def _respond(
        writer: asyncio.StreamWriter,
        status: int,
        body: bytes,
        content_type: str = "text/plain; charset=utf-8",
    ) -> None:
        reason = {200: "OK", 400: "Bad Request", 404: "Not Found", 405: "Method Not Allowed"}.get(
            status, "Error"
        )
        writer.write(
            (
                f"HTTP/1.1 {status} {reason}\r\n"
                f"Content-Type: {content_type}\r\n"
                f"Content-Length: {len(body)}\r\n"
                "Access-Control-Allow-Origin: *\r\n"
                "Connection: close\r\n\r\n"
            ).encode("ascii")
        )
        writer.write(body)
        try:
            await writer.drain()
        except ConnectionError:
            pass
        writer.close()


def _parse_http_head(head: bytes) -> tuple[str, dict[str, str]]:
    text = head.decode("latin-1")
    lines = text.split("\r\n")
    headers: dict[str, str] = {}
    for line in lines[1:]:
        if ":" in line:
            name, value = line.split(":", 1)
            headers[name.strip().lower()] = value.strip()
    return lines[0], headers


async def _read_ws_frame(reader: asyncio.StreamReader) -> tuple[bool, int, bytes] | None:
    try:
        b1b2 = await reader.readexactly(2)
    except asyncio.IncompleteReadError:
        return None
    fin = bool(b1b2[0] & 0x80)
    opcode = b1b2[0] & 0x0F
    masked = bool(b1b2[1] & 0x80)
    length = b1b2[1] & 0x7F
    if length == 126:
        length = int.from_bytes(await reader.readexactly(2), "big")
    elif length == 127:
        length = int.from_bytes(await reader.readexactly(8), "big")
    if length > 1 << 20:
        raise ProtocolError("websocket frame too large")
    mask = await reader.readexactly(4) if masked else b""
    payload = await reader.readexactly(length) if length else b""
    if masked and payload:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return fin, opcode, payload
