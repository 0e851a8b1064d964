import asyncio
import base64
import json
import os

import pytest

from tactix.activity import default_activity_bytes, load_default_activity
from tactix.client import SessionClient
from tactix.geometry import Vec2
from tactix.haptics import HapticMode
from tactix.protocol import SessionConfig
from tactix.realtime import RealtimeSessionServer
from tactix.zonemap import default_map_bytes, load_default_map, map_sha256

MAP_BYTES = default_map_bytes()
MAP_HASH = map_sha256(MAP_BYTES)


def make_server(mode=HapticMode.CO_LOCATION, session_id="rt", web_dir=None):
    config = SessionConfig(session_id=session_id, mode=mode, map_hash=MAP_HASH)
    return RealtimeSessionServer(
        config,
        load_default_map(),
        load_default_activity(),
        MAP_BYTES,
        default_activity_bytes(),
        web_dir=web_dir,
    )


async def tcp_client(port, map_hash=MAP_HASH):
    reader, writer = await asyncio.open_connection("127.0.0.1", port)
    client = SessionClient(map_hash, writer.write)

    async def pump():
        try:
            while True:
                data = await reader.read(4096)
                if not data:
                    return
                client.on_bytes(data)
        except ConnectionError:
            return

    task = asyncio.create_task(pump())
    return client, writer, task


async def wait_for(predicate, timeout=3.0):
    deadline = asyncio.get_event_loop().time() + timeout
    while not predicate():
        if asyncio.get_event_loop().time() > deadline:
            raise AssertionError("condition not reached in time")
        await asyncio.sleep(0.01)


def test_two_tcp_clients_session_and_relay():
    async def scenario():
        srv = make_server()
        eps = await srv.start(0, 0)
        c1, w1, t1 = await tcp_client(eps.tcp_port)
        c2, w2, t2 = await tcp_client(eps.tcp_port)
        await wait_for(lambda: c1.started and c2.started)
        assert (c1.role, c2.role) == ("A", "B")
        assert c1.config is not None and c1.config.mode is HapticMode.CO_LOCATION

        c1.send_zone("nucleus")
        c1.send_pose(Vec2(150.0, 105.0), 0.25)
        await w1.drain()
        await wait_for(lambda: c2.partner is not None and c2.partner.zone_id == "nucleus")
        assert c2.partner.pose.p == Vec2(150.0, 105.0)

        # third client rejected
        c3, w3, t3 = await tcp_client(eps.tcp_port)
        await wait_for(lambda: c3.rejected_reason is not None)
        assert c3.rejected_reason == "session full"

        await srv.close()
        for t in (t1, t2, t3):
            t.cancel()

    asyncio.run(scenario())


def test_map_mismatch_client_rejected():
    async def scenario():
        srv = make_server()
        eps = await srv.start(0, 0)
        c1, w1, t1 = await tcp_client(eps.tcp_port, map_hash="0" * 64)
        await wait_for(lambda: c1.rejected_reason is not None)
        assert c1.rejected_reason == "map mismatch"
        await srv.close()
        t1.cancel()

    asyncio.run(scenario())


async def http_get(port, path):
    reader, writer = await asyncio.open_connection("127.0.0.1", port)
    writer.write(f"GET {path} HTTP/1.1\r\nHost: t\r\n\r\n".encode())
    raw = await reader.read(-1)
    writer.close()
    head, _, body = raw.partition(b"\r\n\r\n")
    status = int(head.split(b" ", 2)[1])
    return status, body


def test_http_assets_and_session_endpoint(tmp_path):
    async def scenario():
        web = tmp_path / "web"
        web.mkdir()
        (web / "index.html").write_text("<html>client</html>", encoding="utf-8")
        srv = make_server(web_dir=web)
        eps = await srv.start(0, 0)

        status, body = await http_get(eps.http_port, "/session")
        assert status == 200
        doc = json.loads(body)
        assert doc["session_id"] == "rt"
        assert doc["ws_path"] == "/ws/session/rt"

        status, body = await http_get(eps.http_port, "/assets/map.json")
        assert status == 200 and body == MAP_BYTES

        status, body = await http_get(eps.http_port, "/assets/activity.json")
        assert status == 200 and body == default_activity_bytes()

        status, body = await http_get(eps.http_port, "/")
        assert status == 200 and b"client" in body

        status, _ = await http_get(eps.http_port, "/../etc/passwd")
        assert status == 404

        await srv.close()

    asyncio.run(scenario())


def ws_encode_text(payload: bytes) -> bytes:
    # Client frames must be masked per RFC 6455.
    mask = os.urandom(4)
    masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    n = len(payload)
    if n < 126:
        head = bytes([0x81, 0x80 | n])
    else:
        head = bytes([0x81, 0x80 | 126]) + n.to_bytes(2, "big")
    return head + mask + masked


async def ws_read_message(reader):
    b1, b2 = await reader.readexactly(2)
    length = b2 & 0x7F
    if length == 126:
        length = int.from_bytes(await reader.readexactly(2), "big")
    payload = await reader.readexactly(length)
    return b1 & 0x0F, payload


def test_websocket_client_full_handshake_and_envelopes():
    async def scenario():
        srv = make_server(session_id="wss")
        eps = await srv.start(0, 0)

        reader, writer = await asyncio.open_connection("127.0.0.1", eps.http_port)
        key = base64.b64encode(os.urandom(16)).decode()
        writer.write(
            (
                "GET /ws/session/wss HTTP/1.1\r\nHost: t\r\n"
                "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                f"Sec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
            ).encode()
        )
        head = await reader.readuntil(b"\r\n\r\n")
        assert b"101" in head.split(b"\r\n")[0]

        opcode, payload = await ws_read_message(reader)
        hello = json.loads(payload)
        assert hello["type"] == "hello" and hello["payload"]["role"] == "A"

        reply = {
            "v": 1,
            "type": "hello",
            "seq": 1,
            "t_ms": 0,
            "from": "A",
            "payload": {"map_hash": MAP_HASH},
        }
        writer.write(ws_encode_text((json.dumps(reply) + "\n").encode()))
        await writer.drain()

        # second participant over TCP completes the session
        c2, w2, t2 = await tcp_client(eps.tcp_port)
        await wait_for(lambda: c2.started)

        opcode, payload = await ws_read_message(reader)
        start = json.loads(payload)
        assert start["type"] == "session_start"
        assert start["payload"]["mode"] == "co_location"

        writer.close()
        await srv.close()
        t2.cancel()

    asyncio.run(scenario())
