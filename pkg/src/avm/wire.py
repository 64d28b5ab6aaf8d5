"""Network boundary: JSON envelopes over TCP, with an HTTP/WebSocket door.

Every message is one JSON object::

    {"v": 1, "type": ..., "seq": ..., "timestamp_ms": ..., "payload": {...}}

with ``type`` one of ``frame``, ``state``, ``command``, ``ack``,
``error``.  Unknown fields are ignored, which leaves room to grow the
schema without breaking old clients.

A single listening port serves two transports.  A connection whose
first bytes spell an HTTP GET is answered either with a WebSocket
upgrade (envelopes then travel as text frames) or with a static file
from the console bundle; anything else — including a peer that
connects and only listens — is treated as a raw TCP peer speaking
newline-delimited envelopes.  Both transports carry the exact same
messages.

Outbound traffic per client is conflated: ``frame`` and ``state``
messages overwrite a latest-value slot so a slow reader skips straight
to the newest data, while ``ack``/``error`` replies queue reliably.
"""

from __future__ import annotations

import base64
import hashlib
import itertools
import json
import socket
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import cv2

from .errors import CommandError, ProtocolError
from .kinematics import overlay_payload
from .service import AvmService, PublishedFrame

PROTOCOL_VERSION = 1
MESSAGE_TYPES = ("frame", "state", "command", "ack", "error")

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".json": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
}

_FALLBACK_PAGE = (
    "<!doctype html><meta charset='utf-8'><title>avm</title>"
    "<body style='font-family:sans-serif'><h1>avm service</h1>"
    "<p>The wire protocol is live on this port (WebSocket or raw TCP).\n"
    "No console bundle was found to serve.</p>"
)


def make_envelope(msg_type: str, payload: dict, seq: int, timestamp_ms: int | None = None) -> dict:
    if msg_type not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {msg_type!r}")
    return {
        "v": PROTOCOL_VERSION,
        "type": msg_type,
        "seq": seq,
        "timestamp_ms": timestamp_ms if timestamp_ms is not None else int(time.time() * 1000),
        "payload": payload,
    }


def encode_envelope(env: dict) -> bytes:
    return json.dumps(env, separators=(",", ":")).encode() + b"\n"


def decode_envelope(data: bytes | str) -> dict:
    """Parse and validate one inbound envelope.

    Checks only the fields the contract names; anything extra rides
    along untouched.
    """
    try:
        env = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not valid JSON: {exc}") from exc
    if not isinstance(env, dict):
        raise ProtocolError("envelope must be a JSON object")
    if env.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol version {env.get('v')!r}")
    if env.get("type") not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {env.get('type')!r}")
    if not isinstance(env.get("payload", {}), dict):
        raise ProtocolError("payload must be an object")
    env.setdefault("payload", {})
    env.setdefault("seq", 0)
    return env


def encode_frame_payload(frame: PublishedFrame) -> dict:
    """PNG-in-base64 representation of a published frame."""
    ok, png = cv2.imencode(".png", frame.image)
    if not ok:
        raise ProtocolError("PNG encoding failed")
    h, w = frame.image.shape[:2]
    return {
        "view": frame.view,
        "frame_seq": frame.frame_seq,
        "telemetry_seq": frame.telemetry_seq,
        "width": w,
        "height": h,
        "png_b64": base64.b64encode(png.tobytes()).decode("ascii"),
    }


# ----------------------------------------------------------------------
# WebSocket framing (server side of RFC 6455)


def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key.strip() + _WS_GUID).encode()).digest()
    return base64.b64encode(digest).decode("ascii")


def ws_encode_text(payload: bytes) -> bytes:
    """One unmasked FIN text frame, as servers send them."""
    header = bytearray([0x81])
    n = len(payload)
    if n < 126:
        header.append(n)
    elif n < 1 << 16:
        header.append(126)
        header += struct.pack(">H", n)
    else:
        header.append(127)
        header += struct.pack(">Q", n)
    return bytes(header) + payload


def ws_encode_close() -> bytes:
    return bytes([0x88, 0x00])


def ws_encode_pong(payload: bytes) -> bytes:
    return bytes([0x8A, len(payload)]) + payload


class WsDecoder:
    """Incremental parser for masked client frames.

    Feed raw socket bytes in; take complete text messages out.  Control
    frames are handled inline: pings are answered through ``replies``,
    a close flips ``closed``.
    """

    def __init__(self):
        self._buf = bytearray()
        self._fragments: list[bytes] = []
        self.replies: list[bytes] = []
        self.closed = False

    def feed(self, data: bytes) -> list[str]:
        self._buf += data
        messages: list[str] = []
        while True:
            frame = self._next_frame()
            if frame is None:
                return messages
            fin, opcode, payload = frame
            if opcode == 0x8:
                self.closed = True
                return messages
            if opcode == 0x9:
                self.replies.append(ws_encode_pong(payload))
                continue
            if opcode == 0xA:
                continue
            if opcode in (0x1, 0x2, 0x0):
                self._fragments.append(payload)
                if fin:
                    whole = b"".join(self._fragments)
                    self._fragments = []
                    messages.append(whole.decode("utf-8", errors="replace"))

    def _next_frame(self):
        buf = self._buf
        if len(buf) < 2:
            return None
        fin = bool(buf[0] & 0x80)
        opcode = buf[0] & 0x0F
        masked = bool(buf[1] & 0x80)
        length = buf[1] & 0x7F
        offset = 2
        if length == 126:
            if len(buf) < 4:
                return None
            length = struct.unpack_from(">H", buf, 2)[0]
            offset = 4
        elif length == 127:
            if len(buf) < 10:
                return None
            length = struct.unpack_from(">Q", buf, 2)[0]
            offset = 10
        if masked:
            if len(buf) < offset + 4 + length:
                return None
            mask = buf[offset:offset + 4]
            raw = bytearray(buf[offset + 4:offset + 4 + length])
            for i in range(len(raw)):
                raw[i] ^= mask[i % 4]
            del self._buf[:offset + 4 + length]
            return fin, opcode, bytes(raw)
        if len(buf) < offset + length:
            return None
        raw = bytes(buf[offset:offset + length])
        del self._buf[:offset + length]
        return fin, opcode, raw


# ----------------------------------------------------------------------
# server


@dataclass
class _Outbox:
    """Per-client outbound slots: conflated pushes, queued replies."""

    lock: threading.Lock
    ready: threading.Condition
    frame: bytes | None = None
    frame_seq: int = -1
    state: bytes | None = None
    state_seq: int = -1
    replies: deque = None  # type: ignore[assignment]

    @classmethod
    def new(cls) -> "_Outbox":
        lock = threading.Lock()
        return cls(lock=lock, ready=threading.Condition(lock), replies=deque())


class WireServer:
    """Serves one AvmService over TCP/WebSocket/static HTTP."""

    def __init__(
        self,
        service: AvmService,
        host: str = "127.0.0.1",
        port: int = 0,
        static_dir: str | Path | None = None,
        frame_hz: float = 15.0,
        state_hz: float = 1.0,
    ):
        self.service = service
        self.host = host
        self._requested_port = port
        self.static_dir = Path(static_dir) if static_dir else None
        self.frame_period = 1.0 / frame_hz if frame_hz > 0 else 0.0
        self.state_period = 1.0 / state_hz if state_hz > 0 else 1.0
        self._server_seq = itertools.count(1)
        self._sock: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._clients: list[dict] = []
        self._clients_lock = threading.Lock()
        self._stop = threading.Event()
        self._last_frame_sent = 0.0
        self._latest_frame: PublishedFrame | None = None
        self._encoded_frame: tuple[int, bytes] | None = None

    @property
    def port(self) -> int:
        if self._sock is None:
            return self._requested_port
        return self._sock.getsockname()[1]

    # ------------------------------------------------------------------

    def start(self) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.host, self._requested_port))
        sock.listen(8)
        self._sock = sock
        self._stop.clear()
        self.service.add_frame_listener(self._on_frame)
        acceptor = threading.Thread(target=self._accept_loop, name="wire-accept", daemon=True)
        pusher = threading.Thread(target=self._state_loop, name="wire-state", daemon=True)
        acceptor.start()
        pusher.start()
        self._threads = [acceptor, pusher]

    def stop(self) -> None:
        self._stop.set()
        self.service.remove_frame_listener(self._on_frame)
        if self._sock is not None:
            # shutdown() wakes a thread parked in accept(); close() alone
            # leaves it blocked until the next connection arrives
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                self._sock.close()
            except OSError:
                pass
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            try:
                client["sock"].close()
            except OSError:
                pass
            with client["outbox"].ready:
                client["outbox"].ready.notify_all()
        for t in self._threads:
            t.join(timeout=3.0)
        self._threads = []

    # ------------------------------------------------------------------
    # broadcast

    def _on_frame(self, frame: PublishedFrame) -> None:
        now = time.monotonic()
        if self.frame_period and now - self._last_frame_sent < self.frame_period:
            return
        self._last_frame_sent = now
        with self._clients_lock:
            clients = list(self._clients)
            # kept so a client connecting later starts from this frame
            self._latest_frame = frame
        if not clients:
            return
        env = make_envelope("frame", encode_frame_payload(frame), next(self._server_seq))
        data = encode_envelope(env)
        with self._clients_lock:
            self._encoded_frame = (frame.frame_seq, data)
        for client in clients:
            box = client["outbox"]
            with box.ready:
                box.frame = data
                box.frame_seq = frame.frame_seq
                box.ready.notify_all()

    def _broadcast_state(self) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        if not clients:
            return
        state = self.service.view_state()
        overlay = overlay_payload(state.pose, self.service.rig.links)
        payload = {
            "view_state": state.to_dict(),
            "overlay": overlay.to_dict(),
            "stats": self.service.stats_report().to_dict(),
        }
        env = make_envelope("state", payload, next(self._server_seq))
        data = encode_envelope(env)
        for client in clients:
            box = client["outbox"]
            with box.ready:
                box.state = data
                box.state_seq += 1
                box.ready.notify_all()

    def _state_loop(self) -> None:
        while not self._stop.wait(self.state_period):
            try:
                self._broadcast_state()
            except Exception:
                if not self._stop.is_set():
                    raise

    # ------------------------------------------------------------------
    # connections

    def _accept_loop(self) -> None:
        assert self._sock is not None
        while not self._stop.is_set():
            try:
                conn, addr = self._sock.accept()
            except OSError:
                return
            t = threading.Thread(
                target=self._serve_connection, args=(conn,), name=f"wire-conn-{addr[1]}", daemon=True
            )
            t.start()

    def _serve_connection(self, conn: socket.socket) -> None:
        try:
            # sniff the first bytes to pick a transport; a client that
            # sends nothing within the window is a listen-only TCP peer
            conn.settimeout(1.0)
            head = b""
            deadline = time.monotonic() + 1.0
            try:
                while len(head) < 4 and time.monotonic() < deadline:
                    head = conn.recv(4, socket.MSG_PEEK)
                    if not head:
                        conn.close()
                        return
                    if len(head) < 4:
                        time.sleep(0.01)
            except socket.timeout:
                pass
            if head.startswith(b"GET") or head.startswith(b"HEAD"):
                conn.settimeout(5.0)
                self._serve_http(conn)
            else:
                self._serve_tcp(conn)
        except OSError:
            try:
                conn.close()
            except OSError:
                pass

    # -- raw TCP ---------------------------------------------------------

    def _serve_tcp(self, conn: socket.socket) -> None:
        conn.settimeout(None)
        client = self._register(conn, transport="tcp")
        sender = threading.Thread(
            target=self._sender_loop, args=(client,), name="wire-send", daemon=True
        )
        sender.start()
        buf = bytearray()
        try:
            while not self._stop.is_set():
                data = conn.recv(65536)
                if not data:
                    break
                buf += data
                while b"\n" in buf:
                    line, _, rest = bytes(buf).partition(b"\n")
                    buf = bytearray(rest)
                    if line.strip():
                        self._handle_inbound(client, line)
        except OSError:
            pass
        finally:
            self._unregister(client)

    # -- HTTP / WebSocket ------------------------------------------------

    def _serve_http(self, conn: socket.socket) -> None:
        request = self._read_http_request(conn)
        if request is None:
            conn.close()
            return
        method, path, headers = request
        if headers.get("upgrade", "").lower() == "websocket":
            key = headers.get("sec-websocket-key")
            if not key:
                conn.sendall(b"HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n")
                conn.close()
                return
            accept = ws_accept_key(key)
            conn.sendall(
                b"HTTP/1.1 101 Switching Protocols\r\n"
                b"Upgrade: websocket\r\nConnection: Upgrade\r\n"
                b"Sec-WebSocket-Accept: " + accept.encode() + b"\r\n\r\n"
            )
            self._serve_websocket(conn)
            return
        self._serve_static(conn, method, path)

    @staticmethod
    def _read_http_request(conn: socket.socket):
        data = bytearray()
        while b"\r\n\r\n" not in data:
            try:
                chunk = conn.recv(4096)
            except (OSError, socket.timeout):
                return None
            if not chunk:
                return None
            data += chunk
            if len(data) > 65536:
                return None
        head, _, _body = bytes(data).partition(b"\r\n\r\n")
        lines = head.decode("latin-1").split("\r\n")
        try:
            method, path, _version = lines[0].split(" ", 2)
        except ValueError:
            return None
        headers = {}
        for line in lines[1:]:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()
        return method, path, headers

    def _serve_static(self, conn: socket.socket, method: str, path: str) -> None:
        path = path.split("?", 1)[0]
        if path in ("", "/"):
            path = "/index.html"
        body = None
        ctype = "text/html; charset=utf-8"
        if self.static_dir is not None:
            root = self.static_dir.resolve()
            candidate = (root / path.lstrip("/")).resolve()
            if candidate.is_relative_to(root) and candidate.is_file():
                body = candidate.read_bytes()
                ctype = _CONTENT_TYPES.get(candidate.suffix.lower(), "application/octet-stream")
        if body is None:
            if path == "/index.html":
                body = _FALLBACK_PAGE.encode()
            else:
                conn.sendall(b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\n\r\n")
                conn.close()
                return
        headers = (
            f"HTTP/1.1 200 OK\r\nContent-Type: {ctype}\r\n"
            f"Content-Length: {len(body)}\r\nCache-Control: no-cache\r\n\r\n"
        ).encode()
        conn.sendall(headers if method == "HEAD" else headers + body)
        conn.close()

    def _serve_websocket(self, conn: socket.socket) -> None:
        conn.settimeout(None)
        client = self._register(conn, transport="ws")
        sender = threading.Thread(
            target=self._sender_loop, args=(client,), name="wire-send-ws", daemon=True
        )
        sender.start()
        decoder = WsDecoder()
        try:
            while not self._stop.is_set():
                data = conn.recv(65536)
                if not data:
                    break
                messages = decoder.feed(data)
                for reply in decoder.replies:
                    self._send_raw(client, reply)
                decoder.replies.clear()
                for message in messages:
                    self._handle_inbound(client, message)
                if decoder.closed:
                    self._send_raw(client, ws_encode_close())
                    break
        except OSError:
            pass
        finally:
            self._unregister(client)

    # -- shared client machinery ----------------------------------------

    def _register(self, conn: socket.socket, transport: str) -> dict:
        client = {
            "sock": conn,
            "transport": transport,
            "outbox": _Outbox.new(),
            "send_lock": threading.Lock(),
            "sent_frame_seq": -1,
            "sent_state_seq": -1,
            "open": True,
        }
        with self._clients_lock:
            latest = self._latest_frame
            cached = self._encoded_frame
        if latest is not None and (cached is None or cached[0] < latest.frame_seq):
            env = make_envelope("frame", encode_frame_payload(latest), next(self._server_seq))
            cached = (latest.frame_seq, encode_envelope(env))
            with self._clients_lock:
                self._encoded_frame = cached
        if cached is not None:
            client["outbox"].frame_seq, client["outbox"].frame = cached
        with self._clients_lock:
            self._clients.append(client)
        return client

    def _unregister(self, client: dict) -> None:
        client["open"] = False
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)
        try:
            client["sock"].close()
        except OSError:
            pass
        with client["outbox"].ready:
            client["outbox"].ready.notify_all()

    def _send_raw(self, client: dict, data: bytes) -> None:
        with client["send_lock"]:
            client["sock"].sendall(data)

    def _send_envelope_bytes(self, client: dict, data: bytes) -> None:
        if client["transport"] == "ws":
            self._send_raw(client, ws_encode_text(data.rstrip(b"\n")))
        else:
            self._send_raw(client, data)

    def _sender_loop(self, client: dict) -> None:
        box: _Outbox = client["outbox"]
        try:
            while client["open"] and not self._stop.is_set():
                with box.ready:
                    while (
                        client["open"]
                        and not self._stop.is_set()
                        and not box.replies
                        and box.frame_seq <= client["sent_frame_seq"]
                        and box.state_seq <= client["sent_state_seq"]
                    ):
                        box.ready.wait(0.5)
                    if not client["open"] or self._stop.is_set():
                        return
                    replies = list(box.replies)
                    box.replies.clear()
                    frame = state = None
                    if box.state_seq > client["sent_state_seq"]:
                        state = box.state
                        client["sent_state_seq"] = box.state_seq
                    if box.frame_seq > client["sent_frame_seq"]:
                        frame = box.frame
                        client["sent_frame_seq"] = box.frame_seq
                for data in replies:
                    self._send_envelope_bytes(client, data)
                if state is not None:
                    self._send_envelope_bytes(client, state)
                if frame is not None:
                    self._send_envelope_bytes(client, frame)
        except OSError:
            self._unregister(client)

    def _handle_inbound(self, client: dict, raw: bytes | str) -> None:
        seq = 0
        try:
            env = decode_envelope(raw)
            seq = env.get("seq", 0)
            if env["type"] != "command":
                raise ProtocolError(f"clients send 'command', not {env['type']!r}")
            state = self.service.handle_command(env["payload"])
            reply = make_envelope(
                "ack",
                {"ack_seq": seq, "view_state": state.to_dict()},
                next(self._server_seq),
            )
        except (ProtocolError, CommandError, ValueError) as exc:
            reply = make_envelope(
                "error",
                {"ack_seq": seq, "message": str(exc)},
                next(self._server_seq),
            )
        box = client["outbox"]
        with box.ready:
            box.replies.append(encode_envelope(reply))
            box.ready.notify_all()
