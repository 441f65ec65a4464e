"""Running the two servers as network services.

Frame layout: 4-byte big-endian payload length, 1-byte message type, payload.
Bit strings travel packed most significant bit first, the last byte padded
with zeros.

* ``HELLO``: 1 byte, the scheme id the client expects (0 accepts any).
* ``HELLO_ACK``: scheme id (1 byte), then ``n``, ``t``, ``ell`` as 4-byte
  big-endian integers.
* ``QUERY``: ``t`` packed bits.  ``ANSWER``: ``ell`` packed bits.
* ``ERROR``: 1-byte code.

Servers keep no per-connection state beyond the socket, so connections can
be reused for any number of requests.
"""

from __future__ import annotations

import asyncio
import logging
import math
import os
import struct
import threading
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Sequence

import numpy as np

from .bits import Database, load_database
from .errors import PirError
from .schemes import SCHEMES, PirScheme, Transcript, get_scheme, scheme_by_id

log = logging.getLogger(__name__)

HEADER = struct.Struct(">IB")
ACK = struct.Struct(">BIII")
MAX_PAYLOAD = 1 << 24
DEFAULT_TIMEOUT_MS = 5000


class MsgType(IntEnum):
    QUERY = 0x01
    ANSWER = 0x02
    ERROR = 0x03
    HELLO = 0x04
    HELLO_ACK = 0x05


class ErrorCode(IntEnum):
    BAD_LENGTH = 0x01
    SCHEME_MISMATCH = 0x02
    MALFORMED = 0x03


class NetError(PirError):
    pass


class PirTimeout(NetError):
    pass


class ParameterMismatch(NetError):
    pass


class TransportError(NetError):
    pass


class ServerError(NetError):
    def __init__(self, code: int, endpoint: str = ""):
        self.code = code
        try:
            name = ErrorCode(code).name.lower().replace("_", "-")
        except ValueError:
            name = "unknown"
        where = f" from {endpoint}" if endpoint else ""
        super().__init__(f"server error {code:#04x} ({name}){where}")


class FrameError(NetError):
    """A byte string that is not a well-formed frame."""


@dataclass(frozen=True)
class WireMessage:
    msg_type: int
    payload: bytes = b""

    def encode(self) -> bytes:
        if len(self.payload) > 0xFFFFFFFF:
            raise FrameError("payload too long for a 4-byte length")
        return HEADER.pack(len(self.payload), self.msg_type) + bytes(self.payload)

    @classmethod
    def decode(cls, data: bytes) -> "WireMessage":
        """Exactly one frame; trailing or missing bytes raise ``FrameError``."""
        msg, rest = cls.decode_prefix(data)
        if rest:
            raise FrameError(f"{len(rest)} trailing bytes after frame")
        return msg

    @classmethod
    def decode_prefix(cls, data: bytes) -> tuple["WireMessage", bytes]:
        if len(data) < HEADER.size:
            raise FrameError("truncated header")
        length, kind = HEADER.unpack_from(data)
        end = HEADER.size + length
        if len(data) < end:
            raise FrameError(f"frame announces {length} payload bytes, {len(data) - HEADER.size} present")
        return cls(kind, bytes(data[HEADER.size : end])), bytes(data[end:])


def error_message(code: ErrorCode) -> WireMessage:
    return WireMessage(MsgType.ERROR, bytes([code]))


def pack_wire_bits(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def unpack_wire_bits(payload: bytes, nbits: int) -> np.ndarray:
    """Inverse of ``pack_wire_bits``; raises ``ServerError`` codes for bad input."""
    if nbits == 0 or len(payload) != math.ceil(nbits / 8):
        raise ServerError(ErrorCode.BAD_LENGTH)
    bits = np.unpackbits(np.frombuffer(payload, dtype=np.uint8))
    if bits[nbits:].any():
        raise ServerError(ErrorCode.MALFORMED)
    return bits[:nbits].copy()


def encode_ack(scheme: PirScheme) -> bytes:
    return ACK.pack(scheme.scheme_id, scheme.n, scheme.t, scheme.ell)


def decode_ack(payload: bytes) -> tuple[int, int, int, int]:
    if len(payload) != ACK.size:
        raise FrameError(f"HELLO_ACK payload of {len(payload)} bytes")
    return ACK.unpack(payload)


async def read_message(reader: asyncio.StreamReader) -> WireMessage | None:
    """Next frame, or ``None`` on a clean end of stream."""
    try:
        header = await reader.readexactly(HEADER.size)
    except asyncio.IncompleteReadError as exc:
        if exc.partial:
            raise FrameError("connection closed mid-header") from None
        return None
    length, kind = HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise FrameError(f"payload length {length} exceeds {MAX_PAYLOAD}")
    try:
        payload = await reader.readexactly(length)
    except asyncio.IncompleteReadError:
        raise FrameError("connection closed mid-payload") from None
    return WireMessage(kind, payload)


# --------------------------------------------------------------------------
# server


@dataclass(frozen=True)
class ServerConfig:
    scheme: str
    db_path: str
    host: str = "127.0.0.1"
    port: int = 0
    n: int | None = None


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise PirError(f"endpoint must be HOST:PORT, got {text!r}")
    return host or "127.0.0.1", int(port)


class PirServer:
    """Answers queries for one database snapshot.

    ``capture``, if given, is called with every accepted query bit string;
    it sees exactly what the server learns.
    """

    def __init__(self, scheme: PirScheme, db: Database, capture: Callable[[np.ndarray], None] | None = None):
        if db.arrangement != scheme.arrangement:
            raise PirError("database arrangement does not match the scheme")
        self.scheme = scheme
        self.db = db
        self.capture = capture
        self._server: asyncio.base_events.Server | None = None

    @classmethod
    def from_config(cls, config: ServerConfig, capture=None) -> "PirServer":
        bits = load_database(config.db_path, config.n)
        scheme = get_scheme(config.scheme, len(bits))
        return cls(scheme, scheme.database(bits), capture)

    def respond(self, msg: WireMessage) -> WireMessage:
        """The reply to one request; pure in ``(database, msg)``."""
        try:
            kind = MsgType(msg.msg_type)
        except ValueError:
            return error_message(ErrorCode.MALFORMED)
        if kind is MsgType.HELLO:
            if len(msg.payload) != 1:
                return error_message(ErrorCode.BAD_LENGTH)
            wanted = msg.payload[0]
            if wanted not in (0, self.scheme.scheme_id):
                return error_message(ErrorCode.SCHEME_MISMATCH)
            return WireMessage(MsgType.HELLO_ACK, encode_ack(self.scheme))
        if kind is MsgType.QUERY:
            try:
                q = unpack_wire_bits(msg.payload, self.scheme.t)
            except ServerError as exc:
                return error_message(ErrorCode(exc.code))
            if self.capture is not None:
                self.capture(q)
            return WireMessage(MsgType.ANSWER, pack_wire_bits(self.scheme.answer(self.db, q)))
        return error_message(ErrorCode.MALFORMED)

    async def handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while True:
                try:
                    msg = await read_message(reader)
                except FrameError as exc:
                    log.debug("dropping connection: %s", exc)
                    writer.write(error_message(ErrorCode.BAD_LENGTH).encode())
                    await writer.drain()
                    break
                if msg is None:
                    break
                writer.write(self.respond(msg).encode())
                await writer.drain()
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, asyncio.CancelledError):
                pass

    async def start(self, host: str = "127.0.0.1", port: int = 0):
        self._server = await asyncio.start_server(self.handle, host, port, backlog=128)
        return self._server

    @property
    def address(self) -> tuple[str, int]:
        if self._server is None:
            raise PirError("server not started")
        return self._server.sockets[0].getsockname()[:2]

    async def serve_forever(self, host: str = "127.0.0.1", port: int = 0) -> None:
        server = await self.start(host, port)
        async with server:
            await server.serve_forever()


class ThreadedServer:
    """A ``PirServer`` on its own event loop thread; use as a context manager."""

    def __init__(self, server: PirServer, host: str = "127.0.0.1", port: int = 0):
        self.server = server
        self._host, self._port = host, port
        self._loop = asyncio.new_event_loop()
        self._thread = threading.Thread(target=self._loop.run_forever, daemon=True)

    def __enter__(self) -> "ThreadedServer":
        self._thread.start()
        asyncio.run_coroutine_threadsafe(self.server.start(self._host, self._port), self._loop).result(10)
        return self

    def __exit__(self, *exc) -> None:
        async def _stop():
            self.server._server.close()
            await self.server._server.wait_closed()

        asyncio.run_coroutine_threadsafe(_stop(), self._loop).result(10)
        self._loop.call_soon_threadsafe(self._loop.stop)
        self._thread.join(10)
        self._loop.close()

    @property
    def endpoint(self) -> str:
        host, port = self.server.address
        return f"{host}:{port}"


# --------------------------------------------------------------------------
# client


def default_timeout() -> float:
    """Seconds; ``PIR_TIMEOUT_MS`` overrides the 5 s default."""
    raw = os.environ.get("PIR_TIMEOUT_MS")
    if raw is None:
        return DEFAULT_TIMEOUT_MS / 1000
    try:
        ms = float(raw)
    except ValueError:
        raise PirError(f"PIR_TIMEOUT_MS must be a number, got {raw!r}") from None
    if ms <= 0:
        raise PirError("PIR_TIMEOUT_MS must be positive")
    return ms / 1000


class Connection:
    """One reusable connection to a server."""

    def __init__(self, endpoint: str, timeout: float):
        self.endpoint = endpoint
        self.timeout = timeout
        self._reader: asyncio.StreamReader | None = None
        self._writer: asyncio.StreamWriter | None = None

    async def _guard(self, coro, what: str):
        try:
            return await asyncio.wait_for(coro, self.timeout)
        except asyncio.TimeoutError:
            raise PirTimeout(f"{what} to {self.endpoint} timed out after {self.timeout:g} s") from None
        except (OSError, asyncio.IncompleteReadError) as exc:
            raise TransportError(f"{what} to {self.endpoint} failed: {exc}") from None

    async def connect(self) -> None:
        host, port = parse_endpoint(self.endpoint)
        self._reader, self._writer = await self._guard(asyncio.open_connection(host, port), "connect")

    async def request(self, msg: WireMessage) -> WireMessage:
        if self._writer is None:
            await self.connect()

        async def roundtrip():
            self._writer.write(msg.encode())
            await self._writer.drain()
            return await read_message(self._reader)

        reply = await self._guard(roundtrip(), "request")
        if reply is None:
            raise TransportError(f"{self.endpoint} closed the connection")
        if reply.msg_type == MsgType.ERROR:
            raise ServerError(reply.payload[0] if reply.payload else -1, self.endpoint)
        return reply

    async def hello(self, scheme_id: int = 0) -> tuple[int, int, int, int]:
        reply = await self.request(WireMessage(MsgType.HELLO, bytes([scheme_id])))
        if reply.msg_type != MsgType.HELLO_ACK:
            raise TransportError(f"expected HELLO_ACK from {self.endpoint}, got type {reply.msg_type:#04x}")
        return decode_ack(reply.payload)

    async def query(self, q, ell: int) -> np.ndarray:
        reply = await self.request(WireMessage(MsgType.QUERY, pack_wire_bits(q)))
        if reply.msg_type != MsgType.ANSWER:
            raise TransportError(f"expected ANSWER from {self.endpoint}, got type {reply.msg_type:#04x}")
        try:
            return unpack_wire_bits(reply.payload, ell)
        except ServerError:
            raise TransportError(f"ANSWER from {self.endpoint} does not hold {ell} bits") from None

    async def close(self) -> None:
        if self._writer is not None:
            self._writer.close()
            try:
                await self._writer.wait_closed()
            except OSError:
                pass
            self._writer = self._reader = None


class PirClient:
    """The user side: talks to both servers, sending the two queries concurrently."""

    def __init__(self, endpoints: Sequence[str], scheme: str | PirScheme | None = None, timeout: float | None = None):
        if len(endpoints) != 2:
            raise PirError("exactly two server endpoints are needed")
        self.timeout = default_timeout() if timeout is None else timeout
        self.connections = [Connection(e, self.timeout) for e in endpoints]
        self.expected = scheme
        self.scheme: PirScheme | None = None

    async def __aenter__(self) -> "PirClient":
        try:
            await self.handshake()
        except BaseException:
            await self.close()
            raise
        return self

    async def __aexit__(self, *exc) -> None:
        await self.close()

    async def handshake(self) -> PirScheme:
        expected = self.expected
        wanted_id = 0
        if isinstance(expected, PirScheme):
            wanted_id = expected.scheme_id
        elif isinstance(expected, str):
            if expected not in SCHEMES:
                raise PirError(f"unknown scheme {expected!r}")
            wanted_id = SCHEMES[expected].scheme_id
        try:
            acks = await asyncio.gather(*(c.hello(wanted_id) for c in self.connections))
        except ServerError as exc:
            if exc.code == ErrorCode.SCHEME_MISMATCH:
                raise ParameterMismatch(str(exc)) from None
            raise
        if acks[0] != acks[1]:
            raise ParameterMismatch(f"servers disagree on (scheme, n, t, ell): {acks[0]} vs {acks[1]}")
        scheme_id, n, t, ell = acks[0]
        scheme = scheme_by_id(scheme_id)(n)
        if (scheme.t, scheme.ell) != (t, ell):
            raise ParameterMismatch(f"announced t={t}, ell={ell} do not fit scheme {scheme_id} at n={n}")
        if isinstance(expected, PirScheme) and expected != scheme:
            raise ParameterMismatch(f"servers run {scheme!r}, expected {expected!r}")
        self.scheme = scheme
        return scheme

    async def retrieve(self, i: int, randomness) -> Transcript:
        scheme = self.scheme
        if scheme is None:
            scheme = await self.handshake()
        r = np.asarray(randomness, dtype=np.uint8)
        if r.shape != (scheme.randomness_bits,):
            raise PirError(f"randomness needs {scheme.randomness_bits} bits")
        q0, q1 = scheme.queries(i, r)
        a0, a1 = await asyncio.gather(
            self.connections[0].query(q0, scheme.ell),
            self.connections[1].query(q1, scheme.ell),
        )
        S0, S1 = scheme.selection(i)
        return Transcript(i, r, q0, q1, a0, a1, S0, S1, scheme.reconstruct(i, a0, a1))

    async def close(self) -> None:
        await asyncio.gather(*(c.close() for c in self.connections), return_exceptions=True)


async def remote_query_async(i: int, endpoints: Sequence[str], randomness, scheme=None, timeout=None) -> Transcript:
    async with PirClient(endpoints, scheme, timeout) as client:
        return await client.retrieve(i, randomness)


def remote_query(i: int, endpoints: Sequence[str], randomness, scheme=None, timeout=None) -> Transcript:
    """Fetch bit ``i`` (0-based) from two servers; equals the local protocol run."""
    return asyncio.run(remote_query_async(i, endpoints, randomness, scheme, timeout))


def remote_run_many(endpoints: Sequence[str], requests: Sequence[tuple[int, np.ndarray]], scheme=None, timeout=None):
    """Run many retrievals over one pair of connections."""

    async def go():
        async with PirClient(endpoints, scheme, timeout) as client:
            return [await client.retrieve(i, r) for i, r in requests]

    return asyncio.run(go())
