"""Publish/subscribe routing: pure routing function, in-process broker, TCP broker and client."""
from __future__ import annotations

import asyncio
import json
import logging
import queue
import socket
import threading
import time
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

from .model import (
    DEFAULT_MAX_FRAME,
    Event,
    EventError,
    MalformedFrame,
    decode_event,
    encode_event,
    match_pattern,
    valid_pattern,
)

log = logging.getLogger(__name__)

BROKER_SENDER = "broker"


@dataclass(frozen=True)
class Subscription:
    client: str
    pattern: str

    def __post_init__(self):
        if not valid_pattern(self.pattern):
            raise ValueError(f"invalid subscription pattern {self.pattern!r}")


@dataclass(frozen=True)
class BrokerConfig:
    host: str = "127.0.0.1"
    port: int = 1932
    max_frame: int = DEFAULT_MAX_FRAME
    idle_timeout: float | None = None

    def __post_init__(self):
        if self.max_frame < 1024:
            raise ValueError("max_frame must be at least 1024 bytes")


def _as_subscriptions(subscriptions) -> list[Subscription]:
    if isinstance(subscriptions, Mapping):
        out = []
        for client, pats in subscriptions.items():
            if isinstance(pats, str):
                pats = [pats]
            out.extend(Subscription(client, p) for p in pats)
        return out
    return [s if isinstance(s, Subscription) else Subscription(*s) for s in subscriptions]


def broker_route(event: Event, subscriptions) -> list[str]:
    """Clients with at least one pattern matching ``event.name``, sender excluded.

    ``subscriptions`` is an iterable of :class:`Subscription` (or
    ``(client, pattern)`` pairs) or a mapping ``client -> pattern(s)``.
    Recipients are returned once each, in first-subscription order.
    """
    seen = []
    for sub in _as_subscriptions(subscriptions):
        if sub.client == event.sender or sub.client in seen:
            continue
        if match_pattern(sub.pattern, event.name):
            seen.append(sub.client)
    return seen


class Connection:
    """Client side of an in-process broker attachment."""

    def __init__(self, broker, name, deliver=None):
        self.broker = broker
        self.name = name
        self._deliver = deliver
        self._inbox = queue.SimpleQueue()
        self._seq = 0
        self._lock = threading.Lock()
        self.closed = False

    def _push(self, event):
        if self.closed:
            raise ConnectionError(self.name)
        if self._deliver is not None:
            self._deliver(event)
        else:
            self._inbox.put(event)

    def publish(self, name, params=None, ts=0) -> Event:
        with self._lock:
            self._seq += 1
            event = Event.make(name, params, sender=self.name, seq=self._seq, ts=ts)
        self.broker.publish(event)
        return event

    def recv(self, timeout=None) -> Event | None:
        try:
            return self._inbox.get(timeout=timeout) if timeout else self._inbox.get_nowait()
        except queue.Empty:
            return None

    def drain(self) -> list[Event]:
        out = []
        while True:
            e = self.recv()
            if e is None:
                return out
            out.append(e)

    def close(self):
        self.closed = True
        self.broker.disconnect(self.name)


class Broker:
    """In-process broker with the same routing and ordering rules as the TCP one.

    Delivery is synchronous in publish order, so every recipient sees a
    given sender's events in seq order.  A client whose delivery fails is
    dropped and a ``monitor.broker.dropped`` event is routed in its place.
    """

    def __init__(self, config: BrokerConfig | None = None, clock=None):
        self.config = config or BrokerConfig()
        self.clock = clock or _now_ms
        self._lock = threading.RLock()
        self._subs: list[Subscription] = []
        self._conns: dict[str, Connection] = {}
        self._last_seq: dict[str, int] = {}
        self._monitor_seq = 0

    def connect(self, name, patterns=(), deliver=None) -> Connection:
        with self._lock:
            if name in self._conns:
                raise ValueError(f"client {name!r} already connected")
            conn = Connection(self, name, deliver)
            self._conns[name] = conn
            for p in patterns:
                self._subs.append(Subscription(name, p))
            return conn

    def subscribe(self, name, pattern):
        with self._lock:
            self._subs.append(Subscription(name, pattern))

    def disconnect(self, name):
        with self._lock:
            self._conns.pop(name, None)
            self._subs = [s for s in self._subs if s.client != name]
            self._last_seq.pop(name, None)

    @property
    def subscriptions(self) -> list[Subscription]:
        with self._lock:
            return list(self._subs)

    def publish_frame(self, frame: bytes) -> list[str]:
        return self.publish(decode_event(frame))

    def publish(self, event: Event) -> list[str]:
        encode_event(event, self.config.max_frame)
        with self._lock:
            last = self._last_seq.get(event.sender)
            if last is not None and event.seq <= last:
                raise MalformedFrame("seq", f"{event.seq} does not follow {last} for {event.sender!r}")
            self._last_seq[event.sender] = event.seq
            recipients = broker_route(event, self._subs)
            dropped = []
            for client in recipients:
                conn = self._conns.get(client)
                try:
                    if conn is None:
                        raise ConnectionError(client)
                    conn._push(event)
                except ConnectionError:
                    dropped.append(client)
            for client in dropped:
                self.disconnect(client)
            for client in dropped:
                self._monitor("monitor.broker.dropped", {"client": client})
            return [c for c in recipients if c not in dropped]

    def _monitor(self, name, params):
        self._monitor_seq += 1
        event = Event.make(name, params, sender=BROKER_SENDER, seq=self._monitor_seq, ts=self.clock())
        for client in broker_route(event, self._subs):
            conn = self._conns.get(client)
            if conn is not None and not conn.closed:
                conn._push(event)


def _now_ms():
    return int(time.time() * 1000)


def parse_hello(line: bytes) -> tuple[str, list[str]]:
    try:
        obj = json.loads(line.decode("utf-8"))
        hello = obj["hello"]
        name = hello["client"]
        subs = list(hello.get("subs", []))
    except (ValueError, KeyError, TypeError, UnicodeDecodeError):
        raise MalformedFrame("hello", "first line must be a hello object") from None
    if not isinstance(name, str) or not name:
        raise MalformedFrame("hello", "client name missing")
    for p in subs:
        if not valid_pattern(p):
            raise MalformedFrame("hello", f"bad pattern {p!r}")
    return name, subs


def hello_line(name, subs) -> bytes:
    return json.dumps({"hello": {"client": name, "subs": list(subs)}}).encode("utf-8") + b"\n"


class BrokerServer:
    """Asyncio TCP broker speaking newline-delimited JSON.

    Routing happens on the event-loop thread; each client owns a FIFO
    outbox drained by its own writer task, so per-recipient order holds
    while writes to different clients proceed independently.
    """

    def __init__(self, config: BrokerConfig | None = None):
        self.config = config or BrokerConfig()
        self._subs: list[Subscription] = []
        self._outboxes: dict[str, asyncio.Queue] = {}
        self._last_seq: dict[str, int] = {}
        self._server = None
        self._monitor_seq = 0
        self.address = None
        self._loop = None
        self._thread = None
        self._ready = threading.Event()

    async def start(self):
        self._server = await asyncio.start_server(
            self._handle, self.config.host, self.config.port, limit=self.config.max_frame
        )
        self.address = self._server.sockets[0].getsockname()[:2]
        log.info("broker listening on %s:%s", *self.address)
        return self.address

    async def serve_forever(self):
        await self.start()
        async with self._server:
            await self._server.serve_forever()

    @property
    def clients(self) -> list[str]:
        return list(self._outboxes)

    def wait_for_clients(self, names, timeout=5.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if set(names) <= set(self._outboxes):
                return True
            time.sleep(0.005)
        return False

    async def _shutdown(self):
        self._server.close()
        await self._server.wait_closed()
        tasks = [t for t in asyncio.all_tasks() if t is not asyncio.current_task()]
        for t in tasks:
            t.cancel()
        await asyncio.gather(*tasks, return_exceptions=True)

    def close(self):
        """Stop a broker started with :meth:`serve_in_thread`."""
        if self._loop is None or self._server is None:
            return
        fut = asyncio.run_coroutine_threadsafe(self._shutdown(), self._loop)
        fut.result(timeout=5)
        self._loop.call_soon_threadsafe(self._loop.stop)
        self._thread.join(timeout=5)

    def serve_in_thread(self):
        """Run the broker on a daemon thread; returns the bound (host, port)."""

        def run():
            self._loop = asyncio.new_event_loop()
            asyncio.set_event_loop(self._loop)
            self._loop.run_until_complete(self.start())
            self._ready.set()
            self._loop.run_forever()
            self._loop.close()

        self._thread = threading.Thread(target=run, name="broker", daemon=True)
        self._thread.start()
        self._ready.wait(timeout=10)
        return self.address

    def _route(self, event: Event):
        frame = encode_event(event, self.config.max_frame)
        for client in broker_route(event, self._subs):
            box = self._outboxes.get(client)
            if box is not None:
                box.put_nowait(frame)

    def _monitor(self, name, params):
        self._monitor_seq += 1
        self._route(Event.make(name, params, sender=BROKER_SENDER, seq=self._monitor_seq, ts=_now_ms()))

    async def _readline(self, reader):
        if self.config.idle_timeout:
            return await asyncio.wait_for(reader.readline(), self.config.idle_timeout)
        return await reader.readline()

    async def _handle(self, reader, writer):
        name = None
        writer_task = None
        try:
            name, subs = parse_hello(await self._readline(reader))
            if name in self._outboxes or name == BROKER_SENDER:
                raise MalformedFrame("hello", f"client {name!r} already connected")
            box = asyncio.Queue()
            self._outboxes[name] = box
            self._subs.extend(Subscription(name, p) for p in subs)
            writer_task = asyncio.ensure_future(self._writer(box, writer))
            while True:
                line = await self._readline(reader)
                if not line:
                    break
                try:
                    event = decode_event(line)
                    if event.sender != name:
                        raise MalformedFrame("sender", f"{event.sender!r} on connection {name!r}")
                    last = self._last_seq.get(name)
                    if last is not None and event.seq <= last:
                        raise MalformedFrame("seq", f"{event.seq} after {last}")
                except EventError as exc:
                    self._monitor("monitor.broker.rejected", {"client": name, "error": str(exc)})
                    continue
                self._last_seq[name] = event.seq
                self._route(event)
        except (MalformedFrame, asyncio.TimeoutError, ValueError, ConnectionError) as exc:
            log.info("closing client %s: %s", name, exc)
            if name is not None:
                self._monitor("monitor.broker.dropped", {"client": name, "error": type(exc).__name__})
        finally:
            if name is not None and name in self._outboxes:
                del self._outboxes[name]
                self._subs = [s for s in self._subs if s.client != name]
                self._last_seq.pop(name, None)
            if writer_task is not None:
                writer_task.cancel()
            writer.close()

    async def _writer(self, box, writer):
        while True:
            frame = await box.get()
            writer.write(frame)
            await writer.drain()


class BrokerClient:
    """Blocking TCP client; sends and receives are each serialised by a lock."""

    def __init__(self, name, subs=(), host="127.0.0.1", port=1932, timeout=10.0):
        self.name = name
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._buf = bytearray()
        self._send_lock = threading.Lock()
        self._recv_lock = threading.Lock()
        self._seq = 0
        self._sock.sendall(hello_line(name, subs))

    def send(self, event: Event):
        with self._send_lock:
            self._sock.sendall(encode_event(event))

    def publish(self, name, params=None, ts=None) -> Event:
        with self._send_lock:
            self._seq += 1
            event = Event.make(name, params, sender=self.name, seq=self._seq,
                               ts=_now_ms() if ts is None else ts)
            self._sock.sendall(encode_event(event))
        return event

    def recv(self, timeout=None) -> Event | None:
        """Next event, or None if none arrives within ``timeout`` seconds."""
        with self._recv_lock:
            deadline = None if timeout is None else time.monotonic() + timeout
            while b"\n" not in self._buf:
                if deadline is not None:
                    left = deadline - time.monotonic()
                    if left <= 0:
                        return None
                    self._sock.settimeout(left)
                else:
                    self._sock.settimeout(None)
                try:
                    chunk = self._sock.recv(65536)
                except (socket.timeout, TimeoutError):
                    return None
                if not chunk:
                    raise ConnectionError("broker closed the connection")
                self._buf.extend(chunk)
            i = self._buf.index(b"\n")
            line = bytes(self._buf[: i + 1])
            del self._buf[: i + 1]
            return decode_event(line)

    def events(self, timeout=None) -> Iterable[Event]:
        while True:
            e = self.recv(timeout)
            if e is None:
                return
            yield e

    def close(self):
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
