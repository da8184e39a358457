"""Round-based negotiation between one session leader and its price takers.

Each round the leader announces a candidate price, waits for one energy
offer from every connected unit, prices the round, and keeps the
cheapest incumbent; after the last candidate it broadcasts the result.
Units only ever see prices and send offers: their preference weight,
generation, and base load never cross the wire.

Wire format (newline-delimited, space-separated ASCII, one message per
line, numbers with 6 decimal places):

    HELLO <ru_id>
    PRICE <round> <price>
    OFFER <round> <ru_id> <kwh>
    EQ <price> <cost>
    ABORT <reason-token>

Two transports implement the same contract: an in-process scheduler
(synchronous, deterministic, with a configurable per-round delivery
order) and a TCP byte stream carrying the line format above. Both keep a
transcript of every line for auditing.

Numbers are quantized to wire resolution when a message is constructed,
so a value always re-reads from its own encoding byte-identically; this
is what lets a socket session reproduce an in-process sweep exactly.
"""

from __future__ import annotations

import math
import queue
import socket
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .core import Scenario, quantize, trade_cost
from .follower import best_response
from .leader import SweepConfig, SweepTrace, price_grid, resolve_sweep

__all__ = [
    "Abort",
    "EnergyOffer",
    "Equilibrium",
    "FollowerLog",
    "FollowerSession",
    "Hello",
    "LeaderView",
    "LocalLeaderTransport",
    "PriceAnnounce",
    "ProtocolError",
    "SessionAbort",
    "SocketFollowerTransport",
    "SocketLeaderTransport",
    "SweepRecorder",
    "decode",
    "encode",
    "run_follower",
    "run_leader",
    "run_local_session",
]


class ProtocolError(Exception):
    """A message violated the wire contract."""


class SessionAbort(ProtocolError):
    """A negotiation session could not complete."""

    def __init__(self, round_index: int, reason: str, detail: str = ""):
        self.round_index = round_index
        self.reason = reason
        self.detail = detail
        msg = f"session aborted at round {round_index}: {reason}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ProtocolError(f"{name} must be finite, got {value!r}")


def _require_index(name: str, value: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise ProtocolError(f"{name} must be a nonnegative integer, got {value!r}")


@dataclass(frozen=True)
class PriceAnnounce:
    round_index: int
    price: float

    def __post_init__(self):
        _require_index("round", self.round_index)
        _require_finite("price", self.price)
        object.__setattr__(self, "price", quantize(self.price))


@dataclass(frozen=True)
class EnergyOffer:
    round_index: int
    ru_id: int
    offer: float

    def __post_init__(self):
        _require_index("round", self.round_index)
        _require_index("ru_id", self.ru_id)
        _require_finite("offer", self.offer)
        offer = quantize(self.offer)
        if offer < 0.0:
            raise ProtocolError(f"offer must be nonnegative, got {offer}")
        object.__setattr__(self, "offer", offer)


@dataclass(frozen=True)
class Equilibrium:
    price: float
    cost: float

    def __post_init__(self):
        _require_finite("price", self.price)
        _require_finite("cost", self.cost)
        object.__setattr__(self, "price", quantize(self.price))
        object.__setattr__(self, "cost", quantize(self.cost))


@dataclass(frozen=True)
class Hello:
    ru_id: int

    def __post_init__(self):
        _require_index("ru_id", self.ru_id)


@dataclass(frozen=True)
class Abort:
    reason: str

    def __post_init__(self):
        if not self.reason or any(ch.isspace() for ch in self.reason):
            raise ProtocolError(f"abort reason must be a single token, got {self.reason!r}")


Message = PriceAnnounce | EnergyOffer | Equilibrium | Hello | Abort


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def encode(msg: Message) -> str:
    """One wire line (without the trailing newline) for a message."""
    if isinstance(msg, PriceAnnounce):
        return f"PRICE {msg.round_index} {_fmt(msg.price)}"
    if isinstance(msg, EnergyOffer):
        return f"OFFER {msg.round_index} {msg.ru_id} {_fmt(msg.offer)}"
    if isinstance(msg, Equilibrium):
        return f"EQ {_fmt(msg.price)} {_fmt(msg.cost)}"
    if isinstance(msg, Hello):
        return f"HELLO {msg.ru_id}"
    if isinstance(msg, Abort):
        return f"ABORT {msg.reason}"
    raise ProtocolError(f"cannot encode {type(msg).__name__}")


def _parse_int(token: str, what: str) -> int:
    try:
        return int(token, 10)
    except ValueError:
        raise ProtocolError(f"bad {what} {token!r}") from None


def _parse_float(token: str, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ProtocolError(f"bad {what} {token!r}") from None
    if not math.isfinite(value):
        raise ProtocolError(f"{what} must be finite, got {token!r}")
    return value


def decode(line: str) -> Message:
    """Parse one wire line; rejects unknown tags, wrong arity, non-finite numbers."""
    parts = line.split()
    if not parts:
        raise ProtocolError("empty line")
    tag, args = parts[0], parts[1:]
    if tag == "PRICE" and len(args) == 2:
        return PriceAnnounce(_parse_int(args[0], "round"), _parse_float(args[1], "price"))
    if tag == "OFFER" and len(args) == 3:
        return EnergyOffer(
            _parse_int(args[0], "round"),
            _parse_int(args[1], "ru_id"),
            _parse_float(args[2], "offer"),
        )
    if tag == "EQ" and len(args) == 2:
        return Equilibrium(_parse_float(args[0], "price"), _parse_float(args[1], "cost"))
    if tag == "HELLO" and len(args) == 1:
        return Hello(_parse_int(args[0], "ru_id"))
    if tag == "ABORT" and len(args) == 1:
        return Abort(args[0])
    raise ProtocolError(f"malformed message {line!r}")


# ---------------------------------------------------------------------------
# follower side


@dataclass
class FollowerLog:
    """What one unit saw during a session."""

    ru_id: int
    rounds: list[tuple[int, float, float]] = field(default_factory=list)  # (round, price, offer)
    final_price: float | None = None
    final_cost: float | None = None
    aborted: str | None = None

    @property
    def done(self) -> bool:
        return self.final_price is not None or self.aborted is not None


class FollowerSession:
    """Transport-independent price-taker state machine.

    Feed it incoming messages; it returns the reply to send (or None).
    Replies carry wire-resolution offers and reveal nothing else.
    """

    def __init__(self, ru):
        self.ru = ru
        self.log = FollowerLog(ru_id=ru.ru_id)
        self._last_round = -1

    def handle(self, msg: Message) -> EnergyOffer | None:
        if self.log.done:
            raise ProtocolError("session already finished")
        if isinstance(msg, PriceAnnounce):
            if msg.round_index <= self._last_round:
                raise ProtocolError(
                    f"round {msg.round_index} not after round {self._last_round}"
                )
            self._last_round = msg.round_index
            br = best_response(self.ru, msg.price)
            reply = EnergyOffer(msg.round_index, self.ru.ru_id, self.ru.e_gen - br.e_star)
            self.log.rounds.append((msg.round_index, msg.price, reply.offer))
            return reply
        if isinstance(msg, Equilibrium):
            self.log.final_price = msg.price
            self.log.final_cost = msg.cost
            return None
        if isinstance(msg, Abort):
            self.log.aborted = msg.reason
            return None
        raise ProtocolError(f"unexpected message {encode(msg)!r}")


def run_follower(ru, transport, *, timeout: float | None = 60.0) -> FollowerLog:
    """Drive one unit's side of a session over a transport.

    Sends HELLO, answers every price with an offer, and returns the log
    once the leader publishes the result (or aborts). Malformed traffic
    raises ProtocolError.
    """
    transport.send(Hello(ru.ru_id))
    session = FollowerSession(ru)
    while not session.log.done:
        msg = transport.recv(timeout)
        reply = session.handle(msg)
        if reply is not None:
            transport.send(reply)
    return session.log


# ---------------------------------------------------------------------------
# leader side


@dataclass(frozen=True)
class LeaderView:
    """Everything the session leader knows: its requirement, grid prices,
    how many units to expect, and the sweep settings. No unit parameters."""

    e_req: float
    grid_sell: float
    grid_buy: float
    n_rus: int
    config: SweepConfig | None = None

    @classmethod
    def from_scenario(cls, scenario: Scenario, config: SweepConfig | None = None):
        return cls(
            e_req=scenario.e_req,
            grid_sell=scenario.grid_sell,
            grid_buy=scenario.grid_buy,
            n_rus=scenario.n_rus,
            config=config,
        )


class SweepRecorder:
    """Accumulates per-round sweep rows; yields a SweepTrace at the end."""

    def __init__(self):
        self._prices = []
        self._offers = []
        self._costs = []
        self._best_prices = []
        self._best_costs = []

    def add(self, price, offers, cost, best_price, best_cost):
        self._prices.append(price)
        self._offers.append(list(offers))
        self._costs.append(cost)
        self._best_prices.append(best_price)
        self._best_costs.append(best_cost)

    def trace(self) -> SweepTrace:
        return SweepTrace(
            prices=np.array(self._prices),
            offers=np.array(self._offers),
            costs=np.array(self._costs),
            best_prices=np.array(self._best_prices),
            best_costs=np.array(self._best_costs),
        )


def run_leader(
    view: LeaderView,
    transport,
    *,
    timeout: float = 5.0,
    recorder: SweepRecorder | None = None,
):
    """Drive the leader's side of a session; returns the market outcome.

    Barrier-synchronised rounds: the next price is announced only after
    every unit's offer for the current round arrived. A missing offer
    aborts the session (reason "timeout") rather than imputing one. The
    returned outcome has no private-side fields; see
    equilibrium.complete_outcome.
    """
    from .equilibrium import EquilibriumOutcome

    try:
        ids = transport.wait_for_peers(view.n_rus, timeout)
    except SessionAbort:
        raise
    except ProtocolError as exc:
        _abort(transport, 0, "protocol", str(exc))
    if len(set(ids)) != len(ids):
        _abort(transport, 0, "duplicate_hello", f"ids {sorted(ids)}")
    if len(ids) != view.n_rus:
        _abort(transport, 0, "missing_peers", f"expected {view.n_rus}, got {sorted(ids)}")
    id_order = sorted(ids)

    lo, hi, step = resolve_sweep(view.config, view.grid_buy, view.grid_sell)
    prices = price_grid(lo, hi, step)

    best_price = 0.0
    best_cost = view.e_req * view.grid_sell  # incumbent starts at the all-grid cost
    best_offers = [0.0] * view.n_rus
    best_total = 0.0
    for round_index, price in enumerate(prices):
        transport.broadcast(PriceAnnounce(round_index, float(price)))
        arrived: dict[int, float] = {}
        deadline = time.monotonic() + timeout
        while len(arrived) < view.n_rus:
            try:
                msg = transport.recv(max(0.0, deadline - time.monotonic()))
            except queue.Empty:
                missing = sorted(set(id_order) - set(arrived))
                _abort(transport, round_index, "timeout", f"no offer from {missing}")
            except ProtocolError as exc:
                _abort(transport, round_index, "malformed", str(exc))
            if not isinstance(msg, EnergyOffer):
                _abort(transport, round_index, "protocol", f"unexpected {encode(msg)!r}")
            if msg.round_index != round_index:
                _abort(transport, round_index, "protocol", f"offer for round {msg.round_index}")
            if msg.ru_id not in ids:
                _abort(transport, round_index, "protocol", f"unknown unit {msg.ru_id}")
            if msg.ru_id in arrived:
                _abort(transport, round_index, "duplicate_offer", f"unit {msg.ru_id}")
            arrived[msg.ru_id] = msg.offer
        offers = [arrived[i] for i in id_order]
        total = 0.0
        for off in offers:  # RU order, left-to-right: the sweep kernels do the same
            total += off
        cost = trade_cost(float(price), total, view.e_req, view.grid_sell)
        if cost <= best_cost:
            best_price = float(price)
            best_cost = cost
            best_offers = offers
            best_total = total
        if recorder is not None:
            recorder.add(float(price), offers, cost, best_price, best_cost)
    transport.broadcast(Equilibrium(best_price, best_cost))
    return EquilibriumOutcome(
        price=best_price,
        offers=tuple(best_offers),
        sfc_cost=best_cost,
        surplus_flag=best_total > view.e_req,
    )


def _abort(transport, round_index: int, reason: str, detail: str = ""):
    try:
        transport.broadcast(Abort(reason))
    except Exception:
        pass
    raise SessionAbort(round_index, reason, detail)


# ---------------------------------------------------------------------------
# in-process transport


class LocalLeaderTransport:
    """Synchronous fan-out to in-process follower sessions.

    Deterministic: each broadcast delivers to every follower immediately
    and queues the replies. `order` permutes per-round reply arrival
    (None for natural order, "reversed", or a callable
    (round_index, n) -> index sequence) so order-independence is testable.
    """

    def __init__(self, followers, *, order=None):
        self._followers = list(followers)
        self._order = order
        self._inbox: list[Message] = []
        self.transcript: list[str] = []

    def wait_for_peers(self, expected: int, timeout: float) -> list[int]:
        # every in-process follower is "connected" by construction
        ids = [s.ru.ru_id for s in self._followers]
        for i in ids:
            self.transcript.append(encode(Hello(i)))
        return ids

    def _delivery_order(self, round_index: int):
        n = len(self._followers)
        if self._order is None:
            return range(n)
        if self._order == "reversed":
            return range(n - 1, -1, -1)
        return self._order(round_index, n)

    def broadcast(self, msg: Message) -> None:
        self.transcript.append(encode(msg))
        if isinstance(msg, PriceAnnounce):
            for idx in self._delivery_order(msg.round_index):
                reply = self._followers[idx].handle(msg)
                if reply is not None:
                    self.transcript.append(encode(reply))
                    self._inbox.append(reply)
        else:
            for session in self._followers:
                if not session.log.done:
                    session.handle(msg)

    def recv(self, timeout: float) -> Message:
        if not self._inbox:
            raise queue.Empty()
        return self._inbox.pop(0)

    def close(self) -> None:
        pass


def run_local_session(
    scenario: Scenario,
    config: SweepConfig | None = None,
    *,
    order=None,
):
    """Run a whole session in-process; returns (outcome, trace, follower logs).

    The outcome and trace must match leader.sweep_price on the same
    scenario exactly; the tests hold both paths to that.
    """
    sessions = [FollowerSession(ru) for ru in scenario.rus]
    transport = LocalLeaderTransport(sessions, order=order)
    recorder = SweepRecorder()
    view = LeaderView.from_scenario(scenario, config)
    outcome = run_leader(view, transport, recorder=recorder)
    return outcome, recorder.trace(), [s.log for s in sessions]


# ---------------------------------------------------------------------------
# socket transport

_ENC = "ascii"


class SocketLeaderTransport:
    """TCP server side: accepts unit connections, fans lines in and out.

    One reader thread per connection pushes decoded messages into a
    single inbox consumed by the leader loop; writes all happen on the
    leader thread. Safe under concurrent connects; per-stream order is
    TCP's.
    """

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self._server = socket.create_server((host, port))
        self.address = self._server.getsockname()
        self._inbox: queue.Queue = queue.Queue()
        self._conns: dict[int, socket.socket] = {}  # ru_id -> socket
        self._lock = threading.Lock()
        self.transcript: list[str] = []
        self._closed = False
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def _accept_loop(self):
        while True:
            try:
                conn, _addr = self._server.accept()
            except OSError:
                return  # server socket closed
            threading.Thread(target=self._reader, args=(conn,), daemon=True).start()

    def _reader(self, conn: socket.socket):
        try:
            with conn.makefile("r", encoding=_ENC, newline="\n") as stream:
                for line in stream:
                    line = line.rstrip("\n")
                    with self._lock:
                        self.transcript.append(line)
                    try:
                        msg = decode(line)
                    except ProtocolError as exc:
                        self._inbox.put(exc)
                        return
                    if isinstance(msg, Hello):
                        with self._lock:
                            if msg.ru_id not in self._conns:
                                self._conns[msg.ru_id] = conn
                        self._inbox.put(("hello", msg.ru_id))
                    else:
                        self._inbox.put(msg)
        except (OSError, ValueError):
            return

    def wait_for_peers(self, expected: int, timeout: float) -> list[int]:
        ids: list[int] = []
        deadline = time.monotonic() + timeout
        while len(ids) < expected:
            try:
                item = self._inbox.get(timeout=max(0.0, deadline - time.monotonic()))
            except queue.Empty:
                return ids
            if isinstance(item, ProtocolError):
                raise item
            if isinstance(item, tuple) and item[0] == "hello":
                ids.append(item[1])  # duplicates stay in: run_leader aborts on them
            else:
                raise ProtocolError(f"message before session start: {item!r}")
        return ids

    def broadcast(self, msg: Message) -> None:
        line = encode(msg)
        with self._lock:
            self.transcript.append(line)
            conns = [self._conns[i] for i in sorted(self._conns)]
        payload = (line + "\n").encode(_ENC)
        for conn in conns:
            try:
                conn.sendall(payload)
            except OSError:
                pass  # a vanished peer surfaces as a missing offer

    def recv(self, timeout: float) -> Message:
        item = self._inbox.get(timeout=timeout)
        if isinstance(item, ProtocolError):
            raise item
        if isinstance(item, tuple):
            raise ProtocolError(f"unexpected {item[0]} mid-session")
        return item

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        with self._lock:
            conns = list(self._conns.values())
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()
        self._server.close()


class SocketFollowerTransport:
    """TCP client side of the line protocol.

    `send_delay` sleeps before each outgoing offer, simulating link
    latency; it shuffles arrival order at the leader without changing
    any message content.
    """

    def __init__(self, host: str, port: int, *, send_delay: float = 0.0):
        self._sock = socket.create_connection((host, port))
        self._stream = self._sock.makefile("r", encoding=_ENC, newline="\n")
        self._send_delay = send_delay
        self.transcript: list[str] = []

    def send(self, msg: Message) -> None:
        if self._send_delay > 0.0 and isinstance(msg, EnergyOffer):
            time.sleep(self._send_delay)
        line = encode(msg)
        self.transcript.append(line)
        self._sock.sendall((line + "\n").encode(_ENC))

    def recv(self, timeout: float | None) -> Message:
        self._sock.settimeout(timeout)
        line = self._stream.readline()
        if not line:
            raise ProtocolError("connection closed by leader")
        line = line.rstrip("\n")
        self.transcript.append(line)
        return decode(line)

    def close(self) -> None:
        try:
            self._stream.close()
        finally:
            self._sock.close()
