"""Environment plus walkers, advanced by the merged-Poisson event scheme.

Simultaneous events have probability zero; should a replayed log ever carry
equal timestamps, a refresh is ordered before a walker ring.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..params import Params
from . import kernels as K
from .environment import DEBUG, Environment


@dataclass
class Censored:
    """A stopping time that did not occur before ``t_cap``."""

    t_cap: float

    def __float__(self):
        return float("inf")


class EventLog:
    """Ordered record of (time, event) pairs.

    ``kind`` is 0 for an edge refresh ``(u, v, new_state)`` and 1 for a walker
    ring ``(walker, target, moved)``.
    """

    KIND_NAMES = {K.KIND_REFRESH: "refresh", K.KIND_RING: "ring"}

    def __init__(self, time=(), kind=(), arg1=(), arg2=(), arg3=()):
        self.time = np.asarray(time, dtype=np.float64)
        self.kind = np.asarray(kind, dtype=np.int64)
        self.arg1 = np.asarray(arg1, dtype=np.int64)
        self.arg2 = np.asarray(arg2, dtype=np.int64)
        self.arg3 = np.asarray(arg3, dtype=np.int64)

    def __len__(self):
        return int(self.time.size)

    def extend(self, other: "EventLog") -> None:
        for name in ("time", "kind", "arg1", "arg2", "arg3"):
            setattr(self, name, np.concatenate([getattr(self, name), getattr(other, name)]))

    def events(self):
        for t, k, a, b, c in zip(self.time.tolist(), self.kind.tolist(), self.arg1.tolist(),
                                 self.arg2.tolist(), self.arg3.tolist()):
            if k == K.KIND_REFRESH:
                yield t, ("EdgeRefresh", (a, b), c)
            else:
                yield t, ("WalkerRing", a, b, bool(c))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "event_kind", "arg1", "arg2", "arg3"])
        for t, k, a, b, c in zip(self.time.tolist(), self.kind.tolist(), self.arg1.tolist(),
                                 self.arg2.tolist(), self.arg3.tolist()):
            w.writerow([repr(t), self.KIND_NAMES[k], a, b, c])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EventLog":
        names = {v: k for k, v in cls.KIND_NAMES.items()}
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        if rows and rows[0][0] == "time":
            rows = rows[1:]
        cols = list(zip(*rows)) if rows else [(), (), (), (), ()]
        return cls(
            [float(x) for x in cols[0]],
            [names[x] for x in cols[1]],
            [int(x) for x in cols[2]],
            [int(x) for x in cols[3]],
            [int(x) for x in cols[4]],
        )


def replay(env0: Environment, positions0, log: EventLog) -> tuple[Environment, np.ndarray]:
    """Re-apply ``log`` to a copy of the initial state and return the result."""
    env = env0.copy()
    pos = np.array(positions0, dtype=np.int64)
    bad = K.replay_kernel(env.adj, env.deg, env.counts, pos, log.kind, log.arg1, log.arg2, log.arg3)
    if bad:
        raise ValueError(f"log inconsistent with initial state at {bad} ring events")
    if len(log):
        env.clock = float(log.time[-1])
    return env, pos


# --- predicates ----------------------------------------------------------------
@dataclass(frozen=True)
class Predicate:
    kind: str
    args: tuple = ()


def walker_isolated(i: int = 0) -> Predicate:
    return Predicate("walker_isolated", (i,))


def both_isolated(i: int = 0, j: int = 1) -> Predicate:
    return Predicate("both_isolated", (i, j))


def walker_in_giant(i: int = 0) -> Predicate:
    return Predicate("walker_in_giant", (i,))


def walker_out_of_giant(i: int = 0) -> Predicate:
    return Predicate("walker_out_of_giant", (i,))


def environments_equal(target: Environment) -> Predicate:
    """Holds once the environment coincides edge-for-edge with ``target``."""
    return Predicate("environments_equal", (target,))


def custom(fn) -> Predicate:
    """``fn(system) -> bool``, evaluated after every event (slow path)."""
    return Predicate("custom", (fn,))


@dataclass(frozen=True)
class WalkerState:
    id: int
    position: int


class System:
    """An environment with ``w`` walkers and a private random generator."""

    def __init__(self, params: Params, env: Environment, positions, rng: np.random.Generator):
        self.params = params
        self.env = env
        self.pos = np.array(positions, dtype=np.int64).reshape(-1)
        if self.pos.size and (self.pos.min() < 0 or self.pos.max() >= params.n):
            raise ValueError("walker position out of range")
        self.rng = rng
        self.n_events = np.zeros(2, dtype=np.int64)

    @property
    def clock(self) -> float:
        return self.env.clock

    @property
    def walkers(self) -> int:
        return int(self.pos.size)

    def walker_states(self) -> list[WalkerState]:
        return [WalkerState(i, int(x)) for i, x in enumerate(self.pos)]

    def copy_state(self):
        return self.env.copy(), self.pos.copy()

    def _run(self, t_end, code=K.STOP_NONE, a=0, b=0, target=None, log=False, log_chunk=1 << 16):
        if t_end < self.env.clock:
            raise ValueError(f"t_end={t_end} precedes current clock {self.env.clock}")
        env = self.env
        if target is None:
            target = np.zeros((1, 1), dtype=np.uint8)
            diff = np.zeros(1, dtype=np.int64)
        else:
            diff = np.array([int(np.count_nonzero(env.adj != target)) // 2], dtype=np.int64)
        chunks = []
        cap = log_chunk if log else 1
        while True:
            lt = np.empty(cap, np.float64)
            lk = np.empty(cap, np.int64)
            la = np.empty(cap, np.int64)
            lb = np.empty(cap, np.int64)
            lc = np.empty(cap, np.int64)
            clock, nlog, status = K.advance_kernel(
                env.adj, env.deg, env.counts, self.pos, env.clock, float(t_end),
                float(self.params.mu), float(self.params.p), self.rng,
                code, a, b, target, diff, lt, lk, la, lb, lc, bool(log), self.n_events,
            )
            env.clock = float(clock)
            if log and nlog:
                chunks.append(EventLog(lt[:nlog], lk[:nlog], la[:nlog], lb[:nlog], lc[:nlog]))
            if status != K.LOG_FULL:
                break
        if DEBUG:
            env.check()
        out = EventLog()
        for c in chunks:
            out.extend(c)
        return status, out

    def advance(self, t_end: float, log: bool = False) -> EventLog | None:
        """Advance to time ``t_end``; return the event log when requested."""
        _, out = self._run(t_end, log=log)
        return out if log else None

    def run_until(self, predicate: Predicate, t_cap: float, log: bool = False):
        """First event time at which ``predicate`` holds, else ``Censored``.

        Returns ``(stop_time_or_Censored, log_or_None)``; the system is left at
        the stop time (or at ``t_cap``).
        """
        kind, args = predicate.kind, predicate.args
        if kind == "both_isolated" and (self.walkers < 2 or args[0] == args[1]):
            raise ValueError("predicate arity mismatch: both_isolated needs two distinct walkers")
        for i in args if kind in ("walker_isolated", "both_isolated", "walker_in_giant",
                                  "walker_out_of_giant") else ():
            if not 0 <= i < self.walkers:
                raise ValueError(f"predicate {kind} refers to walker {i}, "
                                 f"but only {self.walkers} walker(s) registered")

        if kind == "custom":
            fn = args[0]
            full = EventLog()
            if fn(self):
                return self.env.clock, (full if log else None)
            while True:
                status, out = self._run(t_cap, K.STOP_EVERY_EVENT, log=log, log_chunk=1)
                if log:
                    full.extend(out)
                if status == K.REACHED_END:
                    return Censored(t_cap), (full if log else None)
                if fn(self):
                    return self.env.clock, (full if log else None)

        codes = {
            "walker_isolated": K.STOP_WALKER_ISOLATED,
            "both_isolated": K.STOP_BOTH_ISOLATED,
            "walker_in_giant": K.STOP_WALKER_IN_GIANT,
            "walker_out_of_giant": K.STOP_WALKER_OUT_OF_GIANT,
            "environments_equal": K.STOP_ENV_EQUALS,
        }
        if kind not in codes:
            raise ValueError(f"unknown predicate {kind!r}")
        target = None
        a = b = 0
        if kind == "environments_equal":
            target = args[0].adj
            if target.shape != self.env.adj.shape:
                raise ValueError("environments differ in n")
        else:
            a = args[0]
            b = args[1] if len(args) > 1 else 0
        status, out = self._run(t_cap, codes[kind], a, b, target, log=log)
        stop = self.env.clock if status == K.PREDICATE_MET else Censored(t_cap)
        return stop, (out if log else None)


def make_system(params: Params, env: Environment, positions, seed_or_rng) -> System:
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else np.random.default_rng(seed_or_rng)
    return System(params, env, positions, rng)
