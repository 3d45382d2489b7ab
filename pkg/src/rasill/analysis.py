"""Potential a client must hold to drive a store through a script of operations.

A store of size ``n`` offers ``ins^i(n) : A -o^a store[n+1]`` and
``del^d : +{ none^p : 1^e, some^s : A *^t store[n-1] }``. The client pays
the annotations of every message it sends and is refunded those it
receives, which gives the recurrence computed by :func:`client_potential`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

INS, DEL = "ins", "del"


@dataclass(frozen=True)
class StoreAnnotations:
    """Annotations of a store interface. ``i`` maps the current size to a natural."""

    i: Callable[[int], int] | int = 0
    a: int = 0
    d: int = 0
    p: int = 0
    e: int = 0
    s: int = 0
    t: int = 0

    def ins_cost(self, n: int) -> int:
        return self.i(n) if callable(self.i) else self.i

    @classmethod
    def stack(cls) -> "StoreAnnotations":
        return cls(d=2)

    @classmethod
    def queue(cls) -> "StoreAnnotations":
        return cls(i=_twice, d=2)

    @classmethod
    def functional_queue(cls) -> "StoreAnnotations":
        return cls(i=6, d=2)


def _twice(n: int) -> int:
    return 2 * n


PRESETS = {
    "stack": StoreAnnotations.stack,
    "queue": StoreAnnotations.queue,
    "fqueue": StoreAnnotations.functional_queue,
}


@dataclass(frozen=True)
class ClientScript:
    ops: tuple[str, ...]
    start_size: int = 0

    def __post_init__(self):
        bad = [o for o in self.ops if o not in (INS, DEL)]
        if bad:
            raise ValueError(f"unknown operations {bad}")

    @classmethod
    def parse(cls, text: str, start_size: int = 0) -> "ClientScript":
        """Read ``"ins ins del"`` or the compact ``"iid"``."""
        words = text.replace(",", " ").split()
        if len(words) == 1 and set(words[0]) <= {"i", "d"} and words[0] not in (INS, DEL):
            words = [INS if ch == "i" else DEL for ch in words[0]]
        return cls(tuple(words), start_size)

    def effective(self) -> list[tuple[str, int]]:
        """Operations that actually reach the store, each with the size it sees.

        A del on the empty store closes it, so the script ends there.
        """
        out, n = [], self.start_size
        for op in self.ops:
            out.append((op, n))
            if op == INS:
                n += 1
            elif n == 0:
                break
            else:
                n -= 1
        return out

    def final_size(self) -> int:
        n = self.start_size
        for op, size in self.effective():
            n = size + 1 if op == INS else max(0, size - 1)
        return n

    def truncated(self) -> bool:
        return any(op == DEL and n == 0 for op, n in self.effective())


def ell1(m: int, n: int = 0) -> ClientScript:
    """``m`` inserts followed by ``m`` deletes."""
    return ClientScript((INS,) * m + (DEL,) * m, n)


def ell2(m: int, n: int = 0) -> ClientScript:
    """``m`` alternating insert/delete pairs."""
    return ClientScript((INS, DEL) * m, n)


def client_potential(ann: StoreAnnotations, script: ClientScript) -> int:
    """Evaluate the potential recurrence from the back of the script.

    A step whose refund exceeds its price would make the suffix negative;
    such values are clamped at zero since a client cannot hold debt.
    """
    total = 0
    for op, n in reversed(script.effective()):
        if op == INS:
            total += ann.ins_cost(n) + ann.a
        elif n > 0:
            total += ann.d - ann.s - ann.t
        else:
            total = max(0, ann.d - ann.p - ann.e)
        total = max(0, total)
    return total


@dataclass(frozen=True)
class Comparison:
    potential_a: int
    potential_b: int

    @property
    def ordering(self) -> str:
        if self.potential_a < self.potential_b:
            return "Less"
        if self.potential_a > self.potential_b:
            return "Greater"
        return "Equal"

    @property
    def cheaper(self) -> str | None:
        return {"Less": "A", "Greater": "B"}.get(self.ordering)

    def to_json(self) -> dict:
        return {"a": self.potential_a, "b": self.potential_b, "ordering": self.ordering}


def compare_clients(ann: StoreAnnotations, a: ClientScript, b: ClientScript) -> Comparison:
    return Comparison(client_potential(ann, a), client_potential(ann, b))


def table(presets: Sequence[str], scripts: dict[str, ClientScript]) -> list[dict]:
    """Potential of every script against every preset store."""
    return [
        {"store": name, "script": label, "potential": client_potential(PRESETS[name](), sc)}
        for name in presets
        for label, sc in scripts.items()
    ]
