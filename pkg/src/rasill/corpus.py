"""Bundled example programs and generated store clients."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable

from .analysis import DEL, INS, PRESETS, ClientScript, StoreAnnotations, client_potential
from .core import Signature
from .parser import parse_program

CORPUS_FILES = (
    "counter", "stack", "queue", "fqueue", "clients", "list", "map", "fold",
    "bad_b1", "bad_queue", "empty",
)
NEGATIVE = ("bad_b1", "bad_queue")


def corpus_path(name: str):
    return resources.files("rasill") / "corpus" / f"{name}.rsill"


def corpus_text(name: str) -> str:
    return corpus_path(name).read_text(encoding="utf-8")


def load(name: str) -> Signature:
    return parse_program(corpus_text(name))


@dataclass(frozen=True)
class Store:
    """How to name, build and grow one store implementation in client code."""

    file: str
    preset: str
    type_at: Callable[[int], str]
    empty: str
    elem_at: Callable[[int], str] | None  # spawn head for the k-th element; None if unsupported

    def annotations(self) -> StoreAnnotations:
        return PRESETS[self.preset]()

    def build(self, size: int, prefix: str) -> tuple[list[str], str]:
        """Spawn lines creating a store of ``size`` elements at zero potential."""
        if size and self.elem_at is None:
            raise ValueError(f"{self.file} stores cannot be prefilled")
        lines = [f"{prefix}0 <- spawn {self.empty}[]();"]
        for k in range(1, size + 1):
            lines.append(f"{prefix}x{k} <- spawn mk_item[]();")
            lines.append(f"{prefix}{k} <- spawn {self.elem_at(k)}({prefix}x{k}, {prefix}{k - 1});")
        return lines, f"{prefix}{size}"


STORES = {
    "stack": Store("stack", "stack", lambda n: "stack", "stack_empty", lambda k: "stack_elem[]"),
    "queue": Store("queue", "queue", lambda n: f"queue[{n}]", "queue_empty",
                   lambda k: f"queue_elem[{k}]"),
    "fqueue": Store("fqueue", "fqueue", lambda n: "fq", "fq_empty", None),
}


def client_source(store: str, script: ClientScript, name: str = "client") -> str:
    """A cost-free main that drives ``store`` through ``script``.

    It is declared with exactly the potential the script requires and ends
    by handing the store to the environment, so the run finishes idle with
    every message it caused counted as store work. Branches the script can
    never take rebuild a store of the final size at zero potential.
    """
    st = STORES[store]
    final = script.final_size()
    phi = client_potential(st.annotations(), script)
    prefill, s = st.build(script.start_size, "p")
    lines = [f"proc costfree {name} [] |{phi}| () -> (d : {st.type_at(final)}) ="]
    lines += ["  " + line for line in prefill]
    depth = 0

    def pad() -> str:
        return "  " + "    " * depth

    for k, (op, n) in enumerate(script.effective(), start=1):
        if op == INS:
            lines.append(f"{pad()}{s}.ins; y{k} <- spawn mk_item[](); send {s} y{k};")
            continue
        lines.append(f"{pad()}{s}.del;")
        lines.append(f"{pad()}case {s} {{")
        if n == 0:
            # the store answers none and closes; hand over a fresh empty one
            lines.append(f"{pad()}  none => wait {s}; e <- spawn {st.empty}[](); fwd d e")
            lines.append(f"{pad()}| some => y{k} <- recv {s}; wait y{k}; fwd d {s}")
            lines.append(f"{pad()}}}")
            break
        rebuild, r = st.build(final, "r") if st.elem_at else _fresh_store(st)
        lines.append(f"{pad()}  none => wait {s}; {' '.join(rebuild)} fwd d {r}")
        lines.append(f"{pad()}| some => y{k} <- recv {s}; wait y{k};")
        depth += 1
    else:
        lines.append(f"{pad()}fwd d {s}")
    while depth:
        depth -= 1
        lines.append(f"{pad()}}}")
    return "\n".join(lines) + "\n"


def _fresh_store(st: Store) -> tuple[list[str], str]:
    # unindexed stores can stand in with an empty one in unreachable branches
    return [f"r0 <- spawn {st.empty}[]();"], "r0"


@lru_cache(maxsize=None)
def _store_signature(file: str) -> Signature:
    return load(file)


def client_program(store: str, script: ClientScript, name: str = "client") -> Signature:
    client = parse_program(client_source(store, script, name), validate=False)
    sig = _store_signature(STORES[store].file).merged(client)
    sig.validate()
    return sig


def all_scripts(max_len: int):
    """Every ins/del script of length 0..max_len."""
    from itertools import product

    for length in range(max_len + 1):
        for ops in product((INS, DEL), repeat=length):
            yield ops
