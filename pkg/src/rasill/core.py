"""Abstract syntax, potential arithmetic and equirecursive type operations.

Every node is a frozen dataclass, so syntax trees are hashable, comparable
and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union

from .errors import DomainViolation, UnboundIndexVar, UnknownType

# --------------------------------------------------------------------------
# potential / index expressions


@dataclass(frozen=True)
class Const:
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("potential constants are naturals")


@dataclass(frozen=True)
class IVar:
    name: str


@dataclass(frozen=True)
class Add:
    left: "PotExpr"
    right: "PotExpr"


@dataclass(frozen=True)
class Sub:
    """Truncated subtraction: ``max(0, left - right)``."""

    left: "PotExpr"
    right: "PotExpr"


@dataclass(frozen=True)
class Mul:
    left: "PotExpr"
    right: "PotExpr"


@dataclass(frozen=True)
class CLog:
    """``ceil(log2(arg + 1))``, the number of bits needed to write ``arg``."""

    arg: "PotExpr"


PotExpr = Union[Const, IVar, Add, Sub, Mul, CLog]

ZERO = Const(0)


def clog(n: int) -> int:
    # ceil(log2(n+1)) == bit length of n for every natural n
    return n.bit_length()


def eval_pot(e: PotExpr, env: Mapping[str, int] | None = None) -> int:
    env = env or {}
    match e:
        case Const(v):
            return v
        case IVar(name):
            try:
                return env[name]
            except KeyError:
                raise UnboundIndexVar(name) from None
        case Add(l, r):
            return eval_pot(l, env) + eval_pot(r, env)
        case Sub(l, r):
            return max(0, eval_pot(l, env) - eval_pot(r, env))
        case Mul(l, r):
            return eval_pot(l, env) * eval_pot(r, env)
        case CLog(a):
            return clog(eval_pot(a, env))
    raise TypeError(f"not a potential expression: {e!r}")


def pot_vars(e: PotExpr) -> set[str]:
    match e:
        case Const():
            return set()
        case IVar(name):
            return {name}
        case Add(l, r) | Sub(l, r) | Mul(l, r):
            return pot_vars(l) | pot_vars(r)
        case CLog(a):
            return pot_vars(a)
    raise TypeError(f"not a potential expression: {e!r}")


def close_pot(e: PotExpr, env: Mapping[str, int]) -> Const:
    return Const(eval_pot(e, env))


_PREC = {Add: 1, Sub: 1, Mul: 2}


def show_pot(e: PotExpr, prec: int = 0) -> str:
    """Render in surface syntax, parenthesising exactly enough to reparse."""
    match e:
        case Const(v):
            return str(v)
        case IVar(name):
            return name
        case CLog(a):
            return f"clog({show_pot(a)})"
        case Add(l, r) | Sub(l, r) | Mul(l, r):
            p = _PREC[type(e)]
            op = {Add: "+", Sub: "-", Mul: "*"}[type(e)]
            text = f"{show_pot(l, p)} {op} {show_pot(r, p + 1)}"
            return f"({text})" if p < prec else text
    raise TypeError(f"not a potential expression: {e!r}")


def show_pot_atom(e: PotExpr) -> str:
    """Render for a superscript position, where only atoms are unambiguous."""
    if isinstance(e, (Const, IVar, CLog)):
        return show_pot(e)
    return f"({show_pot(e)})"


@dataclass(frozen=True)
class Constraint:
    lhs: PotExpr
    op: str  # one of >=, <=, ==
    rhs: PotExpr

    def holds(self, env: Mapping[str, int]) -> bool:
        a, b = eval_pot(self.lhs, env), eval_pot(self.rhs, env)
        return {">=": a >= b, "<=": a <= b, "==": a == b}[self.op]

    def __str__(self) -> str:
        return f"{show_pot(self.lhs)} {self.op} {show_pot(self.rhs)}"


def check_domain(name: str, domain: tuple[Constraint, ...], env: Mapping[str, int]) -> None:
    for c in domain:
        if not c.holds(env):
            raise DomainViolation(name, dict(env), str(c))


# --------------------------------------------------------------------------
# session types


@dataclass(frozen=True)
class TVar:
    name: str
    args: tuple[PotExpr, ...] = ()


@dataclass(frozen=True)
class IChoice:
    branches: tuple[tuple[str, PotExpr, "SType"], ...]

    def __post_init__(self):
        _check_branches(self.branches)

    def branch(self, label: str) -> tuple[PotExpr, "SType"] | None:
        for lab, pot, cont in self.branches:
            if lab == label:
                return pot, cont
        return None

    def labels(self) -> list[str]:
        return [b[0] for b in self.branches]


@dataclass(frozen=True)
class EChoice:
    branches: tuple[tuple[str, PotExpr, "SType"], ...]

    def __post_init__(self):
        _check_branches(self.branches)

    branch = IChoice.branch
    labels = IChoice.labels


@dataclass(frozen=True)
class Tensor:
    pot: PotExpr
    payload: "SType"
    cont: "SType"


@dataclass(frozen=True)
class Lolli:
    pot: PotExpr
    payload: "SType"
    cont: "SType"


@dataclass(frozen=True)
class One:
    pot: PotExpr = ZERO


SType = Union[TVar, IChoice, EChoice, Tensor, Lolli, One]


def _check_branches(branches) -> None:
    if not branches:
        raise ValueError("a choice needs at least one label")
    labels = [b[0] for b in branches]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate labels in choice: {labels}")


def map_type_pots(t: SType, f) -> SType:
    """Apply ``f`` to every potential/index expression inside ``t``."""
    match t:
        case TVar(name, args):
            return TVar(name, tuple(f(a) for a in args))
        case IChoice(bs):
            return IChoice(tuple((l, f(p), map_type_pots(c, f)) for l, p, c in bs))
        case EChoice(bs):
            return EChoice(tuple((l, f(p), map_type_pots(c, f)) for l, p, c in bs))
        case Tensor(p, a, b):
            return Tensor(f(p), map_type_pots(a, f), map_type_pots(b, f))
        case Lolli(p, a, b):
            return Lolli(f(p), map_type_pots(a, f), map_type_pots(b, f))
        case One(p):
            return One(f(p))
    raise TypeError(f"not a session type: {t!r}")


def instantiate(t: SType, env: Mapping[str, int]) -> SType:
    """Evaluate every index/potential expression of ``t``, giving a closed type."""
    return map_type_pots(t, lambda e: close_pot(e, env))


def type_vars(t: SType) -> Iterator[TVar]:
    match t:
        case TVar():
            yield t
        case IChoice(bs) | EChoice(bs):
            for _, _, c in bs:
                yield from type_vars(c)
        case Tensor(_, a, b) | Lolli(_, a, b):
            yield from type_vars(a)
            yield from type_vars(b)


def type_index_vars(t: SType) -> set[str]:
    out: set[str] = set()
    map_type_pots(t, lambda e: out.update(pot_vars(e)) or e)
    return out


def show_type(t: SType, prec: int = 0) -> str:
    """Surface syntax. ``*^q`` and ``-o^q`` associate to the right."""
    match t:
        case TVar(name, args):
            if not args:
                return name
            return f"{name}[{', '.join(show_pot(a) for a in args)}]"
        case IChoice(bs) | EChoice(bs):
            sigil = "+" if isinstance(t, IChoice) else "&"
            inner = ", ".join(f"{l}^{show_pot_atom(p)} : {show_type(c)}" for l, p, c in bs)
            return f"{sigil}{{ {inner} }}"
        case Tensor(p, a, b) | Lolli(p, a, b):
            op = "*" if isinstance(t, Tensor) else "-o"
            text = f"{show_type(a, 1)} {op}^{show_pot_atom(p)} {show_type(b, 0)}"
            return f"({text})" if prec > 0 else text
        case One(p):
            return f"1^{show_pot_atom(p)}"
    raise TypeError(f"not a session type: {t!r}")


# --------------------------------------------------------------------------
# process expressions


@dataclass(frozen=True)
class Spawn:
    def_name: str
    index_args: tuple[PotExpr, ...]
    chan_args: tuple[str, ...]
    bind: str
    cont: "ProcExpr"


@dataclass(frozen=True)
class Fwd:
    provided: str
    used: str


@dataclass(frozen=True)
class SendLabel:
    chan: str
    label: str
    cont: "ProcExpr"


@dataclass(frozen=True)
class CaseRecv:
    chan: str
    branches: tuple[tuple[str, "ProcExpr"], ...]

    def branch(self, label: str) -> "ProcExpr | None":
        for lab, p in self.branches:
            if lab == label:
                return p
        return None


@dataclass(frozen=True)
class SendChan:
    chan: str
    payload: str
    cont: "ProcExpr"


@dataclass(frozen=True)
class RecvChan:
    chan: str
    bind: str
    cont: "ProcExpr"


@dataclass(frozen=True)
class Close:
    chan: str


@dataclass(frozen=True)
class Wait:
    chan: str
    cont: "ProcExpr"


ProcExpr = Union[Spawn, Fwd, SendLabel, CaseRecv, SendChan, RecvChan, Close, Wait]


def free_channels(p: ProcExpr) -> set[str]:
    match p:
        case Spawn(_, _, chans, bind, cont):
            return set(chans) | (free_channels(cont) - {bind})
        case Fwd(a, b):
            return {a, b}
        case SendLabel(c, _, cont) | Wait(c, cont):
            return {c} | free_channels(cont)
        case CaseRecv(c, bs):
            out = {c}
            for _, q in bs:
                out |= free_channels(q)
            return out
        case SendChan(c, w, cont):
            return {c, w} | free_channels(cont)
        case RecvChan(c, y, cont):
            return {c} | (free_channels(cont) - {y})
        case Close(c):
            return {c}
    raise TypeError(f"not a process expression: {p!r}")


def rename(p: ProcExpr, sub: Mapping[str, str]) -> ProcExpr:
    """Capture-avoiding renaming of free channel names."""
    if not sub:
        return p
    r = lambda c: sub.get(c, c)  # noqa: E731
    match p:
        case Spawn(x, idx, chans, bind, cont):
            inner = {k: v for k, v in sub.items() if k != bind}
            if bind in sub.values():
                raise ValueError(f"renaming would capture {bind!r}")
            return Spawn(x, idx, tuple(r(c) for c in chans), bind, rename(cont, inner))
        case Fwd(a, b):
            return Fwd(r(a), r(b))
        case SendLabel(c, l, cont):
            return SendLabel(r(c), l, rename(cont, sub))
        case CaseRecv(c, bs):
            return CaseRecv(r(c), tuple((l, rename(q, sub)) for l, q in bs))
        case SendChan(c, w, cont):
            return SendChan(r(c), r(w), rename(cont, sub))
        case RecvChan(c, y, cont):
            inner = {k: v for k, v in sub.items() if k != y}
            if y in sub.values():
                raise ValueError(f"renaming would capture {y!r}")
            return RecvChan(r(c), y, rename(cont, inner))
        case Close(c):
            return Close(r(c))
        case Wait(c, cont):
            return Wait(r(c), rename(cont, sub))
    raise TypeError(f"not a process expression: {p!r}")


def proc_index_exprs(p: ProcExpr) -> Iterator[PotExpr]:
    match p:
        case Spawn(_, idx, _, _, cont):
            yield from idx
            yield from proc_index_exprs(cont)
        case SendLabel(_, _, cont) | SendChan(_, _, cont) | RecvChan(_, _, cont) | Wait(_, cont):
            yield from proc_index_exprs(cont)
        case CaseRecv(_, bs):
            for _, q in bs:
                yield from proc_index_exprs(q)


def proc_spawns(p: ProcExpr) -> Iterator[Spawn]:
    match p:
        case Spawn(_, _, _, _, cont):
            yield p
            yield from proc_spawns(cont)
        case SendLabel(_, _, cont) | SendChan(_, _, cont) | RecvChan(_, _, cont) | Wait(_, cont):
            yield from proc_spawns(cont)
        case CaseRecv(_, bs):
            for _, q in bs:
                yield from proc_spawns(q)


# --------------------------------------------------------------------------
# definitions and signatures


@dataclass(frozen=True)
class TypeDef:
    name: str
    index_params: tuple[str, ...]
    domain: tuple[Constraint, ...]
    body: SType

    def __post_init__(self):
        if isinstance(self.body, TVar):
            raise ValueError(f"type {self.name} is not contractive")


STANDARD = "standard"
COSTFREE = "costfree"


@dataclass(frozen=True)
class ProcDef:
    name: str
    index_params: tuple[str, ...]
    domain: tuple[Constraint, ...]
    potential: PotExpr
    uses: tuple[tuple[str, SType], ...]
    provides: tuple[str, SType]
    cost_mode: str
    body: ProcExpr

    def __post_init__(self):
        if self.cost_mode not in (STANDARD, COSTFREE):
            raise ValueError(f"bad cost mode {self.cost_mode!r}")
        names = [c for c, _ in self.uses] + [self.provides[0]]
        if len(set(names)) != len(names):
            raise ValueError(f"{self.name}: channel parameters must be distinct")
        free = pot_vars(self.potential)
        for _, t in list(self.uses) + [self.provides]:
            free |= type_index_vars(t)
        for c in self.domain:
            free |= pot_vars(c.lhs) | pot_vars(c.rhs)
        for e in proc_index_exprs(self.body):
            free |= pot_vars(e)
        unbound = free - set(self.index_params)
        if unbound:
            raise ValueError(f"{self.name}: unbound index variables {sorted(unbound)}")


@dataclass
class Signature:
    type_defs: dict[str, TypeDef] = field(default_factory=dict)
    proc_defs: dict[str, ProcDef] = field(default_factory=dict)

    def type_def(self, name: str) -> TypeDef:
        try:
            return self.type_defs[name]
        except KeyError:
            raise UnknownType(name) from None

    def merged(self, other: "Signature") -> "Signature":
        dup = (self.type_defs.keys() & other.type_defs.keys()) | (
            self.proc_defs.keys() & other.proc_defs.keys()
        )
        dup = {n for n in dup if self.type_defs.get(n) != other.type_defs.get(n)
               or self.proc_defs.get(n) != other.proc_defs.get(n)}
        if dup:
            raise ValueError(f"conflicting definitions: {sorted(dup)}")
        return Signature({**self.type_defs, **other.type_defs}, {**self.proc_defs, **other.proc_defs})

    def main_candidates(self) -> list[str]:
        return [d.name for d in self.proc_defs.values() if not d.uses and not d.index_params]

    def validate(self) -> None:
        """Check that every type/process reference resolves with the right arity."""
        from .errors import ArityError, UnknownProcess

        def check_type(t: SType, where: str) -> None:
            for v in type_vars(t):
                td = self.type_def(v.name)
                if len(v.args) != len(td.index_params):
                    raise ArityError(
                        f"{where}: {v.name} expects {len(td.index_params)} indices, got {len(v.args)}"
                    )

        for td in self.type_defs.values():
            check_type(td.body, f"type {td.name}")
        for pd in self.proc_defs.values():
            for _, t in list(pd.uses) + [pd.provides]:
                check_type(t, f"proc {pd.name}")
            for sp in proc_spawns(pd.body):
                callee = self.proc_defs.get(sp.def_name)
                if callee is None:
                    raise UnknownProcess(sp.def_name)
                if len(sp.index_args) != len(callee.index_params):
                    raise ArityError(f"proc {pd.name}: {sp.def_name} expects "
                                     f"{len(callee.index_params)} indices, got {len(sp.index_args)}")
                if len(sp.chan_args) != len(callee.uses):
                    raise ArityError(f"proc {pd.name}: {sp.def_name} expects "
                                     f"{len(callee.uses)} channels, got {len(sp.chan_args)}")


@dataclass(frozen=True)
class Metric:
    label_cost: int = 1
    channel_cost: int = 1
    close_cost: int = 1

    @classmethod
    def standard(cls) -> "Metric":
        return cls(1, 1, 1)

    @classmethod
    def costfree(cls) -> "Metric":
        return cls(0, 0, 0)

    def for_mode(self, cost_mode: str) -> "Metric":
        return Metric.costfree() if cost_mode == COSTFREE else self


# --------------------------------------------------------------------------
# equirecursive operations


def unfold(t: SType, sig: Signature, env: Mapping[str, int] | None = None) -> SType:
    """Replace a type variable by its (closed) definition; other types pass through."""
    if not isinstance(t, TVar):
        return t
    td = sig.type_def(t.name)
    if len(t.args) != len(td.index_params):
        from .errors import ArityError

        raise ArityError(f"{t.name} expects {len(td.index_params)} indices, got {len(t.args)}")
    values = {p: eval_pot(a, env) for p, a in zip(td.index_params, t.args)}
    check_domain(t.name, td.domain, values)
    return instantiate(td.body, values)


def unfold_all(t: SType, sig: Signature) -> SType:
    """Unfold a closed type until its head is a structural constructor."""
    # contractive definitions guarantee a single step suffices
    return unfold(t, sig)


EQUALITY_BUDGET = 100_000


def type_equal(a: SType, b: SType, sig: Signature) -> bool:
    """Coinductive equality of closed types.

    Pairs already under comparison are assumed equal. Index families whose
    comparison keeps producing fresh instances would not terminate; after
    ``EQUALITY_BUDGET`` visited pairs the answer is a conservative ``False``.
    """
    visited: set[tuple[SType, SType]] = set()
    work: list[tuple[SType, SType]] = [(a, b)]
    while work:
        x, y = work.pop()
        if x == y or (x, y) in visited:
            continue
        visited.add((x, y))
        if len(visited) > EQUALITY_BUDGET:
            return False
        x, y = unfold(x, sig), unfold(y, sig)
        if type(x) is not type(y):
            return False
        match x:
            case IChoice(bs) | EChoice(bs):
                other = {l: (p, c) for l, p, c in y.branches}
                if set(other) != {l for l, _, _ in bs}:
                    return False
                for l, p, c in bs:
                    q, d = other[l]
                    if eval_pot(p) != eval_pot(q):
                        return False
                    work.append((c, d))
            case Tensor(p, s, t) | Lolli(p, s, t):
                if eval_pot(p) != eval_pot(y.pot):
                    return False
                work.append((s, y.payload))
                work.append((t, y.cont))
            case One(p):
                if eval_pot(p) != eval_pot(y.pot):
                    return False
    return True
