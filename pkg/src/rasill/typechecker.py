"""Resource-aware type checking of process definitions and configurations.

The checker is syntax directed. For a closed instance of a definition it
first computes, bottom up, the least potential each subterm needs
(``need``); the forward pass then threads the actual potential through the
body and, at every rule that spends potential, checks
``available >= spent + need(continuation)``. Since every inequality is
linear in the potential, the least declared potential that passes is exactly
``need(body)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

from .core import (
    CaseRecv,
    Close,
    EChoice,
    Fwd,
    IChoice,
    Lolli,
    Metric,
    One,
    ProcDef,
    ProcExpr,
    RecvChan,
    SendChan,
    SendLabel,
    Signature,
    Spawn,
    SType,
    Tensor,
    Wait,
    check_domain,
    eval_pot,
    instantiate,
    show_type,
    type_equal,
    unfold,
)
from .errors import (
    DomainViolation,
    PreservationViolation,
    RasillError,
    SessionTypeError,
    UnknownProcess,
    Untypeable,
)

INSUFFICIENT = "InsufficientPotential"
MISMATCH = "ContextMismatch"
NO_LABEL = "LabelNotInType"
LINEARITY = "LinearityViolation"
WRONG_PROVIDED = "WrongProvidedType"


@dataclass(frozen=True)
class Step:
    path: str
    context: str
    before: int
    after: int
    rule: str
    inequality: str = ""


@dataclass
class Derivation:
    def_name: str
    indices: dict[str, int]
    potential: int
    conclusion: str
    steps: list[Step] = field(default_factory=list)


Context = dict[str, SType]


def _snapshot(ctx: Context, prov: tuple[str, SType]) -> str:
    left = ", ".join(f"{c} : {show_type(t)}" for c, t in ctx.items())
    return f"({left}) |- ({prov[0]} : {show_type(prov[1])})"


def _env_str(env: Mapping[str, int]) -> str:
    return "[" + ", ".join(f"{k}={v}" for k, v in env.items()) + "]"


class _Checker:
    """Checks one closed instance of one definition."""

    def __init__(self, sig: Signature, metric: Metric, env: Mapping[str, int], name: str):
        self.sig = sig
        self.metric = metric
        self.env = dict(env)
        self.name = name
        self.cache: dict[tuple, int] = {}
        self.steps: list[Step] = []

    # helpers shared by both passes

    def fail(self, kind: str, detail: str, path: str, **kw) -> SessionTypeError:
        return SessionTypeError(kind, detail, path or self.name, **kw)

    def unfold(self, t: SType, path: str) -> SType:
        try:
            return unfold(t, self.sig)
        except DomainViolation as exc:
            raise self.fail("DomainViolation", str(exc), path) from None

    def equal(self, a: SType, b: SType) -> bool:
        try:
            return type_equal(a, b, self.sig)
        except DomainViolation:
            return False

    def take(self, ctx: Context, c: str, path: str) -> SType:
        if c not in ctx:
            raise self.fail(LINEARITY, f"channel {c!r} is not available in the context", path)
        return ctx[c]

    def bind(self, ctx: Context, prov: tuple[str, SType], y: str, path: str) -> None:
        if y in ctx or y == prov[0]:
            raise self.fail(LINEARITY, f"channel {y!r} is already in scope", path)

    def callee(self, sp: Spawn, path: str) -> tuple[ProcDef, dict[str, int], int]:
        pd = self.sig.proc_defs.get(sp.def_name)
        if pd is None:
            raise UnknownProcess(sp.def_name)
        args = {p: eval_pot(a, self.env) for p, a in zip(pd.index_params, sp.index_args)}
        try:
            check_domain(pd.name, pd.domain, args)
        except DomainViolation as exc:
            raise self.fail("DomainViolation", str(exc), path) from None
        return pd, args, eval_pot(pd.potential, args)

    def spawn_ctx(self, sp: Spawn, ctx: Context, prov, path: str) -> tuple[Context, int]:
        pd, args, p = self.callee(sp, path)
        if len(set(sp.chan_args)) != len(sp.chan_args):
            raise self.fail(LINEARITY, f"channel passed twice to {sp.def_name}", path)
        rest = dict(ctx)
        for c, (_, want) in zip(sp.chan_args, pd.uses):
            have = self.take(rest, c, path)
            want = instantiate(want, args)
            if not self.equal(have, want):
                raise self.fail(MISMATCH, f"{sp.def_name} expects {c} : {show_type(want)}, "
                                f"got {show_type(have)}", path)
            del rest[c]
        self.bind(rest, prov, sp.bind, path)
        rest[sp.bind] = instantiate(pd.provides[1], args)
        return rest, p

    # one rule application, shared by both passes

    def rule(self, p: ProcExpr, ctx: Context, prov: tuple[str, SType], path: str):
        """Return ``(rule, kind, amount, successors)``.

        ``kind`` is ``debit``, ``credit``, ``branch`` or ``final``. For
        ``debit`` the amount is ``(r, cost)``; successors are
        ``(label, proc, ctx, prov, r)`` tuples (``r`` is the branch credit).
        """
        x, a = prov
        m = self.metric
        match p:
            case SendLabel(c, l, cont):
                if c == x:
                    t = self.unfold(a, path)
                    if not isinstance(t, IChoice):
                        raise self.fail(WRONG_PROVIDED, f"{x}.{l} needs {x} to provide an internal "
                                        f"choice, not {show_type(t)}", path)
                    br = t.branch(l)
                    if br is None:
                        raise self.fail(NO_LABEL, f"{l!r} not in {show_type(t)}", path)
                    r = eval_pot(br[0])
                    return "+R", "debit", (r, m.label_cost), [(l, cont, ctx, (x, br[1]), 0)]
                t = self.unfold(self.take(ctx, c, path), path)
                if not isinstance(t, EChoice):
                    raise self.fail(MISMATCH, f"{c}.{l} needs {c} to offer an external choice, "
                                    f"not {show_type(t)}", path)
                br = t.branch(l)
                if br is None:
                    raise self.fail(NO_LABEL, f"{l!r} not in {show_type(t)}", path)
                r = eval_pot(br[0])
                return "&L", "debit", (r, m.label_cost), [(l, cont, {**ctx, c: br[1]}, prov, 0)]
            case CaseRecv(c, bs):
                if c == x:
                    t = self.unfold(a, path)
                    if not isinstance(t, EChoice):
                        raise self.fail(WRONG_PROVIDED, f"case {x} needs {x} to provide an external "
                                        f"choice, not {show_type(t)}", path)
                    name = "&R"
                else:
                    t = self.unfold(self.take(ctx, c, path), path)
                    if not isinstance(t, IChoice):
                        raise self.fail(MISMATCH, f"case {c} needs {c} to offer an internal "
                                        f"choice, not {show_type(t)}", path)
                    name = "+L"
                have = [l for l, _ in bs]
                for l in have:
                    if t.branch(l) is None:
                        raise self.fail(NO_LABEL, f"{l!r} not in {show_type(t)}", path)
                missing = [l for l in t.labels() if l not in have]
                if missing:
                    raise self.fail(MISMATCH, f"case {c} lacks branches {missing}", path)
                succ = []
                for l, q in bs:
                    r, cont_t = t.branch(l)
                    if c == x:
                        succ.append((l, q, ctx, (x, cont_t), eval_pot(r)))
                    else:
                        succ.append((l, q, {**ctx, c: cont_t}, prov, eval_pot(r)))
                return name, "branch", None, succ
            case SendChan(c, w, cont):
                have = self.take(ctx, w, path)
                rest = {k: v for k, v in ctx.items() if k != w}
                if c == x:
                    t = self.unfold(a, path)
                    if not isinstance(t, Tensor):
                        raise self.fail(WRONG_PROVIDED, f"send {x} needs a tensor, not {show_type(t)}", path)
                    name, new_prov = "*R", (x, t.cont)
                else:
                    if w == c:
                        raise self.fail(LINEARITY, f"cannot send {c} along itself", path)
                    t = self.unfold(self.take(ctx, c, path), path)
                    if not isinstance(t, Lolli):
                        raise self.fail(MISMATCH, f"send {c} needs a lolli, not {show_type(t)}", path)
                    name, new_prov = "-oL", prov
                    rest[c] = t.cont
                if not self.equal(have, t.payload):
                    raise self.fail(MISMATCH, f"payload {w} : {show_type(have)} does not match "
                                    f"{show_type(t.payload)}", path)
                return name, "debit", (eval_pot(t.pot), m.channel_cost), [("", cont, rest, new_prov, 0)]
            case RecvChan(c, y, cont):
                if c == x:
                    t = self.unfold(a, path)
                    if not isinstance(t, Lolli):
                        raise self.fail(WRONG_PROVIDED, f"recv {x} needs a lolli, not {show_type(t)}", path)
                    self.bind(ctx, prov, y, path)
                    return "-oR", "credit", eval_pot(t.pot), [("", cont, {**ctx, y: t.payload}, (x, t.cont), 0)]
                t = self.unfold(self.take(ctx, c, path), path)
                if not isinstance(t, Tensor):
                    raise self.fail(MISMATCH, f"recv {c} needs a tensor, not {show_type(t)}", path)
                self.bind(ctx, prov, y, path)
                new = {**ctx, c: t.cont, y: t.payload}
                return "*L", "credit", eval_pot(t.pot), [("", cont, new, prov, 0)]
            case Close(c):
                if c != x:
                    raise self.fail(WRONG_PROVIDED, f"close {c} but the provided channel is {x}", path)
                t = self.unfold(a, path)
                if not isinstance(t, One):
                    raise self.fail(WRONG_PROVIDED, f"close {x} needs 1, not {show_type(t)}", path)
                if ctx:
                    raise self.fail(LINEARITY, f"channels {sorted(ctx)} left unused at close", path)
                return "1R", "debit", (eval_pot(t.pot), m.close_cost), []
            case Wait(c, cont):
                t = self.unfold(self.take(ctx, c, path), path)
                if not isinstance(t, One):
                    raise self.fail(MISMATCH, f"wait {c} needs 1, not {show_type(t)}", path)
                rest = {k: v for k, v in ctx.items() if k != c}
                return "1L", "credit", eval_pot(t.pot), [("", cont, rest, prov, 0)]
            case Fwd(y, z):
                if y != x:
                    raise self.fail(WRONG_PROVIDED, f"fwd {y} {z} but the provided channel is {x}", path)
                have = self.take(ctx, z, path)
                extra = sorted(set(ctx) - {z})
                if extra:
                    raise self.fail(LINEARITY, f"channels {extra} left unused at forward", path)
                if not self.equal(have, a):
                    raise self.fail(MISMATCH, f"fwd {x} {z}: {show_type(have)} is not "
                                    f"{show_type(a)}", path)
                return "id", "final", None, []
            case Spawn(_, _, _, _, cont):
                rest, p = self.spawn_ctx(p, ctx, prov, path)
                return "spawn", "debit", (p, 0), [("", cont, rest, prov, 0)]
        raise TypeError(f"not a process expression: {p!r}")

    def key(self, p: ProcExpr, ctx: Context, prov) -> tuple:
        return (id(p), tuple(ctx.items()), prov)

    def need(self, p: ProcExpr, ctx: Context, prov, path: str = "") -> int:
        k = self.key(p, ctx, prov)
        if k in self.cache:
            return self.cache[k]
        name, kind, amount, succ = self.rule(p, ctx, prov, path)
        if kind == "final":
            out = 0
        elif kind == "debit":
            r, cost = amount
            out = r + cost + (self.need(*succ[0][1:4], path) if succ else 0)
        elif kind == "credit":
            out = max(0, self.need(*succ[0][1:4], path) - amount)
        else:
            out = max([max(0, self.need(q, c, pv, path) - r) for _, q, c, pv, r in succ] + [0])
        self.cache[k] = out
        return out

    def check(self, p: ProcExpr, ctx: Context, prov, q: int, qtext: str, path: str) -> None:
        while True:
            here = f"{path} > {_describe(p)}" if path else _describe(p)
            name, kind, amount, succ = self.rule(p, ctx, prov, here)
            snap = _snapshot(ctx, prov)
            if kind == "final":
                self.steps.append(Step(here, snap, q, 0, name, f"{qtext} >= 0"))
                return
            if kind == "credit":
                self.steps.append(Step(here, snap, q, q + amount, name))
                q, qtext = q + amount, f"{qtext}+{amount}"
                _, p, ctx, prov, _ = succ[0]
                continue
            if kind == "branch":
                self.steps.append(Step(here, snap, q, q, name))
                for l, sub, c, pv, r in succ:
                    self.check(sub, c, pv, q + r, f"{qtext}+{r}", f"{here}:{l}")
                return
            r, cost = amount
            rest = self.need(*succ[0][1:4], here) if succ else 0
            if name == "spawn":
                rhs_text = f"{r}+{rest}"
            else:
                rhs_text = f"{r}+{cost}+{rest}" if succ else f"{r}+{cost}"
            ineq = f"{qtext} >= {rhs_text}"
            total = r + cost + rest
            if q < total:
                raise SessionTypeError(
                    INSUFFICIENT,
                    f"{ineq} fails ({q} < {total}) in {snap}",
                    here,
                    lhs=q,
                    rhs=total,
                    inequality=ineq,
                )
            after = q - r - cost
            self.steps.append(Step(here, snap, q, after, name, ineq))
            if not succ:
                return
            q, qtext = after, str(after)
            _, p, ctx, prov, _ = succ[0]


def _describe(p: ProcExpr) -> str:
    match p:
        case Spawn(x, _, chans, b, _):
            return f"{b} <- spawn {x}({', '.join(chans)})"
        case Fwd(a, b):
            return f"fwd {a} {b}"
        case SendLabel(c, l, _):
            return f"{c}.{l}"
        case CaseRecv(c, _):
            return f"case {c}"
        case SendChan(c, w, _):
            return f"send {c} {w}"
        case RecvChan(c, y, _):
            return f"{y} <- recv {c}"
        case Close(c):
            return f"close {c}"
        case Wait(c, _):
            return f"wait {c}"
    return type(p).__name__


def _instance(sig: Signature, d: ProcDef, env: Mapping[str, int]):
    missing = [p for p in d.index_params if p not in env]
    if missing:
        from .errors import UnboundIndexVar

        raise UnboundIndexVar(missing[0])
    env = {p: env[p] for p in d.index_params}
    ctx = {c: instantiate(t, env) for c, t in d.uses}
    prov = (d.provides[0], instantiate(d.provides[1], env))
    return env, ctx, prov


def check_def(
    sig: Signature,
    d: ProcDef,
    metric: Metric | None = None,
    index_env: Mapping[str, int] | None = None,
    potential: int | None = None,
) -> Derivation:
    """Check one closed instance of ``d``.

    ``potential`` overrides the declared potential, which is otherwise
    evaluated at ``index_env``. The definition's own domain is not enforced
    here; callers sampling a family choose in-domain indices.
    """
    metric = (metric or Metric.standard()).for_mode(d.cost_mode)
    env, ctx, prov = _instance(sig, d, index_env or {})
    q = eval_pot(d.potential, env) if potential is None else potential
    chk = _Checker(sig, metric, env, f"{d.name}{_env_str(env) if env else ''}")
    chk.check(d.body, ctx, prov, q, str(q), chk.name)
    conclusion = f"{_snapshot(ctx, prov).replace('|-', f'|-{q}', 1)} {d.name}"
    return Derivation(d.name, env, q, conclusion, chk.steps)


def min_potential(
    sig: Signature,
    def_name: str,
    index_env: Mapping[str, int] | None = None,
    metric: Metric | None = None,
) -> int:
    """Least declared potential with which ``def_name`` typechecks."""
    d = sig.proc_defs.get(def_name)
    if d is None:
        raise UnknownProcess(def_name)
    metric = (metric or Metric.standard()).for_mode(d.cost_mode)
    env, ctx, prov = _instance(sig, d, index_env or {})
    chk = _Checker(sig, metric, env, d.name)
    try:
        return chk.need(d.body, ctx, prov, d.name)
    except SessionTypeError as exc:
        raise Untypeable(f"{def_name} is untypeable at any potential: {exc}") from exc


# --------------------------------------------------------------------------
# whole signatures


@dataclass
class Entry:
    def_name: str
    indices: dict[str, int]
    status: str  # pass or fail
    kind: str = ""
    failed_inequality: str | None = None
    message: str = ""

    def to_json(self) -> dict:
        out = {"def": self.def_name, "indices": self.indices, "status": self.status}
        if self.status == "fail":
            out["kind"] = self.kind
            out["message"] = self.message
            if self.failed_inequality:
                out["failedInequality"] = self.failed_inequality
        return out


@dataclass
class Report:
    entries: list[Entry] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.status == "pass" for e in self.entries)

    @property
    def first_failure(self) -> Entry | None:
        return next((e for e in self.entries if e.status == "fail"), None)

    def failures(self) -> list[Entry]:
        return [e for e in self.entries if e.status == "fail"]

    def to_json(self) -> dict:
        first = self.first_failure
        return {
            "ok": self.ok,
            "checked": len(self.entries),
            "failed": len(self.failures()),
            "firstFailure": first.to_json() if first else None,
            "entries": [e.to_json() for e in self.entries],
        }


def domain_samples(d, sample_max: int):
    """Every index vector within the domain of ``d`` with components <= sample_max."""
    ranges = [range(sample_max + 1)] * len(d.index_params)
    for values in itertools.product(*ranges):
        env = dict(zip(d.index_params, values))
        if all(c.holds(env) for c in d.domain):
            yield env


def check_signature(sig: Signature, metric: Metric | None = None, sample_max: int = 64) -> Report:
    report = Report()
    try:
        sig.validate()
    except RasillError as exc:
        report.entries.append(Entry("<signature>", {}, "fail", type(exc).__name__, message=str(exc)))
        return report
    for d in sig.proc_defs.values():
        for env in domain_samples(d, sample_max):
            try:
                check_def(sig, d, metric, env)
            except SessionTypeError as exc:
                report.entries.append(
                    Entry(d.name, env, "fail", exc.kind, exc.inequality, str(exc))
                )
            except RasillError as exc:
                report.entries.append(Entry(d.name, env, "fail", type(exc).__name__, message=str(exc)))
            else:
                report.entries.append(Entry(d.name, env, "pass"))
    return report


# --------------------------------------------------------------------------
# configurations


def typecheck_config(sig: Signature, config, metric: Metric | None = None,
                     memo: dict | None = None) -> int:
    """Type every predicate of a runtime configuration and return its weight.

    Processes are checked with their current potential under their own cost
    mode; messages are checked under the cost-free metric. Channels must form
    a forest: one provider each and at most one client. ``memo`` may be
    shared across calls to skip judgments already established.
    """
    metric = metric or Metric.standard()
    providers: dict[str, str] = {}
    clients: dict[str, str] = {}
    for pred in config.predicates():
        label = pred.describe()
        if pred.provides in providers:
            raise PreservationViolation(label, f"channel {pred.provides} has two providers")
        providers[pred.provides] = label
        for c in pred.uses():
            if c in clients:
                raise PreservationViolation(label, f"channel {c} has two clients")
            clients[c] = label
    for c in clients:
        if c not in providers:
            raise PreservationViolation(clients[c], f"channel {c} has no provider")

    weight = 0
    for pred in config.predicates():
        expr, names, prov_name, mode, q = pred.as_judgment()
        m = Metric.costfree() if mode == "costfree" else metric.for_mode(mode)
        ctx = {x: config.chan_type(c) for x, c in sorted(names.items())}
        prov = (prov_name, config.chan_type(pred.provides))
        env = pred.index_env()
        key = (id(expr), tuple(ctx.items()), prov, q, m, tuple(env.items()))
        if memo is None or memo.get(key, (None,))[0] is not expr:
            label = pred.describe()
            chk = _Checker(sig, m, env, label)
            try:
                chk.check(expr, ctx, prov, q, str(q), label)
            except RasillError as exc:
                raise PreservationViolation(label, str(exc)) from exc
            if memo is not None:
                memo[key] = (expr,)
        weight += pred.potential + pred.work
    return weight
