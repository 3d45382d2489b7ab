"""Asynchronous cost semantics with per-predicate work and a potential ledger.

A configuration is a multiset of process and message predicates. Every send
except ``close`` mints a fresh continuation channel, so a channel never
carries more than one message. Each predicate holds a work counter and a
potential; sends move annotated potential into the message, receives move it
back into the recipient, so the sum of potential and work never increases.

Runtime channel ids contain ``#`` and can never clash with source names.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Union

from .core import (
    COSTFREE,
    CaseRecv,
    Close,
    EChoice,
    Fwd,
    IChoice,
    Lolli,
    Metric,
    One,
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
    free_channels,
    instantiate,
    rename,
    unfold,
)
from .errors import MainNotClosed, NegativePotential, NoSuchMain, ProtocolViolation

EXTERNAL = -1  # subject id of the environment observing the root channel

PROVIDER = "provider"  # message travels from provider to client
CLIENT = "client"  # message travels from client to provider


@dataclass(frozen=True)
class FwdMsg:
    source: str  # the channel being forwarded (provided by the message)
    target: str


@dataclass(frozen=True)
class LabelMsg:
    subject: str
    label: str
    cont: str
    polarity: str


@dataclass(frozen=True)
class ChanMsg:
    subject: str
    payload: str
    cont: str
    polarity: str


@dataclass(frozen=True)
class CloseMsg:
    subject: str


Payload = Union[FwdMsg, LabelMsg, ChanMsg, CloseMsg]


@dataclass(frozen=True)
class ProcPred:
    """A running process.

    ``body`` keeps the source names of its definition; ``sub`` maps each of
    them to the channel it currently denotes, so steps never rewrite the
    remaining program. ``expr`` gives the concretized expression.
    """

    pid: int
    provides: str
    work: int
    potential: int
    body: ProcExpr
    sub: dict[str, str]
    cost_mode: str
    def_name: str
    env: tuple[tuple[str, int], ...] = ()

    @property
    def expr(self) -> ProcExpr:
        return rename(self.body, {x: self.sub[x] for x in free_channels(self.body)})

    def uses(self) -> set[str]:
        return {self.sub[x] for x in free_channels(self.body)} - {self.provides}

    def rebind(self, old: str, new: str) -> dict[str, str]:
        """Substitution with every name denoting ``old`` redirected to ``new``."""
        return {k: (new if v == old else v) for k, v in self.sub.items()}

    def index_env(self) -> dict[str, int]:
        return dict(self.env)

    def describe(self) -> str:
        return f"proc({self.provides}){{w={self.work}, p={self.potential}, {self.def_name}}}"

    def as_judgment(self):
        """(expression, context names to channels, provided name, cost mode, potential).

        The body is judged under its source names, so no renaming is needed.
        """
        names = {x: self.sub[x] for x in free_channels(self.body)}
        prov = next((x for x, c in names.items() if c == self.provides), None)
        if prov is None:
            # bodies always mention what they provide; fall back to the concrete form
            return self.expr, {c: c for c in self.uses()}, self.provides, self.cost_mode, self.potential
        ctx = {x: c for x, c in names.items() if x != prov}
        return self.body, ctx, prov, self.cost_mode, self.potential


@dataclass(frozen=True)
class MsgPred:
    pid: int
    carrier: str
    work: int
    potential: int
    payload: Payload

    @property
    def provides(self) -> str:
        return self.carrier

    def uses(self) -> set[str]:
        match self.payload:
            case FwdMsg(_, d):
                return {d}
            case LabelMsg(c, _, k, pol):
                return {k} if pol == PROVIDER else {c}
            case ChanMsg(c, e, k, pol):
                return {k, e} if pol == PROVIDER else {c, e}
        return set()

    def index_env(self) -> dict[str, int]:
        return {}

    def expr(self) -> ProcExpr:
        match self.payload:
            case FwdMsg(c, d):
                return Fwd(c, d)
            case LabelMsg(c, l, k, pol):
                return SendLabel(c, l, Fwd(c, k) if pol == PROVIDER else Fwd(k, c))
            case ChanMsg(c, e, k, pol):
                return SendChan(c, e, Fwd(c, k) if pol == PROVIDER else Fwd(k, c))
            case CloseMsg(c):
                return Close(c)
        raise TypeError(self.payload)

    def describe(self) -> str:
        return f"msg({self.carrier}){{w={self.work}, p={self.potential}, {_show_payload(self.payload)}}}"

    def as_judgment(self):
        return self.expr(), {c: c for c in self.uses()}, self.carrier, COSTFREE, self.potential


Pred = Union[ProcPred, MsgPred]


def _show_payload(m: Payload) -> str:
    match m:
        case FwdMsg(c, d):
            return f"fwd {c} {d}"
        case LabelMsg(c, l, k, pol):
            return f"{c}.{l}; fwd {c} {k}" if pol == PROVIDER else f"{c}.{l}; fwd {k} {c}"
        case ChanMsg(c, e, k, pol):
            return f"send {c} {e}; fwd {c} {k}" if pol == PROVIDER else f"send {c} {e}; fwd {k} {c}"
        case CloseMsg(c):
            return f"close {c}"
    return repr(m)


@dataclass
class Config:
    """A configuration. Predicates are never mutated; steps build new configs."""

    sig: Signature
    preds: dict[int, Pred] = field(default_factory=dict)
    types: dict[str, SType] = field(default_factory=dict)
    root: str = ""
    next_chan: int = 0
    next_pid: int = 0
    external_work: int = 0
    external_potential: int = 0
    output: tuple[str, ...] = ()

    # free-channel sets of source subterms, keyed by identity; shared by copies
    fv_cache: dict[int, tuple[ProcExpr, frozenset]] = field(default_factory=dict, repr=False)

    def copy(self) -> "Config":
        return replace(self, preds=dict(self.preds), types=dict(self.types))

    def uses_of(self, p: Pred) -> set[str]:
        if isinstance(p, MsgPred):
            return p.uses()
        hit = self.fv_cache.get(id(p.body))
        if hit is None or hit[0] is not p.body:
            hit = (p.body, frozenset(free_channels(p.body)))
            self.fv_cache[id(p.body)] = hit
        return {p.sub[x] for x in hit[1]} - {p.provides}

    def predicates(self) -> list[Pred]:
        return list(self.preds.values())

    def procs(self) -> list[ProcPred]:
        return [p for p in self.preds.values() if isinstance(p, ProcPred)]

    def msgs(self) -> list[MsgPred]:
        return [p for p in self.preds.values() if isinstance(p, MsgPred)]

    def chan_type(self, c: str) -> SType:
        return self.types[c]

    def fresh(self, t: SType) -> str:
        c = f"c#{self.next_chan}"
        self.next_chan += 1
        self.types[c] = t
        return c

    def add(self, pred: Pred) -> Pred:
        pred = replace(pred, pid=self.next_pid)
        self.next_pid += 1
        self.preds[pred.pid] = pred
        return pred

    def providers(self) -> dict[str, Pred]:
        return {p.provides: p for p in self.preds.values()}

    def clients(self) -> dict[str, Pred]:
        out = {}
        for p in self.preds.values():
            for c in self.uses_of(p):
                out[c] = p
        return out


@dataclass(frozen=True)
class RuleInstance:
    rule: str
    subjects: tuple[int, ...]  # predicate ids; EXTERNAL for the environment

    @property
    def actor(self) -> int:
        """The predicate whose turn this is, used by round-robin scheduling."""
        return self.subjects[-1] if self.subjects[-1] != EXTERNAL else self.subjects[0]


@dataclass(frozen=True)
class TraceEvent:
    step: int
    rule: str
    channels: tuple[str, ...]
    work_delta: int
    pot_delta: int
    weight: int

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "rule": self.rule,
            "channels": list(self.channels),
            "workDelta": self.work_delta,
            "potDelta": self.pot_delta,
            "weight": self.weight,
        }


DONE, IDLE, STUCK, BUDGET = "done", "idle", "stuck", "budget"


@dataclass
class Trace:
    initial: Config
    events: list[TraceEvent] = field(default_factory=list)
    final: Config | None = None
    status: str = ""
    instances: list[RuleInstance] = field(default_factory=list)
    metric: Metric = field(default_factory=Metric.standard)

    @property
    def initial_weight(self) -> int:
        return weight(self.initial)

    def summary(self) -> dict:
        work, pot = totals(self.final or self.initial)
        return {"status": self.status, "totalWork": work, "totalPotential": pot,
                "steps": len(self.events)}

    def to_jsonl(self) -> str:
        lines = [json.dumps(e.to_json()) for e in self.events]
        lines.append(json.dumps(self.summary()))
        return "\n".join(lines) + "\n"

    def configs(self) -> Iterable[Config]:
        """Replay the run, yielding the configuration before every step and the final one."""
        cfg = self.initial
        yield cfg
        for inst in self.instances:
            cfg, _ = step(cfg, inst, self.metric)
            yield cfg


# --------------------------------------------------------------------------
# construction and inspection


def init_config(sig: Signature, main_name: str) -> Config:
    d = sig.proc_defs.get(main_name)
    if d is None:
        raise NoSuchMain(f"no process definition named {main_name!r}")
    if d.uses or d.index_params:
        raise MainNotClosed(f"{main_name} must use no channels and take no indices")
    cfg = Config(sig)
    root = cfg.fresh(instantiate(d.provides[1], {}))
    cfg.root = root
    cfg.add(ProcPred(0, root, 0, eval_pot(d.potential, {}), d.body, {d.provides[0]: root},
                     d.cost_mode, d.name))
    return cfg


def totals(config: Config) -> tuple[int, int]:
    work = config.external_work + sum(p.work for p in config.preds.values())
    pot = config.external_potential + sum(p.potential for p in config.preds.values())
    return work, pot


def weight(config: Config) -> int:
    return sum(totals(config))


def enabled(config: Config) -> list[RuleInstance]:
    providers = config.providers()
    clients = config.clients()
    out: list[RuleInstance] = []
    for p in config.preds.values():
        if isinstance(p, MsgPred):
            m = p.payload
            if isinstance(m, FwdMsg):
                prov = providers.get(m.target)
                if isinstance(prov, ProcPred):
                    out.append(RuleInstance("fwd_plus_r", (p.pid, prov.pid)))
                cl = clients.get(m.source)
                if isinstance(cl, ProcPred):
                    out.append(RuleInstance("fwd_minus_r", (p.pid, cl.pid)))
                elif cl is None and m.source == config.root:
                    out.append(RuleInstance("fwd_minus_r", (p.pid, EXTERNAL)))
            elif p.carrier == config.root and p.carrier not in clients:
                if isinstance(m, CloseMsg):
                    out.append(RuleInstance("oneC_r", (p.pid, EXTERNAL)))
                elif isinstance(m, LabelMsg) and m.polarity == PROVIDER:
                    out.append(RuleInstance("plusC_r", (p.pid, EXTERNAL)))
            continue
        match p.body:
            case Spawn():
                out.append(RuleInstance("spawn_c", (p.pid,)))
            case Fwd():
                out.append(RuleInstance("fwd_s", (p.pid,)))
            case SendLabel(c, _, _):
                own = p.sub[c] == p.provides
                out.append(RuleInstance("plusC_s" if own else "withC_s", (p.pid,)))
            case SendChan(c, _, _):
                own = p.sub[c] == p.provides
                out.append(RuleInstance("tensorC_s" if own else "lolliC_s", (p.pid,)))
            case Close():
                out.append(RuleInstance("oneC_s", (p.pid,)))
            case CaseRecv(x, _) | RecvChan(x, _, _) | Wait(x, _):
                c = p.sub[x]
                if c == p.provides:
                    msg = clients.get(c)
                    if isinstance(msg, MsgPred) and getattr(msg.payload, "polarity", None) == CLIENT \
                            and msg.payload.subject == c:
                        rule = "withC_r" if isinstance(msg.payload, LabelMsg) else "lolliC_r"
                        out.append(RuleInstance(rule, (msg.pid, p.pid)))
                else:
                    msg = providers.get(c)
                    if isinstance(msg, MsgPred) and not isinstance(msg.payload, FwdMsg) \
                            and getattr(msg.payload, "polarity", PROVIDER) == PROVIDER:
                        rule = {LabelMsg: "plusC_r", ChanMsg: "tensorC_r",
                                CloseMsg: "oneC_r"}[type(msg.payload)]
                        out.append(RuleInstance(rule, (msg.pid, p.pid)))
    return out


# --------------------------------------------------------------------------
# rule application


def _debit(p: ProcPred, amount: int, why: str) -> int:
    if p.potential < amount:
        raise NegativePotential(f"{p.describe()} cannot pay {amount} for {why}")
    return p.potential - amount


def _cost(p: ProcPred, metric: Metric, kind: str) -> int:
    if p.cost_mode == COSTFREE:
        return 0
    return {"label": metric.label_cost, "channel": metric.channel_cost, "close": metric.close_cost}[kind]


def _unfolded(cfg: Config, c: str) -> SType:
    return unfold(cfg.types[c], cfg.sig)


def step(config: Config, inst: RuleInstance, metric: Metric | None = None) -> tuple[Config, TraceEvent]:
    """Apply one rule instance; the input configuration is left untouched."""
    metric = metric or Metric.standard()
    before = totals(config)
    cfg = config.copy()
    subj = [cfg.preds.get(i) if i != EXTERNAL else None for i in inst.subjects]
    if any(s is None for s, i in zip(subj, inst.subjects) if i != EXTERNAL):
        raise ProtocolViolation(f"{inst.rule}: subject no longer present")
    channels = _apply(cfg, inst.rule, subj, metric)
    after = totals(cfg)
    ev = TraceEvent(0, inst.rule, tuple(channels), after[0] - before[0], after[1] - before[1], sum(after))
    return cfg, ev


def _apply(cfg: Config, rule: str, subj: list, metric: Metric) -> list[str]:
    if rule in ("spawn_c", "fwd_s", "plusC_s", "withC_s", "tensorC_s", "lolliC_s", "oneC_s"):
        return _send(cfg, rule, subj[0], metric)
    msg, recv = subj
    del cfg.preds[msg.pid]
    m = msg.payload
    if recv is None:  # the environment consumes a message on the root channel
        cfg.external_work += msg.work
        cfg.external_potential += msg.potential
        if isinstance(m, FwdMsg):
            cfg.root = m.target
        elif isinstance(m, LabelMsg):
            cfg.root = m.cont
            cfg.output = cfg.output + (m.label,)
        return [msg.carrier]
    merged = dict(work=recv.work + msg.work, potential=recv.potential + msg.potential)
    match rule:
        case "fwd_plus_r":
            new = replace(recv, provides=m.source, sub=recv.rebind(m.target, m.source), **merged)
            chans = [m.source, m.target]
        case "fwd_minus_r":
            new = replace(recv, sub=recv.rebind(m.source, m.target), **merged)
            chans = [m.source, m.target]
        case "plusC_r" | "withC_r":
            e = recv.body
            if not isinstance(e, CaseRecv) or recv.sub.get(e.chan) != m.subject:
                raise ProtocolViolation(f"{rule}: receiver is not a case on {m.subject}")
            branch = e.branch(m.label)
            if branch is None:
                raise ProtocolViolation(f"{rule}: no branch for label {m.label!r}")
            provides = m.cont if rule == "withC_r" else recv.provides
            sub = {**recv.sub, e.chan: m.cont}
            new = replace(recv, provides=provides, body=branch, sub=sub, **merged)
            chans = [m.subject, m.cont]
        case "tensorC_r" | "lolliC_r":
            e = recv.body
            if not isinstance(e, RecvChan) or recv.sub.get(e.chan) != m.subject:
                raise ProtocolViolation(f"{rule}: receiver is not a recv on {m.subject}")
            provides = m.cont if rule == "lolliC_r" else recv.provides
            sub = {**recv.sub, e.chan: m.cont, e.bind: m.payload}
            new = replace(recv, provides=provides, body=e.cont, sub=sub, **merged)
            chans = [m.subject, m.payload, m.cont]
        case "oneC_r":
            e = recv.body
            if not isinstance(e, Wait) or recv.sub.get(e.chan) != m.subject:
                raise ProtocolViolation(f"{rule}: receiver is not waiting on {m.subject}")
            new = replace(recv, body=e.cont, **merged)
            chans = [m.subject]
        case _:
            raise ProtocolViolation(f"unknown rule {rule!r}")
    cfg.preds[recv.pid] = new
    return chans


def _send(cfg: Config, rule: str, p: ProcPred, metric: Metric) -> list[str]:
    e = p.body
    match rule:
        case "spawn_c":
            assert isinstance(e, Spawn)
            d = cfg.sig.proc_defs[e.def_name]
            args = {x: eval_pot(a, p.index_env()) for x, a in zip(d.index_params, e.index_args)}
            check_domain(d.name, d.domain, args)
            cost = eval_pot(d.potential, args)
            c = cfg.fresh(instantiate(d.provides[1], args))
            sub = {d.provides[0]: c}
            sub.update({x: p.sub[y] for (x, _), y in zip(d.uses, e.chan_args)})
            cfg.preds[p.pid] = replace(p, potential=_debit(p, cost, f"spawning {d.name}"),
                                       body=e.cont, sub={**p.sub, e.bind: c})
            cfg.add(ProcPred(0, c, 0, cost, d.body, sub, d.cost_mode, d.name,
                             tuple(sorted(args.items()))))
            return [c]
        case "fwd_s":
            assert isinstance(e, Fwd)
            a, b = p.sub[e.provided], p.sub[e.used]
            cfg.preds[p.pid] = MsgPred(p.pid, p.provides, p.work, 0, FwdMsg(a, b))
            return [a, b]
        case "oneC_s":
            t = _unfolded(cfg, p.provides)
            if not isinstance(t, One):
                raise ProtocolViolation(f"close on {p.provides} of type {t}")
            r, cost = eval_pot(t.pot), _cost(p, metric, "close")
            _debit(p, r + cost, "close")
            cfg.preds[p.pid] = MsgPred(p.pid, p.provides, p.work + cost, r, CloseMsg(p.provides))
            return [p.provides]
    # label or channel send; either on the provided channel or on a used one
    c = p.sub[e.chan]
    t = _unfolded(cfg, c)
    if isinstance(e, SendLabel):
        want = IChoice if rule == "plusC_s" else EChoice
        if not isinstance(t, want):
            raise ProtocolViolation(f"{rule} on {c} of type {t}")
        br = t.branch(e.label)
        if br is None:
            raise ProtocolViolation(f"label {e.label!r} not offered on {c}")
        r, cont_t = eval_pot(br[0]), br[1]
        cost = _cost(p, metric, "label")
    else:
        want = Tensor if rule == "tensorC_s" else Lolli
        if not isinstance(t, want):
            raise ProtocolViolation(f"{rule} on {c} of type {t}")
        r, cont_t = eval_pot(t.pot), t.cont
        cost = _cost(p, metric, "channel")
    pot = _debit(p, r + cost, rule)
    k = cfg.fresh(cont_t)
    polarity = PROVIDER if c == p.provides else CLIENT
    if isinstance(e, SendLabel):
        payload: Payload = LabelMsg(c, e.label, k, polarity)
        chans = [c, k]
    else:
        w = p.sub[e.payload]
        payload = ChanMsg(c, w, k, polarity)
        chans = [c, w, k]
    provides = k if polarity == PROVIDER else p.provides
    cfg.preds[p.pid] = replace(p, provides=provides, work=p.work + cost, potential=pot,
                               body=e.cont, sub={**p.sub, e.chan: k})
    cfg.add(MsgPred(0, c if polarity == PROVIDER else k, 0, r, payload))
    return chans


# --------------------------------------------------------------------------
# schedulers and the driver


class RoundRobin:
    """Cycle through predicates in creation order, skipping blocked ones."""

    def __init__(self):
        self.cursor = -1

    def choose(self, instances: list[RuleInstance]) -> RuleInstance:
        ordered = sorted(instances, key=lambda i: i.actor)
        for inst in ordered:
            if inst.actor > self.cursor:
                break
        else:
            inst = ordered[0]
        self.cursor = inst.actor
        return inst


class RandomScheduler:
    """Uniform choice among enabled instances, driven by a seeded Mersenne Twister."""

    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def choose(self, instances: list[RuleInstance]) -> RuleInstance:
        return self.rng.choice(instances)


def _blocked_on_environment(cfg: Config) -> bool:
    prov = cfg.providers().get(cfg.root)
    if not isinstance(prov, ProcPred):
        return False
    match prov.body:
        case CaseRecv(x, _) | RecvChan(x, _, _):
            return prov.sub[x] == cfg.root
    return False


def run(
    sig: Signature,
    main_name: str,
    scheduler=None,
    metric: Metric | None = None,
    max_steps: int = 100_000,
) -> Trace:
    """Run ``main_name`` until it finishes, blocks, or exhausts ``max_steps``.

    Statuses: ``done`` (the environment consumed the final close), ``idle``
    (nothing can move and the root provider waits for the environment),
    ``stuck`` (nothing can move otherwise) and ``budget``.
    """
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    metric = metric or Metric.standard()
    scheduler = scheduler or RoundRobin()
    cfg = init_config(sig, main_name)
    trace = Trace(cfg, metric=metric)
    while True:
        if not cfg.preds:
            trace.status = DONE
            break
        if len(trace.events) >= max_steps:
            trace.status = BUDGET
            break
        insts = enabled(cfg)
        if not insts:
            trace.status = IDLE if _blocked_on_environment(cfg) else STUCK
            break
        inst = scheduler.choose(insts)
        cfg, ev = step(cfg, inst, metric)
        trace.events.append(replace(ev, step=len(trace.events)))
        trace.instances.append(inst)
    trace.final = cfg
    return trace
