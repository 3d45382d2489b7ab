"""Runtime checks of the accounting invariants on recorded traces.

The weight of a configuration (total potential plus total work) must never
grow, and the potential of the initial configuration bounds the total work
of the run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .core import Metric, Signature
from .errors import PreservationViolation
from .runtime import Config, Trace, weight
from .typechecker import typecheck_config

__all__ = [
    "BoundReport",
    "Ok",
    "Violation",
    "bound_report",
    "check_configs",
    "check_monotone",
    "deep_check",
    "weight",
    "weight_series",
]


@dataclass(frozen=True)
class Ok:
    steps: int = 0

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Violation:
    step: int
    before: int
    after: int

    def __bool__(self) -> bool:
        return False


def weight_series(trace: Trace) -> list[int]:
    """Weight before the first step followed by the weight after every step."""
    return [trace.initial_weight] + [e.weight for e in trace.events]


def check_monotone(trace: Trace) -> Ok | Violation:
    values = weight_series(trace)
    for k in range(len(values) - 1):
        if values[k + 1] > values[k]:
            return Violation(trace.events[k].step, values[k], values[k + 1])
    return Ok(len(trace.events))


@dataclass(frozen=True)
class BoundReport:
    initial_potential: int
    final_work: int
    slack: int
    status: str

    @property
    def holds(self) -> bool:
        return self.slack >= 0

    def to_json(self) -> dict:
        return {
            "initialPotential": self.initial_potential,
            "finalWork": self.final_work,
            "slack": self.slack,
            "status": self.status,
        }


def bound_report(trace: Trace) -> BoundReport:
    from .runtime import totals

    init_work, init_pot = totals(trace.initial)
    if init_work:
        raise ValueError("the bound applies to runs that start without work")
    final_work, _ = totals(trace.final or trace.initial)
    return BoundReport(init_pot, final_work, init_pot - final_work, trace.status)


def deep_check(sig: Signature, trace: Trace, metric: Metric | None = None) -> Ok:
    """Retype the configuration before the first and after every step.

    Raises PreservationViolation naming the first step whose configuration
    fails to type, or whose typed weight disagrees with the ledger.
    """
    return check_configs(sig, trace.configs(), metric or trace.metric)


def check_configs(sig: Signature, configs: Iterable[Config], metric: Metric | None = None) -> Ok:
    """Retype a sequence of configurations; step k names the k-th one."""
    metric = metric or Metric.standard()
    memo: dict = {}
    k = -1
    for k, cfg in enumerate(configs):
        _check_config(sig, cfg, metric, k, memo)
    return Ok(max(k, 0))


def _check_config(sig: Signature, cfg: Config, metric: Metric, k: int, memo: dict) -> None:
    try:
        typed = typecheck_config(sig, cfg, metric, memo)
    except PreservationViolation as exc:
        raise PreservationViolation(exc.predicate, exc.reason, k) from exc
    # the environment's share is not a predicate, so add it back
    typed += cfg.external_work + cfg.external_potential
    if typed != weight(cfg):
        raise PreservationViolation("<config>", f"typed weight {typed} != ledger weight {weight(cfg)}", k)
