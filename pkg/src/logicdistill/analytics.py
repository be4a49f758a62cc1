"""Closed-form fidelity/yield formulas and exact-vs-formula comparisons."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .channels import LOGIC_BIT, LOGIC_PHASE, PHYSICAL_PHASE, ErrorKind, LogicBitFlip, make_mixture
from .protocols import get_policy, distill_round


def _check_F(F: float) -> None:
    if not 0 <= F <= 1:
        raise ValueError(f"F out of range: {F}")


def fidelity_map(F: float) -> float:
    """F^2 / (F^2 + (1-F)^2)."""
    _check_F(F)
    return F * F / (F * F + (1 - F) ** 2)


def success_probability(F: float, policy="canonical", m: int = 2,
                        kind: ErrorKind = LogicBitFlip) -> float:
    """Probability that one round is accepted.

    The bit-flip circuit accepts a matching pair with probability
    2^-(2m-1) per pattern (1/8 for m = 2); the phase-flip circuit, which
    skips the Hadamard frame, with probability 1/2.  The extended policy
    accepts four patterns instead of one.
    """
    _check_F(F)
    policy = get_policy(policy)
    both_match = F * F + (1 - F) ** 2
    if kind.name in (LOGIC_BIT, PHYSICAL_PHASE):
        per_pattern = both_match / 2 ** (2 * m - 1)
    elif kind.name == LOGIC_PHASE:
        if policy.name != "canonical":
            raise ValueError("logic phase-flip distillation only supports the canonical policy")
        per_pattern = both_match / 2
    else:
        raise ValueError(f"no distillation formula for {kind}")
    return per_pattern * len(policy.accepted)


@dataclass
class IterationTrace:
    f_sequence: list[float]
    success_probs: list[float]
    expected_yield: float
    verified: bool | None = None
    max_deviation: float | None = None


def iterate(F0: float, rounds: int, policy="canonical", m: int = 2,
            kind: ErrorKind = LogicBitFlip, verify_exact: bool = False,
            atol: float = 1e-10) -> IterationTrace:
    """Repeat the fidelity map ``rounds`` times starting from ``F0``.

    The yield counts surviving pairs per initial pair: each round consumes
    two pairs and keeps one on success.  With ``verify_exact`` every round
    is also simulated exactly on the current mixture.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if not 0.5 < F0 < 1:
        raise ValueError(f"F0 must lie in (1/2, 1); got {F0} (no improvement for F <= 1/2)")
    fs, ps = [F0], []
    yield_ = 1.0
    worst = 0.0
    for _ in range(rounds):
        F = fs[-1]
        p = success_probability(F, policy, m, kind)
        F_next = fidelity_map(F)
        if verify_exact:
            res = distill_round(make_mixture(kind, F, m), kind, m, policy)
            worst = max(worst, abs(res.output_fidelity - F_next), abs(res.success_probability - p))
        ps.append(p)
        fs.append(F_next)
        yield_ *= p / 2
    trace = IterationTrace(fs, ps, yield_)
    if verify_exact:
        trace.verified = worst <= atol
        trace.max_deviation = worst
    return trace


@dataclass
class ComparisonRow:
    F_in: float
    F_out_exact: float
    F_out_formula: float
    p_success_exact: float
    p_success_formula: float

    @property
    def fidelity_diff(self) -> float:
        return abs(self.F_out_exact - self.F_out_formula)

    @property
    def success_diff(self) -> float:
        return abs(self.p_success_exact - self.p_success_formula)


@dataclass
class ComparisonReport:
    m: int
    kind: str
    policy: str
    rows: list[ComparisonRow] = field(default_factory=list)

    @property
    def max_diff(self) -> float:
        return max((max(r.fidelity_diff, r.success_diff) for r in self.rows), default=0.0)


def compare_exact_vs_formula(grid: Iterable[float], m: int = 2, kind: ErrorKind = LogicBitFlip,
                             policy="canonical") -> ComparisonReport:
    policy = get_policy(policy)
    report = ComparisonReport(m, str(kind), policy.name)
    for F in grid:
        _check_F(F)
        res = distill_round(make_mixture(kind, F, m), kind, m, policy)
        report.rows.append(ComparisonRow(F, res.output_fidelity, fidelity_map(F),
                                         res.success_probability,
                                         success_probability(F, policy, m, kind)))
    return report
