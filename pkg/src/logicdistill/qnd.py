"""Idealized cross-Kerr parity-check gate and X-homodyne readout.

A parity-check gate (PCG) on modes ``(x, y)`` imprints a phase of +1 (both
photons H), -1 (both V) or 0 (opposite polarizations) on one probe beam.
Phases are exact integers in units of the single-photon shift.  The
homodyne read only resolves the magnitude of the shift, so the +1 and -1
branches are kept together; they are merged with no relative phase, which
models ideal classical feed-forward after the read.
"""
from __future__ import annotations

from enum import Enum
from typing import NamedTuple

from .state import PRUNE, PureState, StateError, TermKey


class ProbeError(StateError):
    """Probe written twice, read before written, or read twice."""


class Parity(str, Enum):
    EVEN = "E"
    ODD = "O"

    def __str__(self) -> str:
        return self.value


_PCG_TAG = {("H", "H"): 1, ("V", "V"): -1, ("H", "V"): 0, ("V", "H"): 0}


def apply_pcg(state: PureState, x: str, y: str, probe: int) -> PureState:
    """Couple modes ``x`` and ``y`` to a fresh probe beam."""
    if x == y:
        raise StateError("parity check needs two distinct modes")
    if probe in state.probes or probe in state.retired:
        raise ProbeError(f"probe {probe} has already been used")
    i, j = state.index(x), state.index(y)
    terms = {(b, t + (_PCG_TAG[b[i], b[j]],)): a for (b, t), a in state.terms.items()}
    return PureState(state.registry, terms, state.probes + (probe,), state.retired)


class HomodyneOutcome(NamedTuple):
    parity: Parity
    probability: float
    state: PureState | None


def homodyne(state: PureState, probe: int) -> list[HomodyneOutcome]:
    """Read one probe; returns the EVEN and ODD outcomes in that order."""
    if probe not in state.probes:
        if probe in state.retired:
            raise ProbeError(f"probe {probe} was already read")
        raise ProbeError(f"probe {probe} was never written")
    p = state.probes.index(probe)
    probes = state.probes[:p] + state.probes[p + 1:]
    retired = state.retired | {probe}
    split: dict[Parity, dict[TermKey, complex]] = {Parity.EVEN: {}, Parity.ODD: {}}
    for (b, t), a in state.terms.items():
        shift = abs(t[p])
        if shift > 1:
            raise ProbeError(f"probe {probe} carries tag {t[p]}; a single PCG gives at most 1")
        bucket = split[Parity.EVEN if shift == 1 else Parity.ODD]
        key = (b, t[:p] + t[p + 1:])
        bucket[key] = bucket.get(key, 0) + a
    out = []
    for parity, terms in split.items():
        prob = sum(abs(a) ** 2 for a in terms.values())
        if prob <= PRUNE ** 2:
            out.append(HomodyneOutcome(parity, 0.0, None))
            continue
        post = PureState(state.registry, terms, probes, retired).normalized()
        out.append(HomodyneOutcome(parity, prob, post))
    return out


def fresh_probe(state: PureState) -> int:
    used = set(state.probes) | set(state.retired)
    return max(used, default=0) + 1


def parity_check(state: PureState, x: str, y: str) -> list[HomodyneOutcome]:
    """PCG on ``(x, y)`` followed immediately by its homodyne read."""
    probe = fresh_probe(state)
    return homodyne(apply_pcg(state, x, y, probe), probe)
