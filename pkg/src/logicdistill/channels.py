"""Weighted ensembles of pure states and the four single-error channels."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .state import (
    PureState,
    StateError,
    apply_z,
    default_modes,
    equal_up_to_phase,
    fidelity_pure,
    inner_product,
    make_logic_bell,
    make_upsilon,
)

MAX_DENSE_PHOTONS = 12

LOGIC_BIT = "logic-bit"
LOGIC_PHASE = "logic-phase"
PHYSICAL_BIT = "physical-bit"
PHYSICAL_PHASE = "physical-phase"
ERROR_NAMES = (LOGIC_BIT, LOGIC_PHASE, PHYSICAL_BIT, PHYSICAL_PHASE)


@dataclass(frozen=True)
class ErrorKind:
    """One error type; ``photon`` is the 1-based photon of logic qubit A hit
    by a physical error and is ignored for logic errors."""

    name: str
    photon: int = 1

    def __post_init__(self):
        if self.name not in ERROR_NAMES:
            raise ValueError(f"unknown error kind {self.name!r}; choose from {ERROR_NAMES}")
        if self.photon < 1:
            raise ValueError("photon index is 1-based")

    @property
    def is_logic(self) -> bool:
        return self.name in (LOGIC_BIT, LOGIC_PHASE)

    def __str__(self) -> str:
        if self.is_logic:
            return self.name
        return f"{self.name}({self.photon})"


LogicBitFlip = ErrorKind(LOGIC_BIT)
LogicPhaseFlip = ErrorKind(LOGIC_PHASE)


def PhysicalBitFlip(j: int = 1) -> ErrorKind:
    return ErrorKind(PHYSICAL_BIT, j)


def PhysicalPhaseFlip(j: int = 1) -> ErrorKind:
    return ErrorKind(PHYSICAL_PHASE, j)


@dataclass(frozen=True)
class MixedState:
    components: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        if not self.components:
            raise StateError("a mixed state needs at least one component")
        reg = self.components[0][1].registry
        total = 0.0
        for w, s in self.components:
            if w <= 0:
                raise StateError(f"component weight {w} is not positive")
            if s.registry != reg:
                raise StateError("mixture components live on different registries")
            total += w
        if abs(total - 1) > 1e-10:
            raise StateError(f"weights sum to {total}, not 1")

    @classmethod
    def from_weighted(cls, pairs: Iterable[tuple[float, PureState]], merge: bool = True,
                      atol: float = 1e-12) -> "MixedState":
        """Normalize weights, dropping zero weights; ``merge`` folds components
        equal up to global phase into one."""
        pairs = [(float(w), s) for w, s in pairs if w > 0]
        if not pairs:
            raise StateError("all weights are zero")
        if merge:
            merged: list[list] = []
            for w, s in pairs:
                for slot in merged:
                    if equal_up_to_phase(slot[1], s, atol):
                        slot[0] += w
                        break
                else:
                    merged.append([w, s])
            pairs = [(w, s) for w, s in merged]
        total = sum(w for w, _ in pairs)
        return cls(tuple((w / total, s) for w, s in pairs))

    @classmethod
    def pure(cls, state: PureState) -> "MixedState":
        return cls(((1.0, state),))

    @property
    def registry(self) -> tuple[str, ...]:
        return self.components[0][1].registry

    @property
    def weights(self) -> list[float]:
        return [w for w, _ in self.components]


def error_state(kind: ErrorKind, m: int = 2) -> PureState:
    """The state Phi+_m turns into under ``kind``."""
    if kind.name == LOGIC_BIT:
        return make_logic_bell("Psi+", m)
    if kind.name == LOGIC_PHASE:
        return make_logic_bell("Phi-", m)
    if kind.photon > m:
        raise ValueError(f"photon {kind.photon} does not exist in an {m}-photon logic qubit")
    if kind.name == PHYSICAL_BIT:
        return make_upsilon(m, kind.photon)
    modes_a, _ = default_modes(m)
    return apply_z(make_logic_bell("Phi+", m), modes_a[kind.photon - 1])


def make_mixture(kind: ErrorKind, F: float, m: int = 2) -> MixedState:
    """F |Phi+_m><Phi+_m| + (1-F) |err><err| for the error state of ``kind``."""
    if not 0 <= F <= 1:
        raise ValueError(f"F out of range: {F}")
    if m < 2:
        raise ValueError("m must be at least 2")
    target = make_logic_bell("Phi+", m)
    err = error_state(kind, m)
    return MixedState.from_weighted([(F, target), (1 - F, err)], merge=False)


def apply_channel_equivalence_check(m: int = 2, side: str = "A") -> bool:
    """True iff a Z on any single photon of logic qubit ``side`` maps Phi+_m to
    Psi+_m up to a global phase."""
    target = make_logic_bell("Psi+", m)
    modes_a, modes_b = default_modes(m)
    modes = modes_a if side == "A" else modes_b
    phi = make_logic_bell("Phi+", m)
    return all(equal_up_to_phase(apply_z(phi, mode), target) for mode in modes)


def fidelity(mixed: MixedState, target: PureState) -> float:
    """Sum_i w_i |<target|psi_i>|^2."""
    if mixed.registry != target.registry:
        raise StateError(f"registry mismatch: {mixed.registry} vs {target.registry}")
    return float(sum(w * fidelity_pure(s, target) for w, s in mixed.components))


def state_vector(state: PureState) -> np.ndarray:
    """Dense amplitude vector; mode order is the registry, H=0 and V=1, first mode most significant."""
    n = state.n_modes
    if n > MAX_DENSE_PHOTONS:
        raise StateError(f"{n} photons is too large for a dense vector (max {MAX_DENSE_PHOTONS})")
    vec = np.zeros(2 ** n, dtype=complex)
    for basis, amp in state.amplitudes().items():
        vec[int(basis.replace("H", "0").replace("V", "1"), 2)] += amp
    return vec


def density_matrix(mixed: MixedState | PureState) -> np.ndarray:
    if isinstance(mixed, PureState):
        mixed = MixedState.pure(mixed)
    rho = 0
    for w, s in mixed.components:
        v = state_vector(s)
        rho = rho + w * np.outer(v, v.conj())
    return rho


def gram_matrix(states: Sequence[PureState]) -> np.ndarray:
    return np.array([[inner_product(a, b) for b in states] for a in states])
