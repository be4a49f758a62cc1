"""Sparse polarization state vectors over named spatial modes.

A :class:`PureState` maps basis assignments (one ``H``/``V`` character per
registered mode) to complex amplitudes.  Between a parity-check gate and its
homodyne read every term also carries one integer phase tag per active probe,
counted in units of the cross-Kerr phase shift.

States are immutable; every operation returns a new state.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

PRUNE = 1e-14
SQRT1_2 = 1 / math.sqrt(2)

_LABEL_RE = re.compile(r"^([A-Za-z]+)(\d+)$")

BELL_KINDS = ("phi+", "phi-", "psi+", "psi-")
LOGIC_KINDS = ("Phi+", "Phi-", "Psi+", "Psi-")


class StateError(ValueError):
    """Raised for malformed registries, unknown modes and similar misuse."""


def mode_key(label: str) -> tuple[str, int]:
    m = _LABEL_RE.match(label)
    if m is None:
        raise StateError(f"bad mode label {label!r}; expected letters followed by an index")
    return m.group(1), int(m.group(2))


def canonical_order(labels: Iterable[str]) -> tuple[str, ...]:
    labels = tuple(labels)
    if len(set(labels)) != len(labels):
        raise StateError(f"duplicate mode labels in {labels}")
    return tuple(sorted(labels, key=mode_key))


TermKey = tuple[str, tuple[int, ...]]


@dataclass(frozen=True, eq=False)
class PureState:
    """Sparse pure state.

    ``terms`` maps ``(basis, tags)`` to an amplitude, where ``basis`` has one
    character per entry of ``registry`` and ``tags`` is aligned with
    ``probes``.  ``retired`` records probes that were already read so they
    cannot be written again.
    """

    registry: tuple[str, ...]
    terms: Mapping[TermKey, complex]
    probes: tuple[int, ...] = ()
    retired: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if tuple(canonical_order(self.registry)) != self.registry:
            raise StateError("registry is not in canonical order; use PureState.build")

    @classmethod
    def build(cls, registry: Sequence[str], amplitudes: Mapping[str, complex]) -> "PureState":
        """Build an untagged state from basis strings given in ``registry`` order."""
        registry = tuple(registry)
        order = canonical_order(registry)
        perm = [registry.index(lab) for lab in order]
        terms: dict[TermKey, complex] = {}
        for basis, amp in amplitudes.items():
            if len(basis) != len(registry) or set(basis) - {"H", "V"}:
                raise StateError(f"basis {basis!r} does not match registry {registry}")
            key = ("".join(basis[i] for i in perm), ())
            terms[key] = terms.get(key, 0) + complex(amp)
        return cls(order, _pruned(terms))

    # --- inspection -------------------------------------------------------

    @property
    def n_modes(self) -> int:
        return len(self.registry)

    def index(self, mode: str) -> int:
        try:
            return self.registry.index(mode)
        except ValueError:
            raise StateError(f"unknown mode {mode!r}; registry is {self.registry}") from None

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def amplitudes(self) -> dict[str, complex]:
        """Amplitudes keyed by basis string; only valid for untagged states."""
        if self.probes:
            raise StateError(f"state still carries tags for probes {self.probes}")
        return {basis: amp for (basis, _), amp in self.terms.items()}

    def normalized(self) -> "PureState":
        n = self.norm()
        if n < PRUNE:
            raise StateError("cannot normalize a zero state")
        return self._with_terms({k: a / n for k, a in self.terms.items()})

    def _with_terms(self, terms: Mapping[TermKey, complex]) -> "PureState":
        return PureState(self.registry, _pruned(terms), self.probes, self.retired)

    def allclose(self, other: "PureState", atol: float = 1e-12) -> bool:
        """Term-by-term equality, including global phase."""
        if self.registry != other.registry or self.probes != other.probes:
            return False
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0) - other.terms.get(k, 0)) <= atol for k in keys)

    def __repr__(self) -> str:
        parts = []
        for (basis, tags), amp in sorted(self.terms.items()):
            t = f" tags={tags}" if tags else ""
            parts.append(f"{amp.real:+.6g}{amp.imag:+.6g}j|{basis}>{t}")
        return f"PureState({','.join(self.registry)}: " + " ".join(parts) + ")"


def _pruned(terms: Mapping[TermKey, complex]) -> dict[TermKey, complex]:
    return {k: a for k, a in terms.items() if abs(a) >= PRUNE}


def superpose(pairs: Iterable[tuple[complex, PureState]]) -> PureState:
    """Linear combination of untagged states over the same registry (not normalized)."""
    pairs = list(pairs)
    registry = pairs[0][1].registry
    out: dict[TermKey, complex] = {}
    for coeff, s in pairs:
        if s.registry != registry or s.probes:
            raise StateError("superpose needs untagged states on one registry")
        for k, a in s.terms.items():
            out[k] = out.get(k, 0) + coeff * a
    return PureState(registry, _pruned(out))


def tensor(s1: PureState, s2: PureState) -> PureState:
    """Tensor product of two untagged states on disjoint registries."""
    if s1.probes or s2.probes:
        raise StateError("tensor product of tagged states is not supported")
    if set(s1.registry) & set(s2.registry):
        raise StateError(f"registries overlap: {s1.registry} / {s2.registry}")
    joint = s1.registry + s2.registry
    order = canonical_order(joint)
    perm = [joint.index(lab) for lab in order]
    out: dict[TermKey, complex] = {}
    for (b1, _), a1 in s1.terms.items():
        for (b2, _), a2 in s2.terms.items():
            b = b1 + b2
            out[("".join(b[i] for i in perm), ())] = a1 * a2
    return PureState(order, _pruned(out), retired=s1.retired | s2.retired)


def relabel(state: PureState, mapping: Mapping[str, str]) -> PureState:
    """Rename modes; labels absent from ``mapping`` keep their names."""
    new = tuple(mapping.get(lab, lab) for lab in state.registry)
    order = canonical_order(new)
    perm = [new.index(lab) for lab in order]
    terms = {("".join(b[i] for i in perm), t): a for (b, t), a in state.terms.items()}
    return PureState(order, terms, state.probes, state.retired)


# --- constructors ----------------------------------------------------------


def make_bell(kind: str, modes: Sequence[str]) -> PureState:
    """Two-photon Bell state ``phi+``, ``phi-``, ``psi+`` or ``psi-`` on ``modes``."""
    if kind not in BELL_KINDS:
        raise StateError(f"unknown Bell kind {kind!r}")
    if len(modes) != 2 or modes[0] == modes[1]:
        raise StateError("a Bell state needs two distinct modes")
    sign = 1 if kind.endswith("+") else -1
    if kind.startswith("phi"):
        amps = {"HH": SQRT1_2, "VV": sign * SQRT1_2}
    else:
        amps = {"HV": SQRT1_2, "VH": sign * SQRT1_2}
    return PureState.build(modes, amps)


def make_ghz(sign: str, modes: Sequence[str]) -> PureState:
    """(|H...H> +/- |V...V>)/sqrt(2) over ``modes``."""
    if sign not in ("+", "-"):
        raise StateError(f"GHZ sign must be '+' or '-', got {sign!r}")
    if len(modes) < 2:
        raise StateError("a GHZ state needs at least two modes")
    m = len(modes)
    s = 1 if sign == "+" else -1
    return PureState.build(modes, {"H" * m: SQRT1_2, "V" * m: s * SQRT1_2})


def default_modes(m: int, letters: str = "ab") -> tuple[list[str], list[str]]:
    return [f"{letters[0]}{i}" for i in range(1, m + 1)], [f"{letters[1]}{i}" for i in range(1, m + 1)]


def make_logic_bell(kind: str, m: int = 2, modes_a: Sequence[str] | None = None,
                    modes_b: Sequence[str] | None = None) -> PureState:
    """Logic Bell state of two logic qubits, each an ``m``-photon GHZ state.

    ``Phi+/-`` = (GHZ+ GHZ+ +/- GHZ- GHZ-)/sqrt(2) and
    ``Psi+/-`` = (GHZ+ GHZ- +/- GHZ- GHZ+)/sqrt(2).
    """
    if kind not in LOGIC_KINDS:
        raise StateError(f"unknown logic kind {kind!r}")
    if m < 2:
        raise StateError("logic qubits need m >= 2 photons")
    da, db = default_modes(m)
    modes_a = list(modes_a) if modes_a is not None else da
    modes_b = list(modes_b) if modes_b is not None else db
    if len(modes_a) != m or len(modes_b) != m:
        raise StateError(f"each logic qubit needs exactly {m} modes")
    if set(modes_a) & set(modes_b):
        raise StateError("logic qubit registries overlap")
    gp, gm = "+", "-"
    if kind.startswith("Phi"):
        first, second = (gp, gp), (gm, gm)
    else:
        first, second = (gp, gm), (gm, gp)
    sign = 1 if kind.endswith("+") else -1
    t1 = tensor(make_ghz(first[0], modes_a), make_ghz(first[1], modes_b))
    t2 = tensor(make_ghz(second[0], modes_a), make_ghz(second[1], modes_b))
    return superpose([(SQRT1_2, t1), (sign * SQRT1_2, t2)])


def make_upsilon(m: int = 2, flipped_index: int = 1, modes_a: Sequence[str] | None = None,
                 modes_b: Sequence[str] | None = None) -> PureState:
    """``Phi+`` of ``m``-photon logic qubits with photon ``flipped_index`` of A bit-flipped."""
    if not 1 <= flipped_index <= m:
        raise StateError(f"flipped index {flipped_index} outside 1..{m}")
    da, _ = default_modes(m)
    modes_a = list(modes_a) if modes_a is not None else da
    return apply_x(make_logic_bell("Phi+", m, modes_a, modes_b), modes_a[flipped_index - 1])


# --- single-photon gates ---------------------------------------------------


def apply_x(state: PureState, mode: str) -> PureState:
    i = state.index(mode)
    flip = {"H": "V", "V": "H"}
    return state._with_terms({(b[:i] + flip[b[i]] + b[i + 1:], t): a
                              for (b, t), a in state.terms.items()})


def apply_z(state: PureState, mode: str) -> PureState:
    i = state.index(mode)
    return state._with_terms({(b, t): (-a if b[i] == "V" else a)
                              for (b, t), a in state.terms.items()})


def apply_hadamard(state: PureState, mode: str) -> PureState:
    """H -> (H+V)/sqrt(2), V -> (H-V)/sqrt(2) on one mode."""
    i = state.index(mode)
    out: dict[TermKey, complex] = {}
    for (b, t), a in state.terms.items():
        head, tail = b[:i], b[i + 1:]
        c = a * SQRT1_2
        kh, kv = (head + "H" + tail, t), (head + "V" + tail, t)
        out[kh] = out.get(kh, 0) + c
        out[kv] = out.get(kv, 0) + (c if b[i] == "H" else -c)
    return state._with_terms(out)


def apply_hadamards(state: PureState, modes: Iterable[str]) -> PureState:
    for mode in modes:
        state = apply_hadamard(state, mode)
    return state


# --- measurement -----------------------------------------------------------


class Outcome(NamedTuple):
    pattern: str
    probability: float
    state: PureState | None


def measure_diag(state: PureState, modes: Sequence[str]) -> list[Outcome]:
    """Measure ``modes`` in the {|+>, |->} basis, enumerating all 2^k patterns.

    Patterns are strings over ``+``/``-`` in the order of ``modes``.  Each
    post-state is normalized with the measured modes removed; zero-probability
    patterns carry ``state=None``.
    """
    modes = list(modes)
    if not modes:
        raise StateError("measure_diag needs at least one mode")
    idx = [state.index(mode) for mode in modes]
    if len(set(idx)) != len(idx):
        raise StateError("duplicate modes in measurement")
    keep = [i for i in range(state.n_modes) if i not in set(idx)]
    registry = tuple(state.registry[i] for i in keep)
    k = len(modes)
    scale = SQRT1_2 ** k
    patterns = list(itertools.product("+-", repeat=k))
    buckets: list[dict[TermKey, complex]] = [{} for _ in patterns]
    for (b, t), a in state.terms.items():
        vmask = [b[i] == "V" for i in idx]
        rest = ("".join(b[i] for i in keep), t)
        for p, pat in enumerate(patterns):
            neg = sum(1 for v, s in zip(vmask, pat) if v and s == "-")
            bucket = buckets[p]
            bucket[rest] = bucket.get(rest, 0) + (-a if neg % 2 else a) * scale
    out = []
    for pat, bucket in zip(patterns, buckets):
        bucket = _pruned(bucket)
        prob = sum(abs(a) ** 2 for a in bucket.values())
        post = None
        if prob > PRUNE ** 2 and bucket:
            post = PureState(registry, bucket, state.probes, state.retired).normalized()
        else:
            prob = 0.0
        out.append(Outcome("".join(pat), prob, post))
    return out


def inner_product(s1: PureState, s2: PureState) -> complex:
    """<s1|s2>."""
    if s1.registry != s2.registry:
        raise StateError(f"registry mismatch: {s1.registry} vs {s2.registry}")
    if s1.probes != s2.probes:
        raise StateError("probe tags differ between states")
    small, big = (s1, s2) if len(s1.terms) <= len(s2.terms) else (s2, s1)
    total = 0j
    for k, a in small.terms.items():
        b = big.terms.get(k)
        if b is not None:
            total += a.conjugate() * b if small is s1 else b.conjugate() * a
    return total


def fidelity_pure(state: PureState, target: PureState) -> float:
    return abs(inner_product(target, state)) ** 2


def equal_up_to_phase(s1: PureState, s2: PureState, atol: float = 1e-12) -> bool:
    return abs(fidelity_pure(s1, s2) - 1) <= atol and abs(s1.norm() - 1) <= atol
