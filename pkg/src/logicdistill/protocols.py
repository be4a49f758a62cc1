"""Distillation and correction rounds for logic-qubit entanglement.

Two copies of a logic Bell mixture are coupled pairwise by parity-check
gates, one per photon position, across the copies: ``(a_i, c_i)`` on
Alice's side and ``(b_i, d_i)`` on Bob's side.  For ``m == 2`` the second
copy lives in ``a3 a4 b3 b4`` instead of ``c1 c2 d1 d2``.  Probes are
numbered Alice first (``1..m``) then Bob (``m+1..2m``).

After post-selection on the probe pattern the second copy is measured in
the {|+>, |->} basis and the kept copy is fixed up by phase flips.

Every pure input gives a finite branch tree that does not depend on the
mixture weights, so trees are built lazily and cached per component pair.
Exact mode walks the whole tree; Monte Carlo mode samples root-to-leaf
paths with the same conditional probabilities.
"""
from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .channels import (
    LOGIC_BIT,
    LOGIC_PHASE,
    PHYSICAL_BIT,
    PHYSICAL_PHASE,
    ErrorKind,
    MixedState,
    error_state,
    fidelity,
)
from .qnd import Parity, apply_pcg, homodyne
from .state import (
    PureState,
    apply_hadamards,
    apply_x,
    apply_z,
    default_modes,
    equal_up_to_phase,
    fidelity_pure,
    make_logic_bell,
    measure_diag,
    relabel,
    tensor,
)

MC_SIGMAS = 4.0


class ProtocolError(RuntimeError):
    """A protocol invariant was violated (unexpected branch, residual error)."""


# --- layout and policies -----------------------------------------------------


@dataclass(frozen=True)
class Layout:
    """Mode names for the kept copy (a, b) and the sacrificed copy (c, d)."""

    m: int
    a: tuple[str, ...]
    b: tuple[str, ...]
    c: tuple[str, ...]
    d: tuple[str, ...]

    @classmethod
    def for_m(cls, m: int) -> "Layout":
        if m < 2:
            raise ValueError("m must be at least 2")
        a, b = default_modes(m)
        if m == 2:
            c, d = ["a3", "a4"], ["b3", "b4"]
        else:
            c, d = default_modes(m, "cd")
        return cls(m, tuple(a), tuple(b), tuple(c), tuple(d))

    @property
    def kept(self) -> tuple[str, ...]:
        return self.a + self.b

    @property
    def sacrificed(self) -> tuple[str, ...]:
        return self.c + self.d

    @property
    def partner(self) -> dict[str, str]:
        """Sacrificed-copy mode -> kept-copy mode it is parity-checked against."""
        return dict(zip(self.sacrificed, self.kept))

    @property
    def probes(self) -> list[tuple[int, str, str]]:
        return [(k + 1, x, y) for k, (x, y) in enumerate(zip(self.kept, self.sacrificed))]


@dataclass(frozen=True)
class SelectionPolicy:
    """Accepted parity patterns, written as four letters over ``E``/``O`` for
    probes on photons (A1, A2, B1, B2).  For ``m > 2`` all further probes
    must read even.  An odd probe is corrected by a bit flip on its
    sacrificed-copy photon before the final measurement."""

    name: str
    accepted: tuple[str, ...]

    def __post_init__(self):
        for pat in self.accepted:
            if len(pat) != 4 or set(pat) - {"E", "O"}:
                raise ValueError(f"bad selection pattern {pat!r}")
            if pat.count("O") % 2:
                raise ValueError(f"pattern {pat!r} has odd weight and would accept cross terms")

    def expand(self, m: int) -> dict[str, tuple[str, ...]]:
        """Full ``2m``-letter patterns mapped to the sacrificed modes to bit-flip."""
        layout = Layout.for_m(m)
        out = {}
        for pat in self.accepted:
            full = ["E"] * (2 * m)
            full[0], full[1], full[m], full[m + 1] = pat
            flips = tuple(mode for mode, p in zip(layout.sacrificed, full) if p == "O")
            out["".join(full)] = flips
        return out


CANONICAL = SelectionPolicy("canonical", ("EEEE",))
EXTENDED = SelectionPolicy("extended", ("EEEE", "OOOO", "EEOO", "OOEE"))
POLICIES = {p.name: p for p in (CANONICAL, EXTENDED)}


def get_policy(policy: SelectionPolicy | str) -> SelectionPolicy:
    if isinstance(policy, SelectionPolicy):
        return policy
    try:
        return POLICIES[policy]
    except KeyError:
        raise ValueError(f"unknown policy {policy!r}; choose from {sorted(POLICIES)}") from None


# --- result types --------------------------------------------------------------


@dataclass(frozen=True)
class BranchRecord:
    inputs: tuple[str, ...]
    probe_pattern: str
    measurement: str | None
    corrections: tuple[str, ...]
    probability: float
    accepted: bool
    fidelity: float | None = None


@dataclass
class RoundResult:
    success_probability: float
    output: MixedState | None
    outcome_log: list[BranchRecord]
    input_fidelity: float
    output_fidelity: float
    mode: str = "exact"
    trials: int | None = None
    seed: int | None = None
    success_stderr: float = 0.0
    fidelity_stderr: float = 0.0
    notes: list[str] = field(default_factory=list)

    def logged_fidelity(self) -> float:
        """Output fidelity recomputed from the accepted branches of the log."""
        acc = [r for r in self.outcome_log if r.accepted]
        total = sum(r.probability for r in acc)
        if total == 0:
            return float("nan")
        return sum(r.probability * r.fidelity for r in acc) / total


# --- branch tree ---------------------------------------------------------------


@dataclass
class Leaf:
    probe_pattern: str
    measurement: str | None
    corrections: tuple[str, ...]
    state: PureState | None

    @property
    def accepted(self) -> bool:
        return self.state is not None


class Node:
    """One decision point of a protocol run; children are built on first use."""

    def __init__(self, expand):
        self._expand = expand

    @functools.cached_property
    def children(self) -> list[tuple[float, "Node | Leaf"]]:
        return self._expand()


def _walk(node: Node | Leaf, prob: float = 1.0) -> Iterator[tuple[float, Leaf]]:
    if isinstance(node, Leaf):
        yield prob, node
        return
    for p, child in node.children:
        yield from _walk(child, prob * p)


def _sample(node: Node | Leaf, uniforms: Sequence[float]) -> Leaf:
    for u in uniforms:
        if isinstance(node, Leaf):
            return node
        acc = 0.0
        chosen = node.children[-1][1]
        for p, child in node.children:
            acc += p
            if u < acc:
                chosen = child
                break
        node = chosen
    if not isinstance(node, Leaf):
        raise ProtocolError("random stream exhausted before reaching a leaf")
    return node


def _uses_hadamard(kind: ErrorKind) -> bool:
    # logic phase flips are caught in the computational basis; the other
    # kinds are logic bit flips in disguise and need the rotated frame
    return kind.name != LOGIC_PHASE


def feed_forward(measurement: str, layout: Layout) -> tuple[str, ...]:
    """Kept-copy photons to phase-flip for a +/- pattern on the sacrificed copy.

    Flipping every outcome only changes a global phase, so the lighter of the
    pattern and its complement is used (all-equal patterns need nothing).
    """
    minus = [i for i, s in enumerate(measurement) if s == "-"]
    if len(minus) > len(measurement) // 2:
        minus = [i for i, s in enumerate(measurement) if s == "+"]
    return tuple(layout.kept[i] for i in minus)


def _distill_tree(kind: ErrorKind, layout: Layout, policy: SelectionPolicy,
                  first: PureState, second: PureState) -> Node:
    rename = dict(zip(layout.kept, layout.sacrificed))
    state = tensor(first, relabel(second, rename))
    rotate = _uses_hadamard(kind)
    if rotate:
        state = apply_hadamards(state, state.registry)
    for probe, x, y in layout.probes:
        state = apply_pcg(state, x, y, probe)
    accepted = policy.expand(layout.m)
    n_probes = len(layout.probes)

    def measure(s: PureState, pattern: str, flips: tuple[str, ...]) -> Node:
        def expand():
            out = []
            for res in measure_diag(s, layout.sacrificed):
                if res.state is None:
                    continue
                zs = feed_forward(res.pattern, layout)
                post = res.state
                for mode in zs:
                    post = apply_z(post, mode)
                if rotate:
                    post = apply_hadamards(post, layout.kept)
                corr = tuple(f"X:{f}" for f in flips) + tuple(f"Z:{z}" for z in zs)
                out.append((res.probability, Leaf(pattern, res.pattern, corr, post)))
            return out
        return Node(expand)

    def read(s: PureState, k: int, pattern: str) -> Node | Leaf:
        if k == n_probes:
            if pattern not in accepted:
                return Leaf(pattern, None, (), None)
            flips = accepted[pattern]
            for mode in flips:
                s = apply_x(s, mode)
            return measure(s, pattern, flips)

        def expand():
            out = []
            for res in homodyne(s, layout.probes[k][0]):
                if res.state is not None:
                    out.append((res.probability, read(res.state, k + 1, pattern + res.parity.value)))
            return out
        return Node(expand)

    return read(state, 0, "")


def _component_name(kind: ErrorKind, role: str) -> str:
    if role == "target":
        return "Phi+"
    return {LOGIC_BIT: "Psi+", PHYSICAL_PHASE: "Psi+", LOGIC_PHASE: "Phi-"}[kind.name]


@functools.lru_cache(maxsize=None)
def _cached_tree(kind: ErrorKind, m: int, policy: SelectionPolicy, first: str, second: str) -> Node:
    layout = Layout.for_m(m)
    pick = {"target": make_logic_bell("Phi+", m), "error": error_state(kind, m)}
    return _distill_tree(kind, layout, policy, pick[first], pick[second])


def _classify(mixed: MixedState, kind: ErrorKind, m: int) -> list[tuple[float, str]]:
    target = make_logic_bell("Phi+", m)
    err = error_state(kind, m)
    if mixed.registry != target.registry:
        raise ValueError(f"input registry {mixed.registry} does not match m={m}")
    roles = []
    for w, s in mixed.components:
        if equal_up_to_phase(s, target, 1e-10):
            roles.append((w, "target"))
        elif equal_up_to_phase(s, err, 1e-10):
            roles.append((w, "error"))
        else:
            raise ValueError(f"input component is neither Phi+ nor the {kind} error state")
    return roles


def _check_kind_policy(kind: ErrorKind, policy: SelectionPolicy) -> None:
    if kind.name == PHYSICAL_BIT:
        raise ValueError("physical bit flips are corrected locally; use correct_physical_bitflip")
    if kind.name == LOGIC_PHASE and policy.accepted != ("EEEE",):
        # without the Hadamard frame a mixed E/O pattern matches Phi+ x Phi- pairs
        raise ValueError("logic phase-flip distillation only supports the canonical policy")


def distill_round(mixed: MixedState, kind: ErrorKind, m: int = 2,
                  policy: SelectionPolicy | str = CANONICAL, mode: str = "exact",
                  trials: int = 100_000, seed: int | None = None) -> RoundResult:
    """One distillation round on two independent copies of ``mixed``.

    ``kind`` selects the circuit: logic bit flips (and physical phase flips,
    which are the same error) run in the Hadamard-rotated frame, logic phase
    flips in the computational basis.  ``mode`` is ``"exact"`` or
    ``"montecarlo"``; the latter needs ``seed``.
    """
    policy = get_policy(policy)
    _check_kind_policy(kind, policy)
    roles = _classify(mixed, kind, m)
    target = make_logic_bell("Phi+", m)
    f_in = fidelity(mixed, target)
    pairs = [((w1 * w2), (r1, r2)) for (w1, r1), (w2, r2) in itertools.product(roles, roles)]
    names = {r: _component_name(kind, r) for r in ("target", "error")}

    if mode == "exact":
        log, outputs = [], []
        p_succ = 0.0
        for w, (r1, r2) in pairs:
            tree = _cached_tree(kind, m, policy, r1, r2)
            for p, leaf in _walk(tree):
                prob = w * p
                fid = fidelity_pure(leaf.state, target) if leaf.accepted else None
                log.append(BranchRecord((names[r1], names[r2]), leaf.probe_pattern, leaf.measurement,
                                        leaf.corrections, prob, leaf.accepted, fid))
                if leaf.accepted:
                    p_succ += prob
                    outputs.append((prob, leaf.state))
        output = MixedState.from_weighted(outputs) if outputs else None
        f_out = fidelity(output, target) if output is not None else float("nan")
        return RoundResult(p_succ, output, log, f_in, f_out)

    if mode != "montecarlo":
        raise ValueError(f"unknown mode {mode!r}")
    if seed is None:
        raise ValueError("Monte Carlo mode requires a seed")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    return _montecarlo(pairs, names, kind, m, policy, trials, seed, f_in, target)


def trial_uniforms(seed: int, trials: int, depth: int) -> np.ndarray:
    """Row ``i`` is the uniform stream of trial ``i``.

    Philox-4x64 keyed by ``seed``; the block layout is fixed, so a trial's
    stream depends only on ``(seed, i)`` and not on how trials are scheduled.
    """
    gen = np.random.Generator(np.random.Philox(key=int(seed) & (2 ** 64 - 1)))
    return gen.random((trials, depth))


def _montecarlo(pairs, names, kind, m, policy, trials, seed, f_in, target) -> RoundResult:
    depth = 2 * m + 2
    u = trial_uniforms(seed, trials, depth + 1)
    cum = np.cumsum([w for w, _ in pairs])
    cum[-1] = 1.0
    trees = [_cached_tree(kind, m, policy, r1, r2) for _, (r1, r2) in pairs]
    comp_idx = np.searchsorted(cum, u[:, 0], side="right")
    hits = 0
    fids = []
    outputs: dict[int, list] = {}
    counts: dict[tuple, int] = {}
    for t in range(trials):
        ci = int(comp_idx[t])
        leaf = _sample(trees[ci], u[t, 1:])
        key = (ci, leaf.probe_pattern, leaf.measurement)
        counts[key] = counts.get(key, 0) + 1
        if leaf.accepted:
            hits += 1
            f = fidelity_pure(leaf.state, target)
            fids.append(f)
            slot = outputs.setdefault(id(leaf), [0, leaf.state])
            slot[0] += 1
    log = []
    for (ci, pat, meas), n in sorted(counts.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2] or "")):
        r1, r2 = pairs[ci][1]
        log.append(BranchRecord((names[r1], names[r2]), pat, meas, (), n / trials, meas is not None))
    p = hits / trials
    p_err = math.sqrt(p * (1 - p) / trials)
    if fids:
        arr = np.asarray(fids)
        f_out = float(arr.mean())
        f_err = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        output = MixedState.from_weighted([(n, s) for n, s in outputs.values()])
    else:
        f_out, f_err, output = float("nan"), 0.0, None
    return RoundResult(p, output, log, f_in, f_out, mode="montecarlo", trials=trials, seed=seed,
                       success_stderr=p_err, fidelity_stderr=f_err)


# --- section-wise helpers --------------------------------------------------------


def collapsed_state(kind: ErrorKind, m: int, pattern: str, first: str = "target",
                    second: str = "target", corrected: bool = True) -> PureState | None:
    """Both-copy state right after post-selecting the full probe ``pattern``
    (before the +/- measurement), optionally with the bit-flip correction of
    the extended policy applied.  ``None`` if the pattern cannot occur."""
    layout = Layout.for_m(m)
    pick = {"target": make_logic_bell("Phi+", m), "error": error_state(kind, m)}
    state = tensor(pick[first], relabel(pick[second], dict(zip(layout.kept, layout.sacrificed))))
    if _uses_hadamard(kind):
        state = apply_hadamards(state, state.registry)
    for probe, x, y in layout.probes:
        state = apply_pcg(state, x, y, probe)
    for (probe, _, _), want in zip(layout.probes, pattern):
        outcome = homodyne(state, probe)[0 if want == "E" else 1]
        if outcome.state is None:
            return None
        state = outcome.state
    if corrected:
        for mode, p in zip(layout.sacrificed, pattern):
            if p == "O":
                state = apply_x(state, mode)
    return state


def acceptance_probability(first: PureState, second: PureState, m: int = 2,
                           policy: SelectionPolicy | str = CANONICAL,
                           kind: ErrorKind | None = None) -> float:
    """Probability that the probe pattern is accepted for the pure pair ``first x second``."""
    policy = get_policy(policy)
    kind = kind or ErrorKind(LOGIC_BIT)
    layout = Layout.for_m(m)
    tree = _distill_tree(kind, layout, policy, first, second)
    return sum(p for p, leaf in _walk(tree) if leaf.accepted)


def verify_rejection(kind: ErrorKind | None = None, m: int = 2) -> dict[str, dict[str, float]]:
    """Acceptance probability of every two-copy pure input under each policy.

    For the bit-flip circuit the cross terms ``Phi+ x Psi+`` and
    ``Psi+ x Phi+`` must never be accepted.
    """
    kind = kind or ErrorKind(LOGIC_BIT)
    target = make_logic_bell("Phi+", m)
    err = error_state(kind, m)
    en = _component_name(kind, "error")
    inputs = {
        "Phi+xPhi+": (target, target),
        f"Phi+x{en}": (target, err),
        f"{en}xPhi+": (err, target),
        f"{en}x{en}": (err, err),
    }
    policies = [CANONICAL] if kind.name == LOGIC_PHASE else [CANONICAL, EXTENDED]
    return {name: {pol.name: acceptance_probability(s1, s2, m, pol, kind) for pol in policies}
            for name, (s1, s2) in inputs.items()}


# --- physical bit-flip correction ----------------------------------------------


def _neighbor(j: int, m: int) -> int:
    return j + 1 if j < m else j - 1


def localize_flip(odd_checks: Sequence[tuple[int, int]], even_checks: Sequence[tuple[int, int]],
                  m: int) -> list[int]:
    """Photons (1-based) that lie on every odd check and on no even check."""
    if not odd_checks:
        return []
    on_even = {i for c in even_checks for i in c}
    return [i for i in range(1, m + 1)
            if all(i in c for c in odd_checks) and i not in on_even]


def _correction_tree(state: PureState, m: int, strategy: str, j: int | None) -> Node | Leaf:
    modes_a, _ = default_modes(m)
    if strategy == "known_location":
        if j is None or not 1 <= j <= m:
            raise ValueError(f"known_location needs a flip index in 1..{m}")
        checks = [(j, _neighbor(j, m))]
    elif strategy == "localize":
        checks = [(i, i + 1) for i in range(1, m)]
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    probes = []
    for k, (x, y) in enumerate(checks, start=1):
        state = apply_pcg(state, modes_a[x - 1], modes_a[y - 1], k)
        probes.append(k)

    def finish(s: PureState, pattern: str) -> Leaf:
        odd = [c for c, p in zip(checks, pattern) if p == "O"]
        even = [c for c, p in zip(checks, pattern) if p == "E"]
        notes = ()
        if strategy == "known_location":
            flip = [j] if odd else []
        else:
            cands = localize_flip(odd, even, m)
            if len(cands) > 1:
                notes = (f"ambiguous:{','.join(map(str, cands))}",)
            flip = cands[:1]
        for i in flip:
            s = apply_x(s, modes_a[i - 1])
        return Leaf(pattern, None, tuple(f"X:{modes_a[i - 1]}" for i in flip) + notes, s)

    def read(s: PureState, k: int, pattern: str) -> Node | Leaf:
        if k == len(probes):
            return finish(s, pattern)

        def expand():
            return [(r.probability, read(r.state, k + 1, pattern + r.parity.value))
                    for r in homodyne(s, probes[k]) if r.state is not None]
        return Node(expand)

    return read(state, 0, "")


def correct_physical_bitflip(mixed: MixedState, m: int = 2, strategy: str = "localize",
                             j: int | None = None, strict: bool = True) -> RoundResult:
    """Locate and undo a single bit flip inside logic qubit A, one copy only.

    ``known_location`` checks photon ``j`` against a neighbour and flips it
    back on an odd reading; ``localize`` sweeps neighbouring pairs
    ``(a1,a2), ..., (a_{m-1},a_m)`` and infers the flipped photon.  Every
    branch counts as a success.  With ``strict`` a residual error (output
    fidelity below 1) raises :class:`ProtocolError`.
    """
    target = make_logic_bell("Phi+", m)
    if mixed.registry != target.registry:
        raise ValueError(f"input registry {mixed.registry} does not match m={m}")
    f_in = fidelity(mixed, target)
    log, outputs, notes = [], [], []
    for w, s in mixed.components:
        name = "Phi+" if equal_up_to_phase(s, target, 1e-10) else "Upsilon+"
        for p, leaf in _walk(_correction_tree(s, m, strategy, j)):
            fid = fidelity_pure(leaf.state, target)
            log.append(BranchRecord((name,), leaf.probe_pattern, None, leaf.corrections, w * p, True, fid))
            outputs.append((w * p, leaf.state))
            notes.extend(c for c in leaf.corrections if c.startswith("ambiguous"))
    output = MixedState.from_weighted(outputs)
    f_out = fidelity(output, target)
    result = RoundResult(1.0, output, log, f_in, f_out, notes=sorted(set(notes)))
    if f_out < 1 - 1e-12:
        msg = f"residual error after correction: output fidelity {f_out:.12g}"
        result.notes.append(msg)
        if strict:
            raise ProtocolError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return result
