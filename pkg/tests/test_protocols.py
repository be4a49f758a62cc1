import math

import numpy as np
import pytest

import dense_oracle as oracle
from logicdistill.analytics import fidelity_map, success_probability
from logicdistill.channels import (
    LogicBitFlip,
    LogicPhaseFlip,
    MixedState,
    PhysicalBitFlip,
    PhysicalPhaseFlip,
    density_matrix,
    make_mixture,
)
from logicdistill.protocols import (
    CANONICAL,
    EXTENDED,
    Layout,
    ProtocolError,
    SelectionPolicy,
    acceptance_probability,
    collapsed_state,
    correct_physical_bitflip,
    distill_round,
    feed_forward,
    localize_flip,
    trial_uniforms,
    verify_rejection,
)
from logicdistill.state import apply_x, make_logic_bell


def test_layout_m2_wiring():
    lay = Layout.for_m(2)
    assert lay.probes == [(1, "a1", "a3"), (2, "a2", "a4"), (3, "b1", "b3"), (4, "b2", "b4")]


def test_layout_m3_wiring():
    lay = Layout.for_m(3)
    assert lay.probes[0] == (1, "a1", "c1")
    assert lay.probes[3] == (4, "b1", "d1")
    assert len(lay.probes) == 6


def test_policy_expand_m3():
    full = EXTENDED.expand(3)
    assert set(full) == {"EEEEEE", "OOEOOE", "EEEOOE", "OOEEEE"}
    assert full["EEEOOE"] == ("d1", "d2")


def test_policy_rejects_odd_weight():
    with pytest.raises(ValueError):
        SelectionPolicy("bad", ("OEEE",))


def test_feed_forward_uses_lighter_pattern():
    lay = Layout.for_m(2)
    assert feed_forward("++++", lay) == ()
    assert feed_forward("----", lay) == ()
    assert feed_forward("+-++", lay) == ("a2",)
    assert feed_forward("---+", lay) == ("b2",)


@pytest.mark.parametrize("F", [0.55, 0.7, 0.9])
@pytest.mark.parametrize("kind", [LogicBitFlip, LogicPhaseFlip, PhysicalPhaseFlip(2)])
def test_fidelity_map_and_success(F, kind):
    res = distill_round(make_mixture(kind, F, 2), kind, 2)
    assert res.output_fidelity == pytest.approx(fidelity_map(F), abs=1e-12)
    assert res.success_probability == pytest.approx(success_probability(F, "canonical", 2, kind), abs=1e-12)


def test_output_is_two_component_mixture():
    res = distill_round(make_mixture(LogicBitFlip, 0.8, 2), LogicBitFlip, 2)
    assert len(res.output.components) == 2
    assert res.output_fidelity == pytest.approx(16 / 17, abs=1e-12)


def test_phase_flip_example():
    res = distill_round(make_mixture(LogicPhaseFlip, 0.7, 2), LogicPhaseFlip, 2)
    assert res.output_fidelity == pytest.approx(49 / 58, abs=1e-12)


def test_half_is_fixed_point():
    res = distill_round(make_mixture(LogicBitFlip, 0.5, 2), LogicBitFlip, 2)
    assert res.output_fidelity == pytest.approx(0.5, abs=1e-12)


def test_pure_input_stays_pure():
    res = distill_round(make_mixture(LogicBitFlip, 1.0, 3), LogicBitFlip, 3, EXTENDED)
    assert res.output_fidelity == pytest.approx(1, abs=1e-12)
    assert res.success_probability == pytest.approx(4 / 32, abs=1e-12)


def test_logged_fidelity_matches_output():
    res = distill_round(make_mixture(LogicBitFlip, 0.65, 2), LogicBitFlip, 2, EXTENDED)
    assert res.logged_fidelity() == pytest.approx(res.output_fidelity, abs=1e-12)
    total = sum(r.probability for r in res.outcome_log)
    assert total == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("policy,patterns", [(CANONICAL, oracle.CANONICAL), (EXTENDED, oracle.EXTENDED)])
def test_against_dense_oracle(policy, patterns):
    F = 0.75
    p_ref, rho_ref = oracle.two_copy_round(F, "Psi+", True, patterns)
    res = distill_round(make_mixture(LogicBitFlip, F, 2), LogicBitFlip, 2, policy)
    assert res.success_probability == pytest.approx(p_ref, abs=1e-12)
    assert np.max(np.abs(density_matrix(res.output) - rho_ref)) < 1e-12


def test_phase_flip_against_dense_oracle():
    p_ref, rho_ref = oracle.two_copy_round(0.6, "Phi-", False, oracle.CANONICAL)
    res = distill_round(make_mixture(LogicPhaseFlip, 0.6, 2), LogicPhaseFlip, 2)
    assert res.success_probability == pytest.approx(p_ref, abs=1e-12)
    assert np.max(np.abs(density_matrix(res.output) - rho_ref)) < 1e-12


def test_phase_flip_with_rotation_does_not_purify():
    # the rotated frame turns phase flips into errors the parity checks cannot see
    _, rho = oracle.two_copy_round(0.8, "Phi-", True, oracle.CANONICAL)
    assert oracle.fidelity(rho, oracle.logic_bell("Phi+")) < 0.8


def test_rejects_foreign_component():
    mixed = MixedState.from_weighted([(0.9, make_logic_bell("Phi+", 2)), (0.1, make_logic_bell("Psi-", 2))])
    with pytest.raises(ValueError):
        distill_round(mixed, LogicBitFlip, 2)


def test_rejects_bad_kind_policy_and_mode():
    mixed = make_mixture(LogicPhaseFlip, 0.7)
    with pytest.raises(ValueError):
        distill_round(mixed, LogicPhaseFlip, 2, EXTENDED)
    with pytest.raises(ValueError):
        distill_round(make_mixture(PhysicalBitFlip(1), 0.7), PhysicalBitFlip(1))
    with pytest.raises(ValueError):
        distill_round(make_mixture(LogicBitFlip, 0.7), LogicBitFlip, policy="greedy")
    with pytest.raises(ValueError):
        distill_round(make_mixture(LogicBitFlip, 0.7), LogicBitFlip, mode="montecarlo")


@pytest.mark.parametrize("m", [2, 3])
def test_cross_terms_rejected(m):
    report = verify_rejection(LogicBitFlip, m)
    assert report["Phi+xPsi+"] == {"canonical": 0, "extended": 0}
    assert report["Psi+xPhi+"] == {"canonical": 0, "extended": 0}
    assert report["Phi+xPhi+"]["extended"] == pytest.approx(4 * report["Phi+xPhi+"]["canonical"])


def test_phase_cross_terms_rejected():
    report = verify_rejection(LogicPhaseFlip, 2)
    assert report["Phi+xPhi-"] == {"canonical": 0}
    assert report["Phi+xPhi+"]["canonical"] == pytest.approx(0.5)


def test_acceptance_of_matching_pairs():
    phi = make_logic_bell("Phi+", 2)
    assert acceptance_probability(phi, phi) == pytest.approx(1 / 8, abs=1e-14)
    assert acceptance_probability(phi, phi, policy=EXTENDED) == pytest.approx(1 / 2, abs=1e-14)


@pytest.mark.parametrize("pattern", ["OOOO", "EEOO", "OOEE"])
@pytest.mark.parametrize("pair", [("target", "target"), ("error", "error")])
def test_extended_patterns_convert_to_canonical(pattern, pair):
    ref = collapsed_state(LogicBitFlip, 2, "EEEE", *pair)
    assert collapsed_state(LogicBitFlip, 2, pattern, *pair).allclose(ref, atol=1e-12)


@pytest.mark.parametrize("pattern", ["OOOO", "EEOO", "OOEE"])
def test_kept_copy_correction_is_equivalent(pattern):
    # flipping the kept partner instead of the sacrificed photon gives the same state
    lay = Layout.for_m(2)
    for pair in (("target", "target"), ("error", "error")):
        s = collapsed_state(LogicBitFlip, 2, pattern, *pair, corrected=False)
        for mode, p in zip(lay.kept, pattern):
            if p == "O":
                s = apply_x(s, mode)
        assert s.allclose(collapsed_state(LogicBitFlip, 2, "EEEE", *pair), atol=1e-12)


def test_trial_uniforms_prefix_stable():
    a = trial_uniforms(7, 50, 6)
    b = trial_uniforms(7, 200, 6)
    assert np.array_equal(a, b[:50])
    assert not np.array_equal(a, trial_uniforms(8, 50, 6))


def test_montecarlo_within_four_sigma():
    F = 0.7
    mixed = make_mixture(LogicBitFlip, F)
    exact = distill_round(mixed, LogicBitFlip)
    mc = distill_round(mixed, LogicBitFlip, mode="montecarlo", trials=20_000, seed=11)
    assert abs(mc.success_probability - exact.success_probability) <= 4 * mc.success_stderr
    assert abs(mc.output_fidelity - exact.output_fidelity) <= 4 * mc.fidelity_stderr
    again = distill_round(mixed, LogicBitFlip, mode="montecarlo", trials=20_000, seed=11)
    assert again.success_probability == mc.success_probability


def test_iterated_rounds_increase_monotonically():
    F = 0.6
    seq = [F]
    for _ in range(5):
        res = distill_round(make_mixture(LogicBitFlip, F), LogicBitFlip)
        F = res.output_fidelity
        seq.append(F)
    assert all(b > a for a, b in zip(seq, seq[1:]))
    assert seq[-1] > 0.999


# --- physical bit flips -------------------------------------------------------


def test_localize_flip_pattern_m3():
    assert localize_flip([(1, 2)], [(2, 3)], 3) == [1]
    assert localize_flip([(1, 2), (2, 3)], [], 3) == [2]
    assert localize_flip([], [(1, 2), (2, 3)], 3) == []
    assert localize_flip([(1, 2)], [], 2) == [1, 2]


@pytest.mark.parametrize("m,j", [(2, 1), (3, 1), (3, 3), (4, 2)])
def test_localize_corrects(m, j):
    res = correct_physical_bitflip(make_mixture(PhysicalBitFlip(j), 0.6, m), m, "localize")
    assert res.success_probability == 1
    assert res.output_fidelity == pytest.approx(1, abs=1e-12)


def test_localize_m3_syndrome_log():
    res = correct_physical_bitflip(make_mixture(PhysicalBitFlip(1), 0.0, 3), 3, "localize")
    assert [r.probe_pattern for r in res.outcome_log] == ["OE"]
    assert res.outcome_log[0].corrections == ("X:a1",)


@pytest.mark.parametrize("m,j", [(2, 2), (3, 3), (4, 1)])
def test_known_location_corrects(m, j):
    res = correct_physical_bitflip(make_mixture(PhysicalBitFlip(j), 0.3, m), m, "known_location", j)
    assert res.output_fidelity == pytest.approx(1, abs=1e-12)


def test_pure_input_never_odd():
    res = correct_physical_bitflip(make_mixture(PhysicalBitFlip(1), 1.0, 3), 3)
    assert {r.probe_pattern for r in res.outcome_log} == {"EE"}
    assert res.output_fidelity == pytest.approx(1)


def test_m2_localize_tie_is_reported():
    # with two photons one check cannot tell a1 from a2
    mixed = make_mixture(PhysicalBitFlip(2), 0.6, 2)
    with pytest.raises(ProtocolError):
        correct_physical_bitflip(mixed, 2, "localize")
    with pytest.warns(RuntimeWarning):
        res = correct_physical_bitflip(mixed, 2, "localize", strict=False)
    assert "ambiguous:1,2" in res.notes
    assert res.output_fidelity == pytest.approx(0.6, abs=1e-12)


def test_non_bitflip_component_detected():
    mixed = make_mixture(LogicPhaseFlip, 0.5, 2)
    with pytest.raises(ProtocolError):
        correct_physical_bitflip(mixed, 2, "known_location", 1)


def test_known_location_needs_index():
    with pytest.raises(ValueError):
        correct_physical_bitflip(make_mixture(PhysicalBitFlip(1), 0.5, 2), 2, "known_location")
