"""Spectrum data model, conformal transforms, alignment, and KL baseline."""

import math
from fractions import Fraction

import numpy as np
import pytest

from esgan.spectra import (
    StructureError,
    StructureWarning,
    align_to_reference,
    build_reference_sequence,
    conformal_rescale,
    delta_xi0,
    fit_central_charge,
    kl_divergence,
    kl_from_aligned,
    make_labeled_spectrum,
    schmidt_gap,
    von_neumann_entropy,
    xi_values,
)

from oracles import xx_entropy_profile


def spectrum_1q(pairs, filling=Fraction(1), L=8, cut=2):
    """pairs: (p, raw left charge); delta_n = charge - filling * cut."""
    p = [x[0] for x in pairs]
    q = [x[1] for x in pairs]
    return make_labeled_spectrum(
        p, q, model_id="bh", L=L, bipartition=cut, filling=(filling,),
        control_value=0.0,
    )


def spectrum_2q(pairs, L=8, cut=4):
    """pairs: (p, (q_a, q_b)); filling 1/2 per species."""
    p = [x[0] for x in pairs]
    q = [x[1] for x in pairs]
    return make_labeled_spectrum(
        p, q, model_id="bh2s", L=L, bipartition=cut,
        filling=(Fraction(1, 2), Fraction(1, 2)), control_value=0.0,
    )


def test_entry_ordering_and_ranks():
    s = spectrum_1q([(0.5, 2), (0.3, 3), (0.2, 2)])
    assert [e.p for e in s.entries] == [0.5, 0.3, 0.2]
    assert [e.k for e in s.entries] == [0, 0, 1]
    assert s.delta_n(s.entries[1]) == (Fraction(1),)
    secs = s.sectors()
    assert list(secs) == [(2,), (3,)]
    assert [e.p for e in secs[(2,)]] == [0.5, 0.2]


def test_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        spectrum_1q([(0.0, 2)])
    with pytest.raises(ValueError):
        spectrum_1q([])


def test_xi_values():
    s = spectrum_1q([(0.01, 2), (0.001, 3)])
    assert np.allclose(xi_values(s), [2.0, 3.0])


def test_entropy_uniform():
    s = spectrum_1q([(0.25, 2), (0.25, 3), (0.25, 1), (0.25, 2)])
    assert abs(von_neumann_entropy(s) - math.log(4)) < 1e-14


def test_schmidt_gap():
    s = spectrum_1q([(0.5, 2), (0.3, 3), (0.2, 2)])
    assert abs(schmidt_gap(s) - 0.2) < 1e-15
    with pytest.raises(StructureError):
        schmidt_gap(spectrum_1q([(1.0, 2)]))


def test_delta_xi0_decade():
    s = spectrum_1q([(0.5, 2), (0.05, 2), (0.45, 3)])
    assert abs(delta_xi0(s) - 1.0) < 1e-14


def test_delta_xi0_degenerate_warns():
    s = spectrum_1q([(0.4, 2), (0.4, 2), (0.2, 3)])
    with pytest.warns(StructureWarning):
        assert delta_xi0(s) == 0.0


def test_delta_xi0_structure_errors():
    with pytest.raises(StructureError):
        delta_xi0(spectrum_1q([(0.6, 3), (0.4, 1)]))  # no delta_n = 0 sector
    with pytest.raises(StructureError):
        delta_xi0(spectrum_1q([(0.6, 2), (0.4, 3)]))  # only one level in it


def test_rescale_anchors():
    s = spectrum_1q([(0.5, 2), (0.05, 2), (0.2, 3), (0.1, 3), (0.15, 1)])
    rows = conformal_rescale(s)
    by_slot = {(r["delta_n"], r["k"]): r["rescaled"] for r in rows}
    assert by_slot[(Fraction(0), 1)] == pytest.approx(1.0)
    for dn in (Fraction(-1), Fraction(0), Fraction(1)):
        assert by_slot[(dn, 0)] == 0.0
    # second spacing of the same sector in units of the first
    assert by_slot[(Fraction(1), 1)] == pytest.approx(
        math.log10(2) / 1.0
    )


def test_rescale_channel_rules():
    s1 = spectrum_1q([(0.5, 2), (0.05, 2)])
    with pytest.raises(ValueError):
        conformal_rescale(s1, channel="spin")
    s2 = spectrum_2q(
        [
            (0.4, (2, 2)),
            (0.04, (2, 2)),
            (0.2, (3, 3)),
            (0.18, (3, 1)),
            (0.18, (1, 3)),
        ]
    )
    with pytest.raises(ValueError):
        conformal_rescale(s2)
    dens = conformal_rescale(s2, channel="density")
    assert {r["delta_n"] for r in dens} == {Fraction(0), Fraction(1)}
    spin = conformal_rescale(s2, channel="spin")
    assert {r["delta_n"] for r in spin} == {Fraction(-1), Fraction(0), Fraction(1)}


def test_rescale_degenerate_spacing_raises():
    s = spectrum_1q([(0.4, 2), (0.4, 2), (0.2, 3)])
    with pytest.warns(StructureWarning):
        with pytest.raises(StructureError):
            conformal_rescale(s)


def test_reference_sequence_sorting():
    s = spectrum_1q([(0.6, 2), (0.2, 3), (0.15, 1), (0.05, 2)])
    seq = build_reference_sequence(s, 3)
    assert seq.slots == (
        ((Fraction(0),), 0),
        ((Fraction(1),), 0),
        ((Fraction(-1),), 0),
    )
    assert seq.synthetic == (False, False, False)
    full = build_reference_sequence(s, 4)
    assert set(full.slots) == {(s.delta_n(e), e.k) for e in s.entries}


def test_reference_sequence_tie_rule():
    # symmetric weights: ascending sector label wins the tie
    s = spectrum_1q([(0.4, 2), (0.3, 3), (0.3, 1)])
    seq = build_reference_sequence(s, 3)
    assert seq.slots[1] == ((Fraction(-1),), 0)
    assert seq.slots[2] == ((Fraction(1),), 0)


def test_reference_sequence_padding():
    s = spectrum_1q([(0.6, 2), (0.2, 3), (0.15, 1), (0.05, 2)])
    seq = build_reference_sequence(s, 7)
    assert seq.synthetic == (False,) * 4 + (True,) * 3
    assert seq.slots[4:] == (
        ((Fraction(-1),), 1),
        ((Fraction(0),), 2),
        ((Fraction(1),), 1),
    )


def test_align_identity_and_padding():
    s = spectrum_1q([(0.6, 2), (0.2, 3), (0.15, 1), (0.05, 2)])
    seq = build_reference_sequence(s, 6)
    v = align_to_reference(s, seq)
    assert np.array_equal(v.values, [0.6, 0.2, 0.15, 0.05, 0.0, 0.0])
    assert v.L == s.L and v.model_id == s.model_id


def test_align_is_sector_faithful():
    seq = build_reference_sequence(
        spectrum_1q([(0.6, 2), (0.4, 3)]), 2
    )
    mirrored = spectrum_1q([(0.6, 2), (0.4, 1)])  # delta_n flipped
    v = align_to_reference(mirrored, seq)
    assert np.array_equal(v.values, [0.6, 0.0])


def test_kl_worked_examples():
    q = spectrum_1q([(0.5, 2), (0.5, 3)])
    assert kl_divergence(q, q) == 0.0
    p_one = spectrum_1q([(1.0, 2)])
    assert kl_divergence(p_one, q) == pytest.approx(math.log(2), abs=1e-12)
    p = spectrum_1q([(0.75, 2), (0.25, 3)])
    expected = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    assert kl_divergence(p, q) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.13081, abs=5e-6)


def test_kl_floor_clamps_reference():
    p = spectrum_1q([(0.5, 2), (0.5, 3)])
    q = spectrum_1q([(1.0, 2)])
    seq = build_reference_sequence(p, 2)
    d = kl_divergence(p, q, sequence=seq)
    assert d == pytest.approx(0.5 * math.log(0.5 / 1.0) + 0.5 * math.log(0.5 / 1e-12))


def test_kl_positivity_random_pairs():
    rng = np.random.default_rng(42)
    for _ in range(10_000):
        n = rng.integers(2, 16)
        p = rng.random(n)
        q = rng.random(n)
        p /= p.sum()
        q /= q.sum()
        assert kl_from_aligned(p, q) >= -1e-12


def test_central_charge_free_fermion():
    L = 64
    prof = xx_entropy_profile(L)
    c, details = fit_central_charge(prof, L)
    assert abs(c - 1.0) < 0.05
