import numpy as np
import pytest

from esgan.models import (
    Bh2sParams,
    BhParams,
    XxzParams,
    build_bh,
    build_bh2s,
    build_xxz,
    expanded_terms,
    initial_product_configuration,
    operator_matrix,
)


def dense_hamiltonian(spec):
    """Assemble the full 2^... dense Hamiltonian by kron products (tiny L only)."""
    dim = spec.local_dim**spec.L
    H = np.zeros((dim, dim))
    eye = np.eye(spec.local_dim)
    for sites, mats, coeff in expanded_terms(spec):
        factors = [eye] * spec.L
        for s, m in zip(sites, mats):
            factors[s] = m
        acc = factors[0]
        for f in factors[1:]:
            acc = np.kron(acc, f)
        H += coeff * acc
    return H


def total_charge_operator(spec, which):
    dim = spec.local_dim**spec.L
    eye = np.eye(spec.local_dim)
    q_site = np.diag(np.array(spec.charge_values[which], dtype=float))
    Q = np.zeros((dim, dim))
    for s in range(spec.L):
        factors = [eye] * spec.L
        factors[s] = q_site
        acc = factors[0]
        for f in factors[1:]:
            acc = np.kron(acc, f)
        Q += acc
    return Q


def test_xxz_term_count_and_structure():
    spec = build_xxz(2, XxzParams(j=1.0, delta=-0.5))
    # one stored hopping pair plus one Ising term per bond
    assert len(spec.terms) == 2
    assert spec.terms[0].add_hc and not spec.terms[1].add_hc
    spec10 = build_xxz(10)
    assert len(spec10.terms) == 2 * 9
    assert spec10.target_sector == (5,)


def test_bh2s_term_count():
    spec = build_bh2s(2, Bh2sParams(u_ab=-0.2))
    # 2 hoppings on the single bond + 3 on-site terms per site
    assert len(spec.terms) == 2 + 6


def test_invalid_sizes_raise():
    with pytest.raises(ValueError):
        build_xxz(1)
    with pytest.raises(ValueError):
        build_bh2s(5)
    with pytest.raises(ValueError):
        build_bh(4, BhParams(n_max=1))
    with pytest.raises(ValueError):
        build_xxz(4, XxzParams(j=-1.0))


def test_xxz_two_site_eigenvalues():
    # Singlet-sector eigenvalues of the L=2 chain are j*delta/4 -+ j/2.
    for delta in (-1.0, -0.5, 0.0, 0.7):
        spec = build_xxz(2, XxzParams(j=1.0, delta=delta))
        H = dense_hamiltonian(spec)
        evals = np.linalg.eigvalsh(H)
        expected = np.sort(
            [delta / 4 - 0.5, delta / 4 + 0.5, -delta / 4, -delta / 4]
        )
        np.testing.assert_allclose(np.sort(evals), expected, atol=1e-14)


def test_bh_two_site_free_limit():
    # U = 0, two bosons on two sites: ground energy -2J.
    spec = build_bh(2, BhParams(j=1.0, u=0.0, n_max=2))
    H = dense_hamiltonian(spec)
    Q = total_charge_operator(spec, 0)
    # restrict to the N = 2 sector
    sel = np.isclose(np.diag(Q), 2.0)
    Hs = H[np.ix_(sel, sel)]
    evals = np.linalg.eigvalsh(Hs)
    np.testing.assert_allclose(evals, [-2.0, 0.0, 2.0], atol=1e-14)


def test_hermiticity_and_charge_commutation():
    cases = [
        build_xxz(3, XxzParams(delta=-0.8)),
        build_bh(3, BhParams(u=3.0, n_max=2)),
        build_bh2s(2, Bh2sParams(u_ab=-0.3)),
    ]
    for spec in cases:
        H = dense_hamiltonian(spec)
        np.testing.assert_allclose(H, H.T, atol=1e-13)
        for which in range(spec.n_charges):
            Q = total_charge_operator(spec, which)
            comm = H @ Q - Q @ H
            np.testing.assert_allclose(comm, 0.0, atol=1e-12)


def test_boson_operator_algebra():
    spec = build_bh(2, BhParams(n_max=4))
    b = operator_matrix(spec, "b")
    bdag = operator_matrix(spec, "bdag")
    n = operator_matrix(spec, "n")
    np.testing.assert_allclose(bdag @ b, n, atol=1e-14)
    # canonical commutator holds below the cutoff row
    comm = b @ bdag - bdag @ b
    np.testing.assert_allclose(np.diag(comm)[:-1], 1.0, atol=1e-14)


def test_initial_configurations_hit_target_sector():
    for spec in (
        build_xxz(9),
        build_xxz(10),
        build_bh(5, BhParams(n_max=3)),
        build_bh2s(6),
    ):
        occ = initial_product_configuration(spec)
        charges = spec.site_charge_array()
        total = charges[occ].sum(axis=0)
        assert tuple(int(t) for t in total) == spec.target_sector


def test_bh2s_charge_labels():
    spec = build_bh2s(2, Bh2sParams(n_max=2))
    charges = spec.site_charge_array()
    # index = n_a * 3 + n_b
    assert charges.shape == (9, 2)
    assert tuple(charges[5]) == (1, 2)
    assert tuple(charges[8]) == (2, 2)
    n_ab = operator_matrix(spec, "n_a.n_b")
    np.testing.assert_allclose(np.diag(n_ab), charges[:, 0] * charges[:, 1])
