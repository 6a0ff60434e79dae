"""Two-site DMRG ground-state search with U(1) charge bookkeeping.

The Hamiltonian is encoded as a finite-state-machine MPO: virtual state 0
means nothing placed yet, the last state means the term is complete, and
one in-flight state per two-site term lives on the bond it straddles
(bond dimension 5 for the spin chain, 4 for single-species bosons, 6 for
two species).  Sweeps optimize two adjacent sites at a time with the
restarted Lanczos solver, split the optimized block by a charge-resolved
SVD, and truncate to chi_max, never splitting a degenerate multiplet.

The search starts from a product state in the target sector; the first
``warmup_sweeps`` sweeps run at a reduced bond dimension and add a small
seeded random perturbation to each two-site block, so charge sectors
absent from the product start become reachable.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ..models import expanded_terms
from .lanczos import lowest_eigenpair
from .mps import (
    allowed_mask_two_site,
    blockwise_svd,
    mps_norm,
    product_mps,
)


@dataclass(frozen=True)
class DmrgConfig:
    """Knobs of the sweep solver.  Fields after ``seed`` control the local
    eigensolver and the warm-up phase and rarely need changing."""

    chi_max: int = 64
    svd_cutoff: float = 1e-10
    energy_tol: float = 1e-9
    max_sweeps: int = 12
    lanczos_dim: int = 20
    seed: int = 0
    lanczos_tol: float = 1e-12
    warmup_sweeps: int = 2
    warmup_chi: int = 16
    noise_scale: float = 1e-6


class ConvergenceWarning(UserWarning):
    pass


def build_mpo(spec):
    """Finite-state-machine MPO tensors W[i] of shape (Dl, d, d, Dr).

    Index convention: W[w, s_out, s_in, v].  Virtual state 0 = nothing
    placed yet, last state = finished, states 1..m = in-flight two-site
    terms of the bond between this site and the next.
    """
    d = spec.local_dim
    L = spec.L
    onsite = [np.zeros((d, d)) for _ in range(L)]
    bond_terms = [[] for _ in range(L - 1)]
    for sites, mats, coeff in expanded_terms(spec):
        if len(sites) == 1:
            onsite[sites[0]] = onsite[sites[0]] + coeff * mats[0]
        else:
            j1, j2 = sites
            if j2 != j1 + 1:
                raise ValueError("only nearest-neighbor terms are supported")
            bond_terms[j1].append((coeff * mats[0], mats[1]))
    dims = [1] + [2 + len(bt) for bt in bond_terms] + [1]
    eye = np.eye(d)
    mpo = []
    for i in range(L):
        Dl, Dr = dims[i], dims[i + 1]
        W = np.zeros((Dl, d, d, Dr))
        done_out = Dr - 1
        W[0, :, :, done_out] += onsite[i]
        if i < L - 1:
            W[0, :, :, 0] = eye
            for t, (left_mat, _) in enumerate(bond_terms[i]):
                W[0, :, :, 1 + t] = left_mat
        if i > 0:
            for t, (_, right_mat) in enumerate(bond_terms[i - 1]):
                W[1 + t, :, :, done_out] += right_mat
            W[Dl - 1, :, :, done_out] += eye
        mpo.append(W)
    return mpo


def _contract_left(E, A, W):
    """Grow a left environment (bra_r, v, ket_r) past one site."""
    X = np.tensordot(E, A, axes=([0], [0]))  # (w, ket_l, s_out, bra_r)
    X = np.tensordot(X, W, axes=([0, 2], [0, 1]))  # (ket_l, bra_r, s_in, v)
    return np.tensordot(X, A, axes=([0, 2], [0, 1]))  # (bra_r, v, ket_r)


def _contract_right(E, A, W):
    """Grow a right environment (bra_l, w, ket_l) past one site."""
    X = np.tensordot(A, E, axes=([2], [0]))  # (bra_l, s_out, v, ket_r)
    X = np.tensordot(X, W, axes=([1, 2], [1, 3]))  # (bra_l, ket_r, w, s_in)
    return np.tensordot(X, A, axes=([3, 1], [1, 2]))  # (bra_l, w, ket_l)


def expectation_value(mps, mpo):
    """Exact <psi|H|psi> / <psi|psi> by a full-chain contraction."""
    E = np.ones((1, 1, 1))
    for A, W in zip(mps.site_tensors, mpo):
        E = _contract_left(E, A, W)
    nrm = mps_norm(mps)
    return float(E[0, 0, 0]) / nrm**2


def _apply_h_eff(theta, EL, W1, W2, ER, mask):
    X = np.tensordot(EL, theta, axes=([2], [0]))  # (a, w, s1, s2, br)
    X = np.tensordot(X, W1, axes=([1, 2], [0, 2]))  # (a, s2, br, s1', v)
    X = np.tensordot(X, W2, axes=([4, 1], [0, 2]))  # (a, br, s1', s2', u)
    X = np.tensordot(X, ER, axes=([1, 4], [2, 1]))  # (a, s1', s2', ar)
    X *= mask
    return X


def select_cut(s, chi_max, cutoff, degeneracy_rtol=1e-12):
    """Which of the concatenated singular values survive truncation.

    Values are ranked globally; weights p = s^2 / sum(s^2) below ``cutoff``
    are dropped, then the bond is capped at ``chi_max``.  If the resulting
    boundary falls inside a multiplet degenerate to ``degeneracy_rtol``,
    the whole multiplet is dropped; if that would empty the bond, the cap
    is applied as-is and a warning is issued.

    Returns (keep_mask over the input order, discarded weight fraction).
    """
    total = float((s * s).sum())
    if total <= 0.0:
        raise ValueError("cannot truncate a zero block")
    order = np.argsort(-s, kind="stable")
    ss = s[order]
    n = ss.size
    n_keep = int(np.sum(ss * ss >= cutoff * total))
    n_keep = max(1, min(n_keep, chi_max))
    nk = n_keep
    while 0 < nk < n and (ss[nk - 1] - ss[nk]) <= degeneracy_rtol * ss[nk - 1]:
        nk -= 1
    if nk == 0:
        warnings.warn(
            "degenerate multiplet wider than chi_max; splitting it",
            ConvergenceWarning,
        )
        nk = n_keep
    keep = np.zeros(n, dtype=bool)
    keep[order[:nk]] = True
    kept_weight = float((ss[:nk] ** 2).sum())
    return keep, 1.0 - kept_weight / total


def split_two_site(theta, qL, q1, q2, qR, chi_max, cutoff):
    """Charge-resolved truncated SVD of a two-site block.

    Returns (U3, s, Vt3, bond_charges, discarded) with U3 (l, d1, k)
    left-isometric, Vt3 (k, d2, r) right-isometric, and s renormalized so
    sum(s^2) = 1.  Entries outside charge blocks stay exactly zero.
    """
    l, d1, d2, r = theta.shape
    nq = qL.shape[1]
    M = theta.reshape(l * d1, d2 * r)
    row_q = (qL[:, None, :] + q1[None, :, :]).reshape(l * d1, nq)
    col_q = (qR[None, :, :] - q2[:, None, :]).reshape(d2 * r, nq)
    blocks = blockwise_svd(M, row_q, col_q)
    if not blocks:
        raise RuntimeError("two-site block carries no charge-allowed weight")
    s_concat = np.concatenate([b[4] for b in blocks])
    keep, discarded = select_cut(s_concat, chi_max, cutoff)
    k_tot = int(keep.sum())
    U = np.zeros((l * d1, k_tot))
    Vt = np.zeros((k_tot, d2 * r))
    q_new = np.zeros((k_tot, nq), dtype=np.int64)
    s_out = np.empty(k_tot)
    ofs_in = 0
    ofs_out = 0
    for q, ri, ci, Ub, sb, Vtb in blocks:
        kb = int(keep[ofs_in : ofs_in + sb.size].sum())
        ofs_in += sb.size
        if kb == 0:
            continue
        U[np.ix_(ri, np.arange(ofs_out, ofs_out + kb))] = Ub[:, :kb]
        Vt[np.ix_(np.arange(ofs_out, ofs_out + kb), ci)] = Vtb[:kb]
        q_new[ofs_out : ofs_out + kb] = q
        s_out[ofs_out : ofs_out + kb] = sb[:kb]
        ofs_out += kb
    s_out = s_out / np.sqrt((s_out**2).sum())
    return (
        U.reshape(l, d1, k_tot),
        s_out,
        Vt.reshape(k_tot, d2, r),
        q_new,
        discarded,
    )


def dmrg_ground_state(spec, config=None):
    """Ground state of the target charge sector as a charge-labeled MPS.

    Runs up to ``config.max_sweeps`` full (right + left) sweeps and stops
    once the per-sweep energy estimate changes by less than
    ``config.energy_tol``.  The returned state carries the exact
    variational energy <H>, the accumulated truncated weight, per-sweep
    energies, and a ``converged`` flag; non-convergence also raises a
    ConvergenceWarning but still returns the state.
    """
    if config is None:
        config = DmrgConfig()
    mpo = build_mpo(spec)
    psi = product_mps(spec, seed=config.seed)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    qsite = spec.site_charge_array()
    L = spec.L
    EL = [None] * (L + 1)
    ER = [None] * (L + 1)
    EL[0] = np.ones((1, 1, 1))
    ER[L] = np.ones((1, 1, 1))
    for j in range(L - 1, 0, -1):
        ER[j] = _contract_right(ER[j + 1], psi.site_tensors[j], mpo[j])
    total_discard = 0.0
    n_matvec = 0
    sweep_energy_prev = None
    converged = False
    for sweep in range(config.max_sweeps):
        warm = sweep < config.warmup_sweeps
        chi = min(config.warmup_chi, config.chi_max) if warm else config.chi_max
        max_restarts = 2 if warm else 12
        energy = None
        for direction in ("right", "left"):
            bonds = range(L - 1) if direction == "right" else range(L - 2, -1, -1)
            for i in bonds:
                theta = np.tensordot(psi.site_tensors[i], psi.site_tensors[i + 1], axes=([2], [0]))
                mask = allowed_mask_two_site(
                    psi.bond_charges[i], qsite, qsite, psi.bond_charges[i + 2]
                )
                if warm and config.noise_scale > 0.0:
                    theta = theta + config.noise_scale * rng.standard_normal(theta.shape)
                theta *= mask
                nrm = np.linalg.norm(theta)
                if nrm == 0.0:
                    raise RuntimeError("two-site block vanished during sweep")
                theta /= nrm

                def matvec(v, _shape=theta.shape, _EL=EL[i], _W1=mpo[i], _W2=mpo[i + 1], _ER=ER[i + 2], _mask=mask):
                    return _apply_h_eff(
                        v.reshape(_shape), _EL, _W1, _W2, _ER, _mask
                    ).ravel()

                energy, vec, info = lowest_eigenpair(
                    matvec,
                    theta.ravel(),
                    tol=config.lanczos_tol,
                    krylov_dim=config.lanczos_dim,
                    max_restarts=max_restarts,
                )
                n_matvec += info["matvecs"]
                theta_opt = vec.reshape(theta.shape)
                U3, s, Vt3, q_new, discarded = split_two_site(
                    theta_opt,
                    psi.bond_charges[i],
                    qsite,
                    qsite,
                    psi.bond_charges[i + 2],
                    chi,
                    config.svd_cutoff,
                )
                total_discard += discarded
                psi.bond_charges[i + 1] = q_new
                if direction == "right":
                    psi.site_tensors[i] = U3
                    psi.site_tensors[i + 1] = s[:, None, None] * Vt3
                    psi.canonical_center = i + 1
                    EL[i + 1] = _contract_left(EL[i], U3, mpo[i])
                else:
                    psi.site_tensors[i] = U3 * s[None, None, :]
                    psi.site_tensors[i + 1] = Vt3
                    psi.canonical_center = i
                    ER[i + 1] = _contract_right(ER[i + 2], Vt3, mpo[i + 1])
        psi.sweep_energies.append(float(energy))
        if not warm and sweep_energy_prev is not None:
            if energy > sweep_energy_prev + config.energy_tol:
                warnings.warn(
                    f"sweep energy rose by {energy - sweep_energy_prev:.3e}; "
                    "truncation is fighting the optimization",
                    ConvergenceWarning,
                )
            if abs(energy - sweep_energy_prev) < config.energy_tol:
                converged = True
                break
        if not warm:
            sweep_energy_prev = energy
    psi.converged = converged
    psi.truncation_error = total_discard
    psi.seed = config.seed
    psi.energy = expectation_value(psi, mpo)
    psi.stats = {"matvecs": n_matvec, "sweeps": len(psi.sweep_energies)}
    if not converged:
        warnings.warn(
            f"energy not converged to {config.energy_tol} within "
            f"{config.max_sweeps} sweeps",
            ConvergenceWarning,
        )
    return psi
