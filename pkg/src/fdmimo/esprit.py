"""2-D DoA estimation with forward-backward averaged ESPRIT.

The estimator works on the despread ``nr x nt`` channel observation. The
real-valued unitary transform is not applied: it leaves the estimates
unchanged, while forward-backward averaging is what alters the statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .channel import ArrayGeometry, angles_from_frequencies
from .numerics import DomainError, NumericError, eig, pinv, svd, wrap_phase

# condition number of J1 @ U_sig beyond which the subarray is deemed rank deficient
SUBARRAY_COND_LIMIT = 1e12

# candidate weights for the joint pairing; irrational-ish values avoid
# systematic coincidences between u and v spacings
JOINT_WEIGHTS = (0.618033988749895, -0.618033988749895, 1.618033988749895, -1.618033988749895)


class ModelOrderError(DomainError):
    """Requested number of paths exceeds what the array can resolve."""


class IllConditionedSubarrayError(NumericError):
    """The first subarray's signal subspace is (numerically) rank deficient."""


@dataclass(frozen=True)
class DoAEstimate:
    u: np.ndarray
    v: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    # order in which the eigenpairs were reported (sorted by ascending v)
    pairing: np.ndarray
    out_of_manifold: np.ndarray

    @property
    def num_paths(self) -> int:
        return self.u.size

    @property
    def any_out_of_manifold(self) -> bool:
        return bool(np.any(self.out_of_manifold))


def fba_extend(h: np.ndarray) -> np.ndarray:
    """Forward-backward extension ``[H, Pi H* Pi]``."""
    h = np.asarray(h, dtype=complex)
    if h.ndim == 1:
        h = h.reshape(-1, 1)
    # Pi_nr H* Pi_nt reverses both axes of the conjugate
    return np.hstack([h, h.conj()[::-1, ::-1]])


def check_model_order(geometry: ArrayGeometry, model_order: int, nt: int | None = None) -> None:
    nt = geometry.nt if nt is None else nt
    limits = {
        "rows of the extended observation": geometry.nr,
        "columns of the extended observation": 2 * nt,
        "elevation subarray size": (geometry.m1 - 1) * geometry.m2,
        "azimuth subarray size": geometry.m1 * (geometry.m2 - 1),
    }
    if model_order < 1:
        raise ModelOrderError("model order must be >= 1")
    for what, bound in limits.items():
        if model_order > bound:
            raise ModelOrderError(f"model order {model_order} exceeds {what} ({bound})")


def signal_subspace(h_fba: np.ndarray, model_order: int):
    """Dominant ``model_order`` singular triplets ``(U_sig, s_sig, V_sig)``."""
    if model_order > min(h_fba.shape):
        raise ModelOrderError(f"model order {model_order} exceeds matrix size {h_fba.shape}")
    u, s, v = svd(h_fba)
    return u[:, :model_order], s[:model_order], v[:, :model_order]


def selection_matrices(geometry: ArrayGeometry, axis: str):
    """Row selectors ``(J1, J2)`` of the two maximally overlapping subarrays.

    ``axis="azimuth"`` shifts along the ``m2`` direction (frequency ``v``),
    ``axis="elevation"`` along the ``m1`` direction (frequency ``u``).
    """
    m1, m2 = geometry.m1, geometry.m2
    if axis in ("azimuth", "v"):
        if m2 < 2:
            raise DomainError("azimuth selection needs m2 >= 2")
        eye = np.eye(m2 - 1)
        z = np.zeros((m2 - 1, 1))
        return np.kron(np.hstack([eye, z]), np.eye(m1)), np.kron(np.hstack([z, eye]), np.eye(m1))
    if axis in ("elevation", "u"):
        if m1 < 2:
            raise DomainError("elevation selection needs m1 >= 2")
        eye = np.eye(m1 - 1)
        z = np.zeros((m1 - 1, 1))
        return np.kron(np.eye(m2), np.hstack([eye, z])), np.kron(np.eye(m2), np.hstack([z, eye]))
    raise DomainError(f"unknown axis {axis!r}")


def subarray_rows(geometry: ArrayGeometry, axis: str):
    """Row indices picked by the selection matrices, without forming them."""
    idx = np.arange(geometry.nr).reshape(geometry.m2, geometry.m1)  # [q, p] -> q*m1 + p
    if axis in ("azimuth", "v"):
        return idx[:-1].ravel(), idx[1:].ravel()
    if axis in ("elevation", "u"):
        return idx[:, :-1].ravel(), idx[:, 1:].ravel()
    raise DomainError(f"unknown axis {axis!r}")


def shift_operator(u_sig: np.ndarray, geometry: ArrayGeometry, axis: str) -> np.ndarray:
    """Least-squares solution of ``(J1 U) Psi = J2 U``."""
    r1, r2 = subarray_rows(geometry, axis)
    a, b = u_sig[r1], u_sig[r2]
    s = np.linalg.svd(a, compute_uv=False)
    if s[-1] <= s[0] / SUBARRAY_COND_LIMIT:
        raise IllConditionedSubarrayError(f"{axis} subarray signal subspace is rank deficient")
    return pinv(a) @ b


def _min_separation(values: np.ndarray) -> float:
    if values.size < 2:
        return np.inf
    d = np.abs(values[:, None] - values[None, :])
    return float(d[~np.eye(values.size, dtype=bool)].min())


def estimate_doa(h_hat: np.ndarray, geometry: ArrayGeometry, model_order: int, pairing: str = "joint") -> DoAEstimate:
    """Estimate ``model_order`` paired (u, v) frequencies and angles.

    ``pairing="v"`` diagonalises the azimuth shift operator and reads the
    elevation frequencies off the same eigenvectors. ``pairing="joint"``
    diagonalises ``psi_v + kappa psi_u``, with ``kappa`` taken from
    :data:`JOINT_WEIGHTS` to maximise the smallest eigenvalue gap, which stays
    well conditioned when two paths share an azimuth frequency. Both
    have the same first-order error statistics.
    """
    h_hat = np.asarray(h_hat, dtype=complex)
    if h_hat.shape[0] != geometry.nr:
        raise DomainError(f"observation has {h_hat.shape[0]} rows, array has {geometry.nr}")
    check_model_order(geometry, model_order, h_hat.shape[1])
    u_sig, _, _ = signal_subspace(fba_extend(h_hat), model_order)
    psi_v = shift_operator(u_sig, geometry, "v")
    psi_u = shift_operator(u_sig, geometry, "u")
    if pairing == "v":
        _, t = eig(psi_v)
    elif pairing == "joint":
        best = None
        for kappa in JOINT_WEIGHTS:
            w, vecs = eig(psi_v + kappa * psi_u)
            gap = _min_separation(w)
            if best is None or gap > best[0]:
                best = (gap, vecs)
        t = best[1]
    else:
        raise DomainError(f"unknown pairing {pairing!r}")
    try:
        t_inv = np.linalg.inv(t)
    except np.linalg.LinAlgError as exc:
        raise NumericError("eigenvector matrix is singular") from exc
    v = np.angle(np.diag(t_inv @ psi_v @ t))
    u = np.angle(np.diag(t_inv @ psi_u @ t))
    order = np.argsort(v, kind="stable")
    u, v = wrap_phase(u[order]), wrap_phase(v[order])
    theta, phi, flag = angles_from_frequencies(u, v, geometry.rx_spacing_ratio, return_flag=True)
    return DoAEstimate(u, v, np.atleast_1d(theta), np.atleast_1d(phi), order, np.atleast_1d(flag))


def match_paths(truth, est):
    """Hungarian assignment of estimated to true paths in (u, v) space.

    ``truth`` and ``est`` expose ``u`` and ``v`` arrays (a pair of arrays is
    also accepted). Returns ``(perm, du, dv)`` where ``est`` entry ``perm[l]``
    is assigned to true path ``l`` and ``du = u - u_hat`` (wrapped).
    """
    tu, tv = _uv(truth)
    eu, ev = _uv(est)
    if tu.size != eu.size:
        raise DomainError(f"cannot match {tu.size} true paths with {eu.size} estimates")
    du = wrap_phase(tu[:, None] - eu[None, :])
    dv = wrap_phase(tv[:, None] - ev[None, :])
    rows, cols = linear_sum_assignment(du ** 2 + dv ** 2)
    perm = cols[np.argsort(rows)]
    idx = np.arange(tu.size)
    return perm, du[idx, perm], dv[idx, perm]


def _uv(obj):
    if hasattr(obj, "u"):
        return np.atleast_1d(np.asarray(obj.u, float)), np.atleast_1d(np.asarray(obj.v, float))
    u, v = obj
    return np.atleast_1d(np.asarray(u, float)), np.atleast_1d(np.asarray(v, float))
