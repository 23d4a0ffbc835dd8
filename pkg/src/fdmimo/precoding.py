"""Downlink precoders, power allocation and achievable rates.

Downlink channels follow from reciprocity, ``H_dl = H_ul^T`` (``nt x nr``).
Per-stream powers of the eigen-beamforming schemes are expressed after the
``1 / nr`` beamformer normalisation, so a budget of ``nr * p_t`` in those
units radiates exactly ``p_t``; every strategy therefore radiates the same
total power per subcarrier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ArrayGeometry, NetworkScenario, link_matrices, upa_steering
from .numerics import DomainError, NumericError, svd

# relative tolerance on the power budget for the bisection solvers
POWER_TOL = 1e-10


class DegenerateChannelError(NumericError):
    """The effective channel carries no energy."""


class InfeasibleBlockDiagonalizationError(NumericError):
    """The other users' stacked channels leave no null space."""


@dataclass
class EffectiveChannel:
    """Stacked ``D_bar A_bar^T`` of all users served by one BS.

    ``matrix`` has one row per stream; ``spans[j]`` is the row slice of user ``j``.
    """

    matrix: np.ndarray
    spans: list[slice]
    _svd: tuple | None = field(default=None, repr=False)

    @property
    def num_streams(self) -> int:
        return self.matrix.shape[0]

    def svd(self):
        if self._svd is None:
            self._svd = svd(self.matrix)
        return self._svd

    @classmethod
    def from_steering(cls, steering: list[np.ndarray], gains: list[np.ndarray],
                      large_scale: np.ndarray | list[float]) -> "EffectiveChannel":
        """Build from per-user steering matrices (``nr x L_j``), path gains and large-scale coefficients."""
        rows, spans, start = [], [], 0
        for a, d, lam in zip(steering, gains, large_scale):
            rows.append((np.sqrt(lam) * np.asarray(d))[:, None] * a.T)
            spans.append(slice(start, start + a.shape[1]))
            start += a.shape[1]
        return cls(np.vstack(rows), spans)


@dataclass
class PowerAllocation:
    powers: np.ndarray
    water_level: float

    @property
    def total(self) -> float:
        return float(self.powers.sum())


# ---------------------------------------------------------------------------
# Theorem-5 style regularised inversion
# ---------------------------------------------------------------------------

def _regularized_gains(lam: np.ndarray, eta: float) -> np.ndarray:
    return lam / (lam ** 2 + eta)


def srm_precoder(eff: EffectiveChannel, p_t: float):
    """Sum-MSE optimal linear precoder ``V = W [Xi, 0]^T U^H`` and its ``eta``.

    ``xi_m = lambda_m / (lambda_m^2 + eta)`` with the smallest ``eta >= 0``
    meeting ``sum xi_m^2 <= p_t``.
    """
    if p_t <= 0:
        raise DomainError("p_t must be positive")
    u, lam, w = eff.svd()
    if lam.size == 0 or lam[0] == 0:
        raise DegenerateChannelError("effective channel is identically zero")
    active = lam > lam[0] * 1e-12
    lam_a = lam[active]
    power = lambda eta: float(np.sum(_regularized_gains(lam_a, eta) ** 2))
    if power(0.0) <= p_t:
        eta = 0.0
    else:
        lo, hi = 0.0, lam_a.max() ** 2
        while power(hi) > p_t:
            hi *= 2
        # power(eta) is decreasing; stop once the budget is met to POWER_TOL
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            if power(mid) > p_t:
                lo = mid
            else:
                hi = mid
            if p_t - power(hi) <= POWER_TOL * p_t:
                break
        eta = hi
    xi = np.zeros_like(lam)
    xi[active] = _regularized_gains(lam_a, eta)
    v = (w * xi) @ u.conj().T
    return v, eta


# ---------------------------------------------------------------------------
# Eigen-beamforming and water-filling
# ---------------------------------------------------------------------------

def eigen_beamformer(steering: np.ndarray, k: int = 0, n_c: int = 64, taps=None) -> np.ndarray:
    """Conjugate-steering beamformer ``(1 / nr) A_bar^*``.

    ``steering`` holds the receive responses (true or estimated) column-wise;
    the per-tap phase ``exp(-2j pi k l / n_c)`` is applied when ``k != 0``.
    """
    a = np.asarray(steering, dtype=complex)
    nr = a.shape[0]
    if k:
        taps = np.arange(a.shape[1]) if taps is None else np.asarray(taps)
        a = a * np.exp(-2j * np.pi * k * taps / n_c)[None, :]
    return a.conj() / nr


def _bisect_water_level(inv_gains: np.ndarray, p_t: float) -> PowerAllocation:
    if p_t <= 0:
        raise DomainError("p_t must be positive")
    inv = np.asarray(inv_gains, dtype=float)
    finite = np.isfinite(inv)
    if not finite.any():
        raise DomainError("no channel has a positive gain")
    base = inv[finite]
    lo, hi = base.min(), base.min() + p_t
    # sum(max(mu - inv, 0)) is increasing in mu and equals p_t at the water level
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if np.sum(np.maximum(mid - base, 0.0)) < p_t:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    mu = 0.5 * (lo + hi)
    # exact water level given the active set
    active = base < mu
    mu = (p_t + base[active].sum()) / active.sum()
    p = np.zeros_like(inv)
    p[finite] = np.maximum(mu - base, 0.0)
    return PowerAllocation(p, float(mu))


def waterfill(gammas, p_t: float) -> PowerAllocation:
    """Maximise ``sum log(1 + gamma p)`` subject to ``sum p = p_t``."""
    g = np.asarray(gammas, dtype=float)
    if np.any(~np.isfinite(g)) or np.any(g < 0):
        raise DomainError("gains must be finite and non-negative")
    with np.errstate(divide="ignore"):
        inv = np.where(g > 0, 1.0 / np.where(g > 0, g, 1.0), np.inf)
    return _bisect_water_level(inv, p_t)


def error_aware_penalty(mse_u, mse_v, geometry: ArrayGeometry) -> np.ndarray:
    """Multiplicative loss ``(1 + m1^2 mse_v / 12)(1 + m2^2 mse_u / 12)`` of the expected beam gain."""
    m1, m2 = geometry.m1, geometry.m2
    return (1 + m1 ** 2 * np.asarray(mse_v, float) / 12) * (1 + m2 ** 2 * np.asarray(mse_u, float) / 12)


def waterfill_error_aware(gamma_hats, mse_u, mse_v, geometry: ArrayGeometry, p_t: float) -> PowerAllocation:
    """Water-filling with the DoA-error penalty.

    ``p_l = [mu - penalty_l / (gamma_hat_l m1^2 m2^2)]^+``; with zero MSEs this
    is :func:`waterfill` on ``gamma_hat * nr^2``.
    """
    g = np.asarray(gamma_hats, dtype=float) * (geometry.m1 * geometry.m2) ** 2
    pen = error_aware_penalty(mse_u, mse_v, geometry)
    with np.errstate(divide="ignore"):
        inv = np.where(g > 0, pen / np.where(g > 0, g, 1.0), np.inf)
    return _bisect_water_level(inv, p_t)


# ---------------------------------------------------------------------------
# Block diagonalisation
# ---------------------------------------------------------------------------

def _null_space(m: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    _, s, v = svd(m, full_matrices=True)
    rank = int(np.sum(s > tol * (s[0] if s.size else 0.0))) if s.size else 0
    return v[:, rank:]


def bd_zf_precoder(channels: list[np.ndarray], p_t: float, noise: float | list[float] = 1.0,
                   max_streams: int | None = None) -> list[np.ndarray]:
    """Block-diagonalisation zero forcing with full CSI.

    ``channels[j]`` is user ``j``'s ``nt x nr`` downlink channel (large-scale
    factor included). Each precoder lies in the null space of the other
    users' stacked channels; power is split equally across users and
    water-filled over the user's own projected singular modes.
    """
    if p_t <= 0:
        raise DomainError("p_t must be positive")
    n_users = len(channels)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (n_users,))
    out = []
    for j, h in enumerate(channels):
        others = [c for i, c in enumerate(channels) if i != j]
        if others:
            v0 = _null_space(np.vstack(others))
        else:
            v0 = np.eye(h.shape[1], dtype=complex)
        if v0.shape[1] == 0:
            raise InfeasibleBlockDiagonalizationError(f"user {j}: other users span the whole array")
        _, s, v1 = svd(h @ v0)
        rank = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
        if rank == 0:
            out.append(np.zeros((h.shape[1], 0), dtype=complex))
            continue
        ns = rank if max_streams is None else min(rank, max_streams)
        alloc = waterfill(s[:ns] ** 2 / noise[j], p_t / n_users)
        out.append(v0 @ v1[:, :ns] * np.sqrt(alloc.powers)[None, :])
    return out


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------

def combiner_basis(b_bar: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the range of ``conj(B_bar)``.

    The rate after the ``(B^T B^*)^-1 B^T`` combiner depends only on this
    subspace, and the orthonormal form stays stable when two departure
    frequencies nearly coincide.
    """
    u, s, _ = svd(np.conj(b_bar))
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
    return u[:, :max(rank, 1)]


def user_rate(signal: np.ndarray, interference: np.ndarray, sigma2: float, combiner: np.ndarray | None = None) -> float:
    """``log2 det(I + S (I + sigma2)^-1)`` after an optional linear combiner.

    ``signal`` and ``interference`` are ``nt x nt`` covariances at the
    receive antennas; ``combiner`` has the kept receive directions as columns.
    """
    if combiner is not None:
        c = combiner
        signal = c.conj().T @ signal @ c
        interference = c.conj().T @ interference @ c
    r = interference + sigma2 * np.eye(signal.shape[0])
    try:
        chol = np.linalg.cholesky(0.5 * (r + r.conj().T))
    except np.linalg.LinAlgError as exc:
        raise NumericError("interference-plus-noise covariance is singular") from exc
    x = np.linalg.solve(chol, signal)
    m = np.linalg.solve(chol, x.conj().T).conj().T
    eig = np.linalg.eigvalsh(np.eye(m.shape[0]) + 0.5 * (m + m.conj().T))
    if np.any(eig <= 0):
        raise NumericError("non-positive determinant in rate evaluation")
    return float(np.sum(np.log2(eig)))


def asymptotic_rate(gammas, powers) -> float:
    """Large-array rate ``sum log2(1 + gamma p)``."""
    return float(np.sum(np.log2(1 + np.asarray(gammas, float) * np.asarray(powers, float))))


def zeta_intercell(scenario: NetworkScenario, powers: np.ndarray, target: tuple[int, int] | None = None):
    """Inter-cell interference level of every user from per-stream powers.

    ``powers[j, g, l]`` is the power BS ``g`` puts on stream ``l`` of its user
    ``j``. For user ``(n, i)``,
    ``zeta = (1/L) sum_{g != i} sum_j sum_l Lambda_{ni,g} p_{jg,l} |alpha_{ni,g}(l)|^2``,
    the instance counterpart of ``J (G - 1) E{Lambda p |alpha|^2}``.
    Returns a ``(J, G)`` array, or a scalar when ``target`` is given.
    """
    lam = scenario.large_scale  # (J, G, G) [n, i, g]
    pw = np.abs(scenario.gains) ** 2  # (J, G, G, L) [n, i, g, l]
    G, L = scenario.cells, scenario.num_paths
    # per-BS mean stream power of each path index, summed over users: (G, L)
    tot = np.asarray(powers, float).sum(axis=0)
    z = np.einsum("nig,nigl,gl->ni", lam, pw, tot) / L
    own = np.einsum("nii,nil,il->ni", lam, pw[:, np.arange(G), np.arange(G)], tot) / L
    z = z - own
    if target is not None:
        return float(z[target])
    return z


# ---------------------------------------------------------------------------
# End-to-end sum rate
# ---------------------------------------------------------------------------

STRATEGIES = ("theorem5", "schemeA", "schemeB", "schemeC", "bdzf")
DOA_MODES = ("perfect", "estimated")
RATE_MODES = ("exact", "asymptotic")


@dataclass
class DownlinkKnowledge:
    """What every BS knows about its own users' paths.

    ``u``/``v`` are ``(J, G, L)`` arrays of the served links ``(j, g, g)``
    aligned with the true path order. ``mse_noise_*`` and ``mse_total_*``
    are the predicted frequency MSEs fed to the error-aware allocations.
    """

    u: np.ndarray
    v: np.ndarray
    mse_noise_u: np.ndarray
    mse_noise_v: np.ndarray
    mse_total_u: np.ndarray
    mse_total_v: np.ndarray

    @classmethod
    def perfect(cls, scenario: NetworkScenario) -> "DownlinkKnowledge":
        u_all, v_all, _ = scenario.frequencies()
        g = np.arange(scenario.cells)
        u, v = u_all[:, g, g], v_all[:, g, g]
        z = np.zeros_like(u)
        return cls(u, v, z, z, z, z)


@dataclass(frozen=True)
class ServedMse:
    """Predicted frequency MSEs of the served links at unit noise power.

    Interference parts do not depend on the noise level and the noise part
    is linear in it, so one evaluation covers a whole SNR sweep.
    """

    interference_u: np.ndarray
    interference_v: np.ndarray
    noise_unit_u: np.ndarray
    noise_unit_v: np.ndarray

    @classmethod
    def from_scenario(cls, scenario: NetworkScenario, rho1: float, samples=None,
                      noise_convention: str = "first_order") -> "ServedMse":
        from .mse import mse_breakdown

        J, G, L = scenario.users_per_cell, scenario.cells, scenario.num_paths
        parts = np.zeros((4, J, G, L))
        for g in range(G):
            for j in range(J):
                b = mse_breakdown(scenario, (j, g), rho1, 1.0, samples=samples, noise_convention=noise_convention)
                parts[0, j, g] = b.total("u") - b.get("u", "noise")
                parts[1, j, g] = b.total("v") - b.get("v", "noise")
                parts[2, j, g] = b.get("u", "noise")
                parts[3, j, g] = b.get("v", "noise")
        return cls(*parts)

    def knowledge(self, u: np.ndarray, v: np.ndarray, sigma2: float) -> DownlinkKnowledge:
        nu, nv = sigma2 * self.noise_unit_u, sigma2 * self.noise_unit_v
        return DownlinkKnowledge(u, v, nu, nv, nu + self.interference_u, nv + self.interference_v)


@dataclass
class SumRateResult:
    strategy: str
    rates: np.ndarray  # per user of the evaluated cell
    radiated_power: np.ndarray  # per BS

    @property
    def sum_rate(self) -> float:
        return float(self.rates.sum())


def served_paths(scenario: NetworkScenario):
    """True ``(u, v)`` of the served links as ``(J, G, L)`` arrays."""
    u_all, v_all, _ = scenario.frequencies()
    g = np.arange(scenario.cells)
    return u_all[:, g, g], v_all[:, g, g]


def estimate_served_paths(observations: list[np.ndarray], scenario: NetworkScenario, pilots, pairing: str = "joint"):
    """ESPRIT estimates of every served link, re-ordered onto the true paths.

    ``observations[g]`` is the received pilot block at BS ``g``. Returns
    ``(u_hat, v_hat)`` shaped ``(J, G, L)``.
    """
    from .esprit import estimate_doa, match_paths
    from .pilots import despread

    geo = scenario.geometry
    u_true, v_true = served_paths(scenario)
    J, G, L = u_true.shape
    u_hat, v_hat = np.empty_like(u_true), np.empty_like(v_true)
    for g in range(G):
        for j in range(J):
            est = estimate_doa(despread(observations[g], pilots, (j, g)), geo, L, pairing=pairing)
            perm, _, _ = match_paths((u_true[j, g], v_true[j, g]), est)
            u_hat[j, g], v_hat[j, g] = est.u[perm], est.v[perm]
    return u_hat, v_hat


def _steering(scenario: NetworkScenario, u, v, k: int) -> np.ndarray:
    a = upa_steering(scenario.geometry, u, v)
    if k:
        a = a * np.exp(-2j * np.pi * k * scenario.taps / scenario.num_subcarriers)[None, :]
    return a


def _stream_subset(gains: np.ndarray, max_streams: int | None) -> np.ndarray:
    if max_streams is None or max_streams >= gains.size:
        return np.arange(gains.size)
    return np.sort(np.argsort(-np.abs(gains), kind="stable")[:max_streams])


def _cell_precoders(scenario, knowledge, g, strategy, sigma2, p_t, zeta, k, max_streams):
    """Per-user precoders of BS ``g`` and the per-stream powers used for ``zeta``."""
    geo = scenario.geometry
    J, L = scenario.users_per_cell, scenario.num_paths
    lam = scenario.large_scale[:, g, g]
    gains = scenario.gains[:, g, g]
    streams = [_stream_subset(gains[j], max_streams) for j in range(J)]
    stream_power = np.zeros((J, L))
    if strategy == "bdzf":
        chans = [np.sqrt(lam[j]) * scenario.channel(j, g, g, k).T for j in range(J)]
        ns = L if max_streams is None else min(L, max_streams)
        return bd_zf_precoder(chans, p_t, sigma2, max_streams=ns), stream_power
    steer = [_steering(scenario, knowledge.u[j, g], knowledge.v[j, g], k)[:, streams[j]] for j in range(J)]
    if strategy == "theorem5":
        eff = EffectiveChannel.from_steering(steer, [gains[j, streams[j]] for j in range(J)], lam)
        v, _ = srm_precoder(eff, p_t)
        return [v[:, s] for s in eff.spans], stream_power
    # eigen-beamforming schemes: powers in post-normalisation units, budget nr * p_t
    gam = np.concatenate([lam[j] * np.abs(gains[j, streams[j]]) ** 2 / (zeta[j] + sigma2) for j in range(J)])
    budget = geo.nr * p_t
    if strategy == "schemeB":
        alloc = waterfill(gam, budget)
    else:
        if strategy == "schemeA":
            mu, mv = knowledge.mse_noise_u, knowledge.mse_noise_v
        elif strategy == "schemeC":
            mu, mv = knowledge.mse_total_u, knowledge.mse_total_v
        else:
            raise DomainError(f"unknown strategy {strategy!r}")
        mu = np.concatenate([mu[j, g, streams[j]] for j in range(J)])
        mv = np.concatenate([mv[j, g, streams[j]] for j in range(J)])
        alloc = waterfill_error_aware(gam / geo.nr ** 2, mu, mv, geo, budget)
    out, start = [], 0
    for j in range(J):
        n = streams[j].size
        p = alloc.powers[start:start + n]
        stream_power[j, streams[j]] = p
        out.append(eigen_beamformer(steer[j]) * np.sqrt(p)[None, :])
        start += n
    return out, stream_power


def _all_precoders(scenario, knowledge, strategy, sigma2, p_t, k, max_streams):
    G, J = scenario.cells, scenario.users_per_cell
    zeta = np.zeros((J, G))
    pre, powers = _precoder_pass(scenario, knowledge, strategy, sigma2, p_t, zeta, k, max_streams)
    if strategy in ("schemeA", "schemeB", "schemeC") and G > 1:
        # second pass with the inter-cell level implied by the first-pass powers
        zeta = zeta_intercell(scenario, np.transpose(powers, (1, 0, 2)))
        pre, powers = _precoder_pass(scenario, knowledge, strategy, sigma2, p_t, zeta, k, max_streams)
    return pre, zeta


def _precoder_pass(scenario, knowledge, strategy, sigma2, p_t, zeta, k, max_streams):
    pre, powers = [], []
    for g in range(scenario.cells):
        v, p = _cell_precoders(scenario, knowledge, g, strategy, sigma2, p_t, zeta[:, g], k, max_streams)
        pre.append(v)
        powers.append(p)
    return pre, np.array(powers)  # powers: (G, J, L)


def sum_rate(scenario: NetworkScenario, strategy: str, sigma2: float, p_t: float = 1.0,
             doa_mode: str = "estimated", knowledge: DownlinkKnowledge | None = None,
             rate_mode: str = "exact", cell: int = 0, k: int = 0,
             max_streams: int | None = None) -> SumRateResult:
    """Rates of the users of ``cell`` when every BS applies ``strategy``.

    ``knowledge`` carries the (estimated) served-path frequencies and
    predicted MSEs; it is required for ``doa_mode="estimated"`` (see
    :func:`estimate_served_paths`). BD-ZF always uses the full channel.
    """
    if strategy not in STRATEGIES:
        raise DomainError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if doa_mode not in DOA_MODES:
        raise DomainError(f"unknown doa_mode {doa_mode!r}")
    if rate_mode not in RATE_MODES:
        raise DomainError(f"unknown rate_mode {rate_mode!r}")
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive")
    if doa_mode == "perfect":
        knowledge = DownlinkKnowledge.perfect(scenario)
    elif knowledge is None:
        raise DomainError("estimated doa_mode needs the estimated path knowledge")
    pre, zeta = _all_precoders(scenario, knowledge, strategy, sigma2, p_t, k, max_streams)
    radiated = np.array([sum(float(np.vdot(x, x).real) for x in cellv) for cellv in pre])
    J, G = scenario.users_per_cell, scenario.cells
    rates = np.zeros(J)
    for n in range(J):
        if rate_mode == "exact":
            rates[n] = _exact_user_rate(scenario, pre, (n, cell), sigma2, k)
        else:
            rates[n] = _asymptotic_user_rate(scenario, pre, (n, cell), sigma2, zeta[n, cell], k)
    return SumRateResult(strategy, rates, radiated)


def _dl_channel(scenario: NetworkScenario, user: tuple[int, int], bs: int, k: int) -> np.ndarray:
    n, i = user
    return np.sqrt(scenario.large_scale[n, i, bs]) * scenario.channel(n, i, bs, k).T


def _exact_user_rate(scenario, pre, user, sigma2, k) -> float:
    n, i = user
    nt = scenario.geometry.nt
    signal = np.zeros((nt, nt), dtype=complex)
    interference = np.zeros((nt, nt), dtype=complex)
    for g in range(scenario.cells):
        h = _dl_channel(scenario, user, g, k)
        for j, v in enumerate(pre[g]):
            x = h @ v
            if (j, g) == (n, i):
                signal += x @ x.conj().T
            else:
                interference += x @ x.conj().T
    link = scenario.link(n, i, i)
    _, _, b_k = link_matrices(link, scenario.geometry, k, scenario.num_subcarriers)
    return user_rate(signal, interference, sigma2, combiner_basis(b_k))


def _asymptotic_user_rate(scenario, pre, user, sigma2, zeta, k) -> float:
    n, i = user
    u, v = served_paths(scenario)
    a = _steering(scenario, u[n, i], v[n, i], k)
    v_n = pre[i][n]
    gains = scenario.gains[n, i, i]
    lam = scenario.large_scale[n, i, i]
    if v_n.shape[1] == a.shape[1]:
        # received power of each stream along its own path
        p = np.abs(np.einsum("rl,rl->l", a, v_n)) ** 2
    else:
        p = np.zeros(a.shape[1])
    gam = lam * np.abs(gains) ** 2 / (zeta + sigma2)
    return asymptotic_rate(gam, p)
