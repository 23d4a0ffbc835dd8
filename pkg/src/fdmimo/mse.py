"""Analytical MSE of the FBA-ESPRIT frequency estimates.

Two levels of prediction are provided:

* :func:`mse_first_order` evaluates the exact first-order perturbation
  expression from the noiseless SVD and a perturbation covariance.
* :func:`mse_noise`, :func:`mse_pilot`, :func:`mse_intra` and
  :func:`mse_inter` are the large-array closed forms, which assume the
  receive steering vectors of different paths are orthogonal.

Frequencies are handled per axis: ``"v"`` (azimuth, shifts along ``m2``)
and ``"u"`` (elevation, shifts along ``m1``). The closed forms for ``u``
follow from those for ``v`` by exchanging the roles of ``m1`` and ``m2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ArrayGeometry, LinkChannel, NetworkScenario, ScenarioConfig, draw_path_angles, link_matrices
from .esprit import fba_extend, signal_subspace, subarray_rows
from .numerics import DomainError, NumericError, pinv
from .pilots import PilotBook

COMPONENTS = ("pilot", "intra", "inter", "noise")
AXES = ("u", "v")
# spatial frequencies closer than this are treated as a degenerate mode
DEGENERACY_TOL = 1e-6


class DegenerateModeError(NumericError):
    """Two target paths share a spatial frequency; first-order theory breaks down."""


class SingularJacobianError(DomainError):
    """The frequency-to-angle Jacobian is (near) singular."""


# ---------------------------------------------------------------------------
# Covariances
# ---------------------------------------------------------------------------

@dataclass
class LowRankCovariance:
    """Hermitian PSD matrix ``F diag(w) F^H + d I`` kept in factored form."""

    factors: np.ndarray
    weights: np.ndarray
    diag: float = 0.0

    @classmethod
    def zeros(cls, n: int) -> "LowRankCovariance":
        return cls(np.zeros((n, 0), dtype=complex), np.zeros(0), 0.0)

    @property
    def size(self) -> int:
        return self.factors.shape[0]

    def dense(self) -> np.ndarray:
        f = self.factors
        out = (f * self.weights) @ f.conj().T
        if self.diag:
            out = out + self.diag * np.eye(self.size)
        return out

    def __add__(self, other: "LowRankCovariance") -> "LowRankCovariance":
        return LowRankCovariance(np.hstack([self.factors, other.factors]),
                                 np.concatenate([self.weights, other.weights]), self.diag + other.diag)

    def scaled(self, c: float) -> "LowRankCovariance":
        return LowRankCovariance(self.factors, self.weights * c, self.diag * c)


@dataclass(frozen=True)
class InterferenceStats:
    """Monte Carlo settings for expectations over interferer angles."""

    mc_samples: int = 2000
    elevation_range: tuple[float, float] = (np.pi / 12, np.pi / 2)
    azimuth_range: tuple[float, float] = (-np.pi / 2, np.pi / 2)
    dod_range: tuple[float, float] = (0.0, np.pi)
    seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 1:
            raise DomainError("mc_samples must be >= 1")

    @classmethod
    def from_config(cls, config: ScenarioConfig, mc_samples: int = 2000, seed: int = 0) -> "InterferenceStats":
        return cls(mc_samples, tuple(config.elevation_range), tuple(config.azimuth_range),
                   tuple(config.dod_range), seed)

    def draw(self, geometry: ArrayGeometry, rng: np.random.Generator | None = None):
        """Sampled interferer frequencies ``(u, v, omega)``, each of length ``mc_samples``."""
        rng = np.random.default_rng(self.seed) if rng is None else rng
        n = self.mc_samples
        el = rng.uniform(*self.elevation_range, size=n)
        az = rng.uniform(*self.azimuth_range, size=n)
        dod = rng.uniform(*self.dod_range, size=n)
        k = 2 * np.pi * geometry.rx_spacing_ratio
        return k * np.cos(el), k * np.sin(el) * np.cos(az), 2 * np.pi * geometry.tx_spacing_ratio * np.cos(dod)


def _link_vec_factors(link: LinkChannel, geometry: ArrayGeometry, k: int, n_c: int) -> np.ndarray:
    """Columns ``vec(a_m b_m^H)`` so that ``vec(H(k)) = F @ gains``."""
    a, _, b_k = link_matrices(link, geometry, k, n_c)
    # vec(a b^H) = conj(b) kron a, one column per path
    return (b_k.conj()[:, None, :] * a[None, :, :]).reshape(geometry.nr * geometry.nt, -1)


def _ones_sandwich(link: LinkChannel, geometry: ArrayGeometry, k: int, n_c: int) -> np.ndarray:
    """Columns ``vec(a_m b_m^H 1)``: the despread leakage of a correlated user."""
    a, _, b_k = link_matrices(link, geometry, k, n_c)
    s = b_k.conj().sum(axis=0)  # 1^T conj(b)
    return np.tile(a * s, (geometry.nt, 1))


def noise_covariance_components(scenario: NetworkScenario, pilots: PilotBook, target: tuple[int, int], k: int,
                                sigma2: float, stats: InterferenceStats | None = None, gain_power: str = "instance",
                                dense: bool = True):
    """Covariances of ``vec`` of the despread perturbation, split by origin.

    Returns a dict with keys ``pilot``, ``intra``, ``inter`` and ``noise``.
    The expectation over path gains uses the instance magnitudes
    (``gain_power="instance"``, i.e. random phases) or the configured path
    variance (``"prior"``). With ``stats`` given, interferer angles are
    additionally averaged over ``stats.mc_samples`` draws from the priors,
    keeping the instance large-scale coefficients.
    """
    n, i = target
    geo = scenario.geometry
    nrt = geo.nr * geo.nt
    n_c = scenario.num_subcarriers
    rho2 = pilots.rho1 ** 2
    out = {name: LowRankCovariance.zeros(nrt) for name in COMPONENTS}
    out["noise"] = LowRankCovariance(np.zeros((nrt, 0), dtype=complex), np.zeros(0), float(sigma2))
    if stats is not None:
        rng = np.random.default_rng(stats.seed)
    for g in range(scenario.cells):
        for j in range(scenario.users_per_cell):
            if (j, g) == (n, i):
                continue
            name = "pilot" if j == n else ("intra" if g == i else "inter")
            if name != "pilot" and rho2 == 0:
                continue
            link = scenario.link(j, g, i)
            power = np.abs(link.gains) ** 2 if gain_power == "instance" else np.full(link.num_paths, scenario.config.path_variance)
            scale = link.large_scale * (1.0 if name == "pilot" else rho2)
            build = _link_vec_factors if name == "pilot" else _ones_sandwich
            if stats is None:
                f = build(link, geo, k, n_c)
                w = scale * power
            else:
                f, w = _sampled_factors(link, geo, k, n_c, stats, rng, build, scale * power)
            out[name] = out[name] + LowRankCovariance(f, w)
    if dense:
        return {name: c.dense() for name, c in out.items()}
    return out


def _sampled_factors(link, geo, k, n_c, stats, rng, build, weights):
    from .channel import PathParams

    cols, ws = [], []
    n = stats.mc_samples
    el = rng.uniform(*stats.elevation_range, size=(n, link.num_paths))
    az = rng.uniform(*stats.azimuth_range, size=(n, link.num_paths))
    dod = rng.uniform(*stats.dod_range, size=(n, link.num_paths))
    for s in range(n):
        paths = tuple(PathParams(p.tap, p.gain, el[s, m], az[s, m], dod[s, m]) for m, p in enumerate(link.paths))
        cols.append(build(LinkChannel(paths, link.large_scale), geo, k, n_c))
        ws.append(weights / n)
    return np.hstack(cols), np.concatenate(ws)


def fba_covariances(r_m: np.ndarray):
    """Covariance and complementary covariance of ``vec`` of the FBA-extended perturbation."""
    r = np.asarray(r_m, dtype=complex)
    n = r.shape[0]
    # Pi R* Pi == R* reversed along both axes
    r_rev = r.conj()[::-1, ::-1]
    z = np.zeros((n, n), dtype=complex)
    big_r = np.block([[r, z], [z, r_rev]])
    big_c = np.block([[z, r[:, ::-1]], [r.conj()[::-1, :], z]])
    return big_r, big_c


# ---------------------------------------------------------------------------
# Exact first-order expression
# ---------------------------------------------------------------------------

@dataclass
class FirstOrderModel:
    """Noiseless-SVD quantities needed for the first-order MSE of one link."""

    geometry: ArrayGeometry
    u_true: np.ndarray
    v_true: np.ndarray
    u_sig: np.ndarray
    s_sig: np.ndarray
    v_sig: np.ndarray
    t: np.ndarray  # eigenvectors of the shift operators, column l <-> path l
    t_inv: np.ndarray

    @classmethod
    def from_link(cls, link: LinkChannel, geometry: ArrayGeometry, k: int = 0, n_c: int = 64) -> "FirstOrderModel":
        u, v = link.frequencies(geometry)
        _check_degenerate(u, v)
        a, d, b_k = link_matrices(link, geometry, k, n_c)
        h0 = np.sqrt(link.large_scale) * a @ d @ b_k.conj().T
        u_sig, s_sig, v_sig = signal_subspace(fba_extend(h0), link.num_paths)
        if s_sig[-1] <= 1e-12 * s_sig[0]:
            raise NumericError("noiseless signal subspace is rank deficient")
        # U_sig = A M  =>  shift operators are M^-1 Phi M, eigenvectors T = M^-1
        m = pinv(a) @ u_sig
        return cls(geometry, np.atleast_1d(u), np.atleast_1d(v), u_sig, s_sig, v_sig, np.linalg.inv(m), m)

    def weight_vector(self, path: int, axis: str) -> np.ndarray:
        """``W^T r`` for one path and axis: the first-order error is ``Im(a^T vec(N_fba))``."""
        geo = self.geometry
        freq = (self.v_true if axis == "v" else self.u_true)[path]
        r1, r2 = subarray_rows(geo, axis)
        u = self.u_sig
        q = self.t[:, path]
        p = self.t_inv[path, :]
        # s^T = p^T (J1 U)^+ (J2 e^{-j freq} - J1), as a length-nr row
        g = p @ pinv(u[r1])
        s = np.zeros(geo.nr, dtype=complex)
        s[r2] += g * np.exp(-1j * freq)
        s[r1] -= g
        # project onto the noise subspace: P_n^T s with P_n = I - U U^H
        s_proj = s - u.conj() @ (u.T @ s)
        beta = self.v_sig @ (q / self.s_sig)
        return np.kron(beta, s_proj)


def _check_degenerate(u, v) -> None:
    u, v = np.atleast_1d(u), np.atleast_1d(v)
    for a in range(u.size):
        for b in range(a + 1, u.size):
            if abs(u[a] - u[b]) < DEGENERACY_TOL and abs(v[a] - v[b]) < DEGENERACY_TOL:
                raise DegenerateModeError(f"paths {a} and {b} share (u, v) within {DEGENERACY_TOL}")


def _quad_dense(a: np.ndarray, r_fba: np.ndarray, c_fba: np.ndarray) -> float:
    term_r = np.real(a.conj() @ r_fba.T @ a)
    term_c = np.real(a @ c_fba @ a)
    return 0.5 * (term_r - term_c)


def _quad_lowrank(a: np.ndarray, cov: LowRankCovariance, nt: int, nr: int) -> float:
    n = nr * nt
    a1, a2 = a[:n], a[n:]
    a2_rev = a2[::-1]  # Pi a2
    f, w = cov.factors, cov.weights
    x1 = f.T @ a1  # F^T a1
    x2 = f.conj().T @ a2_rev  # F^H Pi a2
    term_r = np.sum(w * (np.abs(x1) ** 2 + np.abs(x2) ** 2)) + cov.diag * (np.vdot(a1, a1) + np.vdot(a2, a2)).real
    term_c = 2 * np.real(np.sum(w * x1 * x2) + cov.diag * (a1 @ a2_rev))
    return 0.5 * (term_r - term_c)


def mse_first_order(link: LinkChannel, geometry: ArrayGeometry, k: int, r_fba_m, c_fba_m=None, path: int = 0,
                    axis: str = "v", n_c: int = 64, model: FirstOrderModel | None = None) -> float:
    """First-order MSE of one path's spatial frequency under one perturbation component.

    ``r_fba_m``/``c_fba_m`` are the FBA covariance pair from
    :func:`fba_covariances`. Alternatively pass the un-extended covariance as
    a :class:`LowRankCovariance` in ``r_fba_m`` and leave ``c_fba_m`` as
    ``None``; the FBA structure is then applied implicitly.
    """
    if axis not in AXES:
        raise DomainError(f"axis must be 'u' or 'v', got {axis!r}")
    model = FirstOrderModel.from_link(link, geometry, k, n_c) if model is None else model
    a = model.weight_vector(path, axis)
    if isinstance(r_fba_m, LowRankCovariance):
        val = _quad_lowrank(a, r_fba_m, geometry.nt, geometry.nr)
    else:
        val = _quad_dense(a, np.asarray(r_fba_m), np.asarray(c_fba_m))
    return max(float(val), 0.0)


def first_order_error(model: FirstOrderModel, n: np.ndarray, path: int, axis: str) -> float:
    """Linearised frequency error ``freq - freq_hat`` caused by perturbation ``n`` (``nr x nt``)."""
    a = model.weight_vector(path, axis)
    n_fba = fba_extend(n)
    return float(np.imag(a @ n_fba.reshape(-1, order="F")))


# ---------------------------------------------------------------------------
# Large-array closed forms
# ---------------------------------------------------------------------------

def _axis_dims(geometry: ArrayGeometry, axis: str):
    """``(m_other, m_shift)``: elements across and along the shift direction."""
    if axis == "v":
        return geometry.m1, geometry.m2
    if axis == "u":
        return geometry.m2, geometry.m1
    raise DomainError(f"axis must be 'u' or 'v', got {axis!r}")


def _dirichlet(n: int, x) -> np.ndarray:
    """``sum_{r<n} exp(1j r x)`` evaluated elementwise."""
    x = np.asarray(x, dtype=float)
    return np.exp(1j * np.multiply.outer(x, np.arange(n))).sum(axis=-1)


def interference_terms(geometry: ArrayGeometry, target_uv, interferer_uv, axis: str = "v") -> dict:
    """Per-sample spatial interference factors ``Y``, ``Y'`` and ``Y~``.

    ``target_uv`` is the target path's ``(u, v)``, ``interferer_uv`` a pair
    of equal-length arrays. Returned arrays have one entry per interferer
    sample; ``combined`` is ``Y + Y' - 2 Re(exp(1j Phi) Y~)``. For axis
    ``"u"`` the roles of (m1, u) and (m2, v) are exchanged.
    """
    u, v = target_uv
    u2, v2 = (np.atleast_1d(np.asarray(x, dtype=float)) for x in interferer_uv)
    m_other, m_shift = _axis_dims(geometry, axis)
    if axis == "v":
        a, a2, s, s2 = u, u2, v, v2
    else:
        a, a2, s, s2 = v, v2, u, u2
    k = m_shift - 1
    p = np.arange(m_other)
    y = np.abs(_dirichlet(m_other, a - a2)) ** 2 * np.abs(np.exp(1j * k * (s - s2)) - 1) ** 2
    rev = np.exp(1j * (np.multiply.outer(a2, m_other - 1 - p) + a * p)).sum(axis=-1)
    y_prime = np.abs(rev) ** 2 * np.abs(np.exp(1j * k * s) - np.exp(1j * k * s2)) ** 2
    y_tilde = (rev.conj() * (np.exp(-1j * k * s) - np.exp(-1j * k * s2))
               * _dirichlet(m_other, a2 - a) * (np.exp(1j * k * (s2 - s)) - 1))
    phi_big = (geometry.m1 - 1) * u + (geometry.m2 - 1) * v
    combined = y + y_prime - 2 * np.real(np.exp(1j * phi_big) * y_tilde)
    return {"Y": y, "Y_prime": y_prime, "Y_tilde": y_tilde, "combined": combined}


def dod_factor(nt: int, omega_target: float, omega_interferer, kind: str) -> np.ndarray:
    """Transmit-side factor of one interfering path.

    ``kind="pilot"``: ``|sum_r exp(-1j r (w - w'))|^2``.
    ``kind="correlated"``: ``|sum_r exp(1j r w)|^2 |sum_r exp(1j r w')|^2``,
    the factor carried by a user leaking through the all-ones correlation
    block of the pilot pool.
    """
    w2 = np.asarray(omega_interferer, dtype=float)
    if kind == "pilot":
        return np.abs(_dirichlet(nt, -(omega_target - w2))) ** 2
    if kind == "correlated":
        return np.abs(_dirichlet(nt, omega_target)) ** 2 * np.abs(_dirichlet(nt, w2)) ** 2
    raise DomainError(f"unknown kind {kind!r}")


def _closed_form_prefactor(alpha_abs2: float, lambda_ls: float, geometry: ArrayGeometry, axis: str) -> float:
    m_other, m_shift = _axis_dims(geometry, axis)
    if alpha_abs2 <= 0 or lambda_ls <= 0:
        return np.inf
    return 1.0 / (8 * alpha_abs2 * geometry.nt ** 2 * lambda_ls * (m_shift - 1) ** 2 * m_other ** 2)


def mse_noise(alpha_abs2: float, lambda_ls: float, geometry: ArrayGeometry, sigma2: float, axis: str = "v",
              convention: str = "first_order") -> float:
    """Large-array noise-induced MSE of one path's frequency.

    ``convention="first_order"`` gives ``sigma2 / (|a|^2 nt L (m2-1)^2 m1)``
    (axis ``v``), the large-array limit of :func:`mse_first_order`.
    ``convention="printed"`` halves it, reproducing the constant commonly
    quoted for this bound; Monte Carlo ESPRIT runs agree with the former.
    """
    if sigma2 == 0:
        return 0.0
    m_other, m_shift = _axis_dims(geometry, axis)
    if alpha_abs2 <= 0 or lambda_ls <= 0:
        return np.inf
    scale = {"first_order": 1.0, "printed": 0.5}[convention]
    return scale * sigma2 / (alpha_abs2 * geometry.nt * lambda_ls * (m_shift - 1) ** 2 * m_other)


@dataclass(frozen=True)
class TargetPath:
    """The quantities of one target path that enter the closed forms."""

    u: float
    v: float
    omega: float
    alpha_abs2: float
    large_scale: float = 1.0


@dataclass
class Interferer:
    """One interfering link: its large-scale coefficient and path powers.

    ``u``, ``v``, ``omega`` hold fixed path frequencies (instance mode); when
    left ``None`` the expectation over the angle priors is used instead.
    """

    large_scale: float
    path_powers: np.ndarray
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    omega: np.ndarray | None = None


@dataclass
class PriorSamples:
    """Interferer frequency samples shared by all closed-form evaluations."""

    u: np.ndarray
    v: np.ndarray
    omega: np.ndarray

    @classmethod
    def draw(cls, stats: InterferenceStats, geometry: ArrayGeometry) -> "PriorSamples":
        return cls(*stats.draw(geometry))


def _interference_mse(target: TargetPath, interferers, geometry: ArrayGeometry, axis: str, kind: str,
                      samples: PriorSamples | None, rho1: float = 1.0) -> float:
    pref = _closed_form_prefactor(target.alpha_abs2, target.large_scale, geometry, axis)
    total = 0.0
    prior_mean = None
    for itf in interferers:
        powers = np.atleast_1d(np.asarray(itf.path_powers, dtype=float))
        if itf.u is None:
            if samples is None:
                raise DomainError("prior expectation requested without PriorSamples")
            if prior_mean is None:
                sp = interference_terms(geometry, (target.u, target.v), (samples.u, samples.v), axis)["combined"]
                x = dod_factor(geometry.nt, target.omega, samples.omega, kind)
                prior_mean = float(np.mean(x) * np.mean(sp))
            total += itf.large_scale * powers.sum() * prior_mean
        else:
            sp = interference_terms(geometry, (target.u, target.v), (itf.u, itf.v), axis)["combined"]
            x = dod_factor(geometry.nt, target.omega, itf.omega, kind)
            total += itf.large_scale * float(np.sum(powers * x * sp))
    if total == 0.0:
        return 0.0
    return rho1 ** 2 * pref * total


def mse_pilot(target: TargetPath, interferers, geometry: ArrayGeometry, samples: PriorSamples | None = None,
              axis: str = "v") -> float:
    """Pilot-contamination MSE: same-sequence users of the other cells."""
    return _interference_mse(target, interferers, geometry, axis, "pilot", samples)


def mse_intra(target: TargetPath, interferers, geometry: ArrayGeometry, rho1: float,
              samples: PriorSamples | None = None, axis: str = "v") -> float:
    """Intra-cell MSE: other users of the serving cell through the ``rho1`` correlation."""
    if rho1 == 0:
        return 0.0
    return _interference_mse(target, interferers, geometry, axis, "correlated", samples, rho1)


def mse_inter(target: TargetPath, interferers, geometry: ArrayGeometry, rho1: float,
              samples: PriorSamples | None = None, axis: str = "v") -> float:
    """Inter-cell MSE: other-index users of the other cells through ``rho1``."""
    if rho1 == 0:
        return 0.0
    return _interference_mse(target, interferers, geometry, axis, "correlated", samples, rho1)


@dataclass
class MseBreakdown:
    """Closed-form MSE components, arrays of shape ``(L,)`` per axis and component."""

    components: dict = field(default_factory=dict)  # (axis, component) -> (L,) array

    def get(self, axis: str, component: str) -> np.ndarray:
        return self.components[(axis, component)]

    def total(self, axis: str) -> np.ndarray:
        return sum(self.components[(axis, c)] for c in COMPONENTS)


def mse_breakdown(scenario: NetworkScenario, target: tuple[int, int], rho1: float, sigma2: float,
                  samples: PriorSamples | None = None, noise_convention: str = "first_order") -> MseBreakdown:
    """All four closed-form components for every path of the target link.

    Interferer large-scale coefficients and path powers come from the
    scenario; their angles are averaged over ``samples`` when given and
    taken from the scenario otherwise.
    """
    n, i = target
    geo = scenario.geometry
    u_all, v_all, w_all = scenario.frequencies()
    groups = {"pilot": [], "intra": [], "inter": []}
    for g in range(scenario.cells):
        for j in range(scenario.users_per_cell):
            if (j, g) == (n, i):
                continue
            name = "pilot" if j == n else ("intra" if g == i else "inter")
            itf = Interferer(float(scenario.large_scale[j, g, i]), np.abs(scenario.gains[j, g, i]) ** 2)
            if samples is None:
                itf.u, itf.v, itf.omega = u_all[j, g, i], v_all[j, g, i], w_all[j, g, i]
            groups[name].append(itf)
    out = MseBreakdown()
    lam = float(scenario.large_scale[n, i, i])
    for axis in AXES:
        vals = {c: np.zeros(scenario.num_paths) for c in COMPONENTS}
        for l in range(scenario.num_paths):
            tp = TargetPath(float(u_all[n, i, i, l]), float(v_all[n, i, i, l]), float(w_all[n, i, i, l]),
                            float(abs(scenario.gains[n, i, i, l]) ** 2), lam)
            vals["pilot"][l] = mse_pilot(tp, groups["pilot"], geo, samples, axis)
            vals["intra"][l] = mse_intra(tp, groups["intra"], geo, rho1, samples, axis)
            vals["inter"][l] = mse_inter(tp, groups["inter"], geo, rho1, samples, axis)
            vals["noise"][l] = mse_noise(tp.alpha_abs2, lam, geo, sigma2, axis, noise_convention)
        for c in COMPONENTS:
            out.components[(axis, c)] = vals[c]
    return out


def angle_mse_from_frequency_mse(mse_u, mse_v, theta, phi, rx_spacing_ratio: float = 0.5):
    """Delta-method conversion of frequency MSEs to elevation/azimuth MSEs.

    Valid for half-wavelength spacing only, where ``u = pi cos(theta)`` and
    ``v = pi sin(theta) cos(phi)``.
    """
    if abs(rx_spacing_ratio - 0.5) > 1e-12:
        raise DomainError("angle conversion assumes half-wavelength element spacing")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st, sp = np.sin(theta), np.sin(phi)
    if np.any(np.abs(st) < 1e-3) or np.any(np.abs(sp) < 1e-3):
        raise SingularJacobianError("sin(theta) or sin(phi) is within 1e-3 of zero")
    mse_u = np.asarray(mse_u, dtype=float)
    mse_v = np.asarray(mse_v, dtype=float)
    mse_theta = mse_u / (np.pi ** 2 * st ** 2)
    cot_t, cot_p = np.cos(theta) / st, np.cos(phi) / sp
    mse_phi = mse_u * cot_t ** 2 * cot_p ** 2 / (np.pi ** 2 * st ** 2) + mse_v / (np.pi ** 2 * st ** 2 * sp ** 2)
    return mse_theta, mse_phi
