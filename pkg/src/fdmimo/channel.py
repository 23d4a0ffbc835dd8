"""Geometric mmWave channel synthesis for a multi-cell FD-MIMO network.

The base station carries an ``m1 x m2`` uniform planar array (``m1``
elements along elevation, ``m2`` along azimuth) and every mobile a uniform
linear array of ``nt`` elements. Each link is a sum of ``L`` single-path
clusters, one per delay tap.

Link arrays in :class:`NetworkScenario` are indexed ``[j, g, i, l]``:
user ``j`` of cell ``g`` seen by base station ``i``, path ``l``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from .numerics import DomainError, kron


class UnsupportedLayoutError(ValueError):
    """Raised for a cell count the hexagonal layout does not support."""


@dataclass(frozen=True)
class ArrayGeometry:
    m1: int = 8
    m2: int = 8
    rx_spacing_ratio: float = 0.5
    nt: int = 8
    tx_spacing_ratio: float = 0.5

    def __post_init__(self):
        if min(self.m1, self.m2, self.nt) < 1:
            raise DomainError(f"array dimensions must be >= 1: {self}")
        for s in (self.rx_spacing_ratio, self.tx_spacing_ratio):
            if not 0.0 < s <= 1.0:
                raise DomainError(f"element spacing ratio must be in (0, 1], got {s}")

    @property
    def nr(self) -> int:
        return self.m1 * self.m2


@dataclass(frozen=True)
class PathParams:
    tap: int
    gain: complex
    elevation: float
    azimuth: float
    dod: float

    def spatial_frequencies(self, geometry: ArrayGeometry) -> tuple[float, float]:
        return spatial_frequencies(self.elevation, self.azimuth, geometry.rx_spacing_ratio)

    def tx_frequency(self, geometry: ArrayGeometry) -> float:
        return 2 * np.pi * geometry.tx_spacing_ratio * math.cos(self.dod)

    @property
    def magnitude(self) -> float:
        return abs(self.gain)

    @property
    def phase(self) -> float:
        return float(np.angle(self.gain))


@dataclass(frozen=True)
class LinkChannel:
    paths: tuple[PathParams, ...]
    large_scale: float = 1.0

    def __post_init__(self):
        if len(self.paths) < 1:
            raise DomainError("a link needs at least one path")
        taps = [p.tap for p in self.paths]
        if any(b <= a for a, b in zip(taps, taps[1:])):
            raise DomainError(f"taps must be strictly increasing, got {taps}")
        if self.large_scale < 0:
            raise DomainError("large-scale coefficient must be non-negative")

    @property
    def num_paths(self) -> int:
        return len(self.paths)

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=complex)

    @property
    def taps(self) -> np.ndarray:
        return np.array([p.tap for p in self.paths], dtype=int)

    def frequencies(self, geometry: ArrayGeometry) -> tuple[np.ndarray, np.ndarray]:
        theta = np.array([p.elevation for p in self.paths])
        phi = np.array([p.azimuth for p in self.paths])
        return spatial_frequencies(theta, phi, geometry.rx_spacing_ratio)

    def tx_frequencies(self, geometry: ArrayGeometry) -> np.ndarray:
        dod = np.array([p.dod for p in self.paths])
        return 2 * np.pi * geometry.tx_spacing_ratio * np.cos(dod)


# ---------------------------------------------------------------------------
# Array responses
# ---------------------------------------------------------------------------

def spatial_frequencies(theta, phi, rx_spacing_ratio: float = 0.5):
    """Elevation and azimuth spatial frequencies ``(u, v)`` at the BS array."""
    k = 2 * np.pi * rx_spacing_ratio
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    u = k * np.cos(theta)
    v = k * np.sin(theta) * np.cos(phi)
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


def angles_from_frequencies(u, v, rx_spacing_ratio: float = 0.5, return_flag: bool = False):
    """Invert :func:`spatial_frequencies`.

    The azimuth comes back in ``[0, pi]``: a planar array in the X-Z plane
    cannot tell ``phi`` from ``-phi``. Arccos arguments are clamped to
    ``[-1, 1]``; with ``return_flag`` a boolean array marks entries whose
    argument left the interval by more than ``1e-6``.
    """
    k = 2 * np.pi * rx_spacing_ratio
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cu = u / k
    theta = np.arccos(np.clip(cu, -1.0, 1.0))
    s = np.sin(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        cv = np.where(s > 0, v / (k * s), np.sign(v) * np.inf)
    phi = np.arccos(np.clip(cv, -1.0, 1.0))
    flag = (np.abs(cu) > 1 + 1e-6) | (np.abs(cv) > 1 + 1e-6)
    if theta.ndim == 0:
        theta, phi, flag = float(theta), float(phi), bool(flag)
    if return_flag:
        return theta, phi, flag
    return theta, phi


def canonical_azimuth(phi):
    """Representative of ``phi`` the planar array can identify (``|phi|`` folded to ``[0, pi]``)."""
    return np.arccos(np.cos(phi))


def ula_vector(n: int, freq) -> np.ndarray:
    """Vandermonde vector(s) ``exp(1j * k * freq)``, ``k = 0..n-1``; one column per frequency."""
    freq = np.atleast_1d(np.asarray(freq, dtype=float))
    return np.exp(1j * np.outer(np.arange(n), freq))


def ula_steering(nt: int, omega: float) -> np.ndarray:
    """MS transmit response, an ``nt x 1`` column."""
    return ula_vector(nt, omega)


def upa_steering(geometry: ArrayGeometry, u, v) -> np.ndarray:
    """BS receive response ``a(v) kron a(u)``; one ``nr``-row column per (u, v) pair.

    Entry ``q * m1 + p`` equals ``exp(1j * (p u + q v))``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    au = ula_vector(geometry.m1, u)
    av = ula_vector(geometry.m2, v)
    if u.size == 1:
        return kron(av, au)
    # column-wise Kronecker product
    return (av[:, None, :] * au[None, :, :]).reshape(geometry.nr, -1)


def link_matrices(link: LinkChannel, geometry: ArrayGeometry, k: int = 0, n_c: int = 1):
    """Factors ``(A, D, B_k)`` with ``H(k) = A @ D @ B_k^H``.

    ``A`` holds receive responses and ``D`` the diagonal of path gains. The
    columns of ``B_k`` are transmit responses scaled so that ``B_k^H``
    carries the per-tap phase ``exp(-2j pi k l / n_c)``.
    """
    u, v = link.frequencies(geometry)
    a = upa_steering(geometry, u, v)
    b = ula_vector(geometry.nt, link.tx_frequencies(geometry))
    phase = np.exp(-2j * np.pi * k * link.taps / n_c)
    b_k = b * phase.conj()[None, :]
    return a, np.diag(link.gains), b_k


def cir_tap(link: LinkChannel, geometry: ArrayGeometry, tap: int) -> np.ndarray:
    """Impulse response ``alpha * e_r e_t^H`` of one tap; zeros if the tap is absent."""
    for p in link.paths:
        if p.tap == tap:
            u, v = p.spatial_frequencies(geometry)
            er = upa_steering(geometry, u, v)
            et = ula_steering(geometry.nt, p.tx_frequency(geometry))
            return p.gain * er @ et.conj().T
    return np.zeros((geometry.nr, geometry.nt), dtype=complex)


def ctf(link: LinkChannel, geometry: ArrayGeometry, k: int, n_c: int) -> np.ndarray:
    """Transfer function ``H(k) = sum_l C(l) exp(-2j pi k l / n_c)``."""
    if not 0 <= k < n_c:
        raise DomainError(f"subcarrier {k} outside [0, {n_c})")
    a, d, b_k = link_matrices(link, geometry, k, n_c)
    return a @ d @ b_k.conj().T


def large_scale(distance_m, exponent: float = 3.7, ref_distance_m: float = 35.0):
    """Power-law path gain ``(d / d0) ** -exponent``; distances below ``d0`` are clamped."""
    d = np.maximum(np.asarray(distance_m, dtype=float), ref_distance_m)
    out = (d / ref_distance_m) ** (-exponent)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    cells: int = 7
    users_per_cell: int = 10
    m1: int = 8
    m2: int = 8
    nt: int = 8
    rx_spacing_ratio: float = 0.5
    tx_spacing_ratio: float = 0.5
    num_paths: int = 4
    cell_radius_m: float = 1000.0
    pathloss_exponent: float = 3.7
    ref_distance_m: float = 35.0
    elevation_range: tuple[float, float] = (math.pi / 12, math.pi / 2)
    azimuth_range: tuple[float, float] = (-math.pi / 2, math.pi / 2)
    dod_range: tuple[float, float] = (0.0, math.pi)
    gain_variance: float | None = None
    num_subcarriers: int = 64
    # divide every link of user (j, g) by its own-cell coefficient: uplink
    # power control / per-user SNR normalisation
    normalize_own_link: bool = True

    def __post_init__(self):
        object.__setattr__(self, "elevation_range", tuple(self.elevation_range))
        object.__setattr__(self, "azimuth_range", tuple(self.azimuth_range))
        object.__setattr__(self, "dod_range", tuple(self.dod_range))

    @property
    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.m1, self.m2, self.rx_spacing_ratio, self.nt, self.tx_spacing_ratio)

    @property
    def path_variance(self) -> float:
        return 1.0 / self.num_paths if self.gain_variance is None else self.gain_variance

    def validate(self) -> list[str]:
        problems = []
        if self.cells not in (1, 7):
            problems.append(f"cells must be 1 or 7, got {self.cells}")
        if self.users_per_cell < 1:
            problems.append("users_per_cell must be >= 1")
        if self.num_paths < 1:
            problems.append("num_paths must be >= 1")
        if self.num_subcarriers < 1:
            problems.append("num_subcarriers must be >= 1")
        lo, hi = self.elevation_range
        if not 0 < lo <= hi < math.pi:
            problems.append(f"elevation_range must lie in (0, pi): {self.elevation_range}")
        try:
            self.geometry
        except DomainError as exc:
            problems.append(str(exc))
        return problems


def hex_centers(cells: int, radius: float) -> np.ndarray:
    """BS positions: the origin plus, for seven cells, a ring at spacing sqrt(3) R."""
    if cells == 1:
        return np.zeros((1, 2))
    if cells == 7:
        d = math.sqrt(3) * radius
        ang = np.pi / 6 + np.pi / 3 * np.arange(6)
        ring = d * np.column_stack([np.cos(ang), np.sin(ang)])
        return np.vstack([np.zeros((1, 2)), ring])
    raise UnsupportedLayoutError(f"only 1 or 7 cells are supported, got {cells}")


def in_hexagon(xy: np.ndarray, radius: float) -> np.ndarray:
    """Membership test for a flat-topped hexagon of circumradius ``radius`` at the origin."""
    x = np.abs(xy[..., 0])
    y = np.abs(xy[..., 1])
    h = math.sqrt(3) / 2 * radius
    return (y <= h) & (math.sqrt(3) * x + y <= math.sqrt(3) * radius)


def sample_in_hexagon(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    out = np.empty((0, 2))
    h = math.sqrt(3) / 2 * radius
    while out.shape[0] < n:
        cand = rng.uniform([-radius, -h], [radius, h], size=(2 * n, 2))
        out = np.vstack([out, cand[in_hexagon(cand, radius)]])
    return out[:n]


@dataclass
class NetworkScenario:
    """A drawn multi-cell network; link arrays are indexed ``[j, g, i, l]``."""

    config: ScenarioConfig
    bs_positions: np.ndarray
    user_positions: np.ndarray  # (J, G, 2)
    large_scale: np.ndarray  # (J, G, G)
    gains: np.ndarray  # (J, G, G, L)
    elevation: np.ndarray
    azimuth: np.ndarray
    dod: np.ndarray
    taps: np.ndarray = field(default=None)  # (L,)

    def __post_init__(self):
        if self.taps is None:
            self.taps = np.arange(self.gains.shape[-1])

    @property
    def geometry(self) -> ArrayGeometry:
        return self.config.geometry

    @property
    def cells(self) -> int:
        return self.large_scale.shape[1]

    @property
    def users_per_cell(self) -> int:
        return self.large_scale.shape[0]

    @property
    def num_paths(self) -> int:
        return self.gains.shape[-1]

    @property
    def num_subcarriers(self) -> int:
        return self.config.num_subcarriers

    def link(self, j: int, g: int, i: int) -> LinkChannel:
        paths = tuple(
            PathParams(int(self.taps[l]), complex(self.gains[j, g, i, l]), float(self.elevation[j, g, i, l]),
                       float(self.azimuth[j, g, i, l]), float(self.dod[j, g, i, l]))
            for l in range(self.num_paths)
        )
        return LinkChannel(paths, float(self.large_scale[j, g, i]))

    def links(self) -> Iterator[tuple[tuple[int, int, int], LinkChannel]]:
        for j in range(self.users_per_cell):
            for g in range(self.cells):
                for i in range(self.cells):
                    yield (j, g, i), self.link(j, g, i)

    def frequencies(self):
        """Spatial frequencies ``(u, v)`` and transmit frequency ``omega`` of every path."""
        geo = self.geometry
        u, v = spatial_frequencies(self.elevation, self.azimuth, geo.rx_spacing_ratio)
        omega = 2 * np.pi * geo.tx_spacing_ratio * np.cos(self.dod)
        return u, v, omega

    def channel(self, j: int, g: int, i: int, k: int = 0) -> np.ndarray:
        return ctf(self.link(j, g, i), self.geometry, k, self.num_subcarriers)

    def with_gains(self, gains: np.ndarray) -> "NetworkScenario":
        return NetworkScenario(self.config, self.bs_positions, self.user_positions, self.large_scale,
                               np.asarray(gains, dtype=complex), self.elevation, self.azimuth, self.dod, self.taps)

    # -- serialisation ----------------------------------------------------
    def to_dict(self) -> dict:
        links = []
        for (j, g, i), link in self.links():
            links.append({
                "user": j, "cell": g, "bs": i, "large_scale": link.large_scale,
                "paths": [{"tap": p.tap, "gain": [p.gain.real, p.gain.imag], "elevation": p.elevation,
                           "azimuth": p.azimuth, "dod": p.dod} for p in link.paths],
            })
        return {
            "config": asdict(self.config),
            "bs_positions": self.bs_positions.tolist(),
            "user_positions": self.user_positions.tolist(),
            "links": links,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkScenario":
        cfg = ScenarioConfig(**data["config"])
        J, G, L = cfg.users_per_cell, cfg.cells, cfg.num_paths
        shape = (J, G, G, L)
        gains = np.zeros(shape, dtype=complex)
        el, az, dod = np.zeros(shape), np.zeros(shape), np.zeros(shape)
        lam = np.zeros((J, G, G))
        taps = None
        seen = set()
        for rec in data["links"]:
            j, g, i = rec["user"], rec["cell"], rec["bs"]
            seen.add((j, g, i))
            lam[j, g, i] = rec["large_scale"]
            paths = rec["paths"]
            if len(paths) != L:
                raise ValueError(f"link {(j, g, i)} has {len(paths)} paths, expected {L}")
            taps = [p["tap"] for p in paths]
            for l, p in enumerate(paths):
                gains[j, g, i, l] = complex(*p["gain"])
                el[j, g, i, l] = p["elevation"]
                az[j, g, i, l] = p["azimuth"]
                dod[j, g, i, l] = p["dod"]
        if len(seen) != J * G * G:
            raise ValueError(f"scenario document lists {len(seen)} links, expected {J * G * G}")
        return cls(cfg, np.asarray(data["bs_positions"], float), np.asarray(data["user_positions"], float),
                   lam, gains, el, az, dod, np.asarray(taps))

    @classmethod
    def loads(cls, text: str) -> "NetworkScenario":
        return cls.from_dict(json.loads(text))


def complex_gaussian(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples."""
    scale = math.sqrt(variance / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_path_angles(config: ScenarioConfig, rng: np.random.Generator, shape):
    el = rng.uniform(*config.elevation_range, size=shape)
    az = rng.uniform(*config.azimuth_range, size=shape)
    dod = rng.uniform(*config.dod_range, size=shape)
    return el, az, dod


def draw_scenario(config: ScenarioConfig, rng: np.random.Generator) -> NetworkScenario:
    """Draw a random network: hexagonal cells, uniform users, i.i.d. clustered paths."""
    problems = config.validate()
    if config.cells not in (1, 7):
        raise UnsupportedLayoutError(problems[0])
    if problems:
        raise DomainError("; ".join(problems))
    J, G, L = config.users_per_cell, config.cells, config.num_paths
    centers = hex_centers(G, config.cell_radius_m)
    users = np.empty((J, G, 2))
    for g in range(G):
        users[:, g, :] = centers[g] + sample_in_hexagon(J, config.cell_radius_m, rng)
    dist = np.linalg.norm(users[:, :, None, :] - centers[None, None, :, :], axis=-1)
    lam = large_scale(dist, config.pathloss_exponent, config.ref_distance_m)
    if config.normalize_own_link:
        own = lam[:, np.arange(G), np.arange(G)]  # (J, G)
        lam = lam / own[:, :, None]
    shape = (J, G, G, L)
    gains = complex_gaussian(rng, shape, config.path_variance)
    el, az, dod = draw_path_angles(config, rng, shape)
    return NetworkScenario(config, centers, users, lam, gains, el, az, dod, np.arange(L))


def single_link_scenario(link: LinkChannel, geometry: ArrayGeometry, num_subcarriers: int = 64) -> NetworkScenario:
    """Wrap one link as a ``G = J = 1`` scenario."""
    cfg = ScenarioConfig(cells=1, users_per_cell=1, m1=geometry.m1, m2=geometry.m2, nt=geometry.nt,
                         rx_spacing_ratio=geometry.rx_spacing_ratio, tx_spacing_ratio=geometry.tx_spacing_ratio,
                         num_paths=link.num_paths, num_subcarriers=num_subcarriers)
    g = link.gains.reshape(1, 1, 1, -1)
    el = np.array([p.elevation for p in link.paths]).reshape(g.shape)
    az = np.array([p.azimuth for p in link.paths]).reshape(g.shape)
    dod = np.array([p.dod for p in link.paths]).reshape(g.shape)
    return NetworkScenario(cfg, np.zeros((1, 2)), np.zeros((1, 1, 2)), np.full((1, 1, 1), link.large_scale),
                           g, el, az, dod, link.taps)
