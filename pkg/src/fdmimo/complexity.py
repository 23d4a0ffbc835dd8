"""Closed-form FLOP counts of the estimators and precoders.

The polynomials are reproduced term by term as published, including the
``4 m^2 n + 22 n^3`` SVD convention; they model the published counts rather
than any particular implementation. All results are Python integers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .numerics import DomainError

MUSIC_GRID_POINTS = 360


@dataclass(frozen=True)
class FlopModelInput:
    q: int = 64
    m1: int = 8
    m2: int = 8
    n_t: int = 8
    l: int = 4
    j: int = 10
    n_g: int = MUSIC_GRID_POINTS
    l_tilde: int | None = None  # defaults to (j - 1) * l

    def __post_init__(self):
        for name in ("q", "m1", "m2", "n_t", "l", "j", "n_g"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")
        if self.l_tilde is not None and (not isinstance(self.l_tilde, int) or self.l_tilde < 1):
            raise DomainError(f"l_tilde must be a positive integer, got {self.l_tilde!r}")

    @property
    def n_r(self) -> int:
        return self.m1 * self.m2

    @property
    def stacked_rank(self) -> int:
        return (self.j - 1) * self.l if self.l_tilde is None else self.l_tilde

    def square(self, side: int) -> "FlopModelInput":
        return replace(self, m1=side, m2=side)


def esprit_terms(x: FlopModelInput) -> dict[str, int]:
    """The six ESPRIT terms: despreading, SVD, extension SVD, two shift solves, eigendecomposition."""
    nr, nt, q, L, m1, m2 = x.n_r, x.n_t, x.q, x.l, x.m1, x.m2
    return {
        "C_a": 2 * (q - 1) * nr * nt,
        "C_b": 2 * nr * nt * (nr + nt - 2),
        "C_c": 8 * nr ** 2 * nt + 176 * nt ** 3,
        "C_d": 2 * (m2 * (m1 - 1) - 1) * L ** 2 + (L ** 3 + L ** 2 + L) + 2 * (L - 1) * m2 * L * (m1 - 1),
        "C_e": 2 * (m1 * (m2 - 1) - 1) * L ** 2 + (L ** 3 + L ** 2 + L) + 2 * (L - 1) * m1 * L * (m2 - 1),
        "C_f": 2 * L ** 3,
    }


def music_terms(x: FlopModelInput) -> dict[str, int]:
    nr, L = x.n_r, x.l
    return {
        "D_a": (x.q + 1) * nr ** 2,
        "D_b": 26 * nr ** 3,
        "D_c": x.n_g * (2 * nr * (nr - L) + (2 * nr - 3)),
    }


def doa_precoder_terms(x: FlopModelInput) -> dict[str, int]:
    nr, jl = x.n_r, x.j * x.l
    return {
        "E_a": 2 * (jl - 1) * jl * nr,
        "E_b": 4 * jl ** 2 * nr + 22 * nr ** 3,
        "E_c": 2 * (nr - 1) * nr * jl + 2 * (jl - 1) * nr * jl,
    }


def flops_esprit(x: FlopModelInput) -> int:
    return sum(esprit_terms(x).values())


def flops_music(x: FlopModelInput) -> int:
    return sum(music_terms(x).values())


def flops_doa_precoder(x: FlopModelInput) -> int:
    return sum(doa_precoder_terms(x).values())


def flops_bd(x: FlopModelInput) -> int:
    """Block diagonalisation: null-space SVD, projection and per-user SVD, for each user."""
    nr, nt, J, lt = x.n_r, x.n_t, x.j, x.stacked_rank
    if lt >= nr:
        raise DomainError(f"stacked rank {lt} leaves no null space in {nr} antennas")
    null_svd = 4 * (J - 1) ** 2 * nt ** 2 * nr + 22 * nr ** 3
    projection = 2 * (nr - 1) * nt * (nr - lt)
    own_svd = 4 * nt ** 2 * (nr - lt) + 22 * (nr - lt) ** 3
    return J * (null_svd + projection + own_svd)
