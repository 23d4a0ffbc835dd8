"""Shared non-orthogonal pilot pool and uplink signal synthesis.

Every cell reuses the same pool, so user ``n`` of any cell transmits rows
``n * nt .. (n + 1) * nt - 1`` of :attr:`PilotBook.sequences`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import NetworkScenario, complex_gaussian
from .numerics import DomainError, psd_sqrt


class InfeasibleCorrelationError(DomainError):
    """The requested cross-user correlation makes the target Gram indefinite."""


class SequenceLengthError(DomainError):
    """The pilot length cannot host ``J * nt`` orthonormal base rows."""


@dataclass(frozen=True)
class PilotBook:
    q: int
    j_users: int
    nt: int
    rho1: float
    sequences: np.ndarray  # (J * nt, q)

    def user(self, j: int) -> np.ndarray:
        """The ``nt x q`` block ``X_j``."""
        return self.sequences[j * self.nt:(j + 1) * self.nt]

    def gram(self) -> np.ndarray:
        return self.sequences @ self.sequences.conj().T


def target_gram(j_users: int, nt: int, rho1: float) -> np.ndarray:
    """``I + rho1 * (1 - I_J kron 1_nt)``: identity within users, ``rho1`` across."""
    n = j_users * nt
    k = np.eye(n) + rho1 * (np.ones((n, n)) - np.kron(np.eye(j_users), np.ones((nt, nt))))
    return k.astype(complex)


def dft_rows(rows: int, q: int) -> np.ndarray:
    """First ``rows`` rows of the unitary ``q``-point DFT matrix."""
    m = np.arange(rows)[:, None] * np.arange(q)[None, :]
    return np.exp(-2j * np.pi * m / q) / np.sqrt(q)


def build_pilot_book(j_users: int, nt: int, q: int, rho1: float) -> PilotBook:
    """Pool whose Gram matrix is exactly :func:`target_gram`.

    Orthonormal DFT rows are mixed by the Hermitian square root of the
    target Gram, which is positive semidefinite iff ``rho1 <= 1 / nt``.
    """
    if j_users < 1 or nt < 1:
        raise DomainError("j_users and nt must be >= 1")
    if q < j_users * nt:
        raise SequenceLengthError(f"q={q} < J*nt={j_users * nt}")
    if not 0.0 <= rho1 < 1.0 / nt:
        raise InfeasibleCorrelationError(f"rho1={rho1} outside [0, 1/nt) = [0, {1.0 / nt})")
    s = psd_sqrt(target_gram(j_users, nt, rho1)) @ dft_rows(j_users * nt, q)
    return PilotBook(q, j_users, nt, rho1, s)


def uplink_rx(scenario: NetworkScenario, pilots: PilotBook, bs: int, k: int, sigma2: float,
              rng: np.random.Generator | None = None) -> np.ndarray:
    """Received ``nr x q`` block at base station ``bs`` on subcarrier ``k``."""
    geo = scenario.geometry
    z = np.zeros((geo.nr, pilots.q), dtype=complex)
    for g in range(scenario.cells):
        for j in range(scenario.users_per_cell):
            h = scenario.channel(j, g, bs, k)
            z += np.sqrt(scenario.large_scale[j, g, bs]) * h @ pilots.user(j)
    if sigma2 > 0:
        if rng is None:
            raise ValueError("a generator is required when sigma2 > 0")
        z += complex_gaussian(rng, z.shape, sigma2)
    return z


def despread(z: np.ndarray, pilots: PilotBook, target_user: tuple[int, int]) -> np.ndarray:
    """Correlate with the target user's sequences: ``Z X_n^H``.

    ``target_user`` is ``(n, i)``; only ``n`` selects the sequences since the
    pool is shared by all cells.
    """
    n, _ = target_user
    return z @ pilots.user(n).conj().T


def despread_terms(scenario: NetworkScenario, pilots: PilotBook, target_user: tuple[int, int], k: int) -> dict:
    """Noiseless despread output split into its four additive parts.

    Keys: ``target``, ``pilot`` (same-index users of other cells), ``intra``
    (other users of the serving cell) and ``inter`` (other users of other
    cells). Cross-user terms carry the ``rho1`` all-ones correlation block.
    """
    n, i = target_user
    nt = pilots.nt
    ones = np.ones((nt, nt))
    lam = scenario.large_scale
    terms = {name: np.zeros((scenario.geometry.nr, nt), dtype=complex) for name in ("target", "pilot", "intra", "inter")}
    for g in range(scenario.cells):
        for j in range(scenario.users_per_cell):
            h = np.sqrt(lam[j, g, i]) * scenario.channel(j, g, i, k)
            if j == n:
                terms["target" if g == i else "pilot"] += h
            else:
                terms["intra" if g == i else "inter"] += pilots.rho1 * h @ ones
    return terms
