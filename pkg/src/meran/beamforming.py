"""Uplink receive beamforming, SINR/rate evaluation and power control.

Channels are rows of a ``(n, d)`` complex array, noise-normalized so that
``sigma2 = 1`` unless given otherwise.  Receiver output for UE ``i`` is
``m_i^H y``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class Infeasible(RuntimeError):
    """The rate targets cannot be met by any finite power vector."""


# Iteration is declared divergent once a power exceeds this multiple of its
# interference-free lower bound.
DIVERGENCE_FACTOR = 1e6


@dataclass
class PowerControlResult:
    powers: np.ndarray
    beamformers: np.ndarray
    rates: np.ndarray
    converged: bool
    iterations: int


def sinr_targets(targets, B: float) -> np.ndarray:
    return 2.0 ** (np.asarray(targets, dtype=float) / B) - 1.0


def rate_uplink(sinr, B: float):
    return B * np.log2(1.0 + np.asarray(sinr, dtype=float))


def _covariance(H, powers, sigma2):
    H = np.asarray(H, dtype=complex)
    p = np.asarray(powers, dtype=float)
    return (H.T * p) @ H.conj() + sigma2 * np.eye(H.shape[1])


def mmse_receiver(H, powers, i: int, sigma2: float = 1.0) -> np.ndarray:
    """Unit-norm MMSE receiver for UE ``i``.

    ``(sum_{k != i} p_k h_k h_k^H + sigma2 I)^{-1} h_i``, normalized.
    """
    H = np.asarray(H, dtype=complex)
    p = np.array(powers, dtype=float)
    p[i] = 0.0
    m = np.linalg.solve(_covariance(H, p, sigma2), H[i])
    return m / np.linalg.norm(m)


def mmse_receivers(H, powers, sigma2: float = 1.0) -> np.ndarray:
    """All unit-norm MMSE receivers at once, one per row.

    The full covariance gives the same direction as the interference-only
    one by the matrix-inversion lemma.
    """
    H = np.asarray(H, dtype=complex)
    if H.shape[0] == 0:
        return H.copy()
    M = np.linalg.solve(_covariance(H, powers, sigma2), H.T).T
    return M / np.linalg.norm(M, axis=1, keepdims=True)


def sinr_uplink(p, m, H, i: int, sigma2: float = 1.0) -> float:
    """SINR of UE ``i`` given powers ``p`` and receivers ``m`` (rows)."""
    p = np.asarray(p, dtype=float)
    mi = np.asarray(m, dtype=complex)[i]
    H = np.asarray(H, dtype=complex)
    g = np.abs(H.conj() @ mi) ** 2
    interf = float(np.dot(np.delete(p, i), np.delete(g, i)))
    return float(p[i] * g[i] / (interf + sigma2 * np.vdot(mi, mi).real))


def sinr_all(p, M, H, sigma2: float = 1.0) -> np.ndarray:
    """Vector of uplink SINRs for receivers stacked in rows of ``M``."""
    p = np.asarray(p, dtype=float)
    M = np.asarray(M, dtype=complex)
    H = np.asarray(H, dtype=complex)
    if H.shape[0] == 0:
        return np.zeros(0)
    G = np.abs(M.conj() @ H.T) ** 2            # G[i, k] = |m_i^H h_k|^2
    sig = np.diag(G) * p
    interf = G @ p - sig
    noise = sigma2 * np.sum(np.abs(M) ** 2, axis=1)
    return sig / (interf + noise)


def interference_map(H, gamma, p, sigma2: float = 1.0) -> np.ndarray:
    """One step of the standard-interference update under MMSE receivers.

    ``p_i <- gamma_i / (h_i^H Q_i^{-1} h_i)`` with ``Q_i`` the
    interference-plus-noise covariance seen by UE ``i``.
    """
    H = np.asarray(H, dtype=complex)
    p = np.asarray(p, dtype=float)
    X = np.linalg.solve(_covariance(H, p, sigma2), H.T)        # Q^{-1} h_i
    s = np.real(np.sum(H.conj() * X.T, axis=1))                # h_i^H Q^{-1} h_i
    s_int = s / (1.0 - p * s)                                  # Sherman-Morrison
    return np.asarray(gamma, dtype=float) / s_int


def fixed_point_power(H, targets, B: float, tol: float = 1e-8, max_iters: int = 500,
                      sigma2: float = 1.0) -> PowerControlResult:
    """Minimum transmit powers meeting rate ``targets`` with MMSE receivers.

    Iterates the standard interference map from the interference-free
    bound.  Raises :class:`Infeasible` when the iteration diverges; returns
    ``converged=False`` if the iteration budget runs out first.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    if n == 0:
        return PowerControlResult(np.zeros(0), H.copy(), np.zeros(0), True, 0)
    gamma = sinr_targets(targets, B)
    if np.any(gamma <= 0):
        raise ValueError("rate targets must be positive")
    lower = gamma * sigma2 / np.sum(np.abs(H) ** 2, axis=1)
    p = lower.copy()
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        p_new = interference_map(H, gamma, p, sigma2)
        if not np.all(np.isfinite(p_new)) or np.any(p_new <= 0) \
                or np.any(p_new > DIVERGENCE_FACTOR * lower):
            raise Infeasible(f"power iteration diverged after {it} steps")
        change = np.max(np.abs(p_new - p) / p_new)
        p = p_new
        if change < tol:
            converged = True
            break
    M = mmse_receivers(H, p, sigma2)
    rates = rate_uplink(sinr_all(p, M, H, sigma2), B)
    return PowerControlResult(p, M, rates, converged, it)


def uplink_powers_from_duality(V, H, targets, B: float, sigma2: float = 1.0) -> PowerControlResult:
    """Uplink powers for receivers frozen to the virtual-downlink beamformers.

    With receivers ``m_i = v_i / ||v_i||`` the power update is affine, so
    its fixed point is obtained by one linear solve.  A negative or
    singular solution means the targets are not reachable with these
    receivers.
    """
    H = np.asarray(H, dtype=complex)
    V = np.asarray(V, dtype=complex)
    n = H.shape[0]
    if n == 0:
        return PowerControlResult(np.zeros(0), V.copy(), np.zeros(0), True, 0)
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms == 0):
        raise Infeasible("zero beamformer for an active UE")
    M = V / norms[:, None]
    gamma = sinr_targets(targets, B)
    G = np.abs(M.conj() @ H.T) ** 2
    sig = np.diag(G).copy()
    A = np.eye(n) - (gamma / sig)[:, None] * (G - np.diag(sig))
    rhs = gamma * sigma2 / sig
    try:
        p = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise Infeasible("singular power-update system") from exc
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise Infeasible("frozen receivers cannot meet the targets")
    rates = rate_uplink(sinr_all(p, M, H, sigma2), B)
    return PowerControlResult(p, M, rates, True, 1)
