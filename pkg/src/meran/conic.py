"""Second-order cone programs in a small canonical form.

A :class:`SocpProblem` is

    minimize    x' P x + q' x
    subject to  ||A_j x + b_j|| <= c_j' x + d_j        (second-order cones)
                sum_k w_k x_{idx_k}^2 <= g' x + b0      (quadratic caps)
                x_i >= 0  for i in nonneg

over a real vector ``x``.  Complex beamformers are embedded as
``[Re v; Im v]`` blocks by :class:`BeamLayout`.  :func:`solve` hands the
problem to Clarabel; nothing outside this module depends on that choice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

OPTIMAL, INFEASIBLE, MAXITER = "Optimal", "Infeasible", "MaxIter"


@dataclass
class SocConstraint:
    A: sp.spmatrix
    b: np.ndarray
    c: np.ndarray
    d: float

    def residual(self, x) -> float:
        """Positive when violated."""
        return float(np.linalg.norm(self.A @ x + self.b) - (self.c @ x + self.d))


@dataclass
class QuadCap:
    idx: np.ndarray
    weights: np.ndarray
    bound: float
    g: np.ndarray | None = None

    def residual(self, x) -> float:
        rhs = self.bound + (0.0 if self.g is None else float(self.g @ x))
        return float(np.dot(self.weights, x[self.idx] ** 2) - rhs)


@dataclass
class SocpProblem:
    n_vars: int
    P: sp.spmatrix
    q: np.ndarray
    socs: list = field(default_factory=list)
    caps: list = field(default_factory=list)
    nonneg: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def objective(self, x) -> float:
        return float(x @ (self.P @ x) + self.q @ x)

    def max_violation(self, x) -> float:
        worst = 0.0
        for con in list(self.socs) + list(self.caps):
            worst = max(worst, con.residual(x))
        if len(self.nonneg):
            worst = max(worst, float(np.max(-x[self.nonneg], initial=0.0)))
        return worst

    def to_dict(self) -> dict:
        """Plain-data dump; matrices as COO triplets ``[rows, cols, vals]``."""
        def coo(M):
            M = sp.coo_matrix(M)
            return [M.shape, M.row.tolist(), M.col.tolist(), M.data.tolist()]
        return {
            "format": "meran-socp/1",
            "n_vars": self.n_vars,
            "P": coo(self.P),
            "q": np.asarray(self.q).tolist(),
            "socs": [{"A": coo(s.A), "b": np.asarray(s.b).tolist(),
                      "c": np.asarray(s.c).tolist(), "d": float(s.d)} for s in self.socs],
            "caps": [{"idx": np.asarray(c.idx).tolist(),
                      "weights": np.asarray(c.weights).tolist(),
                      "bound": float(c.bound),
                      "g": None if c.g is None else np.asarray(c.g).tolist()}
                     for c in self.caps],
            "nonneg": np.asarray(self.nonneg).tolist(),
        }

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))


def problem_from_dict(data: dict) -> SocpProblem:
    def mat(t):
        shape, r, c, v = t
        return sp.csr_matrix((v, (r, c)), shape=tuple(shape))
    return SocpProblem(
        n_vars=data["n_vars"], P=mat(data["P"]), q=np.array(data["q"], dtype=float),
        socs=[SocConstraint(mat(s["A"]), np.array(s["b"], dtype=float),
                            np.array(s["c"], dtype=float), s["d"]) for s in data["socs"]],
        caps=[QuadCap(np.array(c["idx"], dtype=int), np.array(c["weights"], dtype=float),
                      c["bound"], None if c["g"] is None else np.array(c["g"], dtype=float))
              for c in data["caps"]],
        nonneg=np.array(data["nonneg"], dtype=int),
    )


@dataclass
class SocpSolution:
    x: np.ndarray
    objective_value: float
    status: str
    iterations: int = 0
    info: str = ""


def _as_clarabel(p: SocpProblem):
    import clarabel

    n = p.n_vars
    blocks, rhs, cones = [], [], []
    if len(p.nonneg):
        k = len(p.nonneg)
        blocks.append(sp.csr_matrix((-np.ones(k), (np.arange(k), p.nonneg)), shape=(k, n)))
        rhs.append(np.zeros(k))
        cones.append(clarabel.NonnegativeConeT(k))
    for s in p.socs:
        A = sp.csr_matrix(s.A)
        blocks.append(sp.vstack([sp.csr_matrix(-np.asarray(s.c).reshape(1, n)), -A]))
        rhs.append(np.concatenate([[s.d], np.asarray(s.b, dtype=float)]))
        cones.append(clarabel.SecondOrderConeT(A.shape[0] + 1))
    for c in p.caps:
        # sum w x^2 <= t  <=>  ||(2 sqrt(w) x, t - 1)|| <= t + 1
        g = np.zeros(n) if c.g is None else np.asarray(c.g, dtype=float)
        k = len(c.idx)
        W = sp.csr_matrix((2.0 * np.sqrt(c.weights), (np.arange(k), c.idx)), shape=(k, n))
        G = sp.csr_matrix(g.reshape(1, n))
        blocks.append(sp.vstack([-G, -W, -G]))
        rhs.append(np.concatenate([[c.bound + 1.0], np.zeros(k), [c.bound - 1.0]]))
        cones.append(clarabel.SecondOrderConeT(k + 2))
    A = sp.vstack(blocks).tocsc() if blocks else sp.csc_matrix((0, n))
    b = np.concatenate(rhs) if rhs else np.zeros(0)
    P = sp.triu(2.0 * sp.csc_matrix(p.P)).tocsc()
    return P, np.asarray(p.q, dtype=float), A, b, cones


def solve(p: SocpProblem, tol: float = 1e-6, max_iter: int = 200) -> SocpSolution:
    """Solve ``p`` with an interior-point method.

    ``tol`` is the relative duality-gap target.  The result is
    deterministic for fixed inputs.
    """
    import clarabel

    P, q, A, b, cones = _as_clarabel(p)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_rel = tol
    settings.tol_gap_abs = tol * 1e-2
    settings.max_iter = max_iter
    settings.max_threads = 1
    # the cones couple every beamformer; faer handles the dense fill better
    settings.direct_solve_method = "faer"
    sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    status = str(sol.status)
    x = np.array(sol.x, dtype=float)
    if status in ("Solved", "AlmostSolved"):
        return SocpSolution(x, p.objective(x), OPTIMAL, sol.iterations, status)
    if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return SocpSolution(x, np.inf, INFEASIBLE, sol.iterations, status)
    return SocpSolution(x, np.nan, MAXITER, sol.iterations, status)


# -- complex beamformer embedding --------------------------------------------

class BeamLayout:
    """Index bookkeeping for ``n`` complex beamformers of length ``d`` plus
    optional per-user nonnegative slacks."""

    def __init__(self, n: int, d: int, slack_mask=None):
        self.n, self.d = n, d
        self.v_start = 0
        mask = np.zeros(n, dtype=bool) if slack_mask is None else np.asarray(slack_mask, bool)
        self.slack_mask = mask
        self.slack_idx = np.full(n, -1, dtype=int)
        self.slack_idx[mask] = 2 * n * d + np.arange(mask.sum())
        self.n_vars = 2 * n * d + int(mask.sum())

    def v_idx(self, k: int) -> np.ndarray:
        """Indices of ``[Re v_k; Im v_k]`` inside ``x``."""
        return np.arange(2 * self.d * k, 2 * self.d * (k + 1))

    @property
    def all_v(self) -> np.ndarray:
        return np.arange(2 * self.n * self.d)

    def beamformers(self, x) -> np.ndarray:
        X = np.asarray(x[: 2 * self.n * self.d]).reshape(self.n, 2, self.d)
        return X[:, 0, :] + 1j * X[:, 1, :]

    def slacks(self, x) -> np.ndarray:
        y = np.zeros(self.n)
        y[self.slack_mask] = x[self.slack_idx[self.slack_mask]]
        return y

    def pack(self, V, y=None) -> np.ndarray:
        x = np.zeros(self.n_vars)
        V = np.asarray(V, dtype=complex).reshape(self.n, self.d)
        x[: 2 * self.n * self.d] = np.stack([V.real, V.imag], axis=1).ravel()
        if y is not None:
            x[self.slack_idx[self.slack_mask]] = np.asarray(y)[self.slack_mask]
        return x


def _hermitian_rows(h) -> np.ndarray:
    """Real 2 x 2d matrix mapping ``[Re v; Im v]`` to ``[Re h^H v; Im h^H v]``."""
    hr, hi = np.real(h), np.imag(h)
    return np.block([[hr, hi], [-hi, hr]])


def rate_soc_coefficient(target: float, B: float) -> float:
    return float(np.sqrt(1.0 - 2.0 ** (-target / B)))


def build_rate_soc(h, layout: BeamLayout, own: int, target: float, B: float,
                   sigma2: float = 1.0, slack: bool = False) -> SocConstraint:
    """Rate target of UE ``own`` as a cone over all beamformers.

    ``coef * ||[h^H v_k for all k; sigma]|| <= Re(h^H v_own) (+ y_own)`` with
    ``coef = sqrt(1 - 2^(-target/B))``.
    """
    coef = rate_soc_coefficient(target, B)
    R = _hermitian_rows(h)
    n, two_d = layout.n, 2 * layout.d
    Av = sp.kron(sp.identity(n), sp.csr_matrix(coef * R))
    A = sp.hstack([Av, sp.csr_matrix((2 * n, layout.n_vars - n * two_d))])
    A = sp.vstack([A, sp.csr_matrix((1, layout.n_vars))]).tocsr()
    b = np.zeros(2 * n + 1)
    b[-1] = coef * np.sqrt(sigma2)
    c = np.zeros(layout.n_vars)
    c[layout.v_idx(own)] = R[0]
    if slack:
        if layout.slack_idx[own] < 0:
            raise ValueError(f"UE {own} has no slack variable")
        c[layout.slack_idx[own]] = 1.0
    return SocConstraint(A, b, c, 0.0)


def beam_problem(H, targets, B: float, slack_mask=None, big_M: float = 1.0,
                 caps=(), sigma2: float = 1.0) -> tuple[SocpProblem, BeamLayout]:
    """Virtual-downlink min-power problem with optional slacks and caps.

    ``caps`` is a sequence of ``(weights, bound)`` meaning
    ``sum_i weights[i] ||v_i||^2 <= bound``.
    """
    H = np.asarray(H, dtype=complex)
    n, d = H.shape
    lay = BeamLayout(n, d, slack_mask)
    diag = np.zeros(lay.n_vars)
    diag[lay.all_v] = 1.0
    q = np.zeros(lay.n_vars)
    q[lay.slack_idx[lay.slack_mask]] = big_M
    socs = [build_rate_soc(H[i], lay, i, targets[i], B, sigma2, bool(lay.slack_mask[i]))
            for i in range(n)]
    cap_list = []
    for weights, bound in caps:
        w = np.repeat(np.asarray(weights, dtype=float), 2 * d)
        keep = w > 0
        cap_list.append(QuadCap(lay.all_v[keep], w[keep], float(bound)))
    prob = SocpProblem(lay.n_vars, sp.diags(diag), q, socs, cap_list,
                       lay.slack_idx[lay.slack_mask])
    return prob, lay


def rate_shortfall(H, V, targets, B: float, sigma2: float = 1.0) -> np.ndarray:
    """Smallest slack ``y_i >= 0`` making each rate cone hold for ``V``."""
    H = np.asarray(H, dtype=complex)
    V = np.asarray(V, dtype=complex)
    coef = np.sqrt(1.0 - 2.0 ** (-np.asarray(targets, dtype=float) / B))
    G = H.conj() @ V.T                        # G[i, k] = h_i^H v_k
    lhs = coef * np.sqrt(np.sum(np.abs(G) ** 2, axis=1) + sigma2)
    return np.maximum(0.0, lhs - np.real(np.diag(G)))


def canonical_phase(V, H) -> np.ndarray:
    """Rotate each ``v_i`` so that ``h_i^H v_i`` is real and nonnegative."""
    V = np.array(V, dtype=complex)
    inner = np.sum(np.conj(H) * V, axis=1)
    phase = np.ones_like(inner)
    nz = np.abs(inner) > 0
    phase[nz] = np.conj(inner[nz]) / np.abs(inner[nz])
    return V * phase[:, None]
