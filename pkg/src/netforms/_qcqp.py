"""Solver for linear objectives over intersections of energy ellipsoids.

Every convex program in this package has the same shape: maximize c.f
over functions f on the vertex set, subject to constraints

    q_i(f) = sum_e w_{i,e} ((df)_e)^2  <=  b_i,        w_{i,e} >= 0,

with one coordinate pinned to zero to fix the constant gauge.  Both the
per-vertex energy density constraints of the intrinsic metric and the
cutting planes of the commutator-norm program are of this form.

The solve runs a short projected-gradient warm start (ascent along c
with ray projection back into the feasible set) and then a log-barrier
Newton method.  The barrier multipliers give an exactly feasible dual
point, so the returned upper bound and duality gap are certified, not
estimated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["QCQPProblem", "QCQPResult", "SolverError", "solve_qcqp"]


class SolverError(RuntimeError):
    """Raised when the solver cannot certify the requested duality gap."""


@dataclass
class QCQPProblem:
    tails: np.ndarray      # (E,) int
    heads: np.ndarray      # (E,) int
    weights: np.ndarray    # (m, E) nonnegative constraint weights
    bounds: np.ndarray     # (m,) positive right-hand sides
    c: np.ndarray          # (V,) objective vector
    pin: int               # coordinate fixed to zero

    @property
    def n(self) -> int:
        return len(self.c)

    def diffs(self, x: np.ndarray) -> np.ndarray:
        return x[..., self.heads] - x[..., self.tails]

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        d2 = self.diffs(x) ** 2
        return d2 @ self.weights.T if d2.ndim > 1 else self.weights @ d2

    def scatter(self, edge_vals: np.ndarray) -> np.ndarray:
        """B^T applied to an edge vector."""
        out = np.zeros(self.n)
        np.add.at(out, self.heads, edge_vals)
        np.add.at(out, self.tails, -edge_vals)
        return out

    def weighted_laplacian(self, edge_weights: np.ndarray) -> np.ndarray:
        n = self.n
        K = np.zeros((n, n))
        t, h = self.tails, self.heads
        np.add.at(K, (t, t), edge_weights)
        np.add.at(K, (h, h), edge_weights)
        np.add.at(K, (t, h), -edge_weights)
        np.add.at(K, (h, t), -edge_weights)
        return K


@dataclass
class QCQPResult:
    x: np.ndarray                 # feasible maximizer, x[pin] = 0
    value: float                  # c.x, a feasible lower bound
    upper_bound: float            # certified dual bound
    gap: float
    multipliers: np.ndarray
    stats: dict = field(default_factory=dict)


def _ray_project(p: QCQPProblem, x: np.ndarray, shrink: float = 1.0) -> np.ndarray:
    """Scale x toward the origin until every constraint holds."""
    q = p.constraint_values(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        factors = np.sqrt(p.bounds / q)
    factors = factors[q > 0]
    s = float(np.min(factors)) if len(factors) else np.inf
    if s < 1.0 / shrink:
        x = x * s * shrink
    return x


def _projected_gradient(p: QCQPProblem, iters: int) -> tuple[np.ndarray, int]:
    """Ascent along the (constant) objective gradient with ray projection."""
    x = np.zeros(p.n)
    best, best_val = x, 0.0
    # step scale from the loosest single-constraint bound along c
    qc = p.constraint_values(p.c)
    qc_pos = qc[qc > 0]
    if len(qc_pos) == 0:
        return best, 0
    alpha0 = float(np.min(np.sqrt(p.bounds[qc > 0] / qc_pos)))
    for j in range(iters):
        step = alpha0 / np.sqrt(j + 1.0)
        x = x + step * p.c
        x[p.pin] = 0.0
        x = _ray_project(p, x, shrink=1.0 - 1e-12)
        val = float(p.c @ x)
        if val > best_val:
            best, best_val = x.copy(), val
    return best, iters


def _barrier_newton(
    p: QCQPProblem,
    x0: np.ndarray,
    gap_tol: float,
    t0: float = 1.0,
    mu: float = 20.0,
    max_outer: int = 40,
    max_inner: int = 60,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Log-barrier path following; returns (x, multipliers, newton_iters)."""
    free = np.arange(p.n) != p.pin
    W, b = p.weights, p.bounds
    m = len(b)
    x = x0.copy()
    s = b - p.constraint_values(x)
    if np.any(s <= 0):
        x = np.zeros(p.n)
        s = b.copy()
    t = t0
    total_newton = 0

    for _ in range(max_outer):
        for _ in range(max_inner):
            d = p.diffs(x)
            inv_s = 1.0 / s
            # gradient of the barrier objective (minimization form)
            grads = np.zeros((m, p.n))
            wd = W * d[None, :]
            np.add.at(grads.T, p.heads, 2.0 * wd.T)
            np.add.at(grads.T, p.tails, -2.0 * wd.T)
            grad = -t * p.c + grads.T @ inv_s
            H = 2.0 * p.weighted_laplacian(W.T @ inv_s)
            H += (grads * inv_s[:, None] ** 2).T @ grads
            g_r = grad[free]
            H_r = H[np.ix_(free, free)]
            try:
                dx_r = np.linalg.solve(H_r, -g_r)
            except np.linalg.LinAlgError:
                H_r = H_r + 1e-12 * np.trace(H_r) * np.eye(H_r.shape[0])
                dx_r = np.linalg.solve(H_r, -g_r)
            decrement = float(-g_r @ dx_r)
            total_newton += 1
            if decrement / 2.0 < 1e-13:
                break
            dx = np.zeros(p.n)
            dx[free] = dx_r
            # exact feasible step range: s_i(a) = s_i - 2a A1_i - a^2 A2_i > 0
            dd = p.diffs(dx)
            A1 = W @ (d * dd)
            A2 = W @ (dd * dd)
            alpha_max = np.inf
            disc = A1**2 + A2 * s
            active = A2 > 0
            roots = (-A1[active] + np.sqrt(disc[active])) / A2[active]
            if len(roots):
                alpha_max = float(np.min(roots))
            lin = (~active) & (A1 > 0)
            if np.any(lin):
                alpha_max = min(alpha_max, float(np.min(s[lin] / (2.0 * A1[lin]))))
            alpha = min(1.0, 0.99 * alpha_max)
            phi0 = -t * (p.c @ x) - float(np.sum(np.log(s)))
            slope = float(grad @ dx)
            for _ in range(60):
                x_new = x + alpha * dx
                s_new = b - p.constraint_values(x_new)
                if np.all(s_new > 0):
                    phi_new = -t * (p.c @ x_new) - float(np.sum(np.log(s_new)))
                    if phi_new <= phi0 + 0.25 * alpha * slope:
                        break
                alpha *= 0.5
            else:
                break
            x, s = x_new, s_new
        if m / t < gap_tol / 4.0:
            break
        t *= mu
    lam = 1.0 / (t * s)
    return x, lam, total_newton


def _dual_bound(p: QCQPProblem, lam: np.ndarray) -> float:
    """Exact dual value for multipliers lam >= 0.

    g(lam) = lam.b + sup_x (c.x - sum_i lam_i q_i(x)) over the pinned
    gauge; the sup is a positive definite quadratic maximization because
    the aggregated edge weights are strictly positive on a connected
    constraint graph.
    """
    free = np.arange(p.n) != p.pin
    agg = p.weights.T @ lam
    H = 2.0 * p.weighted_laplacian(agg)
    H_r = H[np.ix_(free, free)]
    c_r = p.c[free]
    try:
        z = np.linalg.solve(H_r, c_r)
    except np.linalg.LinAlgError:
        return np.inf
    val = 0.5 * float(c_r @ z)
    if val < 0:
        return np.inf
    return float(lam @ p.bounds) + val


def solve_qcqp(
    p: QCQPProblem,
    gap_tol: float = 1e-9,
    pg_iters: int = 150,
) -> QCQPResult:
    if np.all(p.c == 0):
        return QCQPResult(
            x=np.zeros(p.n), value=0.0, upper_bound=0.0, gap=0.0,
            multipliers=np.zeros(len(p.bounds)),
            stats={"pg_iterations": 0, "newton_iterations": 0, "method": "trivial"},
        )
    x_pg, pg_used = _projected_gradient(p, pg_iters)
    x0 = 0.95 * x_pg
    x, lam, newton_iters = _barrier_newton(p, x0, gap_tol)
    x = _ray_project(p, x)           # free boundary improvement along the ray
    x[p.pin] = 0.0
    value = float(p.c @ x)
    upper = _dual_bound(p, lam)
    gap = upper - value
    if not np.isfinite(gap) or gap < -1e-9:
        raise SolverError(f"invalid certified gap {gap}")
    if gap > max(gap_tol, 1e-7 * max(1.0, abs(value))):
        # one more aggressive barrier pass from the current point
        x2, lam2, extra = _barrier_newton(p, 0.999 * x, gap_tol / 10.0, t0=1e3)
        newton_iters += extra
        x2 = _ray_project(p, x2)
        x2[p.pin] = 0.0
        value2 = float(p.c @ x2)
        upper2 = _dual_bound(p, lam2)
        if np.isfinite(upper2) and upper2 - value2 < gap:
            x, value, upper, lam = x2, value2, min(upper, upper2), lam2
            gap = upper - value
    return QCQPResult(
        x=x,
        value=value,
        upper_bound=upper,
        gap=float(gap),
        multipliers=lam,
        stats={
            "pg_iterations": pg_used,
            "newton_iterations": newton_iters,
            "method": "projected_gradient+log_barrier",
        },
    )
