"""Metrics induced by the energy form.

Four metrics are computed on a network: the effective resistance metric,
its square root (the variational sup of |f(x)-f(y)| over the unit energy
ball), the coordinate metric of a point-separating family, and the
intrinsic metric

    d(x, y) = sup{ f(x) - f(y) : G(f)({v}) <= m(v) for every vertex v },

whose feasible set is the discrete trace of an energy-density bound with
respect to an energy-dominant measure m.  The intrinsic supremum is a
convex program with linear objective and ellipsoidal constraints and is
solved with a certified duality gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from ._qcqp import QCQPProblem, solve_qcqp
from .network import NetworkError, ResistanceNetwork, energy_measure, resistance_matrix
from .reports import CheckReport
from .spaces import CoordinateSequence, MetricTree
from . import network as _network

__all__ = [
    "MetricMatrix",
    "IntrinsicSolution",
    "resistance_metric",
    "sqrt_resistance_metric",
    "coordinate_metric",
    "intrinsic_metric",
    "intrinsic_metric_matrix",
    "intrinsic_grid_oracle",
    "intrinsic_metric_tree",
    "path_length_metric",
    "compare_metric_chain",
    "dendrite_additivity_check",
]

METRIC_KINDS = (
    "resistance",
    "sqrt_resistance",
    "coordinate",
    "intrinsic",
    "path_length",
    "connes",
)


@dataclass(frozen=True)
class MetricMatrix:
    """Symmetric nonnegative vertex-by-vertex distance table.

    Entries may be +inf (metric in the wide sense); finite triples must
    satisfy the triangle inequality within `tol`.
    """

    vertices: tuple[str, ...]
    values: np.ndarray
    kind: str
    tol: float = 1e-9

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        d = self.values
        n = len(self.vertices)
        if d.shape != (n, n):
            raise ValueError("metric matrix shape mismatch")
        if np.any(np.diag(d) != 0.0):
            raise ValueError("metric matrix must have zero diagonal")
        if not np.array_equal(d, d.T):
            raise ValueError("metric matrix must be exactly symmetric")
        if np.any(d[np.isfinite(d)] < 0):
            raise ValueError("metric matrix must be nonnegative")
        viol = triangle_violation(d)
        if viol > self.tol:
            raise ValueError(f"triangle inequality violated by {viol}")

    def at(self, x: str, y: str) -> float:
        ix = self.vertices.index(x)
        iy = self.vertices.index(y)
        return float(self.values[ix, iy])


def triangle_violation(d: np.ndarray) -> float:
    """Largest amount by which d(i,j) exceeds min_k d(i,k) + d(k,j)."""
    n = d.shape[0]
    best = np.full_like(d, np.inf)
    for k in range(n):
        np.minimum(best, d[:, k, None] + d[None, k, :], out=best)
    with np.errstate(invalid="ignore"):
        viol = d - best
    viol = viol[np.isfinite(viol)]
    return float(np.max(viol)) if viol.size else 0.0


def _symmetrize(d: np.ndarray) -> np.ndarray:
    out = np.triu(d, 1)
    out = out + out.T
    return out


def resistance_metric(net: ResistanceNetwork) -> MetricMatrix:
    """All-pairs effective resistance."""
    return MetricMatrix(
        vertices=net.vertices,
        values=_symmetrize(resistance_matrix(net)),
        kind="resistance",
    )


def sqrt_resistance_metric(net: ResistanceNetwork, check_tol: float = 1e-9) -> MetricMatrix:
    """Square root of the resistance metric, computed two ways.

    Route one takes the entrywise square root of the resistance matrix.
    Route two builds, for each pair, the explicit maximizer of
    f(x) - f(y) over the unit energy ball from the pseudo-inverse of the
    Laplacian and evaluates the objective; both must agree to check_tol.
    """
    root = np.sqrt(np.maximum(resistance_matrix(net), 0.0))
    pinv = np.linalg.pinv(net.laplacian)
    pinv = 0.5 * (pinv + pinv.T)
    n = net.n_vertices
    direct = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            rhs = np.zeros(n)
            rhs[i], rhs[j] = 1.0, -1.0
            u = pinv @ rhs
            r = u[i] - u[j]
            if r <= 0:
                raise NetworkError("degenerate pair in resistance computation")
            f = u / np.sqrt(r)      # unit-energy maximizer
            direct[i, j] = direct[j, i] = f[i] - f[j]
    if np.max(np.abs(direct - root)) > check_tol:
        raise AssertionError("sqrt-resistance routes disagree")
    return MetricMatrix(vertices=net.vertices, values=_symmetrize(root), kind="sqrt_resistance")


def coordinate_metric(coords: CoordinateSequence) -> MetricMatrix:
    """d(x, y) = sup_k |f_k(x) - f_k(y)| for a separating family."""
    stacked = np.stack(coords.functions)
    d = np.max(np.abs(stacked[:, :, None] - stacked[:, None, :]), axis=0)
    np.fill_diagonal(d, 0.0)
    off = d[~np.eye(d.shape[0], dtype=bool)]
    if off.size and np.min(off) <= 0:
        raise NetworkError("coordinate family does not separate some pair")
    return MetricMatrix(
        vertices=coords.net.vertices, values=_symmetrize(d), kind="coordinate"
    )


# ---------------------------------------------------------------------------
# Intrinsic metric as a convex program
# ---------------------------------------------------------------------------


@dataclass
class IntrinsicSolution:
    distance: float
    maximizer: np.ndarray            # feasible, pinned to 0 at y
    active_vertices: tuple[str, ...]  # constraints tight within tolerance
    stats: dict = field(default_factory=dict)


def _density_constraints(net: ResistanceNetwork, m) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex constraint weights: G(f)({v}) = sum_e w_{v,e} (df)_e^2."""
    m = net.check_measure(m)
    W = np.zeros((net.n_vertices, net.n_edges))
    for v in range(net.n_vertices):
        for e in net.edges_at[v]:
            W[v, e] = 0.5 * net.conductances[e]
    return W, m


def intrinsic_metric(
    net: ResistanceNetwork,
    m,
    x: str,
    y: str,
    gap_tol: float = 1e-9,
    active_tol: float = 1e-6,
) -> IntrinsicSolution:
    """Solve sup{f(x) - f(y) : G(f)({v}) <= m(v) for all v}.

    Returns the distance, a feasible maximizer pinned to f(y) = 0, the
    set of vertices whose density constraint is tight, and solver
    statistics including the certified duality gap.
    """
    ix, iy = net.index(x), net.index(y)
    if ix == iy:
        return IntrinsicSolution(0.0, np.zeros(net.n_vertices), (), {"gap": 0.0})
    W, b = _density_constraints(net, m)
    c = np.zeros(net.n_vertices)
    c[ix] = 1.0
    problem = QCQPProblem(
        tails=net.tails, heads=net.heads, weights=W, bounds=b, c=c, pin=iy
    )
    res = solve_qcqp(problem, gap_tol=gap_tol)
    gamma = problem.constraint_values(res.x)
    if np.any(gamma > b * (1.0 + 1e-8)):
        raise AssertionError("intrinsic maximizer is infeasible")
    active = tuple(
        net.vertices[v]
        for v in range(net.n_vertices)
        if gamma[v] >= b[v] * (1.0 - active_tol)
    )
    stats = dict(res.stats)
    stats.update(
        {"gap": res.gap, "upper_bound": res.upper_bound, "residual": res.gap}
    )
    return IntrinsicSolution(
        distance=res.value, maximizer=res.x, active_vertices=active, stats=stats
    )


def intrinsic_metric_matrix(
    net: ResistanceNetwork, m, gap_tol: float = 1e-9
) -> MetricMatrix:
    n = net.n_vertices
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            sol = intrinsic_metric(net, m, net.vertices[i], net.vertices[j], gap_tol)
            d[i, j] = sol.distance
    return MetricMatrix(
        vertices=net.vertices,
        values=_symmetrize(d),
        kind="intrinsic",
        tol=max(1e-9, 100 * gap_tol),
    )


def intrinsic_grid_oracle(
    net: ResistanceNetwork, m, x: str, y: str, step: float = 1e-3,
    chunk: int = 2_000_000,
) -> float:
    """Brute-force evaluation of the intrinsic supremum.

    Grids every free coordinate except f(x) over a box derived from the
    resistance bound |f(v)|^2 <= d_R(v, y) * m(X), then maximizes f(x)
    in closed form per grid point (each constraint is a quadratic in the
    remaining coordinate, so the feasible f(x) values form an interval
    intersection).  Independent of the convex solver.
    """
    ix, iy = net.index(x), net.index(y)
    if ix == iy:
        return 0.0
    W, b = _density_constraints(net, m)
    R = resistance_matrix(net)
    box = np.sqrt(R[:, iy] * float(np.sum(b))) + step

    others = [v for v in range(net.n_vertices) if v not in (ix, iy)]
    grids = [np.arange(-box[v], box[v] + step, step) for v in others]

    touches = net.edges_at[ix]
    other_end = np.array(
        [int(net.heads[e]) if int(net.tails[e]) == ix else int(net.tails[e]) for e in touches]
    )
    fixed_edges = [e for e in range(net.n_edges) if e not in set(touches)]
    w_touch = W[:, touches]                          # (m, T)
    alpha = np.sum(w_touch, axis=1)                  # (m,)
    quad = alpha > 0

    def best_of(pts: np.ndarray) -> float:
        F = np.zeros((pts.shape[0], net.n_vertices))
        for col, v in enumerate(others):
            F[:, v] = pts[:, col]
        dfix = F[:, net.heads[fixed_edges]] - F[:, net.tails[fixed_edges]]
        gamma_fixed = dfix**2 @ W[:, fixed_edges].T
        f_other = F[:, other_end]
        # constraint i cut down to the free coordinate t = f(x):
        #   alpha_i t^2 + beta_i t + gamma_i <= b_i
        beta = -2.0 * (f_other @ w_touch.T)
        gamma0 = gamma_fixed + (f_other**2) @ w_touch.T
        feasible = np.all(gamma0[:, ~quad] <= b[~quad][None, :] + 1e-12, axis=1)
        disc = beta[:, quad] ** 2 - 4.0 * alpha[quad][None, :] * (
            gamma0[:, quad] - b[quad][None, :]
        )
        feasible &= np.all(disc >= 0.0, axis=1)
        if not np.any(feasible):
            return -np.inf
        root = np.sqrt(np.maximum(disc[feasible], 0.0))
        denom = 2.0 * alpha[quad][None, :]
        hi = (-beta[feasible][:, quad] + root) / denom
        lo = (-beta[feasible][:, quad] - root) / denom
        top = np.min(hi, axis=1)
        bottom = np.max(lo, axis=1)
        ok = top >= bottom - 1e-15       # nonempty interval intersection
        return float(np.max(top[ok])) if np.any(ok) else -np.inf

    if not grids:
        return best_of(np.zeros((1, 0)))
    best = -np.inf
    sizes = [len(g) for g in grids]
    total = int(np.prod(sizes))
    rows_per_chunk = max(1, chunk // max(1, total // sizes[0]))
    lead = grids[0]
    rest = grids[1:]
    if rest:
        mesh = np.meshgrid(*rest, indexing="ij")
        tail_pts = np.stack([g.ravel() for g in mesh], axis=1)
    else:
        tail_pts = np.zeros((1, 0))
    for start in range(0, len(lead), rows_per_chunk):
        block = lead[start : start + rows_per_chunk]
        pts = np.concatenate(
            [
                np.repeat(block, len(tail_pts))[:, None],
                np.tile(tail_pts, (len(block), 1)),
            ],
            axis=1,
        )
        best = max(best, best_of(pts))
    return best


def intrinsic_metric_tree(tree: MetricTree, x: str, y: str) -> float:
    """Closed-form intrinsic distance on a metric tree.

    The density bound caps |f'| at sqrt(density) on each edge, so the
    supremum integrates sqrt(density) along the unique path.
    """
    if x == y:
        return 0.0
    edges = tree.path_edges(x, y)
    return float(np.sum(tree.edge_length[edges] * np.sqrt(tree.density[edges])))


def path_length_metric(d, net: ResistanceNetwork) -> MetricMatrix:
    """Shortest chain metric along graph edges with hop costs from d.

    Chains through adjacent vertices stand in for continuous paths; the
    result dominates d entrywise whenever d is a metric.
    """
    values = d.values if isinstance(d, MetricMatrix) else np.asarray(d, dtype=float)
    n = net.n_vertices
    if values.shape != (n, n):
        raise NetworkError("distance table does not match the network")
    rows, cols, costs = [], [], []
    for t, h in zip(net.tails, net.heads):
        rows.append(int(t))
        cols.append(int(h))
        costs.append(values[int(t), int(h)])
    graph = scipy.sparse.csr_matrix((costs, (rows, cols)), shape=(n, n))
    out = scipy.sparse.csgraph.dijkstra(graph, directed=False)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 0.0)
    return MetricMatrix(vertices=net.vertices, values=_symmetrize(out), kind="path_length")


# ---------------------------------------------------------------------------
# Comparison theorems as runtime checks
# ---------------------------------------------------------------------------


def compare_metric_chain(
    net: ResistanceNetwork,
    m,
    coords: CoordinateSequence,
    tolerance: float = 1e-6,
    gap_tol: float = 1e-9,
) -> CheckReport:
    """Verify d_coordinate <= d_intrinsic <= d_sqrt_resistance entrywise.

    Preconditions, checked and reported rather than assumed: the measure
    has total mass at most 1 and every coordinate's energy measure lies
    below m entrywise.  These are exactly the inclusions that make the
    chain valid.
    """
    m = net.check_measure(m)
    total = float(np.sum(m))
    if total > 1.0 + 1e-12:
        raise NetworkError(f"measure mass {total} exceeds 1")
    for k, f in enumerate(coords.functions):
        gamma = energy_measure(net, f)
        if np.any(gamma > m * (1.0 + 1e-9) + 1e-15):
            raise NetworkError(f"coordinate {k} is not dominated by m")

    d_phi = coordinate_metric(coords).values
    d_int = intrinsic_metric_matrix(net, m, gap_tol=gap_tol).values
    d_root = sqrt_resistance_metric(net).values
    viol_lower = float(np.max(d_phi - d_int))
    viol_upper = float(np.max(d_int - d_root))
    worst = max(viol_lower, viol_upper)
    return CheckReport(
        check="metric_chain",
        lhs=worst,
        rhs=0.0,
        tolerance=tolerance,
        passed=worst <= tolerance,
        details={
            "coordinate_vs_intrinsic": viol_lower,
            "intrinsic_vs_sqrt_resistance": viol_upper,
        },
    )


def dendrite_additivity_check(
    tree: MetricTree,
    triples: Sequence[tuple[str, str, str]],
    tolerance: float = 1e-8,
    solver_check: bool = False,
    solver_tolerance: float | None = None,
    gap_tol: float = 1e-9,
) -> list[CheckReport]:
    """Shortest-path additivity d(x,y) = d(x,z) + d(z,y) for z on the path.

    The closed form is exact up to roundoff.  With solver_check the same
    identity is evaluated with the convex program on the lumped network,
    where junction lumping perturbs the split values at order of one
    edge length, so the default solver tolerance scales with the mesh.
    """
    reports = []
    if solver_tolerance is None:
        solver_tolerance = 4.0 * float(
            np.max(np.sqrt(tree.density)) * np.max(tree.edge_length)
        )
    for x, z, y in triples:
        path = tree.path_vertices(x, y)
        if z not in path:
            raise NetworkError(f"vertex {z} is not on the path from {x} to {y}")
        whole = intrinsic_metric_tree(tree, x, y)
        split = intrinsic_metric_tree(tree, x, z) + intrinsic_metric_tree(tree, z, y)
        reports.append(
            CheckReport(
                check=f"dendrite_additivity[{x},{z},{y}]",
                lhs=whole,
                rhs=split,
                tolerance=tolerance,
                passed=abs(whole - split) <= tolerance,
            )
        )
        if solver_check:
            net, mu = tree.net, tree.mu
            whole_s = intrinsic_metric(net, mu, x, y, gap_tol).distance
            split_s = (
                intrinsic_metric(net, mu, x, z, gap_tol).distance
                + intrinsic_metric(net, mu, z, y, gap_tol).distance
            )
            reports.append(
                CheckReport(
                    check=f"dendrite_additivity_solver[{x},{z},{y}]",
                    lhs=whole_s,
                    rhs=split_s,
                    tolerance=solver_tolerance,
                    passed=abs(whole_s - split_s) <= solver_tolerance,
                )
            )
    return reports
