"""Finite resistance networks and their energy calculus.

A network is a connected weighted graph without self-loops or parallel
edges.  Every edge carries a strictly positive conductance c_e.  The
quadratic energy form uses the plain edge-sum convention

    E(f, g) = sum_e c_e (f(u_e) - f(v_e)) (g(u_e) - g(v_e)),

without a global 1/2.  Energy localizes over vertices as

    G(f, g)({x}) = 1/2 sum_{e at x} c_e (df)_e (dg)_e,

so that the per-vertex values add up to E(f, g) exactly.  Functions and
measures are plain numpy arrays aligned with the network's vertex order;
helpers convert from {vertex: value} dicts at the JSON boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .reports import CheckReport

__all__ = [
    "NetworkError",
    "ResistanceNetwork",
    "build_network",
    "energy",
    "generator",
    "energy_measure",
    "effective_resistance",
    "resistance_matrix",
    "trace_to_subset",
    "CONTRACTIONS",
    "is_normal_contraction",
    "check_contraction_inequality",
    "check_product_inequality",
]


class NetworkError(ValueError):
    """Raised when a network description violates a structural invariant."""


@dataclass(frozen=True)
class ResistanceNetwork:
    """Connected weighted graph carrying the energy form.

    Edges are stored with a fixed global orientation (tail, head) chosen
    lexicographically on vertex ids at build time.  All energy quantities
    are orientation covariant; the orientation only matters for 1-forms.
    """

    vertices: tuple[str, ...]
    tails: np.ndarray          # int index of edge tail, shape (E,)
    heads: np.ndarray          # int index of edge head, shape (E,)
    conductances: np.ndarray   # positive, shape (E,)

    def __post_init__(self):
        if len(set(self.vertices)) != len(self.vertices):
            raise NetworkError("duplicate vertex ids")
        if self.tails.shape != self.heads.shape or self.tails.shape != self.conductances.shape:
            raise NetworkError("edge arrays must have equal length")
        if np.any(self.conductances <= 0):
            bad = int(np.argmax(self.conductances <= 0))
            raise NetworkError(
                f"nonpositive conductance on edge "
                f"({self.vertices[self.tails[bad]]}, {self.vertices[self.heads[bad]]})"
            )
        if np.any(self.tails == self.heads):
            bad = int(np.argmax(self.tails == self.heads))
            raise NetworkError(f"self-loop at vertex {self.vertices[self.tails[bad]]}")
        pairs = set()
        for t, h in zip(self.tails, self.heads):
            key = (min(t, h), max(t, h))
            if key in pairs:
                raise NetworkError(
                    f"duplicate edge ({self.vertices[key[0]]}, {self.vertices[key[1]]})"
                )
            pairs.add(key)
        comps = self._components()
        if len(comps) > 1:
            names = [sorted(self.vertices[i] for i in comp) for comp in comps]
            raise NetworkError(f"disconnected network, components: {names}")

    def _components(self) -> list[set[int]]:
        n = self.n_vertices
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for t, h in zip(self.tails, self.heads):
            ra, rb = find(int(t)), find(int(h))
            if ra != rb:
                parent[ra] = rb
        groups: dict[int, set[int]] = {}
        for i in range(n):
            groups.setdefault(find(i), set()).add(i)
        return list(groups.values())

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.conductances)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    def index(self, vertex: str) -> int:
        try:
            return self._index[vertex]
        except KeyError:
            raise NetworkError(f"unknown vertex {vertex!r}") from None

    @cached_property
    def incidence(self) -> np.ndarray:
        """Signed incidence matrix B, shape (E, V): +1 at head, -1 at tail."""
        B = np.zeros((self.n_edges, self.n_vertices))
        B[np.arange(self.n_edges), self.heads] = 1.0
        B[np.arange(self.n_edges), self.tails] = -1.0
        return B

    @cached_property
    def laplacian(self) -> np.ndarray:
        """Weighted graph Laplacian K = B^T C B, so E(f, g) = f^T K g."""
        B = self.incidence
        return B.T @ (self.conductances[:, None] * B)

    @cached_property
    def edges_at(self) -> tuple[tuple[int, ...], ...]:
        """For each vertex, the indices of incident edges."""
        out: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for e, (t, h) in enumerate(zip(self.tails, self.heads)):
            out[int(t)].append(e)
            out[int(h)].append(e)
        return tuple(tuple(v) for v in out)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        out: list[set[int]] = [set() for _ in range(self.n_vertices)]
        for t, h in zip(self.tails, self.heads):
            out[int(t)].add(int(h))
            out[int(h)].add(int(t))
        return tuple(tuple(sorted(s)) for s in out)

    def edge_differences(self, f: np.ndarray) -> np.ndarray:
        """(df)_e = f(head) - f(tail), shape (E,)."""
        f = self.check_function(f)
        return f[self.heads] - f[self.tails]

    def check_function(self, f) -> np.ndarray:
        """Coerce a function to a float array aligned with the vertex order."""
        if isinstance(f, Mapping):
            missing = [v for v in self.vertices if v not in f]
            if missing:
                raise NetworkError(f"function missing vertices {missing}")
            extra = [k for k in f if k not in self._index]
            if extra:
                raise NetworkError(f"function has unknown vertices {extra}")
            f = np.array([f[v] for v in self.vertices], dtype=float)
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n_vertices,):
            raise NetworkError(
                f"function has shape {f.shape}, expected ({self.n_vertices},)"
            )
        return f

    def check_measure(self, mu, strict: bool = True) -> np.ndarray:
        mu = self.check_function(mu)
        if strict and np.any(mu <= 0):
            bad = self.vertices[int(np.argmax(mu <= 0))]
            raise NetworkError(f"measure must be strictly positive, fails at {bad}")
        if np.any(mu < 0):
            bad = self.vertices[int(np.argmax(mu < 0))]
            raise NetworkError(f"measure must be nonnegative, fails at {bad}")
        return mu

    def indicator(self, vertex: str) -> np.ndarray:
        f = np.zeros(self.n_vertices)
        f[self.index(vertex)] = 1.0
        return f


def build_network(
    vertices: Sequence[str],
    edges: Iterable[tuple[str, str, float]],
) -> ResistanceNetwork:
    """Validate and build a network from (u, v, conductance) triples.

    The edge orientation is normalized to tail < head in lexicographic
    order on vertex ids, and the vertex order given here is kept.
    """
    vertices = tuple(str(v) for v in vertices)
    index = {v: i for i, v in enumerate(vertices)}
    tails, heads, conds = [], [], []
    for u, v, c in edges:
        u, v = str(u), str(v)
        if u not in index:
            raise NetworkError(f"edge endpoint {u!r} is not a declared vertex")
        if v not in index:
            raise NetworkError(f"edge endpoint {v!r} is not a declared vertex")
        if u == v:
            raise NetworkError(f"self-loop at vertex {u}")
        lo, hi = (u, v) if u < v else (v, u)
        tails.append(index[lo])
        heads.append(index[hi])
        conds.append(float(c))
    return ResistanceNetwork(
        vertices=vertices,
        tails=np.array(tails, dtype=np.intp),
        heads=np.array(heads, dtype=np.intp),
        conductances=np.array(conds, dtype=float),
    )


def energy(net: ResistanceNetwork, f, g=None) -> float:
    """Bilinear energy E(f, g) = sum_e c_e (df)_e (dg)_e."""
    df = net.edge_differences(f)
    dg = df if g is None else net.edge_differences(g)
    return float(np.dot(net.conductances * df, dg))


def generator(net: ResistanceNetwork, mu) -> np.ndarray:
    """Dense matrix of the generator L on L2(mu).

    (Lf)(x) = mu(x)^-1 sum_{e at x} c_e (f(y_e) - f(x)), which makes L
    self-adjoint in the mu-weighted inner product with E(f, g) = -<f, Lg>_mu.
    """
    mu = net.check_measure(mu)
    return -net.laplacian / mu[:, None]


def energy_measure(
    net: ResistanceNetwork, f, g=None, check_tol: float = 1e-12
) -> np.ndarray:
    """Per-vertex energy measure G(f, g) of a pair of functions.

    Computed two ways and cross-checked: the edge formula
    1/2 sum_{e at x} c_e (df)_e (dg)_e, and the variational formula
    (E(phi f, g) + E(phi g, f) - E(phi, f g)) / 2 with phi running over
    vertex indicators.  The two must agree to check_tol; the total mass
    equals E(f, g).
    """
    f = net.check_function(f)
    g = f if g is None else net.check_function(g)

    df = net.edge_differences(f)
    dg = net.edge_differences(g)
    loc = 0.5 * net.conductances * df * dg
    by_edge = np.zeros(net.n_vertices)
    np.add.at(by_edge, net.tails, loc)
    np.add.at(by_edge, net.heads, loc)

    fg = f * g
    by_indicator = np.empty(net.n_vertices)
    for i in range(net.n_vertices):
        phi = np.zeros(net.n_vertices)
        phi[i] = 1.0
        by_indicator[i] = 0.5 * (
            energy(net, phi * f, g) + energy(net, phi * g, f) - energy(net, phi, fg)
        )

    scale = max(1.0, float(np.max(np.abs(by_edge))) if len(by_edge) else 1.0)
    if np.max(np.abs(by_edge - by_indicator)) > check_tol * scale:
        raise AssertionError(
            "energy measure mismatch between edge and variational formulas"
        )
    return by_edge


def _grounded_inverse(K: np.ndarray, ground: int = 0) -> np.ndarray:
    """Inverse of K with row/column `ground` pinned to zero.

    For a connected network K has a one dimensional kernel of constants,
    so deleting one row and column gives a positive definite system.
    """
    n = K.shape[0]
    keep = [i for i in range(n) if i != ground]
    G = np.zeros_like(K)
    sub = np.linalg.inv(K[np.ix_(keep, keep)])
    G[np.ix_(keep, keep)] = sub
    return G


def effective_resistance(net: ResistanceNetwork, x: str, y: str) -> float:
    """Effective resistance between two vertices.

    Solves the current flow problem K u = e_x - e_y and returns
    u(x) - u(y).  The normalized potential u / sqrt(R) attains the
    variational characterization sup{|f(x)-f(y)|^2 : E(f) <= 1}.
    """
    ix, iy = net.index(x), net.index(y)
    if ix == iy:
        return 0.0
    rhs = np.zeros(net.n_vertices)
    rhs[ix], rhs[iy] = 1.0, -1.0
    keep = np.arange(net.n_vertices) != iy
    u = np.zeros(net.n_vertices)
    u[keep] = np.linalg.solve(net.laplacian[np.ix_(keep, keep)], rhs[keep])
    return float(u[ix] - u[iy])


def resistance_matrix(net: ResistanceNetwork) -> np.ndarray:
    """All-pairs effective resistance, R(x,y) = G_xx + G_yy - 2 G_xy."""
    G = _grounded_inverse(net.laplacian)
    d = np.diag(G)
    R = d[:, None] + d[None, :] - 2.0 * G
    np.fill_diagonal(R, 0.0)
    return R


def trace_to_subset(net: ResistanceNetwork, boundary: Sequence[str]) -> ResistanceNetwork:
    """Reduce the network to `boundary` by eliminating interior vertices.

    Schur complement of the Laplacian: the reduced network has identical
    effective resistances between boundary vertices.  Edges whose reduced
    conductance vanishes (up to roundoff) are dropped.
    """
    boundary = list(dict.fromkeys(boundary))
    if not boundary:
        raise NetworkError("boundary must be nonempty")
    b_idx = [net.index(v) for v in boundary]
    interior = [i for i in range(net.n_vertices) if i not in set(b_idx)]
    K = net.laplacian
    if interior:
        Kbb = K[np.ix_(b_idx, b_idx)]
        Kbi = K[np.ix_(b_idx, interior)]
        Kii = K[np.ix_(interior, interior)]
        K_red = Kbb - Kbi @ np.linalg.solve(Kii, Kbi.T)
    else:
        K_red = K[np.ix_(b_idx, b_idx)]

    names = [net.vertices[i] for i in b_idx]
    scale = max(1.0, float(np.max(np.abs(K_red))))
    edges = []
    m = len(b_idx)
    for i in range(m):
        for j in range(i + 1, m):
            c = -K_red[i, j]
            if c > 1e-12 * scale:
                edges.append((names[i], names[j], float(c)))
    return build_network(names, edges)


# ---------------------------------------------------------------------------
# Normal contractions and the localization inequalities
# ---------------------------------------------------------------------------

def _truncate(x):
    return np.clip(x, 0.0, 1.0)


def _mean(*xs):
    return sum(xs) / len(xs)


#: Catalog of normal contractions F: R^n -> R with F(0) = 0 and
#: |F(x) - F(y)| <= sum_i |x_i - y_i|.  Compositions put a 1-Lipschitz
#: unary contraction on top of an n-ary one, which stays normal.
CONTRACTIONS: dict[str, Callable[..., np.ndarray]] = {
    "identity": lambda x: x,
    "unit_truncation": _truncate,
    "absolute_value": np.abs,
    "min": lambda *xs: np.minimum.reduce(list(xs)),
    "max": lambda *xs: np.maximum.reduce(list(xs)),
    "mean": _mean,
    "truncation_of_mean": lambda *xs: _truncate(_mean(*xs)),
    "absolute_value_of_min": lambda *xs: np.abs(np.minimum.reduce(list(xs))),
    "truncation_of_absolute_value": lambda x: _truncate(np.abs(x)),
}


def is_normal_contraction(
    F: Callable[..., np.ndarray],
    arity: int,
    rng: np.random.Generator,
    samples: int = 64,
    scale: float = 3.0,
) -> bool:
    """Sampled check of F(0) = 0 and the summed-difference Lipschitz bound."""
    zero = F(*([np.zeros(1)] * arity))
    if abs(float(np.asarray(zero).ravel()[0])) > 1e-12:
        return False
    xs = rng.uniform(-scale, scale, size=(samples, arity))
    ys = rng.uniform(-scale, scale, size=(samples, arity))
    fx = np.asarray(F(*[xs[:, i] for i in range(arity)]), dtype=float)
    fy = np.asarray(F(*[ys[:, i] for i in range(arity)]), dtype=float)
    bound = np.sum(np.abs(xs - ys), axis=1)
    return bool(np.all(np.abs(fx - fy) <= bound + 1e-12))


def _clamped_sqrt(value: float, clamp: float = 1e-12) -> float:
    # roundoff can push a nonnegative radicand slightly below zero
    if value < 0:
        if value < -clamp:
            raise AssertionError(f"radicand {value} below the roundoff clamp")
        value = 0.0
    return float(np.sqrt(value))


def check_contraction_inequality(
    net: ResistanceNetwork,
    F: Callable[..., np.ndarray],
    fs: Sequence,
    h,
    rng: np.random.Generator | None = None,
    tolerance: float = 1e-10,
) -> CheckReport:
    """Localization inequality for a normal contraction of several functions.

    With g = F(f_1, ..., f_n) and h >= 0, compares

        (E(g h, g) - E(g^2, h)/2)^(1/2)
            <=  sum_i (E(f_i h, f_i) - E(f_i^2, h)/2)^(1/2),

    both sides being square roots of h integrated against the relevant
    energy measures.  Radicands are clamped at zero below 1e-12.
    """
    fs = [net.check_function(f) for f in fs]
    h = net.check_function(h)
    if np.any(h < 0):
        raise NetworkError("h must be nonnegative entrywise")
    rng = rng or np.random.default_rng(0)
    if not is_normal_contraction(F, len(fs), rng):
        raise NetworkError("F fails the normal contraction definition on samples")

    g = np.asarray(F(*fs), dtype=float)
    lhs = _clamped_sqrt(energy(net, g * h, g) - 0.5 * energy(net, g * g, h))
    rhs = sum(
        _clamped_sqrt(energy(net, f * h, f) - 0.5 * energy(net, f * f, h))
        for f in fs
    )
    return CheckReport(
        check="contraction_inequality",
        lhs=lhs,
        rhs=rhs,
        tolerance=tolerance,
        passed=lhs <= rhs + tolerance,
    )


def _closed_star(net: ResistanceNetwork, i: int) -> list[int]:
    return sorted({i, *net.neighbors[i]})


def check_product_inequality(
    net: ResistanceNetwork, f, g, tolerance: float = 1e-10
) -> list[CheckReport]:
    """Product rule estimate for energy measures on vertex sets.

    For each tested set A,

        G(fg)(A)^(1/2) <= sup|f| G(g)(A)^(1/2) + sup|g| G(f)(A)^(1/2).

    Tested with A equal to the full vertex set, where the suprema run
    over A itself, and with A equal to each closed vertex star.  On a
    graph the energy measure restricted to A references neighboring
    values, so for proper subsets the suprema must run over A together
    with its graph neighborhood or the estimate can fail.
    """
    f = net.check_function(f)
    g = net.check_function(g)
    gamma_f = energy_measure(net, f)
    gamma_g = energy_measure(net, g)
    gamma_fg = energy_measure(net, f * g)

    def one_report(label: str, A: list[int], sup_set: list[int]) -> CheckReport:
        sup_f = float(np.max(np.abs(f[sup_set])))
        sup_g = float(np.max(np.abs(g[sup_set])))
        lhs = _clamped_sqrt(float(np.sum(gamma_fg[A])))
        rhs = sup_f * _clamped_sqrt(float(np.sum(gamma_g[A]))) + sup_g * _clamped_sqrt(
            float(np.sum(gamma_f[A]))
        )
        return CheckReport(
            check=f"product_inequality[{label}]",
            lhs=lhs,
            rhs=rhs,
            tolerance=tolerance,
            passed=lhs <= rhs + tolerance,
        )

    everything = list(range(net.n_vertices))
    reports = [one_report("X", everything, everything)]
    for i, v in enumerate(net.vertices):
        star = _closed_star(net, i)
        hood = sorted(set(star).union(*(net.neighbors[j] for j in star)))
        reports.append(one_report(f"star:{v}", star, hood))
    return reports
