"""Constructors for the example spaces: segments, metric trees, stars,
and Sierpinski gasket approximations.

Trees follow the cable convention: every edge of length l gets
conductance 1/l, so effective resistance equals arc length at every
discretization level.  Vertex measures are lumped, each vertex receiving
density times half the total length of its incident edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .network import (
    NetworkError,
    ResistanceNetwork,
    build_network,
    energy,
    energy_measure,
)

__all__ = [
    "MetricTree",
    "GasketApprox",
    "CoordinateSequence",
    "build_path",
    "build_star",
    "build_gasket",
    "harmonic_extension",
    "gasket_harmonic_pair",
    "kusuoka_measure",
    "kusuoka_cell_masses",
    "build_coordinate_sequence",
    "rescale_dominated",
    "build_m0",
]


@dataclass(frozen=True)
class MetricTree:
    """Dendrite with edge lengths and piecewise-constant measure density.

    The vertex measure `mu` is the lumped version of density ds.  The
    embedding maps each vertex to (branch index, arc length from the
    root), which is enough to reconstruct positions on a path or star.
    """

    net: ResistanceNetwork
    edge_length: np.ndarray     # (E,)
    density: np.ndarray        # (E,) mass per unit length
    mu: np.ndarray             # (V,) lumped vertex measure
    embedding: dict[str, tuple[int, float]]

    def __post_init__(self):
        if self.net.n_edges != self.net.n_vertices - 1:
            raise NetworkError("a metric tree must satisfy |E| = |V| - 1")
        if np.any(self.edge_length <= 0) or np.any(self.density <= 0):
            raise NetworkError("edge lengths and densities must be positive")
        if not np.allclose(
            self.net.conductances * self.edge_length, 1.0, rtol=1e-12, atol=1e-12
        ):
            raise NetworkError("cable convention violated: c_e != 1/length_e")

    def path_edges(self, x: str, y: str) -> list[int]:
        """Edge indices along the unique vertex path from x to y."""
        net = self.net
        ix, iy = net.index(x), net.index(y)
        prev: dict[int, tuple[int, int]] = {ix: (-1, -1)}
        stack = [ix]
        while stack:
            v = stack.pop()
            if v == iy:
                break
            for e in net.edges_at[v]:
                w = int(net.heads[e]) if int(net.tails[e]) == v else int(net.tails[e])
                if w not in prev:
                    prev[w] = (v, e)
                    stack.append(w)
        if iy not in prev:
            raise NetworkError(f"no path between {x} and {y}")
        edges = []
        v = iy
        while v != ix:
            v, e = prev[v]
            edges.append(e)
        return edges[::-1]

    def path_vertices(self, x: str, y: str) -> list[str]:
        net = self.net
        out = [x]
        v = net.index(x)
        for e in self.path_edges(x, y):
            v = int(net.heads[e]) if int(net.tails[e]) == v else int(net.tails[e])
            out.append(net.vertices[v])
        return out


def _lumped_measure(net: ResistanceNetwork, lengths, densities) -> np.ndarray:
    mu = np.zeros(net.n_vertices)
    half = 0.5 * lengths * densities
    np.add.at(mu, net.tails, half)
    np.add.at(mu, net.heads, half)
    return mu


def _density_values(density, k: int, total_length: float):
    """Per-edge densities from a scalar, sequence, or callable profile."""
    if callable(density):
        mids = (np.arange(k) + 0.5) * (total_length / k)
        vals = np.array([float(density(s)) for s in mids])
    elif np.isscalar(density):
        vals = np.full(k, float(density))
    else:
        vals = np.asarray(density, dtype=float)
        if vals.shape != (k,):
            raise NetworkError(f"density profile must have {k} entries")
    if np.any(vals <= 0):
        raise NetworkError("density must be positive")
    return vals


def _pos_id(frac: Fraction) -> str:
    return str(frac)


def build_path(k: int, total_length: float = 1.0, density=1.0) -> MetricTree:
    """Uniform subdivision of a segment into k edges.

    Vertices are named x<position> with positions as exact fractions of
    the segment, so endpoints are `x0` and `x1` at every k.
    """
    if k < 1:
        raise NetworkError("k must be a positive integer")
    if total_length <= 0:
        raise NetworkError("total_length must be positive")
    dens = _density_values(density, k, total_length)
    ell = total_length / k
    names = [f"x{_pos_id(Fraction(i, k))}" for i in range(k + 1)]
    edges = [(names[i], names[i + 1], 1.0 / ell) for i in range(k)]
    net = build_network(names, edges)
    lengths = np.full(net.n_edges, ell)
    dens_by_edge = _per_edge(net, names, dens)
    mu = _lumped_measure(net, lengths, dens_by_edge)
    embedding = {names[i]: (0, i * ell) for i in range(k + 1)}
    return MetricTree(net, lengths, dens_by_edge, mu, embedding)


def _per_edge(net: ResistanceNetwork, chain: Sequence[str], vals) -> np.ndarray:
    """Reorder per-segment values to the network's edge order."""
    lookup = {}
    for i in range(len(chain) - 1):
        key = frozenset((net.index(chain[i]), net.index(chain[i + 1])))
        lookup[key] = vals[i]
    out = np.empty(net.n_edges)
    for e in range(net.n_edges):
        out[e] = lookup[frozenset((int(net.tails[e]), int(net.heads[e])))]
    return out


def build_star(N: int, k: int, a: Sequence[float]) -> MetricTree:
    """Star of N unit-length branches glued at a hub `p`.

    Branch n is subdivided into k segments with constant measure density
    a[n-1]; the branch tip is named `q<n>`, interior vertices carry their
    fractional position.
    """
    if N < 2:
        raise NetworkError("a star needs at least 2 branches")
    if k < 1:
        raise NetworkError("k must be a positive integer")
    a = np.asarray(a, dtype=float)
    if a.shape != (N,):
        raise NetworkError(f"need exactly {N} branch densities")
    if np.any(a <= 0):
        raise NetworkError("branch densities must be positive")
    ell = 1.0 / k
    names = ["p"]
    edges = []
    seg_density = []
    chains = []
    embedding: dict[str, tuple[int, float]] = {"p": (0, 0.0)}
    for n in range(1, N + 1):
        chain = ["p"]
        for i in range(1, k + 1):
            name = f"q{n}" if i == k else f"q{n}_{_pos_id(Fraction(i, k))}"
            names.append(name)
            chain.append(name)
            embedding[name] = (n, i * ell)
        for i in range(k):
            edges.append((chain[i], chain[i + 1], 1.0 / ell))
            seg_density.append(a[n - 1])
        chains.append(chain)
    net = build_network(names, edges)
    lengths = np.full(net.n_edges, ell)
    dens_by_edge = np.empty(net.n_edges)
    lookup = {}
    for chain, an in zip(chains, a):
        for i in range(k):
            lookup[frozenset((net.index(chain[i]), net.index(chain[i + 1])))] = an
    for e in range(net.n_edges):
        dens_by_edge[e] = lookup[frozenset((int(net.tails[e]), int(net.heads[e])))]
    mu = _lumped_measure(net, lengths, dens_by_edge)
    return MetricTree(net, lengths, dens_by_edge, mu, embedding)


# ---------------------------------------------------------------------------
# Sierpinski gasket approximations
# ---------------------------------------------------------------------------

RENORMALIZATION = 5.0 / 3.0
DEFAULT_MAX_LEVEL = 7


@dataclass(frozen=True)
class GasketApprox:
    """Level-n graph approximation of the gasket.

    Vertices live on the triangular lattice at resolution 2^-n in the
    affine frame of the three corners; ids are stable across levels so
    that V_n is literally a subset of V_{n+1}.  Every edge carries the
    renormalized conductance (5/3)^n.
    """

    level: int
    network: ResistanceNetwork
    boundary: tuple[str, str, str]
    cells: tuple[tuple[str, str, str], ...]


def _gasket_vertex_id(i: int, j: int, scale: int) -> str:
    # comma-free ids so vertex pairs can be given as "x,y" on the CLI
    return f"g{Fraction(i, scale)}_{Fraction(j, scale)}"


def build_gasket(n: int, max_level: int = DEFAULT_MAX_LEVEL) -> GasketApprox:
    """Level-n gasket network with conductances (5/3)^n."""
    if n < 0:
        raise NetworkError("level must be nonnegative")
    if n > max_level:
        raise NetworkError(
            f"level {n} above the resource guard {max_level}; raise max_level explicitly"
        )
    scale = 2**n
    cells = [((0, 0), (scale, 0), (0, scale))]
    for _ in range(n):
        new_cells = []
        for (a, b, c) in cells:
            mab = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
            mac = ((a[0] + c[0]) // 2, (a[1] + c[1]) // 2)
            mbc = ((b[0] + c[0]) // 2, (b[1] + c[1]) // 2)
            new_cells += [(a, mab, mac), (b, mab, mbc), (c, mac, mbc)]
        cells = new_cells

    coords = sorted(
        {pt for cell in cells for pt in cell},
        key=lambda pt: (Fraction(pt[0], scale), Fraction(pt[1], scale)),
    )
    names = {pt: _gasket_vertex_id(pt[0], pt[1], scale) for pt in coords}
    conductance = RENORMALIZATION**n
    edges = []
    seen = set()
    for cell in cells:
        for u, v in ((0, 1), (0, 2), (1, 2)):
            key = frozenset((cell[u], cell[v]))
            if key not in seen:
                seen.add(key)
                edges.append((names[cell[u]], names[cell[v]], conductance))
    net = build_network([names[pt] for pt in coords], edges)
    boundary = (
        names[(0, 0)],
        names[(scale, 0)],
        names[(0, scale)],
    )
    cell_ids = tuple(
        tuple(sorted(names[pt] for pt in cell)) for cell in cells
    )
    expected = (3 ** (n + 1) + 3) // 2
    assert net.n_vertices == expected, "vertex count formula violated"
    return GasketApprox(level=n, network=net, boundary=boundary, cells=cell_ids)


def harmonic_extension(g: GasketApprox, boundary_values: Sequence[float]) -> np.ndarray:
    """Energy minimizer with the three corner values prescribed.

    Solves the interior Laplace system; the resulting energy does not
    depend on the approximation level for fixed corner data.
    """
    vals = np.asarray(boundary_values, dtype=float)
    if vals.shape != (3,):
        raise NetworkError("exactly three corner values required")
    net = g.network
    b_idx = [net.index(v) for v in g.boundary]
    f = np.zeros(net.n_vertices)
    f[b_idx] = vals
    interior = [i for i in range(net.n_vertices) if i not in set(b_idx)]
    if interior:
        K = net.laplacian
        Kii = K[np.ix_(interior, interior)]
        Kib = K[np.ix_(interior, b_idx)]
        f[interior] = np.linalg.solve(Kii, -Kib @ vals)
    return f


def gasket_harmonic_pair(g: GasketApprox) -> tuple[np.ndarray, np.ndarray]:
    """Energy-orthonormal pair of nonconstant harmonic functions.

    Starts from corner data (1,0,0) and (0,1,0) and orthonormalizes in
    the energy inner product.
    """
    u = harmonic_extension(g, (1.0, 0.0, 0.0))
    v = harmonic_extension(g, (0.0, 1.0, 0.0))
    net = g.network
    h1 = u / np.sqrt(energy(net, u))
    v = v - energy(net, v, h1) * h1
    h2 = v / np.sqrt(energy(net, v))
    return h1, h2


def kusuoka_measure(g: GasketApprox) -> np.ndarray:
    """Sum of the energy measures of an energy-orthonormal harmonic pair.

    Strictly positive with total mass exactly 2 by normalization.
    """
    h1, h2 = gasket_harmonic_pair(g)
    net = g.network
    nu = energy_measure(net, h1) + energy_measure(net, h2)
    if np.any(nu <= 0):
        bad = net.vertices[int(np.argmax(nu <= 0))]
        raise NetworkError(f"energy measure vanishes at {bad}")
    return nu


def kusuoka_cell_masses(g: GasketApprox) -> np.ndarray:
    """Mass that each level-n cell contributes to the Kusuoka measure.

    Each edge belongs to exactly one cell, so the cell masses partition
    the total mass 2.
    """
    h1, h2 = gasket_harmonic_pair(g)
    net = g.network
    d1 = net.edge_differences(h1)
    d2 = net.edge_differences(h2)
    per_edge = net.conductances * (d1**2 + d2**2)
    edge_of = {
        frozenset((int(net.tails[e]), int(net.heads[e]))): e
        for e in range(net.n_edges)
    }
    masses = np.zeros(len(g.cells))
    for ci, cell in enumerate(g.cells):
        idx = [net.index(v) for v in cell]
        for u, v in ((0, 1), (0, 2), (1, 2)):
            masses[ci] += per_edge[edge_of[frozenset((idx[u], idx[v]))]]
    return masses


# ---------------------------------------------------------------------------
# Coordinate sequences and the induced reference measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoordinateSequence:
    """Point-separating family of functions on a network.

    `unit_energy` records whether every nonconstant member was scaled to
    unit energy (the builder's normalization); rescaled dominated
    sequences keep the separation property but not unit energy.
    """

    net: ResistanceNetwork
    functions: tuple[np.ndarray, ...]
    unit_energy: bool = True

    def __post_init__(self):
        for f in self.functions:
            if f.shape != (self.net.n_vertices,):
                raise NetworkError("coordinate function has wrong index set")
        sep = _separation_failures(self.net, self.functions)
        if sep:
            raise NetworkError(f"non-separating coordinate family, e.g. pair {sep[0]}")


def _separation_failures(net, functions, tol: float = 1e-12):
    failures = []
    stacked = np.stack(functions) if functions else np.zeros((0, net.n_vertices))
    for i in range(net.n_vertices):
        for j in range(i + 1, net.n_vertices):
            if not len(functions) or np.max(np.abs(stacked[:, i] - stacked[:, j])) <= tol:
                failures.append((net.vertices[i], net.vertices[j]))
    return failures


def build_coordinate_sequence(
    net: ResistanceNetwork, seeds: Sequence | None = None
) -> CoordinateSequence:
    """Normalize a separating seed family to unit energy.

    Default seeds are the vertex indicators, which always separate on a
    connected network.  Nonconstant seeds f are replaced by f/sqrt(E(f));
    zero-energy seeds are kept as they are.
    """
    if seeds is None:
        seeds = [net.indicator(v) for v in net.vertices]
    out = []
    for f in seeds:
        f = net.check_function(f)
        e = energy(net, f)
        out.append(f / np.sqrt(e) if e > 0 else f.copy())
    return CoordinateSequence(net=net, functions=tuple(out), unit_energy=True)


def build_m0(coords: CoordinateSequence, a: Sequence[float]) -> np.ndarray:
    """Weighted sum of the coordinate energy measures.

    Requires positive weights with sum at most 1.  The result is strictly
    positive (every vertex must be charged by some coordinate) and by
    construction a_n * G(f_n){x} <= m0(x) for all n and x.
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (len(coords.functions),):
        raise NetworkError("one weight per coordinate function required")
    if np.any(a <= 0):
        raise NetworkError("weights must be positive")
    if float(np.sum(a)) > 1.0 + 1e-12:
        raise NetworkError(f"weights must sum to at most 1, got {float(np.sum(a))}")
    net = coords.net
    m0 = np.zeros(net.n_vertices)
    for an, f in zip(a, coords.functions):
        if energy(net, f) > 0:
            m0 += an * energy_measure(net, f)
    if np.any(m0 <= 0):
        bad = net.vertices[int(np.argmax(m0 <= 0))]
        raise NetworkError(
            f"vertex {bad} is charged by no coordinate energy measure"
        )
    return m0


def rescale_dominated(coords: CoordinateSequence, m) -> CoordinateSequence:
    """Largest rescaling of each coordinate with energy measure below m."""
    net = coords.net
    m = net.check_measure(m)
    out = []
    for f in coords.functions:
        gamma = energy_measure(net, f)
        mask = gamma > 0
        if not np.any(mask):
            out.append(f.copy())
            continue
        scale = float(np.sqrt(np.min(m[mask] / gamma[mask])))
        out.append(scale * f)
    return CoordinateSequence(net=net, functions=tuple(out), unit_energy=False)
