"""First-order calculus on a resistance network.

The space of 1-forms is the edge space with inner product
<w, n> = sum_e c_e w_e n_e.  The derivation is the signed edge
difference, (df)_e = f(head) - f(tail), so that |df|^2 equals the energy
of f exactly.  Functions act on forms by endpoint averaging,

    (a.w)_e = (a(u_e) + a(v_e)) / 2 * w_e,

the unique symmetric action that makes the Leibniz rule d(af) = a.df +
f.da an exact identity on graphs; left and right actions coincide.

The Dirac operator on functions+forms is the block operator
D(f, w) = (d*w, df), self-adjoint for the weighted inner product
<f,g>_mu + <w,n>_H.  Its spectrum consists of +-sqrt(eigenvalues of the
generator) together with a kernel of dimension 1 + (cycle space).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .network import NetworkError, ResistanceNetwork

__all__ = [
    "one_form_inner",
    "derivation",
    "module_action_left",
    "module_action_right",
    "codifferential",
    "hodge_decompose",
    "FiberStructure",
    "DiracOperator",
    "dirac_operator",
    "generator_eigensystem",
    "dirac_spectrum",
    "one_form_laplacian_spectrum",
    "spectral_structure_report",
    "pair_space_representation",
]


def one_form_inner(net: ResistanceNetwork, omega, eta=None) -> float:
    omega = _check_form(net, omega)
    eta = omega if eta is None else _check_form(net, eta)
    return float(np.sum(net.conductances * omega * eta))


def _check_form(net: ResistanceNetwork, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (net.n_edges,):
        raise NetworkError(
            f"1-form has shape {omega.shape}, expected ({net.n_edges},)"
        )
    return omega


def derivation(net: ResistanceNetwork, f) -> np.ndarray:
    """df as an edge vector; |df|_H^2 = E(f) exactly."""
    return net.edge_differences(f)


def _endpoint_average(net: ResistanceNetwork, a) -> np.ndarray:
    a = net.check_function(a)
    return 0.5 * (a[net.tails] + a[net.heads])


def module_action_left(net: ResistanceNetwork, a, omega) -> np.ndarray:
    """a.w by endpoint averaging; bounded by max|a| in the form norm."""
    return _endpoint_average(net, a) * _check_form(net, omega)


def module_action_right(net: ResistanceNetwork, omega, a) -> np.ndarray:
    """w.a; coincides with the left action for the symmetric average rule."""
    return module_action_left(net, a, omega)


def codifferential(net: ResistanceNetwork, mu, omega) -> np.ndarray:
    """Adjoint of the derivation: <d*w, f>_mu = <w, df>_H for all f.

    (d*w)(x) = mu(x)^-1 sum_{e at x} sign(e, x) c_e w_e, and d*d = -L.
    """
    mu = net.check_measure(mu)
    omega = _check_form(net, omega)
    weighted = net.conductances * omega
    out = np.zeros(net.n_vertices)
    np.add.at(out, net.heads, weighted)
    np.add.at(out, net.tails, -weighted)
    return out / mu


def hodge_decompose(
    net: ResistanceNetwork, mu, omega
) -> tuple[np.ndarray, np.ndarray]:
    """Split a form into an exact part df and a coclosed remainder.

    The exact part is the H-orthogonal projection onto the image of the
    derivation (a weighted least squares solve); the remainder satisfies
    d* = 0 and spans the cycle space, of dimension |E| - |V| + 1.
    """
    omega = _check_form(net, omega)
    B = net.incidence
    rhs = B.T @ (net.conductances * omega)
    keep = np.arange(net.n_vertices) != 0
    g = np.zeros(net.n_vertices)
    g[keep] = np.linalg.solve(net.laplacian[np.ix_(keep, keep)], rhs[keep])
    exact = net.edge_differences(g)
    return exact, omega - exact


@dataclass(frozen=True)
class FiberStructure:
    """Pointwise inner products <w, n>_x = sum_{e at x} c_e w_e n_e / (2 m(x)).

    Integrating the fibers against m recovers the form inner product
    exactly, and the fiber pairing of df, dg equals the energy density
    G(f,g)({x}) / m(x).
    """

    net: ResistanceNetwork
    m: np.ndarray

    def fiber_inner(self, omega, eta=None) -> np.ndarray:
        net = self.net
        omega = _check_form(net, omega)
        eta = omega if eta is None else _check_form(net, eta)
        loc = net.conductances * omega * eta
        out = np.zeros(net.n_vertices)
        np.add.at(out, net.tails, loc)
        np.add.at(out, net.heads, loc)
        return out / (2.0 * self.m)

    def integrate(self, omega, eta=None) -> float:
        return float(np.sum(self.m * self.fiber_inner(omega, eta)))


def fiber_structure(net: ResistanceNetwork, m) -> FiberStructure:
    return FiberStructure(net=net, m=net.check_measure(m))


@dataclass(frozen=True)
class DiracOperator:
    """Block operator D(f, w) = (d*w, df) on functions + forms."""

    net: ResistanceNetwork
    mu: np.ndarray

    @property
    def dim(self) -> int:
        return self.net.n_vertices + self.net.n_edges

    def apply(self, f, omega) -> tuple[np.ndarray, np.ndarray]:
        return codifferential(self.net, self.mu, omega), derivation(self.net, f)

    @cached_property
    def dense(self) -> np.ndarray:
        net = self.net
        n, m = net.n_vertices, net.n_edges
        out = np.zeros((n + m, n + m))
        dstar = (net.incidence.T * net.conductances[None, :]) / self.mu[:, None]
        out[:n, n:] = dstar
        out[n:, :n] = net.incidence
        return out

    @cached_property
    def weight(self) -> np.ndarray:
        """Diagonal of the weighted inner product on functions + forms."""
        return np.concatenate([self.mu, self.net.conductances])

    @cached_property
    def sym_dense(self) -> np.ndarray:
        """Conjugation by sqrt(weights); exactly symmetric."""
        w = np.sqrt(self.weight)
        sym = self.dense * w[:, None] / w[None, :]
        return 0.5 * (sym + sym.T)


def dirac_operator(net: ResistanceNetwork, mu) -> DiracOperator:
    return DiracOperator(net=net, mu=net.check_measure(mu))


def generator_eigensystem(net: ResistanceNetwork, mu) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of -L (ascending) and eigenfunctions orthonormal in L2(mu)."""
    mu = net.check_measure(mu)
    root = np.sqrt(mu)
    sym = net.laplacian / root[:, None] / root[None, :]
    sym = 0.5 * (sym + sym.T)
    vals, vecs = np.linalg.eigh(sym)
    return vals, vecs / root[:, None]


def dirac_spectrum(D: DiracOperator) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors of the Dirac operator.

    Eigenvector columns are orthonormal for the weighted inner product;
    the first n rows are the function part, the rest the form part.
    """
    vals, vecs = np.linalg.eigh(D.sym_dense)
    w = np.sqrt(D.weight)
    return vals, vecs / w[:, None]


def one_form_laplacian_spectrum(
    net: ResistanceNetwork, mu
) -> tuple[np.ndarray, np.ndarray]:
    """Spectrum of the form Laplacian d d* on the edge space.

    Its nonzero part coincides with the nonzero spectrum of -L with
    multiplicity; the kernel is the cycle space.
    """
    mu = net.check_measure(mu)
    B = net.incidence
    root_c = np.sqrt(net.conductances)
    core = (root_c[:, None] * B) / np.sqrt(mu)[None, :]
    sym = core @ core.T
    sym = 0.5 * (sym + sym.T)
    vals, vecs = np.linalg.eigh(sym)
    return vals, vecs / root_c[:, None]


def spectral_structure_report(
    net: ResistanceNetwork,
    mu,
    eig_tol: float = 1e-9,
    residual_tol: float = 1e-8,
    cluster_tol: float = 1e-8,
) -> dict:
    """Verify the pairing structure of the Dirac spectrum.

    The spectrum must equal {+-sqrt(l_j)} over the positive generator
    eigenvalues l_j together with zero of multiplicity
    1 + (|E| - |V| + 1).  For each l_j the vectors built from the
    generator eigenfunctions phi_j,

        (phi_j, +- df_j / sqrt(l_j)) / sqrt(2),

    must be eigenvectors within residual_tol in the weighted norm.
    """
    mu = net.check_measure(mu)
    D = dirac_operator(net, mu)
    vals, _ = dirac_spectrum(D)
    lam, phi = generator_eigensystem(net, mu)
    positive = lam[lam > cluster_tol]
    expected_zero = 1 + (net.n_edges - net.n_vertices + 1)
    expected = np.sort(
        np.concatenate([-np.sqrt(positive), np.zeros(expected_zero), np.sqrt(positive)])
    )
    eig_err = float(np.max(np.abs(np.sort(vals) - expected))) if len(vals) else 0.0

    w = D.weight
    dense = D.dense
    max_residual = 0.0
    for j in range(len(lam)):
        if lam[j] <= cluster_tol:
            continue
        root = np.sqrt(lam[j])
        dphi = derivation(net, phi[:, j])
        for sign in (+1.0, -1.0):
            v = np.concatenate([phi[:, j], sign * dphi / root]) / np.sqrt(2.0)
            r = dense @ v - sign * root * v
            max_residual = max(max_residual, float(np.sqrt(np.sum(w * r * r))))

    multiplicities = []
    for v in np.sort(vals):
        if multiplicities and abs(v - multiplicities[-1][0]) <= cluster_tol:
            multiplicities[-1][1] += 1
        else:
            multiplicities.append([float(v), 1])
    return {
        "eigenvalues": [float(v) for v in np.sort(vals)],
        "multiplicities": [(v, int(k)) for v, k in multiplicities],
        "kernel_dimension": int(np.sum(np.abs(vals) <= cluster_tol)),
        "expected_kernel_dimension": expected_zero,
        "cycle_space_dimension": net.n_edges - net.n_vertices + 1,
        "eigenvalue_error": eig_err,
        "max_eigenvector_residual": max_residual,
        "pass": bool(eig_err < eig_tol and max_residual < residual_tol),
        "tolerances": {"eigenvalue": eig_tol, "residual": residual_tol},
    }


def pair_space_representation(net: ResistanceNetwork, f, g) -> float:
    """Nonlocal pair-space value of |g df|^2 for the jump picture.

    Treats the network as a jump structure whose unordered pair {x, y}
    carries mass 2 c_xy (c_xy per ordered pair):

        1/2 sum_x g(x)^2 sum_{y ~ x} c_xy (f(x) - f(y))^2.

    For g = 1 this is exactly the energy of f.
    """
    f = net.check_function(f)
    g = net.check_function(g)
    df2 = net.edge_differences(f) ** 2
    loc = net.conductances * df2
    out = 0.0
    out += float(np.sum(g[net.tails] ** 2 * loc))
    out += float(np.sum(g[net.heads] ** 2 * loc))
    return 0.5 * out
