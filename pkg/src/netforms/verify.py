"""Seeded property suite shared by the test battery and the CLI.

Each check returns a CheckReport; the CLI `verify` command runs all of
them and exits nonzero on any failure.  Randomness comes from a single
seeded generator so runs are reproducible.
"""

from __future__ import annotations

import numpy as np

from . import connes as _connes
from . import dirac as _dirac
from . import metrics as _metrics
from . import network as _network
from . import spaces as _spaces
from .network import ResistanceNetwork, build_network, energy, energy_measure
from .reports import CheckReport

__all__ = [
    "random_connected_network",
    "random_function",
    "run_property_suite",
]


def random_connected_network(
    rng: np.random.Generator, n_min: int = 2, n_max: int = 8, extra_edge_prob: float = 0.4
) -> ResistanceNetwork:
    """Random spanning tree plus extra edges, conductances in [0.3, 3]."""
    n = int(rng.integers(n_min, n_max + 1))
    names = [f"v{i}" for i in range(n)]
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.add((j, i))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra_edge_prob / n:
                edges.add((i, j))
    triples = [
        (names[i], names[j], float(rng.uniform(0.3, 3.0))) for i, j in sorted(edges)
    ]
    return build_network(names, triples)


def random_function(rng: np.random.Generator, net: ResistanceNetwork) -> np.ndarray:
    return rng.standard_normal(net.n_vertices)


def random_measure(rng: np.random.Generator, net: ResistanceNetwork) -> np.ndarray:
    return rng.uniform(0.2, 2.0, size=net.n_vertices)


def _report(check, lhs, rhs, tol, passed, **details) -> CheckReport:
    return CheckReport(
        check=check, lhs=float(lhs), rhs=float(rhs), tolerance=tol,
        passed=bool(passed), details=details or {},
    )


def check_energy_measure_identity(rng, instances=100) -> CheckReport:
    worst = 0.0
    for _ in range(instances):
        net = random_connected_network(rng)
        f = random_function(rng, net)
        gamma = energy_measure(net, f)    # internally cross-checked at 1e-12
        worst = max(worst, abs(float(np.sum(gamma)) - energy(net, f)))
    return _report("energy_measure_identity", worst, 0.0, 1e-12, worst <= 1e-12)


def check_energy_measure_stability(rng, instances=50) -> CheckReport:
    """sqrt of the measure of any vertex set is 1-Lipschitz in energy."""
    worst = -np.inf
    for _ in range(instances):
        net = random_connected_network(rng)
        f, g = random_function(rng, net), random_function(rng, net)
        gf, gg = energy_measure(net, f), energy_measure(net, g)
        bound = np.sqrt(energy(net, f - g))
        for _ in range(8):
            mask = rng.random(net.n_vertices) < 0.5
            if not np.any(mask):
                continue
            lhs = abs(np.sqrt(np.sum(gf[mask])) - np.sqrt(np.sum(gg[mask])))
            worst = max(worst, lhs - bound)
    return _report("energy_measure_stability", worst, 0.0, 1e-10, worst <= 1e-10)


def check_resistance_estimate(rng, instances=50) -> CheckReport:
    worst = -np.inf
    for _ in range(instances):
        net = random_connected_network(rng)
        u = random_function(rng, net)
        R = _network.resistance_matrix(net)
        e = energy(net, u)
        diff2 = (u[:, None] - u[None, :]) ** 2
        worst = max(worst, float(np.max(diff2 - R * e)))
    return _report("resistance_estimate", worst, 0.0, 1e-10, worst <= 1e-10)


def check_resistance_metric_axioms(rng, instances=30) -> CheckReport:
    worst = 0.0
    for _ in range(instances):
        net = random_connected_network(rng)
        d = _metrics.resistance_metric(net)
        worst = max(worst, _metrics.triangle_violation(d.values))
    return _report("resistance_metric_axioms", worst, 0.0, 1e-10, worst <= 1e-10)


def check_trace_consistency(rng, instances=30) -> CheckReport:
    worst = 0.0
    for _ in range(instances):
        net = random_connected_network(rng, n_min=3)
        n = net.n_vertices
        size = int(rng.integers(2, n + 1))
        boundary = [net.vertices[i] for i in rng.choice(n, size=size, replace=False)]
        reduced = _network.trace_to_subset(net, boundary)
        for i in range(len(boundary)):
            for j in range(i + 1, len(boundary)):
                a = _network.effective_resistance(net, boundary[i], boundary[j])
                b = _network.effective_resistance(reduced, boundary[i], boundary[j])
                worst = max(worst, abs(a - b))
    return _report("trace_consistency", worst, 0.0, 1e-10, worst <= 1e-10)


def check_appendix_inequalities(rng, instances=100) -> CheckReport:
    names = list(_network.CONTRACTIONS)
    failures = 0
    worst = -np.inf
    for _ in range(instances):
        net = random_connected_network(rng)
        name = names[int(rng.integers(len(names)))]
        F = _network.CONTRACTIONS[name]
        arity = 1 if name in (
            "identity", "unit_truncation", "absolute_value",
            "truncation_of_absolute_value",
        ) else int(rng.integers(1, 4))
        fs = [random_function(rng, net) for _ in range(arity)]
        h = np.abs(random_function(rng, net))
        rep = _network.check_contraction_inequality(net, F, fs, h, rng=rng)
        worst = max(worst, rep.lhs - rep.rhs)
        failures += 0 if rep.passed else 1
        for prep in _network.check_product_inequality(
            net, random_function(rng, net), random_function(rng, net)
        ):
            worst = max(worst, prep.lhs - prep.rhs)
            failures += 0 if prep.passed else 1
    return _report(
        "appendix_inequalities", worst, 0.0, 1e-10, failures == 0, failures=failures
    )


def check_first_order_calculus(rng, instances=30) -> CheckReport:
    worst = 0.0
    for _ in range(instances):
        net = random_connected_network(rng)
        mu = random_measure(rng, net)
        B = net.incidence
        # adjointness on the full bases
        dstar_mat = (B.T * net.conductances[None, :]) / mu[:, None]
        lhs = mu[:, None] * dstar_mat          # <d* e_k, e_i>_mu as a matrix
        rhs = (net.conductances[:, None] * B).T
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        # factorization d*d = -L
        L = _network.generator(net, mu)
        dd = dstar_mat @ B
        worst = max(worst, float(np.max(np.abs(dd + L))))
        # Leibniz
        a, f = random_function(rng, net), random_function(rng, net)
        left = _dirac.derivation(net, a * f)
        right = _dirac.module_action_left(net, a, _dirac.derivation(net, f)) + \
            _dirac.module_action_left(net, f, _dirac.derivation(net, a))
        worst = max(worst, float(np.max(np.abs(left - right))))
        # fiber identities
        fib = _dirac.FiberStructure(net, mu)
        omega = rng.standard_normal(net.n_edges)
        eta = rng.standard_normal(net.n_edges)
        worst = max(
            worst,
            abs(fib.integrate(omega, eta) - _dirac.one_form_inner(net, omega, eta)),
        )
        g = random_function(rng, net)
        gamma = energy_measure(net, f, g)
        pair = fib.fiber_inner(_dirac.derivation(net, f), _dirac.derivation(net, g))
        worst = max(worst, float(np.max(np.abs(pair * mu - gamma))))
    return _report("first_order_calculus", worst, 0.0, 1e-11, worst <= 1e-11)


def check_dirac_structure(rng, instances=20, n_max=20) -> CheckReport:
    worst_eig, worst_res = 0.0, 0.0
    for _ in range(instances):
        net = random_connected_network(rng, n_max=n_max)
        mu = random_measure(rng, net)
        rep = _dirac.spectral_structure_report(net, mu)
        worst_eig = max(worst_eig, rep["eigenvalue_error"])
        worst_res = max(worst_res, rep["max_eigenvector_residual"])
    passed = worst_eig < 1e-9 and worst_res < 1e-8
    return _report(
        "dirac_spectral_structure", worst_eig, 0.0, 1e-9, passed,
        max_eigenvector_residual=worst_res,
    )


def check_commutator_bracket(rng, instances=25) -> CheckReport:
    failures = 0
    for _ in range(instances):
        net = random_connected_network(rng)
        mu = random_measure(rng, net)
        D = _dirac.dirac_operator(net, mu)
        for _ in range(4):
            rep = _connes.commutator_norm(D, random_function(rng, net))
            if not rep.passed:
                failures += 1
    return _report("commutator_bracket", failures, 0.0, 0.0, failures == 0)


def check_metric_chain(rng, instances=20) -> CheckReport:
    worst = -np.inf
    for _ in range(instances):
        net = random_connected_network(rng, n_max=6)
        coords = _spaces.build_coordinate_sequence(net)
        k = len(coords.functions)
        a = np.full(k, 1.0 / (k + 1))
        m = _spaces.build_m0(coords, a)
        dominated = _spaces.rescale_dominated(coords, m)
        rep = _metrics.compare_metric_chain(net, m, dominated)
        worst = max(worst, rep.lhs)
    return _report("metric_chain", worst, 0.0, 1e-6, worst <= 1e-6)


def check_intrinsic_scaling(rng, instances=10) -> CheckReport:
    worst = 0.0
    for _ in range(instances):
        net = random_connected_network(rng, n_max=5)
        m = random_measure(rng, net)
        x, y = net.vertices[0], net.vertices[-1]
        c = float(rng.uniform(0.5, 4.0))
        d1 = _metrics.intrinsic_metric(net, m, x, y).distance
        d2 = _metrics.intrinsic_metric(net, c * m, x, y).distance
        worst = max(worst, abs(d2 - np.sqrt(c) * d1))
    return _report("intrinsic_scaling_covariance", worst, 0.0, 1e-8, worst <= 1e-8)


def check_oracle_agreement(rng, instances=4) -> CheckReport:
    worst = 0.0
    for _ in range(instances):
        net = random_connected_network(rng, n_min=2, n_max=4)
        m = random_measure(rng, net)
        m = m / np.sum(m)      # mass 1 keeps the oracle search box small
        x, y = net.vertices[0], net.vertices[-1]
        sol = _metrics.intrinsic_metric(net, m, x, y)
        oracle = _metrics.intrinsic_grid_oracle(net, m, x, y, step=2e-3)
        worst = max(worst, abs(sol.distance - oracle))
    return _report("intrinsic_oracle_agreement", worst, 0.0, 5e-3, worst <= 5e-3)


def _space_checks(space, seed) -> list[CheckReport]:
    reports = []
    if space is None:
        return reports
    kind = space.get("type")
    if kind == "star":
        tree = _spaces.build_star(space["N"], space["k"], space["a"])
        d = _metrics.resistance_metric(tree.net)
        hub_err = max(
            abs(d.at("p", f"q{n}") - 1.0) for n in range(1, space["N"] + 1)
        )
        tip_err = max(
            abs(d.at(f"q{m}", f"q{n}") - 2.0)
            for m in range(1, space["N"] + 1)
            for n in range(m + 1, space["N"] + 1)
        )
        reports.append(_report(
            "star_resistances", max(hub_err, tip_err), 0.0, 1e-10,
            max(hub_err, tip_err) <= 1e-10,
        ))
        triples = [("q1", "p", "q2")]
        reports.extend(_metrics.dendrite_additivity_check(tree, triples))
    elif kind == "path":
        tree = _spaces.build_path(space["k"], space.get("length", 1.0), space.get("density", 1.0))
        closed = _metrics.intrinsic_metric_tree(tree, "x0", "x1")
        solved = _metrics.intrinsic_metric(tree.net, tree.mu, "x0", "x1").distance
        reports.append(_report(
            "path_intrinsic_refinement", abs(solved - closed), 0.0, 1e-2,
            abs(solved - closed) <= 1e-2,
        ))
    elif kind == "gasket":
        g = _spaces.build_gasket(space["level"])
        h1, h2 = _spaces.gasket_harmonic_pair(g)
        cross = energy(g.network, h1, h2)
        nu = _spaces.kusuoka_measure(g)
        mass_err = abs(float(np.sum(nu)) - 2.0)
        reports.append(_report(
            "kusuoka_measure", max(abs(cross), mass_err), 0.0, 1e-12,
            abs(cross) <= 1e-12 and mass_err <= 1e-12,
        ))
        e0 = energy(g.network, _spaces.harmonic_extension(g, (1.0, 0.0, 0.0)))
        reports.append(_report(
            "gasket_energy_renormalization", abs(e0 - 2.0), 0.0, 1e-10,
            abs(e0 - 2.0) <= 1e-10,
        ))
        triple = _connes.verify_spectral_triple(g.network, nu, samples=20, seed=seed)
        reports.append(_report(
            "gasket_spectral_triple", 0.0 if triple["pass"] else 1.0, 0.0, 0.0,
            triple["pass"],
        ))
    return reports


def run_property_suite(space: dict | None, seed: int) -> list[CheckReport]:
    rng = np.random.default_rng(seed)
    reports = [
        check_energy_measure_identity(rng),
        check_energy_measure_stability(rng),
        check_resistance_estimate(rng),
        check_resistance_metric_axioms(rng),
        check_trace_consistency(rng),
        check_appendix_inequalities(rng),
        check_first_order_calculus(rng),
        check_dirac_structure(rng),
        check_commutator_bracket(rng),
        check_metric_chain(rng),
        check_intrinsic_scaling(rng),
        check_oracle_agreement(rng),
    ]
    reports.extend(_space_checks(space, seed))
    return reports
