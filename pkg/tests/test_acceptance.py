"""Acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (visible in ``pytest -v`` output)
before asserting. Statistical and timing checks run at the shipped seeds.
"""
import time

import numpy as np
import pytest

from spectral_descent import cli
from spectral_descent.functional import Functional, SolverConfig, choose_gamma, evaluate, gradient, hessian
from spectral_descent.gd import gd_b_metric, gd_deflated, gd_generalized, gd_standard
from spectral_descent.grid import domain as gd
from spectral_descent.grid.bench import bench_deflated
from spectral_descent.grid.flow import FlowConfig, random_field, solve_eigenfunctions
from spectral_descent.grid.newton import compare_grid_rules, newton_grid
from spectral_descent.grid.operator import Stencil, inner, norm, rayleigh_quotient
from spectral_descent.io import read_rows
from spectral_descent.newton import (UpdateRule, eigspace_from_eigval, eigvec_from_eigval, newton_solve,
                                     perturbed_eigvec_error)
from spectral_descent.oracle import generalized_eigh, jacobi_eigh

from conftest import FULL, principal_angle, spd, spd_pair, sym


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:>2}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def l_shape_81():
    domain = gd.l_shape(81)
    count = 25 if FULL else 9
    t0 = time.perf_counter()
    pairs, traces = solve_eigenfunctions(domain, count, FlowConfig())
    return domain, pairs, traces, time.perf_counter() - t0


def summary(path):
    header, rows = read_rows(path)
    return {r[0]: dict(zip(header, r)) for r in rows}


def norm_law_errors(a, b, gamma, x):
    """Norm and value defects of x against its own Rayleigh quotient."""
    bx = x if b is None else b @ x
    lam = (x @ a @ x) / (x @ bx)
    nb = np.sqrt(x @ bx)
    expect = -gamma**2 / (2 * (gamma + lam))
    return abs(nb - gamma / (gamma + lam)), abs(evaluate(Functional(a, b, gamma), x) - expect) / abs(expect)


def grid_norm_law_errors(pair, gamma):
    u, d = pair.field.values, pair.field.domain
    s = Stencil(d)
    lam = rayleigh_quotient(u, s)
    nu = norm(u, d.h)
    value = 0.5 * inner(s(u), u, d.h) + 0.5 * gamma * nu * nu - gamma * nu
    expect = -gamma**2 / (2 * (gamma + lam))
    return abs(nu - gamma / (gamma + lam)), abs(value - expect) / abs(expect)


def test_criterion_01_oracle_equivalence(report):
    t0 = time.perf_counter()
    errors = []
    for seed in range(50):
        a = sym(10, 5000 + seed, -5, 5)
        pair, trace = gd_standard(a, SolverConfig(gamma=choose_gamma(a), seed=seed))
        errors.append(abs(pair.lam - jacobi_eigh(a)[0][0]) if trace.converged else np.inf)
    elapsed = time.perf_counter() - t0
    hits = sum(e < 1e-8 for e in errors)
    report(1, hits == 50 and elapsed < 60,
           f"{hits}/50 within 1e-8 of oracle (max err {max(errors):.1e}), {elapsed:.1f} s")


def test_criterion_02_norm_law(report, l_shape_81):
    worst_norm = worst_value = 0.0
    checked = 0

    def check(a, b, gamma, pair, trace):
        nonlocal worst_norm, worst_value, checked
        if trace is not None and not trace.converged:
            return
        dn, dv = norm_law_errors(a, b, gamma, pair.x)
        worst_norm, worst_value = max(worst_norm, dn), max(worst_value, dv)
        checked += 1

    for seed in range(5):
        a, b = spd_pair(8, 700 + seed)
        s = sym(8, 800 + seed, -3, 3)
        cfg = SolverConfig(gamma=1.0, seed=seed)
        check(s, None, choose_gamma(s), *gd_standard(s, SolverConfig(gamma=choose_gamma(s), seed=seed)))
        check(a, b, 1.0, *gd_generalized(a, b, cfg))
        check(a, b, 1.0, *gd_b_metric(a, b, cfg))
        pairs, traces = gd_deflated(a, b, 4, cfg)
        for p, t in zip(pairs, traces):
            check(a, b, 1.0, p, t)
        for rule in UpdateRule:
            check(a, b, 1.0, *newton_solve(a, b, cfg, rule=rule))

    gamma = FlowConfig().gamma
    _, grid_pairs, _, _ = l_shape_81
    d21 = gd.l_shape(21)
    grid_pairs = list(grid_pairs)
    grid_pairs += [newton_grid(d21, random_field(d21, np.random.default_rng(s)), FlowConfig(inner=inner_solver))[0]
                   for s in range(3) for inner_solver in ("minres", "direct")]
    for p in grid_pairs:
        dn, dv = grid_norm_law_errors(p, gamma)
        worst_norm, worst_value = max(worst_norm, dn), max(worst_value, dv)
        checked += 1
    report(2, worst_norm < 1e-9 and worst_value < 1e-9,
           f"{checked} pairs, max norm defect {worst_norm:.1e}, max relative value defect {worst_value:.1e}")


def test_criterion_03_generalized(report):
    worst_lam = worst_orth = 0.0
    for seed in range(20):
        a, b = spd_pair(12, 900 + seed)
        w = generalized_eigh(a, b)[0]
        cfg = SolverConfig(gamma=choose_gamma(a, b), seed=seed)
        p1, _ = gd_b_metric(a, b, cfg)
        pairs, _ = gd_deflated(a, b, 5, cfg)
        lams = np.array([p.lam for p in pairs])
        u = np.column_stack([p.unit for p in pairs])
        worst_lam = max(worst_lam, abs(p1.lam - w[0]), np.max(np.abs(lams - w[:5])))
        worst_orth = max(worst_orth, np.max(np.abs(u.T @ b @ u - np.eye(5))))
    report(3, worst_lam < 1e-7 and worst_orth < 1e-9,
           f"20 pairs: max eigenvalue error {worst_lam:.1e}, max B-orthonormality defect {worst_orth:.1e}")


def test_criterion_04_derivatives(report):
    t0 = time.perf_counter()
    worst_g = worst_h = 0.0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 9))
        a, b = sym(n, 10_000 + seed, -2, 2), spd(n, 20_000 + seed, 0.5, 3.0)
        f = Functional(a, b, choose_gamma(a, b) + rng.uniform(0.1, 5.0))
        x = rng.standard_normal(n)
        step = 1e-6 * (1 + np.linalg.norm(x))
        eye = np.eye(n) * step
        fd_g = np.array([(evaluate(f, x + e) - evaluate(f, x - e)) / (2 * step) for e in eye])
        g = gradient(f, x)
        worst_g = max(worst_g, np.linalg.norm(g - fd_g) / max(1.0, np.linalg.norm(g)))
        fd_h = np.column_stack([(gradient(f, x + e) - gradient(f, x - e)) / (2 * step) for e in eye])
        h = hessian(f, x)
        worst_h = max(worst_h, np.max(np.abs(h - fd_h) / np.maximum(1.0, np.abs(h))))
    elapsed = time.perf_counter() - t0
    report(4, worst_g < 1e-5 and worst_h < 1e-4 and elapsed < 10,
           f"200 cases: gradient {worst_g:.1e}, Hessian {worst_h:.1e}, {elapsed:.1f} s")


def test_criterion_05_square_grid(report, tmp_path):
    t0 = time.perf_counter()
    code = cli.main(["laplacian", "--domain", "square", "--grid", "81", "--count", "1", "--out", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    lam = float(read_rows(tmp_path / "eigenvalues.csv")[1][0][1])
    h = 0.025
    expect = (4 / h**2) * (1 - np.cos(np.pi * h))
    err = abs(lam - expect)
    report(5, code == 0 and err < 1e-8 and elapsed < 300,
           f"lambda_1 = {lam:.15g}, closed form {expect:.15g}, error {err:.1e}, {elapsed:.1f} s")


def test_criterion_06_l_shape_values(report, l_shape_81):
    domain, pairs, traces, elapsed = l_shape_81
    lam = [p.lam for p in pairs]
    targets = {8: 49.2618, 9: 49.2618}
    if len(lam) >= 25:
        targets.update({18: 98.2808, 19: 98.2808, 23: 127.8136, 24: 127.8136})
    errs = {k: abs(lam[k - 1] - v) for k, v in targets.items()}
    rq_err = abs(lam[2] - rayleigh_quotient(pairs[2].field.values, Stencil(domain)))
    ok = all(traces_ok.converged for traces_ok in traces) and max(errs.values()) < 5e-3 and rq_err < 1e-10
    shown = ", ".join(f"lambda_{k}={lam[k - 1]:.6f}" for k in targets)
    report(6, ok, f"{shown}; lambda_3 Rayleigh gap {rq_err:.1e}; {len(lam)} pairs in {elapsed:.0f} s")


def test_criterion_07_eigenfunction_shape(report, l_shape_81):
    domain, pairs, _, _ = l_shape_81
    x, y = domain.coordinates()
    ref = np.where(domain.mask, np.sin(np.pi * x) * np.sin(np.pi * y), 0.0)
    ref /= norm(ref, domain.h)
    u3 = pairs[2].unit
    err = min(np.max(np.abs(u3 - ref)), np.max(np.abs(u3 + ref)))
    report(7, err < 1e-6, f"max-norm distance to sampled sin(pi x) sin(pi y): {err:.1e}")


def test_criterion_08_update_rule_dominance(report, tmp_path):
    assert cli.main(["compare", "--mode", "matrix", "--pairs", "5", "--trials", "200", "--n", "10",
                     "--out", str(tmp_path / "m")]) == 0
    m = summary(tmp_path / "m" / "summary.csv")
    mn, mr = int(m["norm_based"]["hits"]), int(m["rayleigh"]["hits"])
    stats = compare_grid_rules(gd.l_shape(41), 100, FlowConfig())
    gn, gr = stats["norm_based"].hits, stats["rayleigh"].hits
    report(8, mn > mr and gn > gr,
           f"matrix 5x200: norm_based {mn} vs rayleigh {mr} hits; grid 41x41, 100 starts: {gn} vs {gr}")


def test_criterion_09_newton_termination(report):
    a = np.diag([1.0, 2.0, 4.0])
    gamma, lam_i, lam_j = 1.0, 2.0, 1.0
    radius = gamma / (gamma + lam_i)
    comp = 0.15
    rest = np.sqrt(radius**2 - comp**2)
    x0 = np.array([rest * 0.8, comp, rest * 0.6])
    pair, trace = newton_solve(a, None, SolverConfig(gamma=gamma), x0=x0)
    res = np.linalg.norm(a @ pair.x - pair.lam * pair.x)
    exact = abs(pair.lam - lam_i) < 1e-12 and np.linalg.norm(pair.x[[0, 2]]) < 1e-12
    # the excluded component makes the second step singular
    bad = gamma * (gamma + lam_j) / (gamma + lam_i) ** 2
    x_bad = np.array([np.sqrt(radius**2 - bad**2), bad, 0.0])
    _, bad_trace = newton_solve(a, None, SolverConfig(gamma=gamma), x0=x_bad)
    ok = trace.converged and trace.k[-1] == 2 and exact and res < 1e-12 \
        and bad_trace.terminal_reason == "singular_system"
    report(9, ok, f"stopped after {trace.k[-1]} steps at lambda={pair.lam:.15g}, residual {res:.1e}; "
                  f"excluded start -> {bad_trace.terminal_reason}")


def test_criterion_10_one_step_estimators(report):
    worst_vec = worst_space = 0.0
    ranks_ok = True
    for seed in range(20):
        a = sym(15, 100 + seed, -3, 3)
        w = jacobi_eigh(a)[0]
        x = eigvec_from_eigval(a, w[2], 4.0, seed=seed)
        worst_vec = max(worst_vec, np.linalg.norm(a @ x - w[2] * x) / (1 + np.linalg.norm(a)))
        q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((9, 9)))
        values = np.array([-1.0, 0.5, 0.5, 0.5, 1.0, 2.0, 2.5, 3.0, 4.0])
        b = (q * values) @ q.T
        b = 0.5 * (b + b.T)
        xs = eigspace_from_eigval(b, 0.5, 3, 2.0, seed=seed)
        ranks_ok &= np.linalg.matrix_rank(xs) == 3
        worst_space = max(worst_space, principal_angle(xs, q[:, 1:4]),
                          np.linalg.norm(b @ xs - 0.5 * xs) / (1 + np.linalg.norm(b)))
    spreads = []
    for seed in range(5):
        q, _ = np.linalg.qr(np.random.default_rng(50 + seed).standard_normal((6, 6)))
        c = (q * [1.0, 1.0, 2.5, 3.0, 4.0, 6.0]) @ q.T
        out = perturbed_eigvec_error(0.5 * (c + c.T), 1.0, [1e-3, 1e-4, 1e-5], 1.0, seed=seed)
        ratios = [e / d for d, e in out]
        spreads.append(max(ratios) / min(ratios))
    ok = worst_vec < 1e-8 and worst_space < 1e-7 and ranks_ok and max(spreads) < 2
    report(10, ok, f"eigvec residual {worst_vec:.1e}, eigspace defect {worst_space:.1e}, "
                   f"linear-scaling spread {max(spreads):.2f}")


def test_criterion_11_timing_shape(report):
    rows = bench_deflated(gd.l_shape(41), 15, 0.01, FlowConfig(inner="direct"))
    flow = np.cumsum([r.flow_seconds for r in rows])
    newton = np.array([r.newton_seconds for r in rows])
    rqi = np.array([r.rqi_seconds for r in rows])
    second = np.diff(flow, 2).mean()
    spread = newton.max() / newton.min()
    ratio = newton / rqi
    ok = np.all(np.diff(flow) > 0) and second > 0 and spread < 3 and np.all((ratio >= 0.2) & (ratio <= 5))
    report(11, ok, f"flow cumulative {flow[-1]:.1f} s, mean second difference {second:.3f} s; "
                   f"Newton max/min {spread:.2f}; Newton/RQI in [{ratio.min():.2f}, {ratio.max():.2f}]")
