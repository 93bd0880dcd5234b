import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_descent.gd import ConvergenceError
from spectral_descent.grid import domain as gd
from spectral_descent.grid.bench import bench_deflated
from spectral_descent.grid.export import export_field, read_csv, read_pgm, to_gray
from spectral_descent.grid.flow import FlowConfig, flow_step, random_field, solve_eigenfunctions
from spectral_descent.grid.krylov import minres
from spectral_descent.grid.newton import compare_grid_rules, newton_grid
from spectral_descent.grid.operator import (GridField, Stencil, apply_neg_laplacian, closed_form_square_eig,
                                            inner, neg_laplacian_matrix, norm, rayleigh_quotient)


def sampled(domain, fx, fy):
    x, y = domain.coordinates()
    return np.where(domain.mask, fx(x) * fy(y), 0.0)


def functional_value(u, gamma):
    d = u.domain
    nu = u.norm()
    return 0.5 * inner(Stencil(d)(u.values), u.values, d.h) + 0.5 * gamma * nu * nu - gamma * nu


def box_spectrum(n, count=60):
    h = 2.0 / (n - 1)
    # interior has n-2 cells per side, so half-modes run 1/2 .. (n-2)/2
    modes = itertools.product(np.arange(1, n - 1) / 2, repeat=2)
    return np.sort([closed_form_square_eig(a, b, h) for a, b in modes])[:count]


# domains

def test_builtin_masks():
    assert gd.full_square(81).interior == 79 * 79
    assert gd.full_square(81).h == 0.025
    ls = gd.l_shape(81)
    x, y = ls.coordinates()
    removed = (x >= -1e-12) & (y <= 1e-12) & (np.abs(x) < 1 - 1e-9) & (np.abs(y) < 1 - 1e-9)
    assert ls.interior == 79 * 79 - removed.sum() == 4641
    assert not ls.mask[removed].any()
    assert gd.unit_square(81).interior == 39 * 39
    an = gd.annulus(41, 0.3, 0.9)
    r = np.hypot(*an.coordinates())
    assert np.all((r[an.mask] > 0.3) & (r[an.mask] < 0.9))


def test_domain_invariants():
    with pytest.raises(ValueError):
        gd.GridDomain(np.zeros((5, 5), bool), 0.5)
    frame = np.zeros((5, 5), bool)
    frame[0, 2] = True
    with pytest.raises(ValueError):
        gd.GridDomain(frame, 0.5)


def test_save_load_round_trip(tmp_path):
    for d in (gd.l_shape(21), gd.annulus(31, 0.2, 0.8)):
        path = tmp_path / "mask.txt"
        gd.save_mask(d, path)
        assert gd.load_mask(path) == d
        assert gd.from_name(f"file:{path}", 99) == d


def test_load_csv_mask(tmp_path):
    d = gd.l_shape(11)
    path = tmp_path / "mask.csv"
    path.write_text("\n".join(",".join(str(int(v)) for v in row) for row in d.mask))
    assert gd.load_mask(path) == d


def test_malformed_masks_name_the_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("5 5 0.5\n00000\n01110\n01x10\n01110\n00000\n")
    with pytest.raises(gd.MaskFormatError, match=":4:"):
        gd.load_mask(path)
    path.write_text("5 5 0.5\n00000\n00000\n")
    with pytest.raises(gd.MaskFormatError):
        gd.load_mask(path)
    path.write_text("5 5 0.5\n" + "00000\n" * 5)
    with pytest.raises(ValueError):
        gd.load_mask(path)


def test_from_name():
    assert gd.from_name("l-shape", 21) == gd.l_shape(21)
    assert gd.from_name("annulus:0.25:0.75", 21) == gd.annulus(21, 0.25, 0.75)
    with pytest.raises(ValueError):
        gd.from_name("triangle", 21)


# operator

def test_zero_and_spike():
    d = gd.full_square(9)
    z = GridField(np.zeros(d.shape), d)
    assert not apply_neg_laplacian(z).values.any()
    u = np.zeros(d.shape)
    u[4, 4] = 1.0
    out = apply_neg_laplacian(GridField(u, d)).values
    h2 = d.h**2
    assert out[4, 4] == pytest.approx(4 / h2)
    for i, j in [(3, 4), (5, 4), (4, 3), (4, 5)]:
        assert out[i, j] == pytest.approx(-1 / h2)
    assert np.count_nonzero(out) == 5


def test_spike_next_to_boundary_reads_zero_outside():
    d = gd.l_shape(9)
    u = np.zeros(d.shape)
    u[1, 1] = 1.0
    out = Stencil(d)(u)
    assert np.count_nonzero(out) == 3
    assert not out[~d.mask].any()


def test_sine_is_discrete_eigenfield():
    d = gd.full_square(81)
    u = sampled(d, lambda x: np.sin(np.pi * x), lambda y: np.sin(np.pi * y))
    lam = (2 / d.h**2) * (2 - 2 * np.cos(np.pi * d.h))
    lu = Stencil(d)(u)
    big = np.abs(u) > 1e-3
    assert np.max(np.abs(lu[big] - lam * u[big]) / np.abs(lam * u[big])) < 1e-10


def test_field_validation():
    d = gd.l_shape(9)
    with pytest.raises(ValueError):
        GridField(np.ones(d.shape), d)
    with pytest.raises(ValueError):
        GridField(np.zeros((3, 3)), d)
    assert GridField.masked(np.ones(d.shape), d).values.sum() == d.interior


def test_sparse_matrix_matches_stencil():
    d = gd.annulus(25, 0.3, 0.95)
    u = np.where(d.mask, np.random.default_rng(0).standard_normal(d.shape), 0.0)
    m = neg_laplacian_matrix(d)
    assert np.allclose(m @ u[d.mask], Stencil(d)(u)[d.mask], rtol=1e-13, atol=1e-9)


def test_symmetry_and_positivity():
    d = gd.l_shape(31)
    s = Stencil(d)
    rng = np.random.default_rng(1)
    for _ in range(100):
        u = random_field(d, rng)
        v = random_field(d, rng)
        uv, vu = inner(s(u), v, d.h), inner(u, s(v), d.h)
        assert abs(uv - vu) <= 1e-10 * max(abs(uv), 1.0)
        assert inner(s(u), u, d.h) > 0


def test_closed_form_values():
    assert closed_form_square_eig(1, 1, 0.025) == pytest.approx(19.72906410798, abs=1e-9)
    assert abs(closed_form_square_eig(1, 2, 0.025) - 49.2618) < 5e-3
    for n, m in [(1, 1), (1, 2), (3, 2)]:
        assert abs(closed_form_square_eig(n, m, 1e-4) - (n * n + m * m) * np.pi**2) < 1e-4


# flow

def test_fixed_point_of_flow():
    d = gd.full_square(41)
    lam = closed_form_square_eig(0.5, 0.5, d.h)
    u = sampled(d, lambda x: np.cos(np.pi * x / 2), lambda y: np.cos(np.pi * y / 2))
    gamma = 50.0
    u *= gamma / (gamma + lam) / norm(u, d.h)
    out = flow_step(GridField(u, d), FlowConfig(gamma=gamma)).values
    assert np.max(np.abs(out - u)) < 1e-12 * np.max(np.abs(u))


def test_zero_gamma_is_heat_step():
    d = gd.l_shape(21)
    u = random_field(d, np.random.default_rng(3))
    cfg = FlowConfig(gamma=0.0)
    out = flow_step(GridField(u, d), cfg).values
    assert np.allclose(out, u - cfg.step_size(d.h) * Stencil(d)(u), atol=1e-14)


def test_flow_step_descends():
    d = gd.l_shape(21)
    rng = np.random.default_rng(4)
    cfg = FlowConfig()
    for _ in range(5):
        u = GridField(random_field(d, rng) * rng.uniform(0.1, 2.0), d)
        values = [functional_value(u, cfg.gamma)]
        for _ in range(50):
            u = flow_step(u, cfg)
            values.append(functional_value(u, cfg.gamma))
        assert np.all(np.diff(values) <= 1e-12)


def test_flow_step_errors_and_dt_guard():
    d = gd.l_shape(11)
    with pytest.raises(ValueError):
        flow_step(GridField(np.zeros(d.shape), d), FlowConfig())
    with pytest.raises(ValueError):
        FlowConfig(dt=0.3 * d.h**2).step_size(d.h)
    assert FlowConfig().step_size(d.h) == pytest.approx(0.17 * d.h**2)
    with pytest.raises(ValueError):
        FlowConfig(gamma=-1.0)
    with pytest.raises(ValueError):
        FlowConfig(inner="cg")


def test_box_ground_state():
    d = gd.full_square(21)
    pairs, traces = solve_eigenfunctions(d, 1, FlowConfig())
    assert traces[0].converged
    assert abs(pairs[0].lam - closed_form_square_eig(0.5, 0.5, d.h)) < 1e-8


def test_box_first_eigenvalues_and_orthogonality():
    d = gd.full_square(21)
    pairs, traces = solve_eigenfunctions(d, 4, FlowConfig())
    lams = np.array([p.lam for p in pairs])
    assert np.allclose(lams, box_spectrum(21)[:4], atol=1e-8)
    assert np.all(np.diff(lams) > -1e-8)
    u = np.array([p.unit.ravel() for p in pairs])
    gram = d.h**2 * u @ u.T
    assert np.max(np.abs(gram - np.eye(4))) < 1e-8
    for p in pairs:
        assert p.norm_law_gap < 1e-10
    # descent along the recorded trace
    assert np.all(np.diff(traces[0].f) <= 1e-12)


def test_l_shape_third_is_product_of_sines():
    d = gd.l_shape(21)
    pairs, _ = solve_eigenfunctions(d, 3, FlowConfig())
    u3 = pairs[2].unit
    ref = sampled(d, lambda x: np.sin(np.pi * x), lambda y: np.sin(np.pi * y))
    ref /= norm(ref, d.h)
    assert min(np.max(np.abs(u3 - ref)), np.max(np.abs(u3 + ref))) < 1e-6
    assert abs(pairs[2].lam - rayleigh_quotient(u3, Stencil(d))) < 1e-10


def test_max_steps_gives_partial_results():
    d = gd.full_square(11)
    with pytest.raises(ConvergenceError) as err:
        solve_eigenfunctions(d, 2, FlowConfig(max_steps=50))
    assert err.value.partial == []
    assert err.value.trace.terminal_reason == "max_iter"


def test_flow_is_deterministic():
    d = gd.l_shape(15)
    a, _ = solve_eigenfunctions(d, 2, FlowConfig(seed=5))
    b, _ = solve_eigenfunctions(d, 2, FlowConfig(seed=5))
    assert [p.lam for p in a] == [p.lam for p in b]


def test_roundoff_floor_tolerance():
    cfg = FlowConfig()
    s = Stencil(gd.l_shape(81))
    assert cfg.stop_tol(s, 1.0) == pytest.approx(10 * np.finfo(float).eps * 8 / 0.025**2)
    assert FlowConfig(roundoff_factor=0.0).stop_tol(s, 1.0) == 1e-13


# newton on the grid

@pytest.mark.parametrize("inner_solver", ["minres", "direct"])
def test_newton_from_perturbed_eigenfield(inner_solver):
    d = gd.full_square(31)
    lam = closed_form_square_eig(1.0, 0.5, d.h)
    u = sampled(d, lambda x: np.sin(np.pi * x), lambda y: np.cos(np.pi * y / 2))
    u /= norm(u, d.h)
    u += 1e-3 * np.where(d.mask, np.random.default_rng(0).standard_normal(d.shape), 0.0)
    pair, trace = newton_grid(d, u, FlowConfig(inner=inner_solver))
    assert trace.converged
    assert trace.k[-1] <= 10
    assert pair.residual < 1e-12
    assert abs(pair.lam - lam) < 1e-9
    assert pair.norm_law_gap < 1e-10


@pytest.mark.parametrize("rule", ["norm_based", "rayleigh"])
def test_newton_random_start_lands_on_box_spectrum(rule):
    d = gd.full_square(21)
    spectrum = box_spectrum(21, 361)
    for seed in range(5):
        pair, trace = newton_grid(d, random_field(d, np.random.default_rng(seed)), FlowConfig(), rule)
        assert trace.converged
        assert np.min(np.abs(spectrum - pair.lam)) < 1e-8


def test_newton_rejects_zero_start():
    d = gd.l_shape(11)
    with pytest.raises(ValueError):
        newton_grid(d, np.zeros(d.shape))


def test_grid_rule_comparison_small():
    d = gd.l_shape(21)
    stats = compare_grid_rules(d, 10, FlowConfig())
    nb, rq = stats["norm_based"], stats["rayleigh"]
    assert nb.hits > rq.hits
    assert nb.trials == rq.trials == 10
    with pytest.raises(ValueError):
        compare_grid_rules(d, 3, FlowConfig(), start="gaussian")


def test_minres_spd_and_indefinite():
    rng = np.random.default_rng(2)
    q, _ = np.linalg.qr(rng.standard_normal((40, 40)))
    for w in (np.linspace(1, 50, 40), np.linspace(-20, 30, 40) + 0.37):
        m = (q * w) @ q.T
        b = rng.standard_normal(40)
        x, res, its = minres(lambda v: m @ v, b, tol=1e-12)
        assert res <= 1e-12 * 10
        assert np.allclose(x, np.linalg.solve(m, b), atol=1e-9)
        assert its <= 200


def test_bench_schema():
    rows = bench_deflated(gd.l_shape(15), 3, 0.1, FlowConfig(inner="direct"), repeats=1)
    assert [r.index for r in rows] == [1, 2, 3]
    for r in rows:
        assert r.flow_seconds > 0 and r.newton_seconds > 0 and r.rqi_seconds > 0
    with pytest.raises(ValueError):
        bench_deflated(gd.l_shape(15), 1, 0.0)


# export

def test_constant_field_is_white(tmp_path):
    d = gd.full_square(11)
    f = GridField.masked(np.ones(d.shape), d)
    export_field(f, tmp_path / "c.pgm", "pgm", lam=1.5, gamma=50.0)
    img, comments = read_pgm(tmp_path / "c.pgm")
    assert np.all(img[d.mask] == 255) and np.all(img[~d.mask] == 0)
    assert "lambda=1.5" in comments and "gamma=50.0" in comments


def test_csv_round_trip(tmp_path):
    d = gd.l_shape(15)
    f = GridField(random_field(d, np.random.default_rng(9)), d)
    export_field(f, tmp_path / "u.csv", "csv")
    assert np.array_equal(read_csv(tmp_path / "u.csv"), f.values)
    with pytest.raises(ValueError):
        export_field(f, tmp_path / "u.png", "png")


def test_sign_flip_inverts_palette():
    d = gd.l_shape(21)
    u = random_field(d, np.random.default_rng(4))
    g1 = to_gray(GridField(u, d)).astype(int)
    g2 = to_gray(GridField(-u, d)).astype(int)
    assert np.all(g1[d.mask] + g2[d.mask] == 255)


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 25), st.integers(0, 2**31 - 1))
def test_operator_symmetric_property(n, seed):
    d = gd.l_shape(n)
    rng = np.random.default_rng(seed)
    u, v = random_field(d, rng), random_field(d, rng)
    s = Stencil(d)
    assert abs(inner(s(u), v, d.h) - inner(u, s(v), d.h)) <= 1e-10 * (1 + abs(inner(s(u), v, d.h)))
