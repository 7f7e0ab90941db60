import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setlab import DomainError, SearchExhausted, SizeError, UnsupportedDim
from setlab.approx import (
    PhiSpec,
    emit_contour_grid,
    error_lower_bound,
    find_collision,
    gamma,
    gamma_batch,
    left_shift,
    load_certificate,
    lse_max,
    monomial_family,
    nu,
    nu_batch,
    nu_pair_batch,
    pooled_encoding,
    random_mlp_encoder,
    random_piecewise_linear,
    save_certificate,
    semicircle,
    shifted_linear,
    reference_encoders,
    write_contour_csv,
)
from setlab.errors import CertMismatch, ConfigError
from setlab.sets import f_star

unit_floats = st.floats(min_value=-1.0, max_value=1.0)


# lse_max


def test_lse_max_examples():
    assert lse_max([0.0, 0.0, 0.0], 10.0) == pytest.approx(math.log(3) / 10, abs=1e-12)
    assert lse_max([1.0], 3.7) == 1.0
    assert lse_max([0.0, 1.0], 2.0) == pytest.approx(0.5 * math.log(1 + math.e**2), abs=1e-12)


def test_lse_max_rejects_bad_sharpness():
    with pytest.raises(DomainError):
        lse_max([0.0], 0.0)


@settings(max_examples=200)
@given(st.lists(unit_floats, min_size=1, max_size=8), st.floats(min_value=0.5, max_value=50.0))
def test_lse_max_brackets_max(xs, a):
    val = lse_max(xs, a)
    m = max(xs)
    assert m - 1e-12 <= val <= m + math.log(len(xs)) / a + 1e-12


def test_lse_max_saturates_at_equal_inputs():
    for m in (1, 2, 5, 8):
        for a in (0.5, 2.0, 6.0, 50.0):
            assert lse_max([0.25] * m, a) == 0.25 + math.log(float(m)) / a


# encoder specs


def test_phispec_eval_shapes_and_kinds():
    for spec in (shifted_linear(), monomial_family(3), semicircle(65)):
        out = spec.eval(np.zeros((4, 5)))
        assert out.shape == (4, 5, spec.N)
    lin = shifted_linear()
    np.testing.assert_allclose(lin.eval(np.array([-1.0, 0.0, 1.0]))[:, 0], [0.0, 1.0, 2.0], atol=0)


def test_phispec_validation():
    with pytest.raises(ConfigError):
        PhiSpec("piecewise_linear", 1, [[[0.0, 0.0], [1.0, 1.0]]])  # misses -1
    with pytest.raises(ConfigError):
        PhiSpec("spline", 1, [])
    with pytest.raises(ConfigError):
        PhiSpec("polynomial", 2, [[1.0]])


def test_phispec_round_trip_and_hash():
    spec = random_piecewise_linear(3, seed=5)
    clone = PhiSpec.from_config(spec.to_config())
    assert clone.content_hash() == spec.content_hash()
    assert clone.content_hash() != monomial_family(3).content_hash()
    x = np.linspace(-1, 1, 17)
    np.testing.assert_array_equal(clone.eval(x), spec.eval(x))


# alternating-sum map


def test_gamma_linear_example():
    phi = shifted_linear()
    for z in (-1.0, -0.3, 0.0, 0.8, 1.0):
        assert gamma(np.array([z]), phi)[0] == pytest.approx(-z, abs=1e-15)


def test_gamma_monomial_examples():
    phi = monomial_family(2)
    np.testing.assert_allclose(gamma(np.array([0.5, -0.5]), phi), [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(gamma(np.array([1.0, -1.0]), phi), [-1.0, -2.0], atol=1e-15)


def test_gamma_validates_input():
    phi = monomial_family(2)
    with pytest.raises(DomainError):
        gamma(np.array([-0.5, 0.5]), phi)  # ascending
    with pytest.raises(DomainError):
        gamma(np.array([0.5]), phi)  # dim mismatch


def test_gamma_left_shift_antisymmetry():
    rng = np.random.default_rng(11)
    for n in range(2, 6):
        for phi in reference_encoders(n):
            for _ in range(25):
                z = np.concatenate([[1.0], np.sort(rng.uniform(-1, 1, n - 1))[::-1]])
                np.testing.assert_allclose(
                    gamma(left_shift(z), phi), -gamma(z, phi), atol=1e-12
                )


# cube-to-simplex map


def test_nu_examples():
    assert nu(np.array([0.3]))[0] == 0.3
    np.testing.assert_array_equal(nu(np.array([0.0, 1.0])), [1.0, 0.0])
    np.testing.assert_array_equal(nu(np.array([0.0, -1.0])), [0.0, -1.0])
    np.testing.assert_array_equal(nu(np.array([0.0, 0.0])), [0.0, 0.0])


def test_nu_validates_domain():
    with pytest.raises(DomainError):
        nu(np.array([1.5, 0.0]))
    with pytest.raises(DomainError):
        nu(np.array([0.0, 0.0]), n=3)


def test_nu_matches_face_recursion():
    rng = np.random.default_rng(12)
    for n in range(2, 7):
        xbar = rng.uniform(-1, 1, size=(50, n - 1))
        a, b = nu_pair_batch(xbar)
        top = nu_batch(np.concatenate([xbar, np.ones((50, 1))], axis=1))
        np.testing.assert_array_equal(top, np.concatenate([np.ones((50, 1)), a], axis=1))
        bottom = nu_batch(np.concatenate([xbar, -np.ones((50, 1))], axis=1))
        np.testing.assert_array_equal(bottom, np.concatenate([b, -np.ones((50, 1))], axis=1))


def test_nu_codomain_descending():
    rng = np.random.default_rng(13)
    for n in range(1, 7):
        out = nu_batch(rng.uniform(-1, 1, size=(2000, n)))
        assert np.all(np.diff(out, axis=1) <= 1e-15)
        assert np.max(np.abs(out)) <= 1.0


def test_nu_opposing_interleave():
    # nu(x)_j >= nu(-x)_{j+1} everywhere
    rng = np.random.default_rng(14)
    for n in range(2, 7):
        a, b = nu_pair_batch(rng.uniform(-1, 1, size=(2000, n)))
        assert np.all(a[:, :-1] >= b[:, 1:] - 1e-12)
        assert np.all(b[:, :-1] >= a[:, 1:] - 1e-12)


def _boundary_sample(rng, count, n):
    X = rng.uniform(-1, 1, size=(count, n))
    which = rng.integers(0, n, size=count)
    X[np.arange(count), which] = rng.choice([-1.0, 1.0], size=count)
    return X


def test_nu_boundary_antisymmetry():
    rng = np.random.default_rng(15)
    for n in range(1, 7):
        X = _boundary_sample(rng, 400, n)
        for phi in reference_encoders(n)[:3]:
            a, b = nu_pair_batch(X)
            np.testing.assert_allclose(
                gamma_batch(b, phi), -gamma_batch(a, phi), atol=1e-9
            )


def test_nu_constant_along_surface_verticals():
    rng = np.random.default_rng(16)
    heights = np.linspace(-1.0, 1.0, 9)
    for n in range(2, 6):
        for phi in reference_encoders(n)[:3]:
            for _ in range(30):
                xbar = _boundary_sample(rng, 1, n - 1)[0]
                X = np.concatenate(
                    [np.tile(xbar, (heights.size, 1)), heights[:, None]], axis=1
                )
                G = gamma_batch(nu_batch(X), phi)
                assert np.max(np.abs(G - G[0])) <= 1e-9


def test_nu_local_continuity_probe():
    rng = np.random.default_rng(17)
    delta = 1e-6
    for n in range(1, 7):
        X = rng.uniform(-1 + delta, 1 - delta, size=(2000, n))
        step = rng.normal(size=(2000, n))
        step /= np.linalg.norm(step, axis=1, keepdims=True)
        Y = X + delta * step
        spread = np.max(np.abs(nu_batch(X) - nu_batch(Y)), axis=1)
        ratio = float(np.max(spread)) / delta
        assert ratio < 100.0


# collision search


def test_find_collision_analytic_line():
    cert = find_collision(shifted_linear(), seed=3)
    assert cert.phi_residual == 0.0
    np.testing.assert_array_equal(cert.z_star, [0.0])
    np.testing.assert_array_equal(cert.x_plus, [1.0, -1.0])
    np.testing.assert_array_equal(cert.x_minus, [0.0, 0.0])
    assert cert.f_gap == 2.0


def test_find_collision_degenerate_constant():
    phi = PhiSpec("polynomial", 1, [[0.7]])
    cert = find_collision(phi)
    assert cert.phi_residual == 0.0
    assert cert.f_gap == 2.0


def test_find_collision_semicircle():
    cert = find_collision(semicircle(), seed=5)
    assert cert.phi_residual <= 1e-8
    assert cert.f_gap == 2.0
    assert f_star(cert.x_plus) == 1.0
    assert f_star(cert.x_minus) == -1.0


@pytest.mark.parametrize("n", [2, 3, 4])
def test_find_collision_random_encoders(n):
    # seeds 6 and 12 have zeros hiding in knot slabs ~1e-2 wide
    for seed in (0, 1, 6, 12):
        phi = random_piecewise_linear(n, seed=seed)
        cert = find_collision(phi, seed=seed)
        assert cert.phi_residual <= 1e-8 * (1.0 + phi.scale())
        assert cert.M == n + 1 and cert.N == n
        # the certificate is honest: recompute the pooled difference
        direct = np.max(
            np.abs(pooled_encoding(phi, cert.x_plus) - pooled_encoding(phi, cert.x_minus))
        )
        assert direct == cert.phi_residual


def test_find_collision_budget_exhaustion():
    phi = random_mlp_encoder(2, seed=9)
    with pytest.raises(SearchExhausted) as info:
        find_collision(phi, tol_zero=0.0, budget={"n_starts": 2, "nm_maxiter": 40, "newton_steps": 0, "polish_top": 1, "coord_sweeps": 0})
    assert info.value.best_residual > 0.0
    # both stages ran: 2 sorted-newton starts, then 2n face centers + 2 more
    assert info.value.trace["starts"] == 2 + (4 + 2)
    assert [s["name"] for s in info.value.trace["stages"]] == ["sorted-newton", "multistart-nm"]


def test_find_collision_size_check():
    with pytest.raises(SizeError):
        find_collision(monomial_family(2), M=4)


def test_certificate_round_trip(tmp_path):
    cert = find_collision(monomial_family(2), seed=1)
    path = tmp_path / "cert.json"
    save_certificate(cert, path, seed=1)
    loaded = load_certificate(path)
    assert loaded.phi_hash == cert.phi_hash
    assert loaded.phi_residual == cert.phi_residual
    np.testing.assert_array_equal(loaded.z_star, cert.z_star)


class _StubModel:
    def __init__(self, spec, value):
        self.encoder_spec = spec
        self._value = value

    def __call__(self, x):
        return self._value


def test_error_lower_bound_extremes():
    phi = monomial_family(2)
    cert = find_collision(phi, seed=2)
    assert error_lower_bound(_StubModel(phi, 0.0), cert) == 1.0
    assert error_lower_bound(_StubModel(phi, 1.0), cert) == 2.0
    with pytest.raises(CertMismatch):
        error_lower_bound(_StubModel(random_piecewise_linear(2, seed=0), 0.0), cert)


# contour grids


def test_contour_grid_structure(tmp_path):
    rows = emit_contour_grid(f_star, resolution=5)
    assert len(rows) == 25
    assert rows[0][:2] == (-1.0, -1.0)
    assert rows[1][:2] == (-1.0, -0.5)  # y is the inner loop
    assert rows[-1][:2] == (1.0, 1.0)
    for x, y, v in rows:
        if x == y:
            assert v == -1.0
    by_point = {(x, y): v for x, y, v in rows}
    assert by_point[(1.0, -1.0)] == 1.0
    path = tmp_path / "grid.csv"
    write_contour_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 26
    assert lines[1] == "-1,-1,-1"


def test_contour_grid_rejects_other_dims():
    with pytest.raises(UnsupportedDim):
        emit_contour_grid(f_star, M=3, resolution=5)
    with pytest.raises(ConfigError):
        emit_contour_grid(f_star, resolution=1)
