import numpy as np
import pytest

from kfplab.kolgeom import KPoint
from kfplab.mesh import BoxDomain, build_grid
from kfplab.suites import HARNACK_DOMAIN, VERIFY_DOMAIN, comparison_cases, run_comparison_suite
from kfplab.verify import (
    c01,
    comparison_check,
    de_giorgi_levels,
    dual_norm,
    energy_ratio,
    harnack_quotient,
    higher_integrability,
    holder_estimate,
    kernel_mass,
    kolmogorov_kernel,
    local_boundedness,
    model_kernel_residual,
    sample_pairs,
    w_norm,
    weak_harnack_quotient,
)
from kfplab.viscous import march


@pytest.fixture(scope="module")
def vgrid():
    return build_grid(VERIFY_DOMAIN, 81, 81, 49)


def test_c01_example():
    assert c01(0.5, 1.0) == 17.0


def test_energy_of_constant_approaches_volumes():
    # continuum values: sup_t |B(1/2) x B(1/8)| = 1/4 and c01 |Q_1| = 17 * 4
    lhs, rhs = [], []
    for n in ((41, 41, 25), (81, 81, 49)):
        g = build_grid(VERIFY_DOMAIN, *n)
        rep = energy_ratio(np.ones(g.shape), g)
        assert rep.params["gradient_term"] == 0.0
        lhs.append(abs(rep.lhs - 0.25))
        rhs.append(abs(rep.rhs_data - 68.0))
    assert lhs[1] < lhs[0] and rhs[1] < rhs[0]
    assert lhs[1] <= 0.05 and rhs[1] <= 5.0


def test_energy_of_zero_field_is_flagged(vgrid):
    rep = energy_ratio(np.zeros(vgrid.shape), vgrid)
    assert np.isnan(rep.ratio) and "rhs_zero" in rep.flags


def test_cylinder_must_fit(vgrid):
    with pytest.raises(ValueError):
        energy_ratio(np.ones(vgrid.shape), vgrid, center=KPoint([1.0], [0.0], 0.0))
    with pytest.raises(ValueError):
        energy_ratio(np.ones(vgrid.shape), vgrid, r1=1.0, r0=0.5)


def test_higher_integrability_of_constant(vgrid):
    rep = higher_integrability(np.ones(vgrid.shape), vgrid, q=2.5)
    vol_inner = 1.0 * 0.25 * 0.25  # |Q_{1/2}|
    assert rep.lhs == pytest.approx(vol_inner**0.4, rel=0.15)
    assert rep.rhs_data == pytest.approx(2.0, rel=0.05)
    # constant: the Gagliardo part vanishes, leaving int |u| over Q_{1/2}
    assert rep.params["fractional_norm"] == pytest.approx(vol_inner, rel=0.3)
    with pytest.raises(ValueError):
        higher_integrability(np.ones(vgrid.shape), vgrid, q=3.0)


def test_higher_integrability_detects_oscillation(vgrid):
    y = vgrid.coords()[1][..., 0]
    smooth = higher_integrability(1 + 0.5 * np.cos(np.pi * y), vgrid).params["fractional_norm"]
    rough = higher_integrability(1 + 0.5 * np.cos(40 * np.pi * y), vgrid).params["fractional_norm"]
    assert rough > 2 * smooth


def test_local_boundedness_of_constant(vgrid):
    rep = local_boundedness(np.full(vgrid.shape, 2.0), vgrid)
    assert rep.lhs == 2.0
    # factor sqrt(1 / (1/4 * 1/8)) times ||2||_{L^2(Q_1)} = 2 * 2
    assert rep.rhs_data == pytest.approx(np.sqrt(32) * 4, rel=0.05)


def test_de_giorgi_levels(vgrid):
    zero = de_giorgi_levels(np.zeros(vgrid.shape), vgrid)
    assert len(zero) == 9 and all(a == 0.0 for *_, a in zero)
    assert [k for _, _, k, _ in zero[:3]] == [0.0, 0.25, 0.375]
    quarter = de_giorgi_levels(np.full(vgrid.shape, 0.25), vgrid)
    # k_0 = 0 keeps (1/4)^2 on a slice of area ~4; every later level is above 1/4
    assert quarter[0][3] == pytest.approx(0.25, rel=0.1)
    assert all(a == 0.0 for *_, a in quarter[1:])


@pytest.fixture(scope="module")
def hgrid():
    return build_grid(HARNACK_DOMAIN, 33, 17, 161)


def test_harnack_of_constant_is_one(hgrid):
    rep = harnack_quotient(np.full(hgrid.shape, 2.0), hgrid)
    assert rep.ratio == 1.0
    assert weak_harnack_quotient(np.full(hgrid.shape, 2.0), hgrid).ratio > 0


def test_harnack_flags_interior_zero(hgrid):
    x = hgrid.coords()[0][..., 0]
    for fn in (harnack_quotient, weak_harnack_quotient):
        rep = fn(np.abs(x), hgrid)
        assert np.isnan(rep.ratio) and "nonpositive_inf" in rep.flags
    assert "negative_values" in harnack_quotient(x, hgrid).flags


def test_harnack_resolution_flag():
    fine_y = build_grid(BoxDomain(((-0.1, 0.1),), ((-1e-5, 1e-5),), (-0.01, 0.0025)), 33, 17, 161)
    assert "under_resolved" not in harnack_quotient(np.ones(fine_y.shape), fine_y).flags


def test_holder_on_linear_field(vgrid):
    x = vgrid.coords()[0][..., 0]
    alpha, semi = holder_estimate(x, vgrid, sample_pairs(vgrid, 2000, composition="x"))
    assert alpha == pytest.approx(1.0, abs=1e-9) and semi == pytest.approx(1.0, abs=1e-9)


def test_holder_of_constant_is_nan(vgrid):
    alpha, semi = holder_estimate(np.ones(vgrid.shape), vgrid, sample_pairs(vgrid, 500, composition="x"))
    assert np.isnan(alpha) and semi == 0.0


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.8])
def test_holder_recovers_synthetic_exponent(vgrid, beta):
    x = vgrid.coords()[0][..., 0]
    pairs = sample_pairs(vgrid, 2000, anchor=KPoint([0.0], [0.0], -0.5), composition="x")
    alpha, _ = holder_estimate(np.abs(x) ** beta, vgrid, pairs)
    assert alpha == pytest.approx(beta, abs=1e-6)


def test_sample_pairs_stay_in_region(vgrid):
    pairs = sample_pairs(vgrid, 300, seed=4)
    assert pairs.shape == (300, 2) and np.all(pairs[:, 0] != pairs[:, 1])
    x, _, t = vgrid.coords()
    x, t = x.reshape(-1), t.reshape(-1)
    assert np.all(np.abs(x[pairs]) < 1) and np.all((t[pairs] > -1) & (t[pairs] < 0))


def test_comparison_with_itself_is_tight():
    case = comparison_cases(1)[0]
    v = march(case.problem, case.grid).field.values
    assert abs(comparison_check(case.problem, v, case.grid)) <= 1e-9


def test_comparison_strict_subsolutions():
    for _, delta, viol in run_comparison_suite(4):
        assert viol <= 1e-6
    case = comparison_cases(1)[0]
    v = march(case.problem, case.grid).field.values
    # reflecting the strict sub-solution about v gives a strict super-solution
    with pytest.raises(ValueError):
        comparison_check(case.problem, 2 * v - case.u_sub, case.grid)


def test_w_norm_examples(vgrid):
    assert w_norm(np.zeros(vgrid.shape), vgrid) == 0.0
    assert w_norm(np.full(vgrid.shape, 3.0), vgrid) == pytest.approx(3 * np.sqrt(2.5 * 2.5 * 1.5), rel=1e-12)
    assert dual_norm(np.zeros(vgrid.shape), vgrid) == 0.0


def test_kernel_value_and_equation():
    assert kolmogorov_kernel([0.0], [0.0], 1.0) == pytest.approx(np.sqrt(3) / (2 * np.pi))
    rng = np.random.default_rng(0)
    h = 1e-4
    for _ in range(20):
        x, y, t = rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 2)

        def k(a, b, c):
            return float(kolmogorov_kernel([a], [b], c))

        kt = (k(x, y, t + h) - k(x, y, t - h)) / (2 * h)
        ky = (k(x, y + h, t) - k(x, y - h, t)) / (2 * h)
        kxx = (k(x + h, y, t) - 2 * k(x, y, t) + k(x - h, y, t)) / h**2
        assert abs(kt + x * ky - kxx) <= 1e-6
    with pytest.raises(ValueError):
        kolmogorov_kernel([0.0], [0.0], 0.0)


def test_discrete_kernel_residual_converges():
    dom = BoxDomain(((-1.0, 1.0),), ((-1.0, 1.0),), (0.5, 1.0))
    res = [model_kernel_residual(build_grid(dom, n, n, n)) for n in (17, 33, 65)]
    assert res[0] > res[1] > res[2]
    assert np.log2(res[1] / res[2]) > 1.3


def test_kernel_mass_on_wide_box():
    dom = BoxDomain(((-8.0, 8.0),), ((-4.0, 4.0),), (0.5, 1.0))
    assert np.allclose(kernel_mass(build_grid(dom, 161, 161, 3)), 1.0, atol=1e-5)
    with pytest.raises(ValueError):
        kernel_mass(build_grid(BoxDomain(((-1, 1),), ((-1, 1),), (0.0, 1.0)), 5, 5, 3))
