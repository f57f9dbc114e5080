import math

import numpy as np
import pytest

from topocharge import (
    CRITICAL,
    UMBILIC,
    VECTOR2,
    VECTOR3,
    custom_model,
    gauss_model,
    ring_model,
)
from topocharge import analytic
from topocharge.errors import ContractViolation
from topocharge.sampler import (
    DetectionResult,
    SimulationConfig,
    detect,
    detect_zeros,
    empirical_screening,
    estimate_g,
    poisson_control,
    rectangle_winding,
    run_simulation,
    scan_step,
    singular_vector_field,
    synthesize,
)

from conftest import SEED


# ---------------------------------------------------------------------------
# synthesis


def test_synthesis_determinism():
    a = synthesize(ring_model(), VECTOR2, 20.0, 64, (SEED, 3))
    b = synthesize(ring_model(), VECTOR2, 20.0, 64, (SEED, 3))
    c = synthesize(ring_model(), VECTOR2, 20.0, 64, (SEED, 4))
    assert np.array_equal(a.wavevectors, b.wavevectors)
    assert np.array_equal(a.phases, b.phases)
    assert not np.array_equal(a.phases, c.phases)


def test_synthesis_contract_errors():
    with pytest.raises(ContractViolation):
        synthesize(ring_model(), VECTOR2, 20.0, 16, 0)  # too few waves
    with pytest.raises(ContractViolation):
        synthesize(ring_model(), VECTOR3, 20.0, 64, 0)  # 3-D not simulated
    sinc_like = custom_model(lambda j, r: 0.0 if j else 1.0, [1, 0, -1 / 6, 0, 1 / 120, 0, -1 / 5040, 0, 0])
    with pytest.raises(ContractViolation):
        synthesize(sinc_like, VECTOR2, 20.0, 64, 0)


def test_field_normalization():
    # <f^2> = 1 +- 3 (stderr + 1/sqrt(M)); averaged over realizations
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 30, size=(8000, 2))
    means = []
    for i in range(12):
        real = synthesize(ring_model(), CRITICAL, 30.0, 256, (SEED + 1, i))
        f = real.component_values(pts, 0, [(0, 0)])[0]
        means.append(float(np.mean(f**2)))
    means = np.array(means)
    se = means.std(ddof=1) / math.sqrt(len(means))
    assert abs(means.mean() - 1.0) <= 3.0 * (se + 1 / math.sqrt(256))


@pytest.mark.parametrize("model", [ring_model(), gauss_model()], ids=lambda m: m.kind)
def test_two_point_correlation_of_synthesis(model):
    # <f_A f_B> at |r| = 2 against C(2), averaged over realizations
    from topocharge import eval_derivatives

    target = eval_derivatives(model, 2.0).c[0]
    rng = np.random.default_rng(6)
    a_pts = rng.uniform(0, 60, size=(3000, 2))
    b_pts = a_pts + np.array([2.0, 0.0])
    means = []
    for i in range(24):
        real = synthesize(model, CRITICAL, 60.0, 256, (SEED + 2, i))
        fa = real.component_values(a_pts, 0, [(0, 0)])[0]
        fb = real.component_values(b_pts, 0, [(0, 0)])[0]
        means.append(float(np.mean(fa * fb)))
    means = np.array(means)
    se = means.std(ddof=1) / math.sqrt(len(means))
    assert abs(means.mean() - target) <= 4.0 * se


@pytest.mark.parametrize("model", [ring_model(), gauss_model()], ids=lambda m: m.kind)
def test_gradient_variance(model):
    # <f_x^2> = -C''(0)
    from topocharge import eval_derivatives

    target = -eval_derivatives(model, 0.0).c[2]
    rng = np.random.default_rng(7)
    pts = rng.uniform(0, 40, size=(6000, 2))
    means = []
    for i in range(16):
        real = synthesize(model, CRITICAL, 40.0, 256, (SEED + 3, i))
        fx = real.component_values(pts, 0, [(1, 0)])[0]
        means.append(float(np.mean(fx**2)))
    means = np.array(means)
    se = means.std(ddof=1) / math.sqrt(len(means))
    assert abs(means.mean() - target) <= 3.0 * (se + target / math.sqrt(256))


def test_exact_derivatives_of_synthesis():
    # termwise derivatives agree with finite differences of the field
    real = synthesize(gauss_model(), UMBILIC, 20.0, 64, (SEED, 0))
    pt = np.array([[4.2, 7.7]])
    h = 1e-5
    f = lambda x, y: real.component_values(np.array([[x, y]]), 0, [(0, 0)])[0][0]
    fx_fd = (f(4.2 + h, 7.7) - f(4.2 - h, 7.7)) / (2 * h)
    fx = real.component_values(pt, 0, [(1, 0)])[0][0]
    assert fx == pytest.approx(fx_fd, rel=1e-8)
    fxy_fd = (f(4.2 + h, 7.7 + h) + f(4.2 - h, 7.7 - h) - f(4.2 + h, 7.7 - h) - f(4.2 - h, 7.7 + h)) / (4 * h * h)
    fxy = real.component_values(pt, 0, [(1, 1)])[0][0]
    assert fxy == pytest.approx(fxy_fd, rel=1e-5)


# ---------------------------------------------------------------------------
# detection on injected fields


def _field_from_scalar(second_derivs):
    """Build a v-and-jacobian callable from closed-form component functions."""

    def vfun(points):
        p = np.atleast_2d(points)
        v1, v2, j11, j12, j21, j22 = second_derivs(p[:, 0], p[:, 1])
        v = np.stack([v1, v2], axis=-1)
        jac = np.stack(
            [np.stack([j11, j12], axis=-1), np.stack([j21, j22], axis=-1)], axis=-2
        )
        return v, jac

    return vfun


def test_saddle_detection():
    # f = (x^2 - y^2)/2 about the window center: one saddle, charge -1
    def parts(x, y):
        cx, cy = x - 1.0, y - 1.0
        one = np.ones_like(cx)
        return cx, -cy, one, 0 * one, 0 * one, -one

    det = detect_zeros(_field_from_scalar(parts), (2.0, 2.0), 0.3, CRITICAL)
    assert len(det.charges) == 1
    assert det.charges[0] == -1
    assert np.allclose(det.positions[0], [1.0, 1.0], atol=1e-9)
    assert det.dropped_nonconverged == 0 and det.dropped_winding_mismatch == 0


def test_star_umbilic_detection():
    # f = (x^3 - 3 x y^2)/6 about the center: v_u = (x, -y), index sign -1
    def parts(x, y):
        cx, cy = x - 1.0, y - 1.0
        one = np.ones_like(cx)
        return cx, -cy, one, 0 * one, 0 * one, -one

    det = detect_zeros(_field_from_scalar(parts), (2.0, 2.0), 0.3, UMBILIC)
    assert len(det.charges) == 1 and det.charges[0] == -1


def test_monkey_saddle_higher_winding_cell():
    # v = (x^2 - y^2, 2xy) has a double zero: winding 2, charge-sign split
    # into two first-order zeros is impossible, so the detector must not
    # fabricate unit-charge zeros with mismatched winding
    def parts(x, y):
        cx, cy = x - 1.0, y - 1.0
        return (
            cx**2 - cy**2, 2 * cx * cy,
            2 * cx, -2 * cy, 2 * cy, 2 * cx,
        )

    det = detect_zeros(_field_from_scalar(parts), (2.0, 2.0), 0.3, VECTOR2)
    # the degenerate zero has singular jacobian: nothing may be accepted
    assert len(det.charges) == 0


# ---------------------------------------------------------------------------
# detection on random fields


def test_detection_determinism():
    real = synthesize(ring_model(), VECTOR2, 30.0, 128, (SEED, 1))
    d1 = detect(real, VECTOR2)
    d2 = detect(real, VECTOR2)
    assert np.array_equal(d1.positions, d2.positions)
    assert np.array_equal(d1.charges, d2.charges)


def test_detection_residuals_and_windings(sim_run):
    res = sim_run("vector2", "ring", realizations=20, window=30.0, margin=6.0)
    assert res.max_relative_residual < 1e-10
    cand = max(res.candidate_total, 1)
    assert res.dropped_nonconverged / cand < 1e-3
    n_tot = sum(len(d.charges) for d in res.detections)
    assert res.dropped_winding_mismatch / max(n_tot, 1) < 1e-3


def test_winding_cross_check_against_recomputation(sim_run):
    from topocharge.sampler import circle_winding

    res = sim_run("vector2", "ring", realizations=20, window=30.0, margin=6.0)
    det = res.detections[0]
    real = synthesize(ring_model(), VECTOR2, 30.0, 256, (res.config.seed, 0))
    vfun = singular_vector_field(real, VECTOR2)
    wind = circle_winding(vfun, det.positions[:20], 0.05, samples=96)
    assert np.array_equal(wind, det.charges[:20])


def test_rectangle_winding_equals_enclosed_charge():
    for i in (0, 1, 2):
        real = synthesize(ring_model(), VECTOR2, 30.0, 256, (SEED + 4, i))
        det = detect(real, VECTOR2)
        vfun = singular_vector_field(real, VECTOR2)
        w = rectangle_winding(vfun, (6.0, 6.0), (24.0, 24.0), samples_per_edge=800)
        mask = det.in_box((6.0, 6.0), (24.0, 24.0))
        assert w == int(det.charges[mask].sum())


def test_umbilic_charges_are_unit(sim_run):
    res = sim_run("umbilic", "ring", realizations=10, window=30.0, margin=6.0)
    for det in res.detections:
        assert np.all(np.abs(det.charges) == 1)


def test_density_quick(sim_run):
    res = sim_run("vector2", "ring", realizations=20, window=30.0, margin=6.0)
    counts = np.array([len(d.positions[d.in_box((0, 0), (30, 30))]) for d in res.detections])
    target = analytic.density(VECTOR2, ring_model()) * 900
    se = counts.std(ddof=1) / math.sqrt(len(counts))
    assert abs(counts.mean() - target) <= 4 * se


# ---------------------------------------------------------------------------
# estimators


def test_poisson_control_flat():
    dets = poisson_control(0.1, 40.0, 80, SEED + 5)
    hist = estimate_g(dets, 40.0, 8.0, bin_width=0.25)
    g = hist.g_values()
    se = hist.g_stderr()
    mask = hist.edges[1:] > 0.5
    z = g[mask] / se[mask]
    assert np.mean(z**2) < 2.0
    assert np.max(np.abs(z)) < 5.0
    radii, q, qe = empirical_screening(hist)
    assert abs(q[-1]) <= 5 * qe[-1]


def test_estimator_preconditions():
    dets = poisson_control(0.1, 20.0, 4, 0)
    with pytest.raises(ContractViolation):
        estimate_g(dets, 20.0, 5.0, r_max=6.0)  # r_max beyond margin
    with pytest.raises(ContractViolation):
        estimate_g(dets, 20.0, 11.0)  # margin swallows the window


def test_empty_bins_reported():
    dets = [(np.array([[10.0, 10.0], [10.0, 10.45]]), np.array([1, -1]))]
    hist = estimate_g(dets, 20.0, 5.0, bin_width=0.1)
    assert len(hist.g_values()) == 50
    assert hist.pair_count[0] == 0  # nothing below 0.1
    assert hist.pair_count[4] == 2  # the ordered pair at distance 0.45
    assert hist.g_values()[10] == 0.0


def test_charge_sum_scales_like_perimeter(sim_run):
    # soft screening diagnostic: total-charge fluctuations should grow much
    # slower than the count itself
    res = sim_run("vector2", "ring", realizations=20, window=30.0, margin=6.0)
    qsums = res.charge_sums
    counts = np.array([len(d.charges) for d in res.detections])
    assert np.mean(np.abs(qsums)) < 0.25 * counts.mean()


def test_doubling_waves_consistency(sim_run):
    base = sim_run("vector2", "ring", realizations=60, window=30.0, margin=6.0, waves=128, seed=SEED + 11)
    fine = sim_run("vector2", "ring", realizations=60, window=30.0, margin=6.0, waves=256, seed=SEED + 12)
    g1, e1 = base.histogram.g_values(), base.histogram.g_stderr()
    g2, e2 = fine.histogram.g_values(), fine.histogram.g_stderr()
    mask = base.histogram.edges[1:] >= 0.5
    z = (g1[mask] - g2[mask]) / np.sqrt(e1[mask] ** 2 + e2[mask] ** 2)
    assert np.mean(z**2) < 2.0


def test_species_fraction(sim_run):
    res = sim_run("umbilic", "ring", realizations=10, window=30.0, margin=6.0)
    fracs = np.array([np.mean(d.charges > 0) for d in res.detections])
    se = fracs.std(ddof=1) / math.sqrt(len(fracs))
    assert abs(fracs.mean() - 0.5) <= 3 * se + 0.01


def test_simulation_config_validation():
    with pytest.raises(ContractViolation):
        SimulationConfig(kind=VECTOR2, model=ring_model(), window=10.0, margin=6.0).validate()
    with pytest.raises(ContractViolation):
        SimulationConfig(kind=VECTOR2, model=ring_model(), waves=8).validate()
