import math

import numpy as np
import pytest

from finsler4 import conformal, frame, geometry, metrics
from finsler4.conformal import (
    CASE_ALL,
    CASE_HOMOTHETIC,
    CASE_M,
    CASE_N_P,
    ExtractionUnreliable,
    audit_pair,
    berwald_case_conditions,
    case_of,
    evaluate_point,
    invariance_check,
    landsberg_case_conditions,
    make_pair,
    sigma_components,
)
from finsler4.frame import scalar_profile
from finsler4.metrics import SamplePlan, make_builtin_metric, sample_domain

QUARTIC = make_builtin_metric("quartic_minkowski")
X1 = np.array([0.5, -0.3, 0.2, 0.1])
YGEN = np.array([1.1, 2.0, 0.9, 1.3])


def test_lift_rejects_direction_dependent_factor():
    with pytest.raises(metrics.SigmaUsesY):
        make_pair(QUARTIC, "0.1*y1")


def test_zero_factor_is_identity():
    pair = make_pair(QUARTIC, "0")
    rep = invariance_check(pair, X1, YGEN)
    finite = {k: v for k, v in rep.items() if not math.isnan(v)}
    assert max(finite.values()) < 1e-10


def test_constant_factor_scales_metric():
    pair = make_pair(QUARTIC, "0.3")
    base = geometry.point_eval(pair.base, X1, YGEN)
    lifted = geometry.point_eval(pair.lifted, X1, YGEN)
    assert np.max(np.abs(lifted.metric.g - math.exp(0.6) * base.metric.g)) <= 1e-10


def test_homothety_zero_components():
    pair = make_pair(QUARTIC, "0.3")
    sc = sigma_components(pair, X1, YGEN)
    assert max(abs(v) for v in (sc.sigma1, sc.sigma2, sc.sigma3, sc.sigma4)) <= 1e-10
    assert np.max(np.abs(sc.spray_block())) <= 1e-10
    assert case_of(sc)[0] == CASE_HOMOTHETIC


def test_sigma_gradient_reconstruction():
    pair = make_pair(QUARTIC, "0.1*x1+0.05*x2^2")
    sc = sigma_components(pair, X1, YGEN)
    bundle = frame.scalar_profile(pair.base, X1, YGEN).frame
    recon = sc.frame_grad() @ bundle.e_flat
    assert np.max(np.abs(recon - sc.sigma_grad)) <= 1e-9


def test_extraction_residuals_small_and_layout_holds():
    pair = make_pair(QUARTIC, "0.1*x1+0.05*x2^2")
    sc = sigma_components(pair, X1, YGEN)
    scale = sc.extraction_residuals["_scale"]
    for key, val in sc.extraction_residuals.items():
        if key.startswith("_"):
            continue
        assert val <= 1e-7 * scale, (key, val)


def test_spray_difference_transvection_identity():
    pair = make_pair(QUARTIC, "0.1*x1+0.05*x2^2")
    for x, y in sample_domain(QUARTIC.domain, SamplePlan(count=6, seed=71)):
        sc = sigma_components(pair, x, y)
        assert sc.extraction_residuals["spray_transvection"] <= 1e-7


def test_case_dispatch_constructed_gradients():
    # aim the gradient along chosen frame covectors at the evaluation point
    prof = scalar_profile(QUARTIC, X1, YGEN)
    flat = prof.frame.e_flat

    def pair_for(cov):
        src = "+".join(f"({format(float(c), '.17g')})*x{i+1}" for i, c in enumerate(cov))
        return make_pair(QUARTIC, src)

    sc = sigma_components(pair_for(flat[2] + flat[3]), X1, YGEN)
    case, _ = case_of(sc)
    assert case == CASE_N_P
    assert abs(sc.sigma2) < 1e-9
    assert sc.sigma3 == pytest.approx(1.0, rel=1e-9)
    assert sc.sigma4 == pytest.approx(1.0, rel=1e-9)

    sc = sigma_components(pair_for(flat[1]), X1, YGEN)
    assert case_of(sc)[0] == CASE_M

    sc = sigma_components(pair_for(flat[1] + flat[2] + flat[3]), X1, YGEN)
    assert case_of(sc)[0] == CASE_ALL


def test_landsberg_conditions_homothetic_all_zero():
    pair = make_pair(QUARTIC, "0.25")
    prof = scalar_profile(pair.base, X1, YGEN)
    sc = sigma_components(pair, X1, YGEN)
    case, near, out = landsberg_case_conditions(prof.profile, sc)
    assert case == CASE_HOMOTHETIC
    assert not near
    assert max(v["residual"] for v in out.values()) <= 1e-10


def test_landsberg_conditions_fail_with_nonlandsberg_lift():
    pair = make_pair(QUARTIC, "0.1*x1")
    failures = 0
    for x, y in sample_domain(QUARTIC.domain, SamplePlan(count=8, seed=73)):
        rep = evaluate_point(pair, x, y)
        if rep.frame_error:
            continue
        ratios = [
            v["residual"] / (v["scale"] + 1e-12)
            for k, v in rep.landsberg_residuals.items()
            if k.startswith("landsberg:")
        ]
        barred = rep.direct_barred["max_cartan_hderiv_transvected"]
        scale = rep.direct_barred["hderiv_scale"]
        if max(ratios) > 1e-4:
            failures += 1
            assert barred > 1e-4 * scale
    assert failures > 0


def test_berwald_conditions_homothetic_zero():
    pair = make_pair(QUARTIC, "0.25")
    prof = scalar_profile(pair.base, X1, YGEN)
    sc = sigma_components(pair, X1, YGEN)
    _, _, out = berwald_case_conditions(prof.profile, sc)
    assert max(v["residual"] for v in out.values()) <= 1e-10


def test_berwald_conditions_reject_bad_extraction():
    pair = make_pair(QUARTIC, "0.1*x1")
    prof = scalar_profile(pair.base, X1, YGEN)
    sc = sigma_components(pair, X1, YGEN)
    corrupted = conformal.SigmaComponents(
        sigma1=sc.sigma1, sigma2=sc.sigma2, sigma3=sc.sigma3, sigma4=sc.sigma4,
        sigma5=sc.sigma5, sigma6=sc.sigma6, sigma7=sc.sigma7, sigma8=sc.sigma8,
        sigma9=sc.sigma9, sigma10=sc.sigma10, sigma_value=sc.sigma_value,
        sigma_grad=sc.sigma_grad,
        extraction_residuals={"sym_mn": 1.0, "_scale": 1.0},
    )
    with pytest.raises(ExtractionUnreliable):
        berwald_case_conditions(prof.profile, corrupted)


def test_invariance_suite_nonhomothetic():
    pair = make_pair(QUARTIC, "0.1*x1+0.05*x2^2")
    for x, y in sample_domain(QUARTIC.domain, SamplePlan(count=16, seed=79)):
        out = invariance_check(pair, x, y)
        assert out["gauge_match"] == 0.0
        for k, v in out.items():
            if k.startswith(("covector_scale", "vector_scale")):
                assert v <= 1e-9, (k, v)
            elif k in ("metric_scale", "inverse_metric_scale", "torsion_scale",
                       "mixed_torsion_invariance"):
                assert v <= 1e-9, (k, v)
            elif k.startswith("main_scalar:"):
                assert v <= 1e-7, (k, v)
            elif k.startswith(("hbar1", "jbar1", "kbar1")):
                assert v <= 1e-6, (k, v)
            elif k.startswith("scalar_hderiv_l_law:"):
                assert v <= 1e-6, (k, v)


def test_first_component_laws_on_drift_base():
    # base need not be flat for the first-component transformation laws
    base = make_builtin_metric("randers", {"b": ["0.1*x2", 0, 0, 0]})
    pair = make_pair(base, "0.1*x1")
    for x, y in sample_domain(base.domain, SamplePlan(count=6, seed=83)):
        out = invariance_check(pair, x, y)
        for key in ("hbar1_law", "jbar1_law", "kbar1_law"):
            assert out[key] <= 1e-6, (key, out[key])
        # the scalar law needs a position-independent base, so it is gated off
        assert not any(k.startswith("scalar_hderiv_l_law") for k in out)


def test_audit_cooccurrence_homothetic_and_generic():
    plan = SamplePlan(count=8, seed=89)
    hom = audit_pair(make_pair(QUARTIC, "0.4"), plan)
    assert hom.landsberg_summary["disagree"] == 0
    assert hom.berwald_summary["disagree"] == 0
    assert hom.landsberg_summary["agree"] > 0

    gen = audit_pair(make_pair(QUARTIC, "0.1*x1"), plan)
    assert gen.landsberg_summary["disagree"] == 0
    assert gen.berwald_summary["disagree"] == 0
    assert gen.landsberg_summary["agree"] > 0
    assert gen.berwald_summary["agree"] > 0


def test_case_dispatch_flags_near_threshold_components():
    prof = scalar_profile(QUARTIC, X1, YGEN)
    flat = prof.frame.e_flat

    def pair_for(cov):
        src = "+".join(f"({format(float(c), '.17g')})*x{i+1}" for i, c in enumerate(cov))
        return make_pair(QUARTIC, src)

    # an m-component hovering just above the dispatch threshold is flagged
    sc = sigma_components(pair_for(1.5e-8 * flat[1] + 1.0 * flat[2]), X1, YGEN)
    case, near = case_of(sc)
    assert near
    # gradient along the supporting covector alone: anomalous pattern
    sc = sigma_components(pair_for(flat[0]), X1, YGEN)
    case, near = case_of(sc)
    assert case == conformal.CASE_SUPPORTING_ONLY


def test_every_point_gets_exactly_one_case():
    pair = make_pair(QUARTIC, "0.1*x1+0.05*x2^2")
    all_cases = {
        conformal.CASE_ALL, conformal.CASE_M_N, conformal.CASE_M_P,
        conformal.CASE_N_P, conformal.CASE_M, conformal.CASE_N, conformal.CASE_P,
        conformal.CASE_HOMOTHETIC, conformal.CASE_SUPPORTING_ONLY,
    }
    for x, y in sample_domain(QUARTIC.domain, SamplePlan(count=16, seed=91)):
        rep = evaluate_point(pair, x, y)
        if rep.frame_error:
            continue
        assert rep.case in all_cases
