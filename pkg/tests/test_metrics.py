import math

import numpy as np
import pytest

from finsler4 import jets, metrics
from finsler4.metrics import (
    DomainSpec,
    InvalidParameters,
    SamplePlan,
    SpecSchemaError,
    eval_L,
    eval_L_value,
    make_builtin_metric,
    make_conformal,
    sample_domain,
    spec_from_json_dict,
)

X0 = np.zeros(4)
ONES = np.ones(4)


def test_quartic_default_domain():
    spec = make_builtin_metric("quartic_minkowski")
    assert spec.domain.y_cone == "all_nonzero"


def test_berwald_moor_default_domain():
    spec = make_builtin_metric("berwald_moor")
    assert spec.domain.y_cone == "all_positive"


def test_randers_invalid_when_drift_too_long():
    with pytest.raises(InvalidParameters):
        make_builtin_metric("randers", {"b": [1.2, 0, 0, 0]})


def test_unknown_family():
    with pytest.raises(InvalidParameters):
        make_builtin_metric("nope")


def test_eval_quartic_at_ones():
    spec = make_builtin_metric("quartic_minkowski")
    jet = eval_L(spec, X0, ONES)
    assert jet.base == pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_eval_berwald_moor():
    spec = make_builtin_metric("berwald_moor")
    jet = eval_L(spec, X0, np.array([1.0, 2.0, 1.0, 2.0]))
    assert jet.base == pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_eval_conformal_scales_base():
    base = make_builtin_metric("quartic_minkowski")
    spec = make_conformal(base, "0.1*x1")
    jet = eval_L(spec, np.array([1.0, 0, 0, 0]), ONES)
    assert jet.base == pytest.approx(math.exp(0.1) * math.sqrt(2.0), rel=1e-12)


def test_conformal_sigma_must_be_position_only():
    base = make_builtin_metric("quartic_minkowski")
    with pytest.raises(metrics.SigmaUsesY):
        make_conformal(base, "0.1*y1")


def test_conformal_coherence_coefficientwise():
    base = make_builtin_metric("quartic_minkowski")
    spec = make_conformal(base, "0.1*x1+0.05*x2^2")
    x = np.array([0.4, -0.2, 0.1, 0.0])
    y = np.array([1.0, 2.0, 1.0, 1.5])
    caps = jets.DegreeCaps(1, 4)
    lifted = eval_L(spec, x, y, caps)
    env = [jets.variable(i, x[i], caps) for i in range(4)]
    sigma_jet = jets.exp(
        0.1 * env[0] + 0.05 * jets.power(env[1], 2)
    )
    manual = sigma_jet * eval_L(base, x, y, caps)
    scale = 1.0 + np.max(np.abs(manual.c))
    assert np.max(np.abs(lifted.c - manual.c)) / scale < 1e-12


@pytest.mark.parametrize(
    "family,params",
    [
        ("quartic_minkowski", None),
        ("berwald_moor", None),
        ("randers", {"b": ["0.1*x2", 0, 0, 0]}),
        ("riemannian", {"g0": [[1, 0, 0, 0], [0, "1+0.05*x2^2", 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]}),
        ("expression", {"L": "sqrt(y1^2+2*y2^2+y3^2+y4^2)"}),
    ],
)
def test_positive_homogeneity(family, params):
    spec = make_builtin_metric(family, params)
    for x, y in sample_domain(spec.domain, SamplePlan(count=6, seed=13)):
        L1 = eval_L_value(spec, x, y)
        for lam in (0.5, 2.0):
            assert abs(eval_L_value(spec, x, lam * y) - lam * L1) <= 1e-10 * L1


def test_sampling_deterministic_and_in_cone():
    spec = make_builtin_metric("berwald_moor")
    plan = SamplePlan(count=100, seed=99)
    a = sample_domain(spec.domain, plan)
    b = sample_domain(spec.domain, plan)
    assert all(np.array_equal(xa, xb) and np.array_equal(ya, yb)
               for (xa, ya), (xb, yb) in zip(a, b))
    for _, y in a:
        assert np.all(y > 0)
        assert 0.5 - 1e-12 <= np.linalg.norm(y) <= 2.0 + 1e-12


def test_sampling_count_zero():
    spec = make_builtin_metric("quartic_minkowski")
    assert sample_domain(spec.domain, SamplePlan(count=0, seed=1)) == []


def test_shifted_ball_cone_sampling():
    dom = DomainSpec(y_cone="unit_ball_interior_shifted")
    for _, y in sample_domain(dom, SamplePlan(count=50, seed=3)):
        assert dom.contains(np.zeros(4), y)
        assert y[0] > 0


def test_domain_rejects_outside_cone():
    spec = make_builtin_metric("berwald_moor")
    with pytest.raises(jets.DomainViolation):
        eval_L(spec, X0, np.array([1.0, -1.0, 1.0, 1.0]))


def test_json_schema_roundtrip():
    doc = {
        "family": "randers",
        "params": {"b": ["0.1*x2", 0, 0, 0]},
        "domain": {"x_box": [[-1, 1]] * 4, "y_cone": "all_nonzero"},
        "samples": 8,
        "seed": 5,
    }
    spec, plan = spec_from_json_dict(doc)
    assert spec.family == "randers"
    assert plan == SamplePlan(count=8, seed=5)


def test_json_schema_rejects_unknown_fields():
    with pytest.raises(SpecSchemaError):
        spec_from_json_dict({"family": "quartic_minkowski", "bogus": 1})
    with pytest.raises(SpecSchemaError):
        spec_from_json_dict({"family": "quartic_minkowski", "domain": {"zz": 1}})
    with pytest.raises(SpecSchemaError):
        spec_from_json_dict({"family": "quartic_minkowski", "L": "y1"})


def test_json_schema_sigma_wraps_conformal():
    spec, _ = spec_from_json_dict({"family": "quartic_minkowski", "sigma": "0.1*x1"})
    assert spec.family == "conformal"
    assert spec.base.family == "quartic_minkowski"
