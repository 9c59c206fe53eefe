import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finsler4 import jets, oracle
from finsler4.jets import (
    CapMismatch,
    CapTooSmall,
    DegreeCaps,
    DomainViolation,
    JetScalar,
    OrderExceedsCaps,
    const,
    derivative_jet,
    multi,
    partial_extract,
    restrict,
    variable,
)

CAPS = DegreeCaps(1, 4)


def test_variable_jet_y_slot():
    j = variable(4, 3.0, CAPS)
    assert j.base == 3.0
    assert partial_extract(j, multi(4)) == 1.0
    assert partial_extract(j, multi(5)) == 0.0


def test_variable_jet_x_slot():
    j = variable(0, -1.0, CAPS)
    assert j.base == -1.0
    assert partial_extract(j, multi(0)) == 1.0


def test_variable_slot_out_of_range():
    with pytest.raises(OrderExceedsCaps):
        variable(9, 0.0, CAPS)


def test_variable_cap_too_small():
    with pytest.raises(CapTooSmall):
        variable(0, 1.0, DegreeCaps(0, 4))


def test_square_of_coordinate():
    j = variable(4, 3.0, CAPS)
    sq = j * j
    assert partial_extract(sq, multi(4)) == pytest.approx(6.0, abs=1e-14)
    assert partial_extract(sq, multi(4, 4)) == pytest.approx(2.0, abs=1e-14)


def test_cube_third_derivative():
    j = variable(4, 2.0, CAPS)
    cube = j * j * j
    assert partial_extract(cube, multi(4, 4, 4)) == pytest.approx(6.0, abs=1e-12)


def test_bilinear_mixed_partial():
    f = variable(0, 1.0, CAPS) * variable(4, 1.0, CAPS)
    assert partial_extract(f, multi(0, 4)) == pytest.approx(1.0, abs=1e-14)


def test_exp_first_partial_matches_closed_form_and_fd():
    j = variable(0, 0.2, CAPS)
    e = jets.exp(j)
    d = partial_extract(e, multi(0))
    assert d == pytest.approx(math.exp(0.2), rel=1e-12)
    fd = oracle.fd_partial(lambda z: math.exp(z[0]), np.array([0.2] + [0.0] * 7), multi(0))
    assert d == pytest.approx(fd, abs=1e-9)


def test_quartic_norm_first_partial():
    # f = (sum y_i^4)^(1/2) at y = ones: df/dy1 = 2 y1^3 / sqrt(Q) with Q = 4
    ys = [variable(4 + i, 1.0, CAPS) for i in range(4)]
    f = jets.sqrt(sum(jets.power(v, 4) for v in ys))
    assert partial_extract(f, multi(4)) == pytest.approx(1.0, rel=1e-12)
    fd = oracle.fd_partial(
        lambda z: math.sqrt(sum(v**4 for v in z[4:])),
        np.array([0.0] * 4 + [1.0] * 4),
        multi(4),
    )
    assert partial_extract(f, multi(4)) == pytest.approx(fd, abs=1e-9)


def test_division_by_zero_base():
    with pytest.raises(DomainViolation):
        const(1.0, CAPS) / (variable(4, 1.0, CAPS) - 1.0)


def test_log_sqrt_domain():
    neg = const(-1.0, CAPS)
    with pytest.raises(DomainViolation):
        jets.log(neg)
    with pytest.raises(DomainViolation):
        jets.sqrt(neg)
    with pytest.raises(DomainViolation):
        jets.power(neg, 0.5)


def test_integer_power_allows_negative_base():
    j = variable(0, -2.0, CAPS)
    sq = jets.power(j, 2)
    assert sq.base == 4.0
    assert partial_extract(sq, multi(0)) == pytest.approx(-4.0, abs=1e-14)


def test_cap_mismatch():
    a = variable(4, 1.0, DegreeCaps(1, 4))
    b = variable(4, 1.0, DegreeCaps(1, 2))
    with pytest.raises(CapMismatch):
        _ = a + b


def test_partial_extract_order_exceeds_caps():
    j = variable(4, 1.0, DegreeCaps(1, 2))
    with pytest.raises(OrderExceedsCaps):
        partial_extract(j, multi(4, 4, 4))


def test_restrict_and_derivative_jet():
    j = variable(4, 0.7, CAPS)
    f = jets.exp(j * j)
    r = restrict(f, DegreeCaps(1, 2))
    assert r.base == f.base
    assert partial_extract(r, multi(4, 4)) == partial_extract(f, multi(4, 4))
    with pytest.raises(CapMismatch):
        restrict(r, CAPS)
    df = derivative_jet(f, multi(4))
    assert df.caps == DegreeCaps(1, 3)
    for order in ((), (4,), (4, 4), (4, 4, 4)):
        assert partial_extract(df, multi(*order)) == pytest.approx(
            partial_extract(f, multi(4, *order)), rel=1e-12
        )


# -- property tests ----------------------------------------------------------

_SMALL_CAPS = DegreeCaps(1, 3)
_N_SMALL = len(jets._tables(_SMALL_CAPS).monos)

coeff_arrays = st.lists(
    st.floats(min_value=-2.0, max_value=2.0, allow_nan=False),
    min_size=_N_SMALL,
    max_size=_N_SMALL,
)


def _poly_jet(coeffs) -> JetScalar:
    # any coefficient array is the exact jet of the polynomial it denotes
    return JetScalar(_SMALL_CAPS, np.array(coeffs))


@given(coeff_arrays, coeff_arrays)
@settings(max_examples=60, deadline=None)
def test_product_rule_leibniz(ca, cb):
    f = _poly_jet(ca)
    g = _poly_jet(cb)
    fg = f * g
    tables = jets._tables(_SMALL_CAPS)
    for alpha in [(0, 0, 0, 0, 2, 1, 0, 0), (1, 0, 0, 0, 0, 1, 1, 0), (0, 0, 0, 0, 3, 0, 0, 0)]:
        expected = 0.0
        for beta in tables.monos:
            if any(b > a for b, a in zip(beta, alpha)):
                continue
            gamma = tuple(a - b for a, b in zip(alpha, beta))
            coeff = math.prod(math.comb(a, b) for a, b in zip(alpha, beta))
            expected += coeff * partial_extract(f, beta) * partial_extract(g, gamma)
        got = partial_extract(fg, alpha)
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)


@given(coeff_arrays)
@settings(max_examples=60, deadline=None)
def test_chain_rule_exp_log_roundtrip(ca):
    f = _poly_jet(ca)
    f = f - f.base + 2.0  # force a safely positive base
    back = jets.exp(jets.log(f))
    assert np.allclose(back.c, f.c, rtol=1e-10, atol=1e-10)


def test_elementary_functions_match_finite_differences():
    # first and second partials of fn(a*z + b) vs central differences
    rng = np.random.default_rng(42)
    funcs = {
        "exp": (math.exp, lambda: rng.uniform(-1, 1)),
        "log": (math.log, lambda: rng.uniform(0.5, 3.0)),
        "sqrt": (math.sqrt, lambda: rng.uniform(0.5, 3.0)),
        "sin": (math.sin, lambda: rng.uniform(-2, 2)),
        "cos": (math.cos, lambda: rng.uniform(-2, 2)),
        "recip": (lambda t: 1.0 / t, lambda: rng.uniform(0.5, 3.0)),
    }
    jet_funcs = {
        "exp": jets.exp, "log": jets.log, "sqrt": jets.sqrt,
        "sin": jets.sin, "cos": jets.cos, "recip": lambda f: 1.0 / f,
    }
    # fixed 1e-5 step for first partials; second partials need the adaptive
    # step (plain central differences at 1e-5 carry ~eps/h^2 = 2e-6 noise)
    cfg1 = oracle.FDConfig(step=1e-5, richardson=False)
    cfg2 = oracle.FDConfig(richardson=False)
    for name, (fn, draw_base) in funcs.items():
        for _ in range(100):
            a = rng.uniform(0.3, 1.5)
            t0 = draw_base()
            z0 = t0 / a
            slot = int(rng.integers(0, 8))
            j = jet_funcs[name](variable(slot, z0, CAPS) * a)
            point = np.zeros(8)
            point[slot] = z0

            def func(z, fn=fn, a=a, slot=slot):
                return fn(a * z[slot])

            for order, cfg in ((multi(slot), cfg1), (multi(slot, slot), cfg2)):
                if sum(order[:4]) > 1:
                    continue
                got = partial_extract(j, order)
                want = oracle.fd_partial(func, point, order, cfg)
                assert got == pytest.approx(want, rel=1e-6, abs=1e-6), (name, order)
