"""Metric families, validity domains, and deterministic point sampling.

A :class:`MetricSpec` describes a fundamental function L(x, y) on the
four-dimensional slit tangent bundle, either as one of the built-in
families or as a parsed expression, optionally composed with a
position-only conformal factor.  Evaluation is ring-polymorphic: the same
family formula runs on floats (for the finite-difference oracle) or on
jets (for the tensor pipeline).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import exprdsl, jets
from .exprdsl import ExprAst
from .jets import DEFAULT_CAPS, DegreeCaps, DomainViolation, JetScalar

Y_CONES = ("all_nonzero", "all_positive", "unit_ball_interior_shifted")

# the shifted-ball cone: rays from the origin through the open unit ball
# centred at this point (a blunt cone of directions around the y1 axis)
_SHIFTED_BALL_CENTER = 1.5
_CONE_MARGIN = 1e-3


class MetricError(Exception):
    pass


class InvalidParameters(MetricError):
    pass


class EmptyDomain(MetricError):
    pass


class SigmaUsesY(MetricError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """Sampling box for x and admissible cone for y.

    ``eps_y`` is the minimum |y| ever accepted; ``component_margin`` keeps
    sampled directions away from the cone boundary (and, for the
    all_nonzero cone, away from the coordinate hyperplanes where quartic
    metrics degenerate).  Cone membership itself only uses the 1e-3
    predicate margin.
    """

    x_box: tuple = (((-1.0, 1.0),) * 4)
    y_cone: str = "all_nonzero"
    eps_y: float = 1e-6
    component_margin: float = 0.05

    def __post_init__(self) -> None:
        if self.y_cone not in Y_CONES:
            raise InvalidParameters(f"unknown y_cone {self.y_cone!r}")
        if len(self.x_box) != 4 or any(len(iv) != 2 for iv in self.x_box):
            raise InvalidParameters("x_box must be four [lo, hi] intervals")
        if any(iv[0] > iv[1] for iv in self.x_box):
            raise EmptyDomain("x_box interval with lo > hi")

    def contains(self, x: Sequence[float], y: Sequence[float]) -> bool:
        y = np.asarray(y, dtype=float)
        norm = float(np.linalg.norm(y))
        if norm < self.eps_y:
            return False
        if self.y_cone == "all_positive":
            return bool(np.all(y > _CONE_MARGIN * norm))
        if self.y_cone == "unit_ball_interior_shifted":
            # ray through y must meet the open ball around the axis point
            sin_half = 1.0 / _SHIFTED_BALL_CENTER
            if y[0] <= 0:
                return False
            perp = math.sqrt(max(norm**2 - y[0] ** 2, 0.0)) / norm
            return perp < sin_half - _CONE_MARGIN
        return True

    def stencil_radius(self, y: Sequence[float]) -> np.ndarray:
        """Conservative per-variable room for finite-difference stencils."""
        y = np.asarray(y, dtype=float)
        room = np.full(8, np.inf)
        if self.y_cone == "all_positive":
            room[4:] = np.maximum(y, 0.0)
        elif self.y_cone == "unit_ball_interior_shifted":
            room[4:] = 0.1 * float(np.linalg.norm(y))
        return room


@dataclass(frozen=True)
class SamplePlan:
    count: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.count < 0:
            raise InvalidParameters("sample count must be non-negative")


@dataclass(frozen=True)
class MetricSpec:
    """Declarative description of a metric family plus its domain."""

    family: str
    domain: DomainSpec
    params: dict = field(default_factory=dict)
    L_ast: Optional[ExprAst] = None
    sigma_ast: Optional[ExprAst] = None
    base: Optional["MetricSpec"] = None
    g0_ast: Optional[tuple] = None  # 4x4 of ExprAst for the riemannian family
    b_ast: Optional[tuple] = None  # 4 of ExprAst for the randers family


def _parse_entry(value) -> ExprAst:
    if isinstance(value, str):
        return exprdsl.parse_expr(value)
    if isinstance(value, (int, float)):
        return exprdsl.Lit(float(value))
    raise InvalidParameters(f"expected a number or expression string, got {value!r}")


def _require_x_only(ast: ExprAst, what: str) -> None:
    if any(slot >= 4 for slot in exprdsl.variables_used(ast)):
        raise InvalidParameters(f"{what} may depend on x1..x4 only")


def make_builtin_metric(
    family: str, params: Optional[dict] = None, domain: Optional[DomainSpec] = None
) -> MetricSpec:
    """Validated spec with a family-appropriate default domain."""
    params = dict(params or {})
    if family == "quartic_minkowski":
        if params:
            raise InvalidParameters("quartic_minkowski takes no parameters")
        dom = domain or DomainSpec(y_cone="all_nonzero")
        return MetricSpec(family, dom)
    if family == "berwald_moor":
        if params:
            raise InvalidParameters("berwald_moor takes no parameters")
        dom = domain or DomainSpec(y_cone="all_positive")
        if dom.y_cone != "all_positive":
            raise InvalidParameters("berwald_moor requires the all_positive cone")
        return MetricSpec(family, dom)
    if family == "riemannian":
        g0 = params.get("g0")
        if g0 is None or len(g0) != 4 or any(len(row) != 4 for row in g0):
            raise InvalidParameters("riemannian requires a 4x4 'g0' matrix")
        g0_ast = tuple(tuple(_parse_entry(v) for v in row) for row in g0)
        for row in g0_ast:
            for entry in row:
                _require_x_only(entry, "riemannian coefficients")
        dom = domain or DomainSpec(y_cone="all_nonzero")
        return MetricSpec(family, dom, params={"g0": g0}, g0_ast=g0_ast)
    if family == "randers":
        b = params.get("b")
        if b is None or len(b) != 4:
            raise InvalidParameters("randers requires four 'b' entries")
        b_ast = tuple(_parse_entry(v) for v in b)
        for entry in b_ast:
            _require_x_only(entry, "randers drift coefficients")
        dom = domain or DomainSpec(y_cone="all_nonzero")
        _check_randers_valid(b_ast, dom)
        return MetricSpec(family, dom, params={"b": b}, b_ast=b_ast)
    if family == "expression":
        src = params.get("L")
        if src is None:
            raise InvalidParameters("expression family requires 'L'")
        ast = exprdsl.parse_expr(src) if isinstance(src, str) else src
        dom = domain or DomainSpec(y_cone="all_nonzero")
        return MetricSpec(family, dom, params={"L": src}, L_ast=ast)
    raise InvalidParameters(f"unknown metric family {family!r}")


def _check_randers_valid(b_ast, dom: DomainSpec) -> None:
    # probe corners and centre of the x box: |b(x)| must stay below 1
    corners = [[iv[0] for iv in dom.x_box], [iv[1] for iv in dom.x_box],
               [(iv[0] + iv[1]) / 2 for iv in dom.x_box]]
    for x in corners:
        env = list(x) + [0.0] * 4
        norm2 = sum(exprdsl.eval_expr(e, env) ** 2 for e in b_ast)
        if norm2 >= 1.0:
            raise InvalidParameters(
                f"randers drift has |b(x)| >= 1 at x={x}; metric degenerates"
            )


def make_conformal(base: MetricSpec, sigma) -> MetricSpec:
    """Position-only conformal rescaling of a base metric."""
    ast = exprdsl.parse_expr(sigma) if isinstance(sigma, str) else sigma
    if any(slot >= 4 for slot in exprdsl.variables_used(ast)):
        raise SigmaUsesY("the conformal factor may depend on x1..x4 only")
    return MetricSpec("conformal", base.domain, sigma_ast=ast, base=base)


# -- evaluation -----------------------------------------------------------


def _eval_family(spec: MetricSpec, env: list):
    """L(x, y) in whatever ring the environment elements live in."""
    ys = env[4:]
    if spec.family == "quartic_minkowski":
        q = sum(jets.power(v, 4) for v in ys)
        return jets.power(q, 0.25)
    if spec.family == "berwald_moor":
        p = ys[0] * ys[1] * ys[2] * ys[3]
        if jets.base_of(p) <= 0:
            raise DomainViolation("berwald_moor needs a product of positive y's")
        return jets.power(p, 0.25)
    if spec.family == "riemannian":
        q = None
        for i in range(4):
            for j in range(4):
                term = exprdsl.eval_expr(spec.g0_ast[i][j], env) * ys[i] * ys[j]
                q = term if q is None else q + term
        return jets.sqrt(q)
    if spec.family == "randers":
        alpha = jets.sqrt(sum(v * v for v in ys))
        bvals = [exprdsl.eval_expr(e, env) for e in spec.b_ast]
        b_norm2 = sum(jets.base_of(b) ** 2 for b in bvals)
        if b_norm2 >= 1.0:
            raise DomainViolation("randers drift reached |b(x)| >= 1")
        drift = sum(b * v for b, v in zip(bvals, ys))
        return alpha + drift
    if spec.family == "expression":
        return exprdsl.eval_expr(spec.L_ast, env)
    if spec.family == "conformal":
        scale = jets.exp(exprdsl.eval_expr(spec.sigma_ast, env))
        return scale * _eval_family(spec.base, env)
    raise InvalidParameters(f"unknown metric family {spec.family!r}")


def eval_L(
    spec: MetricSpec,
    x: Sequence[float],
    y: Sequence[float],
    caps: DegreeCaps = DEFAULT_CAPS,
) -> JetScalar:
    """Jet of L at (x, y); one evaluation carries all needed partials."""
    if not spec.domain.contains(x, y):
        raise DomainViolation(f"point y={list(y)} outside the {spec.domain.y_cone} cone")
    env = [jets.variable(i, float(x[i]), caps) for i in range(4)]
    env += [jets.variable(4 + i, float(y[i]), caps) for i in range(4)]
    out = _eval_family(spec, env)
    if not isinstance(out, JetScalar):
        out = jets.const(float(out), caps)
    return out


def eval_L_value(spec: MetricSpec, x: Sequence[float], y: Sequence[float]) -> float:
    """Plain float evaluation of L (used by the finite-difference oracle)."""
    env = [float(v) for v in x] + [float(v) for v in y]
    try:
        return float(_eval_family(spec, env))
    except ValueError as err:  # math domain errors in the float ring
        raise DomainViolation(str(err)) from None


# -- sampling -------------------------------------------------------------


def _draw_direction(rng: np.random.Generator, domain: DomainSpec) -> np.ndarray:
    margin = domain.component_margin
    if domain.y_cone == "all_positive":
        lo = max(margin, _CONE_MARGIN)
        return rng.uniform(lo, 1.0, 4)
    if domain.y_cone == "unit_ball_interior_shifted":
        for _ in range(256):
            p = rng.uniform(-1.0, 1.0, 4)
            if np.linalg.norm(p) <= 1.0 - max(margin, _CONE_MARGIN):
                out = p.copy()
                out[0] += _SHIFTED_BALL_CENTER
                return out
        raise EmptyDomain("could not sample the shifted-ball cone")
    # all_nonzero: keep components off the coordinate hyperplanes, where
    # fractional-power metrics lose smooth nondegeneracy
    for _ in range(256):
        u = rng.uniform(-1.0, 1.0, 4)
        if np.all(np.abs(u) >= margin):
            return u
    raise EmptyDomain("could not sample the all_nonzero cone")


def sample_domain(domain: DomainSpec, plan: SamplePlan) -> list:
    """Deterministic (x, y) pairs; |y| is normalised into [0.5, 2]."""
    rng = np.random.default_rng(plan.seed)
    points = []
    for _ in range(plan.count):
        x = np.array([rng.uniform(lo, hi) for lo, hi in domain.x_box])
        u = _draw_direction(rng, domain)
        scale = rng.uniform(0.5, 2.0)
        y = u * (scale / np.linalg.norm(u))
        points.append((x, y))
    return points


# -- JSON spec schema ------------------------------------------------------

_TOP_KEYS = {"family", "params", "L", "sigma", "domain", "samples", "seed"}
_DOMAIN_KEYS = {"x_box", "y_cone"}


class SpecSchemaError(MetricError):
    pass


def spec_from_json_dict(doc: dict):
    """(MetricSpec, SamplePlan) from the documented JSON layout.

    Unknown fields are rejected so that typos never silently change a run.
    """
    if not isinstance(doc, dict):
        raise SpecSchemaError("spec document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SpecSchemaError(f"unknown spec fields: {sorted(unknown)}")
    family = doc.get("family")
    if not isinstance(family, str):
        raise SpecSchemaError("spec requires a 'family' string")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise SpecSchemaError("'params' must be an object")
    if "L" in doc:
        if family != "expression":
            raise SpecSchemaError("'L' is only valid for the expression family")
        params = dict(params)
        params["L"] = doc["L"]

    domain = None
    if "domain" in doc:
        dom = doc["domain"]
        if not isinstance(dom, dict):
            raise SpecSchemaError("'domain' must be an object")
        unknown = set(dom) - _DOMAIN_KEYS
        if unknown:
            raise SpecSchemaError(f"unknown domain fields: {sorted(unknown)}")
        kwargs = {}
        if "x_box" in dom:
            box = dom["x_box"]
            try:
                kwargs["x_box"] = tuple((float(lo), float(hi)) for lo, hi in box)
            except (TypeError, ValueError):
                raise SpecSchemaError("'x_box' must be four [lo, hi] pairs") from None
            if len(kwargs["x_box"]) != 4:
                raise SpecSchemaError("'x_box' must have exactly four intervals")
        if "y_cone" in dom:
            kwargs["y_cone"] = dom["y_cone"]
        try:
            domain = DomainSpec(**kwargs)
        except MetricError as err:
            raise SpecSchemaError(str(err)) from None

    try:
        spec = make_builtin_metric(family, params, domain)
        if "sigma" in doc:
            spec = make_conformal(spec, doc["sigma"])
    except (MetricError, exprdsl.ExprError) as err:
        raise SpecSchemaError(str(err)) from None

    samples = doc.get("samples", 16)
    seed = doc.get("seed", 0)
    if not isinstance(samples, int) or isinstance(samples, bool):
        raise SpecSchemaError("'samples' must be an integer")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise SpecSchemaError("'seed' must be an integer")
    return spec, SamplePlan(count=samples, seed=seed)
