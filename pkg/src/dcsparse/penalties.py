"""Concave and piecewise-linear surrogates of the zero-norm indicator.

Each surrogate family is identified by a :class:`PenaltyKind` and carries a
tightness parameter ``theta`` (larger theta = closer to the exact indicator)
plus family-specific shape parameters.  All subgradient and weight rules are
returned without the trade-off multiplier ``lambda``; callers scale them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class PenaltyKind(enum.Enum):
    EXP = "exp"
    LP_PLUS = "lp+"
    LP_MINUS = "lp-"
    LOG = "log"
    SCAD = "scad"
    CAP = "cap"
    PIL = "pil"


class UnsupportedKindError(ValueError):
    """Raised when an operation does not apply to the penalty family."""


_NEEDS_A = {PenaltyKind.SCAD, PenaltyKind.PIL}

DEFAULT_LP_PLUS_EPS = 1e-9
DEFAULT_L2_PERTURBATION = 1e-4


@dataclass(frozen=True)
class PenaltySpec:
    """A penalty family with validated parameters.

    theta > 0 always; a > 1 for SCAD and PiL; p < 0 for lp-; eps > 0 for lp+.
    """

    kind: PenaltyKind
    theta: float
    a: float | None = None
    p: float | None = None
    eps: float | None = None

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.kind in _NEEDS_A:
            if self.a is None or not self.a > 1:
                raise ValueError(f"{self.kind.value} requires a > 1, got {self.a}")
        if self.kind is PenaltyKind.LP_MINUS:
            if self.p is None or not self.p < 0:
                raise ValueError(f"lp- requires p < 0, got {self.p}")
        if self.kind is PenaltyKind.LP_PLUS:
            if self.eps is None:
                object.__setattr__(self, "eps", DEFAULT_LP_PLUS_EPS)
            elif not self.eps > 0:
                raise ValueError(f"lp+ requires eps > 0, got {self.eps}")

    def label(self) -> str:
        parts = [f"theta={self.theta:g}"]
        if self.kind in _NEEDS_A:
            parts.append(f"a={self.a:g}")
        if self.kind is PenaltyKind.LP_MINUS:
            parts.append(f"p={self.p:g}")
        if self.kind is PenaltyKind.LP_PLUS:
            parts.append(f"eps={self.eps:g}")
        return f"{self.kind.value}:" + ",".join(parts)


def parse_penalty(text: str) -> PenaltySpec:
    """Parse a CLI penalty string such as ``scad:theta=2,a=4``."""
    name, _, params = text.partition(":")
    try:
        kind = PenaltyKind(name.strip().lower())
    except ValueError:
        valid = ", ".join(k.value for k in PenaltyKind)
        raise ValueError(f"unknown penalty {name!r} (expected one of: {valid})")
    kwargs: dict[str, float] = {}
    if params.strip():
        for item in params.split(","):
            key, eq, val = item.partition("=")
            key = key.strip()
            if not eq or key not in ("theta", "a", "p", "eps"):
                raise ValueError(f"bad penalty parameter {item!r} in {text!r}")
            kwargs[key] = float(val)
    if "theta" not in kwargs:
        raise ValueError(f"penalty {text!r} is missing theta")
    return PenaltySpec(kind=kind, **kwargs)


def step(t: float) -> int:
    """Exact indicator of t != 0 (no tolerance)."""
    return 0 if t == 0 else 1


def value(spec: PenaltySpec, t: float) -> float:
    """Surrogate value r(t) for the family in ``spec``."""
    at = abs(t)
    th = spec.theta
    k = spec.kind
    if k is PenaltyKind.EXP:
        return 1.0 - math.exp(-th * at)
    if k is PenaltyKind.LP_PLUS:
        return (at + spec.eps) ** (1.0 / th)
    if k is PenaltyKind.LP_MINUS:
        return 1.0 - (1.0 + th * at) ** spec.p
    if k is PenaltyKind.LOG:
        return math.log1p(th * at) / math.log1p(th)
    if k is PenaltyKind.SCAD:
        a = spec.a
        if at <= 1.0 / th:
            return 2.0 * th * at / (a + 1.0)
        if at >= a / th:
            return 1.0
        return (-(th * at) ** 2 + 2.0 * a * th * at - 1.0) / (a * a - 1.0)
    if k is PenaltyKind.CAP:
        return min(1.0, th * at)
    if k is PenaltyKind.PIL:
        return min(1.0, max(0.0, (th * at - 1.0) / (spec.a - 1.0)))
    raise UnsupportedKindError(k)


def eta(spec: PenaltySpec) -> float:
    """Slope of the polyhedral majorant phi(t) = eta * |t| (non-PiL only)."""
    th = spec.theta
    k = spec.kind
    if k is PenaltyKind.EXP:
        return th
    if k is PenaltyKind.LP_PLUS:
        return spec.eps ** (1.0 / th - 1.0) / th
    if k is PenaltyKind.LP_MINUS:
        return -spec.p * th
    if k is PenaltyKind.LOG:
        return th / math.log1p(th)
    if k is PenaltyKind.SCAD:
        return 2.0 * th / (spec.a + 1.0)
    if k is PenaltyKind.CAP:
        return th
    raise UnsupportedKindError(f"eta is undefined for {k.value}")


def psi_subgrad(spec: PenaltySpec, t: float) -> float:
    """Element of the subdifferential of psi(t) = eta*|t| - r(t), lambda-free.

    Returns 0 at t = 0, which is always interior to the subdifferential there.
    """
    if t == 0.0:
        if spec.kind is PenaltyKind.PIL:
            raise UnsupportedKindError("psi_subgrad does not apply to pil")
        return 0.0
    at = abs(t)
    sgn = 1.0 if t > 0 else -1.0
    th = spec.theta
    k = spec.kind
    if k is PenaltyKind.EXP:
        return sgn * th * (1.0 - math.exp(-th * at))
    if k is PenaltyKind.LP_PLUS:
        return sgn / th * (spec.eps ** (1.0 / th - 1.0) - (at + spec.eps) ** (1.0 / th - 1.0))
    if k is PenaltyKind.LP_MINUS:
        return -sgn * spec.p * th * (1.0 - (1.0 + th * at) ** (spec.p - 1.0))
    if k is PenaltyKind.LOG:
        return sgn * th * th * at / (math.log1p(th) * (1.0 + th * at))
    if k is PenaltyKind.SCAD:
        a = spec.a
        if at <= 1.0 / th:
            return 0.0
        if at < a / th:
            return sgn * 2.0 * th * (th * at - 1.0) / (a * a - 1.0)
        return sgn * 2.0 * th / (a + 1.0)
    if k is PenaltyKind.CAP:
        return 0.0 if at <= 1.0 / th else sgn * th
    raise UnsupportedKindError("psi_subgrad does not apply to pil")


def l1_weight(spec: PenaltySpec, z: float) -> float:
    """Reweighted-l1 coefficient: an element of -d(-r)(z) for z >= 0, lambda-free."""
    if z < 0:
        raise ValueError(f"l1_weight requires z >= 0, got {z}")
    th = spec.theta
    k = spec.kind
    if k is PenaltyKind.EXP:
        return th * math.exp(-th * z)
    if k is PenaltyKind.LP_PLUS:
        return 1.0 / (th * (z + spec.eps) ** (1.0 - 1.0 / th))
    if k is PenaltyKind.LP_MINUS:
        return -spec.p * th * (1.0 + th * z) ** (spec.p - 1.0)
    if k is PenaltyKind.LOG:
        return th / (math.log1p(th) * (1.0 + th * z))
    if k is PenaltyKind.SCAD:
        a = spec.a
        if z <= 1.0 / th:
            return 2.0 * th / (a + 1.0)
        if z >= a / th:
            return 0.0
        return th * (a - th * z) / (a * a - 1.0)
    if k is PenaltyKind.CAP:
        return th if z <= 1.0 / th else 0.0
    raise UnsupportedKindError("l1_weight does not apply to pil")


def l2_weight(spec: PenaltySpec, eps_pert: float, z: float) -> float:
    """Reweighted-l2 coefficient at t = sqrt(z + eps_pert), lambda-free.

    eps_pert > 0 keeps the weight finite at z = 0.
    """
    if eps_pert <= 0:
        raise ValueError(f"l2_weight requires eps_pert > 0, got {eps_pert}")
    if z < 0:
        raise ValueError(f"l2_weight requires z >= 0, got {z}")
    t = math.sqrt(z + eps_pert)
    th = spec.theta
    k = spec.kind
    if k is PenaltyKind.EXP:
        return 0.5 * th * math.exp(-th * t) / t
    if k is PenaltyKind.LP_PLUS:
        return 1.0 / (2.0 * th * t ** (2.0 - 1.0 / th))
    if k is PenaltyKind.LP_MINUS:
        return -spec.p * th ** spec.p / (2.0 * t * (1.0 / th + t) ** (1.0 - spec.p))
    if k is PenaltyKind.LOG:
        return 1.0 / (2.0 * math.log1p(th) * t * (1.0 / th + t))
    if k is PenaltyKind.SCAD:
        a = spec.a
        if t <= 1.0 / th:
            return th / ((a + 1.0) * t)
        if t >= a / th:
            return 0.0
        return th * (a - th * t) / ((a * a - 1.0) * t)
    if k is PenaltyKind.CAP:
        return 0.5 * th / t if t <= 1.0 / th else 0.0
    raise UnsupportedKindError("l2_weight does not apply to pil")


def _require_pil(spec: PenaltySpec):
    if spec.kind is not PenaltyKind.PIL:
        raise UnsupportedKindError(f"operation applies only to pil, got {spec.kind.value}")


def pil_phi_value(spec: PenaltySpec, t: float) -> float:
    """Convex majorant component of the piecewise-linear surrogate."""
    _require_pil(spec)
    th, a = spec.theta, spec.a
    return th / (a - 1.0) * max(1.0 / th, abs(t))


def pil_phi_subgrad(spec: PenaltySpec, t: float) -> float:
    """Element of the subdifferential of the PiL majorant; 0 on the flat part."""
    _require_pil(spec)
    th, a = spec.theta, spec.a
    if abs(t) <= 1.0 / th:
        return 0.0
    return math.copysign(th / (a - 1.0), t)


def pil_psi_subgrad(spec: PenaltySpec, t: float) -> float:
    """Element of the subdifferential of the PiL concave-part, lambda-free."""
    _require_pil(spec)
    th, a = spec.theta, spec.a
    slope = th / (a - 1.0)
    if t > a / th:
        return slope
    if t < -a / th:
        return -slope
    return 0.0


def pil_psi_value(spec: PenaltySpec, t: float) -> float:
    """Concave-part component of the piecewise-linear surrogate."""
    _require_pil(spec)
    th, a = spec.theta, spec.a
    return th / (a - 1.0) * max(a / th, abs(t)) - 1.0


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


def one_sided_value_deriv(spec: PenaltySpec, t: float, side: Side) -> float:
    """One-sided derivative of r at t (left or right limit of difference quotients)."""
    th = spec.theta
    k = spec.kind
    right = side is Side.RIGHT

    def smooth_pos(at: float) -> float:
        # Derivative of r at at > 0, smooth branches only.
        if k is PenaltyKind.EXP:
            return th * math.exp(-th * at)
        if k is PenaltyKind.LP_PLUS:
            return 1.0 / (th * (at + spec.eps) ** (1.0 - 1.0 / th))
        if k is PenaltyKind.LP_MINUS:
            return -spec.p * th * (1.0 + th * at) ** (spec.p - 1.0)
        if k is PenaltyKind.LOG:
            return th / (math.log1p(th) * (1.0 + th * at))
        if k is PenaltyKind.SCAD:
            a = spec.a
            if at < 1.0 / th:
                return 2.0 * th / (a + 1.0)
            if at > a / th:
                return 0.0
            return 2.0 * th * (a - th * at) / (a * a - 1.0)
        raise UnsupportedKindError(k)

    if k in (PenaltyKind.CAP, PenaltyKind.PIL):
        # Piecewise linear: pick the slope on the chosen side of t.
        if k is PenaltyKind.CAP:
            def slope_at(u: float) -> float:
                # slope of min{1, th*|u|} at a non-kink point u
                if abs(u) * th > 1.0:
                    return 0.0
                return math.copysign(th, u) if u != 0 else 0.0
        else:
            a = spec.a

            def slope_at(u: float) -> float:
                au = abs(u)
                if au < 1.0 / th or au > a / th:
                    return 0.0
                return math.copysign(th / (a - 1.0), u)

        probe = t + (1e-12 if right else -1e-12)
        # Evaluate the slope strictly inside the adjacent piece.
        kinks = [0.0, 1.0 / th, -1.0 / th]
        if k is PenaltyKind.PIL:
            kinks += [spec.a / th, -spec.a / th]
        for kk in kinks:
            if t == kk:
                mid = kk + (1e-9 if right else -1e-9) * max(1.0, abs(kk))
                return slope_at(mid)
        return slope_at(probe)

    # Smooth on each side of 0; kink only at 0 (SCAD branch joins are C1).
    if t > 0:
        return smooth_pos(t)
    if t < 0:
        return -smooth_pos(-t)
    d0 = smooth_pos(1e-300) if k is not PenaltyKind.SCAD else 2.0 * th / (spec.a + 1.0)
    if k is PenaltyKind.EXP:
        d0 = th
    elif k is PenaltyKind.LP_PLUS:
        d0 = 1.0 / (th * spec.eps ** (1.0 - 1.0 / th))
    elif k is PenaltyKind.LP_MINUS:
        d0 = -spec.p * th
    elif k is PenaltyKind.LOG:
        d0 = th / math.log1p(th)
    return d0 if right else -d0
