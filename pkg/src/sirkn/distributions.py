"""Distribution families for recovery rates and edge weights.

Two roles exist: "recovery" laws must have support in [1, inf) and "weight"
laws must live in [0, 1] with positive mass above 0.  The family menu is
deliberately small (constant, uniform, two_point, and a shifted wrapper) so
that the mean weight, the mean inverse recovery rate, and the mean inverse
square all have closed forms, which the critical-rate and no-spread formulas
require exactly.

Text syntax, used verbatim by config files and CLI flags::

    constant:1.0
    uniform:0.0:1.0
    two_point:1.0:0.5:2.0
    shifted:uniform:0:1:+1
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DegenerateMoments, ParamViolation, SupportViolation

ROLE_RECOVERY = "recovery"
ROLE_WEIGHT = "weight"

_KINDS = ("constant", "uniform", "two_point", "shifted")


@dataclass(frozen=True)
class DistSpec:
    """One distribution family instance plus the role it plays.

    kind/params:
      constant(v)          params = (v,)
      uniform(a, b)        params = (a, b), a < b
      two_point(v1, p1, v2) params = (v1, p1, v2), P(v1) = p1
      shifted(base, off)   params = (off,), base is another DistSpec
    """

    kind: str
    params: tuple
    role: str
    base: Optional["DistSpec"] = None


def constant(v: float, role: str) -> DistSpec:
    return validate_spec(DistSpec("constant", (float(v),), role))


def uniform(a: float, b: float, role: str) -> DistSpec:
    return validate_spec(DistSpec("uniform", (float(a), float(b)), role))


def two_point(v1: float, p1: float, v2: float, role: str) -> DistSpec:
    return validate_spec(DistSpec("two_point", (float(v1), float(p1), float(v2)), role))


def shifted(base: DistSpec, offset: float, role: str) -> DistSpec:
    rebased = DistSpec(base.kind, base.params, role, base.base)
    return validate_spec(DistSpec("shifted", (float(offset),), role, rebased))


def support(spec: DistSpec) -> tuple:
    """Closed support interval (lo, hi) of the law."""
    if spec.kind == "constant":
        return spec.params[0], spec.params[0]
    if spec.kind == "uniform":
        return spec.params[0], spec.params[1]
    if spec.kind == "two_point":
        v1, _, v2 = spec.params
        return min(v1, v2), max(v1, v2)
    lo, hi = support(spec.base)
    off = spec.params[0]
    return lo + off, hi + off


def _positive_mass_above_zero(spec: DistSpec) -> bool:
    if spec.kind == "constant":
        return spec.params[0] > 0
    if spec.kind == "uniform":
        return spec.params[1] > 0
    if spec.kind == "two_point":
        v1, p1, v2 = spec.params
        return (v1 > 0 and p1 > 0) or (v2 > 0 and p1 < 1)
    lo, hi = support(spec)
    if hi <= 0:
        return False
    # A shift keeps mass positivity unless it pushes all support to <= 0
    # (handled above); atoms landing exactly on 0 only matter for two_point.
    if spec.base.kind == "two_point":
        off = spec.params[0]
        v1, p1, v2 = spec.base.params
        return (v1 + off > 0 and p1 > 0) or (v2 + off > 0 and p1 < 1)
    return True


def _check_params(spec: DistSpec) -> None:
    """Family parameter constraints, applied recursively.

    Support constraints are role properties of the composite law and are
    checked separately in validate_spec (a shifted law's base need not
    satisfy them on its own).
    """
    if spec.kind not in _KINDS:
        raise ParamViolation(f"unknown distribution kind {spec.kind!r}")
    if spec.kind == "constant":
        (v,) = spec.params
        if not math.isfinite(v):
            raise ParamViolation("constant value must be finite")
    elif spec.kind == "uniform":
        a, b = spec.params
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ParamViolation("uniform endpoints must be finite")
        if not a < b:
            raise ParamViolation(f"uniform requires a < b (got a={a}, b={b})")
    elif spec.kind == "two_point":
        v1, p1, v2 = spec.params
        if not (0.0 <= p1 <= 1.0):
            raise ParamViolation(f"two_point requires p1 in [0, 1] (got p1={p1})")
        if not (math.isfinite(v1) and math.isfinite(v2)):
            raise ParamViolation("two_point values must be finite")
    else:  # shifted
        if spec.base is None:
            raise ParamViolation("shifted requires a base distribution")
        if spec.base.kind == "shifted":
            raise ParamViolation("shifted base must not itself be shifted")
        if not math.isfinite(spec.params[0]):
            raise ParamViolation("shift offset must be finite")
        _check_params(spec.base)


@functools.lru_cache(maxsize=1024)
def validate_spec(spec: DistSpec) -> DistSpec:
    """Check parameter ranges and role-dependent support constraints.

    Returns the spec unchanged when valid; raises ParamViolation or
    SupportViolation naming the violated constraint otherwise.  Results are
    cached (specs are frozen), so re-validating per replication is free.
    """
    if spec.role not in (ROLE_RECOVERY, ROLE_WEIGHT):
        raise ParamViolation(f"role must be one of recovery|weight, got {spec.role!r}")
    _check_params(spec)

    lo, hi = support(spec)
    if spec.role == ROLE_RECOVERY:
        if lo < 1.0:
            raise SupportViolation(
                f"recovery support must satisfy value >= 1 (support reaches {lo})"
            )
    else:
        if lo < 0.0 or hi > 1.0:
            raise SupportViolation(
                f"weight support must lie in [0, 1] (got [{lo}, {hi}])"
            )
        if not _positive_mass_above_zero(spec):
            raise SupportViolation("weight law must place positive mass above 0")
    return spec


def _parse_raw(text: str, role: str) -> DistSpec:
    parts = text.strip().split(":")
    kind = parts[0]
    try:
        if kind == "constant" and len(parts) == 2:
            return DistSpec("constant", (float(parts[1]),), role)
        if kind == "uniform" and len(parts) == 3:
            return DistSpec("uniform", (float(parts[1]), float(parts[2])), role)
        if kind == "two_point" and len(parts) == 4:
            return DistSpec("two_point",
                            (float(parts[1]), float(parts[2]), float(parts[3])), role)
        if kind == "shifted" and len(parts) >= 4:
            base = _parse_raw(":".join(parts[1:-1]), role)
            return DistSpec("shifted", (float(parts[-1]),), role, base)
    except ValueError as exc:
        raise ParamViolation(f"could not parse number in {text!r}: {exc}") from exc
    raise ParamViolation(
        f"unrecognized distribution syntax {text!r}; expected "
        "constant:v | uniform:a:b | two_point:v1:p1:v2 | shifted:<base>:offset"
    )


def parse_dist(text: str, role: str) -> DistSpec:
    """Parse the colon-separated spec syntax; returns a validated spec."""
    return validate_spec(_parse_raw(text, role))


def _fmt_param(p: float) -> str:
    # shortest round-trip form so parse(format(spec)) reproduces spec exactly
    return repr(int(p)) if float(p).is_integer() and abs(p) < 1e15 else repr(float(p))


def format_dist(spec: DistSpec) -> str:
    if spec.kind == "shifted":
        off = spec.params[0]
        sign = "+" if off >= 0 else ""
        return f"shifted:{format_dist(spec.base)}:{sign}{_fmt_param(off)}"
    return ":".join([spec.kind] + [_fmt_param(p) for p in spec.params])


# ---------------------------------------------------------------------------
# Sampling and distribution functions


def quantile(spec: DistSpec, u: Union[float, np.ndarray]):
    """Inverse CDF; maps uniforms in [0, 1) to the law of the spec."""
    if spec.kind == "constant":
        v = spec.params[0]
        if np.isscalar(u):
            return v
        return np.full(np.shape(u), v)
    if spec.kind == "uniform":
        a, b = spec.params
        return a + (b - a) * u
    if spec.kind == "two_point":
        v1, p1, v2 = spec.params
        if np.isscalar(u):
            return v1 if u < p1 else v2
        return np.where(u < p1, v1, v2)
    return quantile(spec.base, u) + spec.params[0]


def cdf(spec: DistSpec, x: Union[float, np.ndarray]):
    """Analytic CDF, vectorized over x."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "constant":
        return (x >= spec.params[0]).astype(float)
    if spec.kind == "uniform":
        a, b = spec.params
        return np.clip((x - a) / (b - a), 0.0, 1.0)
    if spec.kind == "two_point":
        v1, p1, v2 = spec.params
        return p1 * (x >= v1) + (1.0 - p1) * (x >= v2)
    return cdf(spec.base, x - spec.params[0])


def as_mixture(spec: DistSpec) -> list:
    """Normalize a spec to mixture components for closed-form expectations.

    Returns a list of (weight, component) with component either
    ("atom", v) or ("uniform", a, b).
    """
    if spec.kind == "constant":
        return [(1.0, ("atom", spec.params[0]))]
    if spec.kind == "uniform":
        a, b = spec.params
        return [(1.0, ("uniform", a, b))]
    if spec.kind == "two_point":
        v1, p1, v2 = spec.params
        comps = []
        if p1 > 0:
            comps.append((p1, ("atom", v1)))
        if p1 < 1:
            comps.append((1.0 - p1, ("atom", v2)))
        return comps
    off = spec.params[0]
    out = []
    for w, comp in as_mixture(spec.base):
        if comp[0] == "atom":
            out.append((w, ("atom", comp[1] + off)))
        else:
            out.append((w, ("uniform", comp[1] + off, comp[2] + off)))
    return out


def mean(spec: DistSpec) -> float:
    total = 0.0
    for w, comp in as_mixture(spec):
        total += w * (comp[1] if comp[0] == "atom" else 0.5 * (comp[1] + comp[2]))
    return total


def mean_inverse(spec: DistSpec) -> float:
    """E[1/X]; requires support bounded away from 0 (true for recovery laws)."""
    total = 0.0
    for w, comp in as_mixture(spec):
        if comp[0] == "atom":
            total += w / comp[1]
        else:
            a, b = comp[1], comp[2]
            # log1p form stays accurate when the interval is narrow
            total += w * math.log1p((b - a) / a) / (b - a)
    return total


def mean_inverse_square(spec: DistSpec) -> float:
    total = 0.0
    for w, comp in as_mixture(spec):
        if comp[0] == "atom":
            total += w / comp[1] ** 2
        else:
            a, b = comp[1], comp[2]
            total += w / (a * b)
    return total


def expect_self_over_self_plus(spec: DistSpec, c: float) -> float:
    """E[X / (X + c)] for c >= 0, closed form per mixture component."""
    if c == 0.0:
        return 1.0
    total = 0.0
    for w, comp in as_mixture(spec):
        if comp[0] == "atom":
            total += w * comp[1] / (comp[1] + c)
        else:
            a, b = comp[1], comp[2]
            total += w * (1.0 - c * math.log1p((b - a) / (a + c)) / (b - a))
    return total


def expect_self_over_self_plus_vec(spec: DistSpec, c: np.ndarray) -> np.ndarray:
    """Vectorized E[X / (X + c)] over an array of nonneg shifts c."""
    c = np.asarray(c, dtype=float)
    total = np.zeros_like(c)
    for w, comp in as_mixture(spec):
        if comp[0] == "atom":
            total += w * comp[1] / (comp[1] + c)
        else:
            a, b = comp[1], comp[2]
            total += w * (1.0 - c * np.log1p((b - a) / (a + c)) / (b - a))
    return total


# ---------------------------------------------------------------------------
# Moments and the critical infection rate


@dataclass(frozen=True)
class Moments:
    """The three closed-form moments the theory needs.

    mean_rho = E[rho], mean_inv_xi = E[1/xi], mean_inv_xi_sq = E[1/xi^2].
    """

    mean_rho: float
    mean_inv_xi: float
    mean_inv_xi_sq: float


def moments(rho_spec: DistSpec, xi_spec: DistSpec) -> Moments:
    if rho_spec.role != ROLE_WEIGHT:
        raise ParamViolation("rho_spec must have role=weight")
    if xi_spec.role != ROLE_RECOVERY:
        raise ParamViolation("xi_spec must have role=recovery")
    return Moments(
        mean_rho=mean(rho_spec),
        mean_inv_xi=mean_inverse(xi_spec),
        mean_inv_xi_sq=mean_inverse_square(xi_spec),
    )


def critical_lambda(m: Moments) -> float:
    """The phase-transition threshold 1 / (E[rho] * E[1/xi])."""
    if m.mean_rho <= 0.0:
        raise DegenerateMoments("mean_rho must be positive for a finite threshold")
    if m.mean_inv_xi <= 0.0:
        raise DegenerateMoments("mean_inv_xi must be positive")
    return 1.0 / (m.mean_rho * m.mean_inv_xi)
