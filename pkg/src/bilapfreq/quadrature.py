"""Node quadrature over balls and the weighted integrals H, I, h.

Integrals are sums over grid nodes times ``h^d``.  Two node-weight rules:

``sharp``
    weight 1 for ``|z - z0| < r`` and 0 otherwise.
``smooth``
    weight ``clip(1/2 + (r - |z - z0|)/h, 0, 1)``, a half-cell ramp that
    removes the O(h) staircase of unweighted integrals.

Both are monotone in ``r``, so every nesting inequality between balls
holds node by node.  Sums use a fixed pairwise tree over nodes in C order,
which makes every result bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as dc_fields
from functools import lru_cache
from typing import Sequence

import numpy as np

from .fields import GridSpec, ScalarField

__all__ = [
    "Ball",
    "WeightedIntegrals",
    "pairwise_sum",
    "ball_support",
    "rule_weight",
    "integrate_ball",
    "BallSample",
    "sample_ball",
    "compute_H",
    "compute_h",
    "compute_I",
]

RULES = ("sharp", "smooth")


def pairwise_sum(a: np.ndarray) -> np.ndarray:
    """Sum along the last axis with a fixed balanced tree.

    The array is zero-padded to a power of two and halves are added until
    one column is left, so the rounding pattern depends only on the length.
    """
    a = np.asarray(a, dtype=float)
    m = a.shape[-1]
    if m == 0:
        return np.zeros(a.shape[:-1])
    width = 1 << (m - 1).bit_length()
    if width != m:
        pad = np.zeros(a.shape[:-1] + (width - m,))
        a = np.concatenate([a, pad], axis=-1)
    while width > 1:
        width //= 2
        a = a[..., :width] + a[..., width:]
    return a[..., 0]


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")


@dataclass(frozen=True, eq=False)
class BallSupport:
    index: tuple[np.ndarray, ...]
    weight: np.ndarray
    offset: np.ndarray  # (d, m) node minus centre
    rho2: np.ndarray
    strict_count: int


def rule_weight(rho2: np.ndarray, radius: float, spacing: float, rule: str) -> np.ndarray:
    """Node weights of ``rule`` for squared distances ``rho2``; nondecreasing in ``radius``."""
    if rule == "sharp":
        return (rho2 < radius * radius).astype(float)
    if rule == "smooth":
        return np.clip(0.5 + (radius - np.sqrt(rho2)) / spacing, 0.0, 1.0)
    raise ValueError(f"unknown rule {rule!r}, expected one of {RULES}")


@lru_cache(maxsize=8)
def ball_support(grid: GridSpec, ball: Ball, rule: str = "sharp") -> BallSupport:
    """Nodes carrying quadrature weight for ``ball`` under ``rule``."""
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}, expected one of {RULES}")
    if len(ball.center) != grid.dim:
        raise ValueError("ball centre dimension does not match grid")
    h = grid.spacing
    reach = ball.radius + (0.5 * h if rule == "smooth" else 0.0)
    lo, hi = [], []
    for c in ball.center:
        a = int(math.floor((c - reach) / h)) + grid.mid
        b = int(math.ceil((c + reach) / h)) + grid.mid
        if a < 0 or b > grid.points_per_axis - 1:
            raise ValueError(f"ball {ball} exceeds the grid box")
        lo.append(a)
        hi.append(b)
    local = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij")
    offs = [h * (ix - grid.mid) - c for ix, c in zip(local, ball.center)]
    rho2 = sum(o * o for o in offs)
    r = ball.radius
    w = rule_weight(rho2, r, h, rule)
    keep = w > 0
    strict = int(np.count_nonzero(rho2 < r * r))
    if strict < 2**grid.dim:
        raise ValueError(f"ball under-resolved: {strict} nodes inside radius {r}")
    index = tuple(ix[keep] for ix in local)
    for a in index:
        a.setflags(write=False)
    return BallSupport(index, w[keep], np.stack([o[keep] for o in offs]), rho2[keep], strict)


def _gather(field: ScalarField, sup: BallSupport, name: str) -> np.ndarray:
    if not np.all(field.valid[sup.index]):
        raise ValueError(f"ball exceeds the valid region of {name}")
    return field.values[sup.index]


def integrate_ball(integrand: ScalarField, ball: Ball, rule: str = "sharp") -> float:
    """``sum_{nodes} weight * f * h^d`` over the ball."""
    sup = ball_support(integrand.grid, ball, rule)
    vals = _gather(integrand, sup, "integrand")
    return float(pairwise_sum(vals * sup.weight)) * integrand.grid.spacing**integrand.grid.dim


@dataclass
class WeightedIntegrals:
    r: float
    alpha: float
    H: float
    I_form1: float
    I_form2: float
    I1: float
    I2: float
    I3: float
    I4: float
    I5: float
    h_plain: float

    def as_row(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}


class BallSample:
    """Fields of a lifted system gathered on one ball's support.

    Attribute arrays are 1-D over support nodes; ``gu``/``gw``/``gV`` are
    ``(d, m)``.  ``weighted(beta)`` returns ``node weight * W^beta`` with
    ``W = max(r² - |z - z0|², 0)``.
    """

    def __init__(self, sys, ball: Ball, rule: str | None = None):
        grid = sys.grid
        if abs(ball.center[-1]) > 1e-12:
            raise ValueError("ball centres of lifted systems must have t = 0")
        self.rule = sys.boundary_rule if rule is None else rule
        sup = ball_support(grid, ball, self.rule)
        self.ball = ball
        self.support = sup
        self.d = grid.dim
        self.r = ball.radius
        self.alpha = sys.params.alpha
        self.lam = sys.params.lam
        self.cell = grid.spacing**grid.dim
        self.u = _gather(sys.u_tilde, sup, "u")
        self.w = _gather(sys.w, sup, "w")
        self.W = np.maximum(self.r * self.r - sup.rho2, 0.0)
        self.z = sup.offset
        self._sys = sys
        self._cache = {}

    def _lazy(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def gu(self):
        return self._lazy("gu", lambda: np.stack(
            [_gather(g, self.support, "grad u") for g in self._sys.grad_u]))

    @property
    def gw(self):
        return self._lazy("gw", lambda: np.stack(
            [_gather(g, self.support, "grad w") for g in self._sys.grad_w]))

    @property
    def V(self):
        return self._lazy("V", lambda: _gather(self._sys.V, self.support, "V"))

    @property
    def Q(self):
        return self._lazy("Q", lambda: self.V - self.lam**2 / 4.0)

    @property
    def gV(self):
        return self._lazy("gV", lambda: np.stack(
            [_gather(g, self.support, "grad V") for g in self._sys.grad_V]))

    def weighted(self, beta: float) -> np.ndarray:
        return self._lazy(("W", beta), lambda: self.support.weight * self.W**beta)

    def unweighted(self) -> np.ndarray:
        return self.support.weight

    def integrate(self, *integrands: np.ndarray) -> np.ndarray:
        """Pairwise-summed integrals of already weighted node arrays."""
        return pairwise_sum(np.stack(integrands)) * self.cell


def sample_ball(sys, ball: Ball, rule: str | None = None) -> BallSample:
    return BallSample(sys, ball, rule)


def compute_H(sys, ball: Ball, rule: str | None = None) -> float:
    """``∫ (u² + w²)(r² - |z - z0|²)^α dz`` over the ball."""
    s = BallSample(sys, ball, rule)
    return float(s.integrate((s.u**2 + s.w**2) * s.weighted(s.alpha))[0])


def compute_h(sys, ball: Ball, rule: str | None = None) -> float:
    """``∫ (u² + w²) dz`` over the ball."""
    s = BallSample(sys, ball, rule)
    return float(s.integrate((s.u**2 + s.w**2) * s.unweighted())[0])


def compute_I(sys, ball: Ball, rule: str | None = None) -> WeightedIntegrals:
    """Both forms of ``I`` plus its five terms, ``H`` and ``h``.

    ``I_form1`` is ``2(α+1)∫(u∇u + w∇w)·(z-z0) W^α``; ``I_form2`` is the
    sum of the five terms obtained from it by the divergence theorem and
    the system equations.
    """
    s = BallSample(sys, ball, rule)
    a = s.alpha
    Wa, Wa1 = s.weighted(a), s.weighted(a + 1)
    u, w, gu, gw, z = s.u, s.w, s.gu, s.gw, s.z
    radial = ((u * gu + w * gw) * z).sum(axis=0)
    vals = s.integrate(
        (u**2 + w**2) * Wa,
        2.0 * (a + 1.0) * radial * Wa,
        (gu**2).sum(axis=0) * Wa1,
        (gw**2).sum(axis=0) * Wa1,
        0.5 * s.lam * u**2 * Wa1,
        1.5 * s.lam * w**2 * Wa1,
        (1.0 + s.Q) * u * w * Wa1,
        (u**2 + w**2) * s.unweighted(),
    )
    H, If1, I1, I2, I3, I4, I5, hp = (float(v) for v in vals)
    # fixed association order so I_form2 is reproducible
    If2 = (((I1 + I2) + (I3 + I4)) + I5)
    return WeightedIntegrals(ball.radius, a, H, If1, If2, I1, I2, I3, I4, I5, hp)
