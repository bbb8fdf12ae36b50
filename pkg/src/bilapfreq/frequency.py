"""Frequency ``N = I/H`` over a radius sweep and checks of its derivative identities.

The identities checked here are exact for smooth solutions of the lifted
system; discrepancies come only from quadrature and from differencing in
``r``.  Derivatives in ``r`` are three-point differences in ``log r``
(uniform on geometric radius grids): ``H'`` through ``d log H / d log r``,
and ``I' = (N H)' = N' H + N H'``.  Both are exact on pure power laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decompose import LiftedSystem
from .quadrature import Ball, BallSample, WeightedIntegrals, compute_I
from .report import CheckReport

__all__ = [
    "FrequencyProfile",
    "geometric_radii",
    "build_profile",
    "derivative_3pt",
    "check_H_prime",
    "r_terms",
    "I_prime_terms",
    "check_I_prime",
    "check_cancellations",
    "check_divergence_forms",
    "fit_monotonicity_constant",
    "CANCELLING_PAIRS",
]


def geometric_radii(r_min: float, r_max: float, count: int | None = None,
                    ratio: float | None = None) -> np.ndarray:
    """``r_j = r_min * q^j`` up to ``r_max``, by count or by ratio."""
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    if ratio is not None:
        steps = int(math.floor(math.log(r_max / r_min) / math.log(ratio) + 1e-9))
        return r_min * ratio ** np.arange(steps + 1)
    if count is None or count < 2:
        raise ValueError("need count >= 2 or a ratio")
    return r_min * (r_max / r_min) ** (np.arange(count) / (count - 1))


@dataclass
class FrequencyProfile:
    """Per-radius weighted integrals and ``N`` at one centre."""

    center: tuple[float, ...]
    radii: np.ndarray
    records: list[WeightedIntegrals]
    dim: int
    alpha: float
    lam: float
    grad_norm: float
    label: str = ""
    N: np.ndarray = field(init=False)

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing")
        H = self.column("H")
        if np.any(H <= 0):
            raise ValueError("trivial solution on ball: H = 0")
        self.N = self.column("I_form2") / H
        if not np.all(np.isfinite(self.N)):
            raise ValueError("frequency is not finite")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records], dtype=float)

    @property
    def negative_frequency(self) -> bool:
        return bool(np.any(self.N < 0))

    def rows(self) -> list[dict]:
        out = []
        for rec, n in zip(self.records, self.N):
            out.append({"r": rec.r, "H": rec.H, "I1": rec.I1, "I2": rec.I2, "I3": rec.I3,
                        "I4": rec.I4, "I5": rec.I5, "I_form1": rec.I_form1,
                        "I_form2": rec.I_form2, "h": rec.h_plain, "N": float(n)})
        return out


def build_profile(sys: LiftedSystem, center: Sequence[float], radii: Sequence[float]) -> FrequencyProfile:
    center = tuple(float(c) for c in center)
    records = [compute_I(sys, Ball(center, float(r))) for r in radii]
    return FrequencyProfile(center, np.asarray(radii, dtype=float), records, sys.dim,
                            sys.params.alpha, sys.params.lam,
                            float(sys.potential.grad_sup_norm), sys.label)


def derivative_3pt(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Nonuniform three-point derivative at the interior samples ``x[1:-1]``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    h1 = x[1:-1] - x[:-2]
    h2 = x[2:] - x[1:-1]
    return (-h2 / (h1 * (h1 + h2)) * y[:-2]
            + (h2 - h1) / (h1 * h2) * y[1:-1]
            + h1 / (h2 * (h1 + h2)) * y[2:])


def _H_prime(profile: FrequencyProfile, derivative: str) -> np.ndarray:
    r = profile.radii
    H = profile.column("H")
    if derivative == "log":
        return H[1:-1] / r[1:-1] * derivative_3pt(np.log(r), np.log(H))
    if derivative == "linear":
        return derivative_3pt(r, H)
    raise ValueError(f"unknown derivative scheme {derivative!r}")


def check_H_prime(profile: FrequencyProfile, tol: float = 0.01,
                  derivative: str = "log") -> CheckReport:
    """Differenced ``H'`` against ``(2α+d) H/r + I/((α+1) r)``."""
    if len(profile.radii) < 3:
        raise ValueError("check_H_prime needs at least 3 radii")
    r = profile.radii[1:-1]
    a, d = profile.alpha, profile.dim
    H = profile.column("H")[1:-1]
    I = profile.column("I_form2")[1:-1]
    rhs = (2 * a + d) / r * H + I / ((a + 1) * r)
    fd = _H_prime(profile, derivative)
    mism = np.abs(fd - rhs) / np.abs(rhs)
    worst = float(np.max(mism))
    return CheckReport("H-prime", worst, 1.0, budget=tol,
                       meta={"radii": r.tolist(), "mismatch": mism.tolist(),
                             "derivative": derivative, "label": profile.label})


# (name, coefficient kind, integrand key).  Coefficient kinds:
#   "-c": -1/((α+2) r)   "+c": 1/((α+2) r)   "+c/2": 1/(2(α+2) r)   "1/r": 1/r
R_TERMS = (
    ("R1_1", "-c", "w2"), ("R1_2", "-c", "lam_uw"), ("R1_3", "-c", "gu_gw"),
    ("R1_4", "-c", "half_lam_gu2"), ("R1_5", "-c", "quarter_lam2_u2"),
    ("R2_1", "-c", "Q2_u2"), ("R2_2", "-c", "three_lam_Q_uw"), ("R2_3", "-c", "u_gV_gw"),
    ("R2_4", "-c", "Q_gu_gw"), ("R2_5", "-c", "three_half_lam_gw2"),
    ("R2_6", "-c", "nine_quarter_lam2_w2"),
    ("R3_1", "+c", "half_lam_uw"), ("R3_2", "+c", "half_lam_gu2"),
    ("R3_3", "+c", "quarter_lam2_u2"),
    ("R4_1", "+c", "three_half_lam_Q_uw"), ("R4_2", "+c", "three_half_lam_gw2"),
    ("R4_3", "+c", "nine_quarter_lam2_w2"),
    ("R5_1", "1/r", "uw_gV_z"), ("R5_2", "+c/2", "Q2_u2"), ("R5_3", "+c/2", "Q_u2"),
    ("R5_4", "+c", "lam_Q_uw"), ("R5_5", "+c", "lam_uw"), ("R5_6", "+c/2", "Q_w2"),
    ("R5_7", "+c/2", "w2"), ("R5_8", "+c", "Q_gu_gw"), ("R5_9", "+c", "gu_gw"),
    ("R5_10", "+c/2", "sym_gV"),
)

CANCELLING_PAIRS = (("R1_5", "R3_3"), ("R1_4", "R3_2"), ("R2_6", "R4_3"), ("R2_5", "R4_2"))


def _integrands(s: BallSample, keys: set[str]) -> dict[str, np.ndarray]:
    """Unsigned integrands (weights included) for the requested R-term keys."""
    a, lam = s.alpha, s.lam
    u, w = s.u, s.w
    W2 = s.weighted(a + 2)
    need_grad = any(k in keys for k in ("gu_gw", "half_lam_gu2", "u_gV_gw", "Q_gu_gw",
                                         "three_half_lam_gw2", "sym_gV"))
    if need_grad:
        gu, gw = s.gu, s.gw
        gu_gw = (gu * gw).sum(axis=0)
    Q = s.Q
    out = {}
    defs = {
        "w2": lambda: w**2 * W2,
        "lam_uw": lambda: lam * u * w * W2,
        "gu_gw": lambda: gu_gw * W2,
        "half_lam_gu2": lambda: 0.5 * lam * (gu**2).sum(axis=0) * W2,
        "quarter_lam2_u2": lambda: 0.25 * lam**2 * u**2 * W2,
        "Q2_u2": lambda: Q**2 * u**2 * W2,
        "three_lam_Q_uw": lambda: 3.0 * lam * Q * u * w * W2,
        "u_gV_gw": lambda: u * (s.gV * gw).sum(axis=0) * W2,
        "Q_gu_gw": lambda: Q * gu_gw * W2,
        "three_half_lam_gw2": lambda: 1.5 * lam * (gw**2).sum(axis=0) * W2,
        "nine_quarter_lam2_w2": lambda: 2.25 * lam**2 * w**2 * W2,
        "half_lam_uw": lambda: 0.5 * lam * u * w * W2,
        "three_half_lam_Q_uw": lambda: 1.5 * lam * Q * u * w * W2,
        "uw_gV_z": lambda: u * w * (s.gV * s.z).sum(axis=0) * s.weighted(a + 1),
        "Q_u2": lambda: Q * u**2 * W2,
        "lam_Q_uw": lambda: lam * Q * u * w * W2,
        "Q_w2": lambda: Q * w**2 * W2,
        "sym_gV": lambda: ((u * gw + w * gu) * s.gV).sum(axis=0) * W2,
    }
    for k in sorted(keys):
        out[k] = defs[k]()
    return out


def r_terms(sys: LiftedSystem, ball: Ball, names: Sequence[str] | None = None) -> dict[str, float]:
    """Each remainder term of the ``I_i'`` expansions, by its own quadrature.

    Signs live in the integrand so that paired terms are exact negatives.
    """
    s = BallSample(sys, ball)
    chosen = [t for t in R_TERMS if names is None or t[0] in names]
    keys = {t[2] for t in chosen}
    base = _integrands(s, keys)
    a, r = s.alpha, s.r
    coef = {"-c": 1.0 / ((a + 2) * r), "+c": 1.0 / ((a + 2) * r),
            "+c/2": 1.0 / (2 * (a + 2) * r), "1/r": 1.0 / r}
    stack = [(-base[key] if kind == "-c" else base[key]) for _, kind, key in chosen]
    vals = s.integrate(*stack)
    return {name: float(v) * coef[kind] for (name, kind, _), v in zip(chosen, vals)}


def I_prime_terms(sys: LiftedSystem, ball: Ball) -> dict[str, float]:
    """Every term on the right of the ``I'`` expansion at one radius."""
    s = BallSample(sys, ball)
    a, r, d = s.alpha, s.r, s.d
    Wa = s.weighted(a)
    proj_u = (s.gu * s.z).sum(axis=0) ** 2 * Wa
    proj_w = (s.gw * s.z).sum(axis=0) ** 2 * Wa
    pu, pw = (float(v) for v in s.integrate(proj_u, proj_w))
    rec = compute_I(sys, ball)
    terms = {
        "scaling": (2 * a + d) / r * rec.I_form2,
        "projection_u": 4 * (a + 1) / r * pu,
        "projection_w": 4 * (a + 1) / r * pw,
        "two_over_r_I3": 2.0 / r * rec.I3,
        "two_over_r_I4": 2.0 / r * rec.I4,
        "two_over_r_I5": 2.0 / r * rec.I5,
    }
    terms.update(r_terms(sys, ball))
    return terms


def check_I_prime(profile: FrequencyProfile, sys: LiftedSystem, tol: float = 0.02,
                  derivative: str = "log") -> CheckReport:
    """Differenced ``I'`` against the full term-by-term expansion."""
    if len(profile.radii) < 3:
        raise ValueError("check_I_prime needs at least 3 radii")
    r_all = profile.radii
    H = profile.column("H")
    N = profile.N
    if derivative == "log":
        fd = derivative_3pt(r_all, N) * H[1:-1] + N[1:-1] * _H_prime(profile, "log")
    else:
        fd = derivative_3pt(r_all, profile.column("I_form2"))
    rhs, mism, worst_terms = [], [], []
    for j, r in enumerate(r_all[1:-1]):
        terms = I_prime_terms(sys, Ball(profile.center, float(r)))
        total = math.fsum(terms.values())
        rhs.append(total)
        denom = max(abs(total), abs(fd[j]))
        floor = 1e-13 * H[j + 1] / r
        mism.append(0.0 if denom <= floor else abs(fd[j] - total) / denom)
        worst_terms.append(max(terms, key=lambda k: abs(terms[k])))
    worst = float(max(mism))
    return CheckReport("I-prime", worst, 1.0, budget=tol,
                       meta={"radii": r_all[1:-1].tolist(), "mismatch": mism,
                             "fd": fd.tolist(), "expansion": rhs,
                             "dominant_term": worst_terms, "label": profile.label})


def check_cancellations(sys: LiftedSystem, ball: Ball, tol: float = 1e-12) -> CheckReport:
    """The four paired remainder terms must cancel to round-off."""
    names = [n for pair in CANCELLING_PAIRS for n in pair]
    R = r_terms(sys, ball, names)
    rel = []
    sums = {}
    for a, b in CANCELLING_PAIRS:
        s = R[a] + R[b]
        sums[f"{a}+{b}"] = s
        scale = abs(R[a]) + abs(R[b])
        rel.append(0.0 if s == 0.0 else abs(s) / (scale + np.finfo(float).tiny))
    return CheckReport("cancellations", max(rel), 1.0, budget=tol,
                       meta={"terms": R, "sums": sums, "relative": rel, "radius": ball.radius})


def check_divergence_forms(sys: LiftedSystem, ball: Ball, tol: float = 0.01,
                           eps: float = 1e-300) -> CheckReport:
    """``|I_form1 - I_form2| / max(|I_form1|, eps)``."""
    rec = compute_I(sys, ball)
    diff = abs(rec.I_form1 - rec.I_form2)
    rel = diff / max(abs(rec.I_form1), eps)
    return CheckReport("divergence-forms", rel, 1.0, budget=tol,
                       meta={"I_form1": rec.I_form1, "I_form2": rec.I_form2,
                             "absolute": diff, "radius": ball.radius})


def fit_monotonicity_constant(profile: FrequencyProfile, grad_norm: float | None = None) -> float:
    """Smallest ``C >= 0`` making ``exp(C r) (N + grad_norm + 1)`` nondecreasing
    over the sampled radii; ``inf`` if no finite ``C`` works."""
    if len(profile.radii) < 4:
        raise ValueError("fit_monotonicity_constant needs at least 4 radii")
    g = profile.grad_norm if grad_norm is None else float(grad_norm)
    F = profile.N + g + 1.0
    r = profile.radii
    lower, upper = 0.0, math.inf
    for j in range(len(r) - 1):
        f0, f1, dr = F[j], F[j + 1], r[j + 1] - r[j]
        # need exp(C dr) * f1 >= f0
        if f1 > 0:
            if f0 > f1:
                lower = max(lower, math.log(f0 / f1) / dr)
        elif f1 == 0:
            if f0 > 0:
                return math.inf
        else:
            if f0 >= 0:
                return math.inf
            # both negative: exp(C dr) <= f0 / f1
            upper = min(upper, math.log(f0 / f1) / dr)
    if lower > upper:
        return math.inf
    return lower
