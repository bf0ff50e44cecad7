"""Singular Liouville bubbles, the linearized weight and its radial kernel.

The bubble of scale delta and strength alpha is

    w(r) = log(2 alpha^2 delta^alpha / (delta^alpha + r^alpha)^2),

which solves  Delta w + |x|^{alpha-2} e^w = 0  in the plane.  Everything here
is evaluated through log(delta) and log(r) so that scales down to 1e-300 and
below stay representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Bubble", "KernelKind", "KernelElement", "eval_w", "eval_w_t", "eval_Pi",
    "eval_kernel", "oracle_integrals", "OracleReport", "check_liouville_pde",
    "check_kernel_ode", "kernel_grid",
]


@dataclass(frozen=True)
class Bubble:
    log_delta: float
    alpha: float

    def __post_init__(self):
        if not self.alpha > 2:
            raise ValueError("alpha must exceed 2")
        if not math.isfinite(self.log_delta):
            raise ValueError("delta must be positive and finite")

    @classmethod
    def from_delta(cls, delta, alpha):
        if not delta > 0:
            raise ValueError("delta must be positive")
        return cls(math.log(delta), alpha)

    @property
    def delta(self):
        return math.exp(self.log_delta)


def _log(r):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(r, dtype=float))


def eval_w_t(bubble: Bubble, t):
    """Bubble as a function of t = log r."""
    a, lda = bubble.alpha, bubble.alpha * bubble.log_delta
    return math.log(2 * a * a) + lda - 2 * np.logaddexp(lda, a * np.asarray(t, dtype=float))


def eval_w(bubble: Bubble, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be non-negative")
    out = eval_w_t(bubble, _log(r))
    return out if out.ndim else float(out)


def eval_Pi(alpha, s):
    """Weight 2 alpha^2 s^{alpha-2} / (1 + s^alpha)^2 of the linearized operator."""
    s = np.asarray(s, dtype=float)
    ls = _log(s)
    with np.errstate(invalid="ignore"):
        lg = math.log(2 * alpha * alpha) + (alpha - 2) * ls - 2 * np.logaddexp(0.0, alpha * ls)
    out = np.where(s > 0, np.exp(lg), 0.0)
    return out if out.ndim else float(out)


class KernelKind(str, Enum):
    Y0 = "Y0"
    Y1 = "Y1"
    Y2 = "Y2"
    Z0 = "Z0"
    ETA = "EtaJ"


@dataclass(frozen=True)
class KernelElement:
    kind: KernelKind
    alpha: float
    delta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.kind in (KernelKind.Y1, KernelKind.Y2):
            if abs(self.alpha / 2 - round(self.alpha / 2)) > 1e-12:
                raise ValueError(f"{self.kind.value} is single-valued only for even alpha")
        if self.delta <= 0:
            raise ValueError("delta must be positive")


def _y0_t(alpha, t):
    # (1 - s^a)/(1 + s^a) with s = e^t
    return -np.tanh(0.5 * alpha * t)


def eval_kernel(elem: KernelElement, point):
    """Evaluate a kernel element.

    Radial kinds take a radius (scalar or array).  Y1 and Y2 take planar
    points with shape (..., 2).
    """
    a = elem.alpha
    if elem.kind in (KernelKind.Y1, KernelKind.Y2):
        p = np.asarray(point, dtype=float)
        r = np.hypot(p[..., 0], p[..., 1])
        th = np.arctan2(p[..., 1], p[..., 0])
        amp = np.exp(0.5 * a * _log(r) - np.logaddexp(0.0, a * _log(r)))
        amp = np.where(r > 0, amp, 0.0)
        ang = np.cos(0.5 * a * th) if elem.kind is KernelKind.Y1 else np.sin(0.5 * a * th)
        out = amp * ang
        return out if out.ndim else float(out)
    r = np.asarray(point, dtype=float)
    t = _log(r)
    if elem.kind is KernelKind.Y0:
        out = _y0_t(a, t)
    elif elem.kind is KernelKind.Z0:
        out = _y0_t(a, t - math.log(elem.delta))
    else:
        lda = a * math.log(elem.delta)
        L = np.logaddexp(lda, a * t)
        z = _y0_t(a, t - math.log(elem.delta))
        out = (4 / 3) * L * z + (8 / 3) * np.exp(lda - L)
    return out if np.ndim(out) else float(out)


# --- closed-form integral oracles -------------------------------------------

ORACLE_NAMES = ("Pi", "Pi_Y0", "Pi_Y0_log", "Pi_Y0_sq", "Pi_Y0_log1p", "Pi_over_1p")


def oracle_closed_forms(alpha):
    p = math.pi
    return {
        "Pi": 4 * p * alpha,
        "Pi_Y0": 0.0,
        "Pi_Y0_log": -4 * p,
        "Pi_Y0_sq": 4 * p * alpha / 3,
        "Pi_Y0_log1p": -2 * p * alpha,
        "Pi_over_1p": 2 * p * alpha,
    }


def _graded_edges(n_panels, ratio=4.0):
    """Panels on (0, 1) refined geometrically toward both endpoints."""
    half = n_panels // 2
    k = np.arange(1, half)
    left = 0.5 * ratio ** (-(half - k).astype(float))
    right = 1.0 - left[::-1]
    return np.concatenate(([0.0], left, [0.5], right, [1.0]))


def _composite(f, edges, n):
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    u = 0.5 * (a + b) + 0.5 * (b - a) * x
    return float(np.sum(0.5 * (b - a) * w * f(u)))


@dataclass
class OracleReport:
    alpha: float
    computed: dict
    exact: dict
    error_estimate: dict
    converged: bool

    def errors(self):
        """Relative error, or absolute error where the exact value is zero."""
        out = {}
        for k, ex in self.exact.items():
            d = abs(self.computed[k] - ex)
            out[k] = d / abs(ex) if ex != 0 else d
        return out

    def rows(self):
        errs = self.errors()
        return [(k, self.computed[k], self.exact[k], errs[k]) for k in ORACLE_NAMES]


def oracle_integrals(alpha, n_points=64, n_panels=32, tol=1e-10, max_panels=256):
    """Six planar integrals of the weight Pi against kernel-type functions.

    With u = s^alpha/(1+s^alpha) one has Pi(s) s ds = 2 alpha du, so every
    integral becomes 4 pi alpha times an integral over (0, 1) of a function
    with at most logarithmic endpoint singularities.  Those are handled by
    geometric panel grading; the panel count doubles until a lower-order rule
    on the same panels agrees to ``tol``.
    """
    if not alpha > 2:
        raise ValueError("alpha must exceed 2")
    a = alpha

    def logs(u):
        return (np.log(u) - np.log1p(-u)) / a

    g = {
        "Pi": lambda u: np.ones_like(u),
        "Pi_Y0": lambda u: 1 - 2 * u,
        "Pi_Y0_log": lambda u: (1 - 2 * u) * logs(u),
        "Pi_Y0_sq": lambda u: (1 - 2 * u) ** 2,
        "Pi_Y0_log1p": lambda u: -(1 - 2 * u) * np.log1p(-u),
        "Pi_over_1p": lambda u: 1 - u,
    }
    scale = 4 * math.pi * a
    P = n_panels
    while True:
        edges = _graded_edges(P)
        comp, est = {}, {}
        for k, f in g.items():
            hi = scale * _composite(f, edges, n_points)
            lo = scale * _composite(f, edges, n_points // 2)
            comp[k], est[k] = hi, abs(hi - lo)
        ok = max(est.values()) <= tol
        if ok or 2 * P > max_panels:
            return OracleReport(alpha, comp, oracle_closed_forms(alpha), est, ok)
        P *= 2


# --- finite-difference checks -------------------------------------------------

def check_liouville_pde(bubble: Bubble, radii, step):
    """Max |w'' + w'/r + r^{alpha-2} e^w| over the sample radii (central differences)."""
    r = np.asarray(radii, dtype=float)
    if np.any(r - step <= 0):
        raise ValueError("step must be smaller than every sample radius")
    wm, w0, wp = (eval_w(bubble, r + k * step) for k in (-1, 0, 1))
    d2 = (wp - 2 * w0 + wm) / step ** 2
    d1 = (wp - wm) / (2 * step)
    src = np.exp((bubble.alpha - 2) * np.log(r) + w0)
    return float(np.max(np.abs(d2 + d1 / r + src)))


def kernel_grid(n, r_min=1e-2, r_max=10.0, alpha=None):
    """Radii for the kernel ODE check, uniform in log r.

    With ``alpha`` given, log r = A sinh(s) with s uniform and A = 2/alpha,
    which packs nodes into the transition layer of Y0 around r = 1.
    """
    t0, t1 = math.log(r_min), math.log(r_max)
    if alpha is None:
        return np.exp(np.linspace(t0, t1, n))
    A = 2.0 / alpha
    s = np.linspace(math.asinh(t0 / A), math.asinh(t1 / A), n)
    r = np.exp(A * np.sinh(s))
    r[0], r[-1] = r_min, r_max
    return r


def check_kernel_ode(alpha, radii):
    """Max finite-difference residual of y'' + y'/r + Pi y at y = Y0.

    Uses the three-point non-uniform formulas, so any strictly increasing
    radii are accepted; both boundary nodes are skipped.
    """
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or r.size < 3 or np.any(np.diff(r) <= 0) or r[0] <= 0:
        raise ValueError("need at least 3 strictly increasing positive radii")
    t = np.log(r)
    y = _y0_t(alpha, t)
    # difference Y0 - 1 inside the unit circle and Y0 + 1 outside: same
    # derivatives, but no cancellation against the plateau values +-1
    lo = -2.0 / (1.0 + np.exp(-alpha * t))
    hi = 2.0 / (1.0 + np.exp(alpha * t))
    inside = (r[1:-1] < 1.0)[:, None]
    stencil = np.where(inside,
                       np.stack([lo[:-2], lo[1:-1], lo[2:]], axis=1),
                       np.stack([hi[:-2], hi[1:-1], hi[2:]], axis=1))
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    ym, yp = stencil[:, 0], stencil[:, 2]
    y0 = y[1:-1]
    yc = stencil[:, 1]
    d2 = 2 * (hm * yp - (hm + hp) * yc + hp * ym) / (hm * hp * (hm + hp))
    d1 = (hm ** 2 * yp + (hp ** 2 - hm ** 2) * yc - hp ** 2 * ym) / (hm * hp * (hm + hp))
    res = d2 + d1 / r[1:-1] + eval_Pi(alpha, r[1:-1]) * y0
    return float(np.max(np.abs(res)))
