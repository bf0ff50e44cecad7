"""Parameter cascade for a sign-changing tower of singular Liouville bubbles.

Every scale is kept in log space.  The hole radius for m >= 4 can sit far
below the smallest double, so ``log_epsilon`` and ``log_delta`` are the
primary quantities and the linear-scale values are derived views.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

ADMISSIBILITY_TOL = 1e-6
IDENTITY_TOL = 1e-10
LOG_TINY = math.log(np.finfo(float).tiny)


class ConfigError(ValueError):
    """Raised for an invalid or inadmissible tower configuration."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class EpsilonUnderflow(ArithmeticError):
    pass


def nu(i):
    """Parity weight: 1 for even indices, 0 for odd ones."""
    return (1 + (-1) ** i) // 2


def sigma(i):
    return 1 - nu(i)


def _idx(m):
    return np.arange(1, m + 1)


def _tau_nu(m, tau):
    return np.array([tau ** nu(i) for i in _idx(m)], dtype=float)


def _alt(m):
    # (-1)^{i+1}
    return np.array([(-1.0) ** (i + 1) for i in _idx(m)])


@dataclass(frozen=True)
class TowerConfig:
    m: int
    tau: float
    alpha1: float
    rho: float
    v0_at_0: float = 1.0
    v1_at_0: float = 1.0
    h0: float = 0.0
    nu_coeff: float = 1.0
    domain_radius: float = 1.0
    tol: float = ADMISSIBILITY_TOL
    # opt-out for configurations on an excluded lattice (some alpha_i even)
    skip_admissibility: bool = False

    def __post_init__(self):
        checks = [
            ("m", isinstance(self.m, (int, np.integer)) and self.m >= 2, "must be an integer >= 2"),
            ("tau", math.isfinite(self.tau) and self.tau > 0, "must be positive"),
            ("alpha1", math.isfinite(self.alpha1) and self.alpha1 > 2, "must exceed 2"),
            ("rho", math.isfinite(self.rho) and self.rho > 0, "must be positive"),
            ("v0_at_0", math.isfinite(self.v0_at_0) and self.v0_at_0 > 0, "must be positive"),
            ("v1_at_0", math.isfinite(self.v1_at_0) and self.v1_at_0 > 0, "must be positive"),
            ("h0", math.isfinite(self.h0), "must be finite"),
            ("nu_coeff", math.isfinite(self.nu_coeff) and self.nu_coeff >= 0, "must be >= 0"),
            ("domain_radius", math.isfinite(self.domain_radius) and self.domain_radius > 0, "must be positive"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{key}={getattr(self, key)!r} {msg}", key)
        ok, diag = validate_alpha1(self.m, self.tau, self.alpha1, self.tol)
        if not ok and not self.skip_admissibility:
            raise ConfigError(f"alpha1={self.alpha1!r} is not admissible: {diag}", "alpha1")

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return TowerConfig(**d)


def _excluded_sets(m, tau):
    """Yield (label, k, step, shift) for each excluded lattice step*n + shift."""
    if m % 2 == 0:
        k_first = range(0, (m - 2) // 2 + 1)
        k_second = range(1, m // 2 + 1)
    else:
        k_first = range(0, (m - 1) // 2 + 1)
        k_second = range(1, (m - 1) // 2 + 1)
    for k in k_first:
        yield (f"2N - {4 * k}/tau" if k else "2N"), k, 2.0, -4.0 * k / tau
    for k in k_second:
        yield f"(2/tau)N - {4 * k - 2}", k, 2.0 / tau, -4.0 * k + 2.0


def validate_alpha1(m, tau, alpha1, tol=ADMISSIBILITY_TOL):
    """Check alpha1 against the excluded lattices; returns (ok, diagnostic).

    A lattice {step*n + shift : n = 1, 2, ...} is violated when some member
    lies within ``tol`` of alpha1.  Only members up to alpha1 + 1 are scanned.
    """
    for name, v in (("m", m), ("tau", tau), ("alpha1", alpha1), ("tol", tol)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if m < 2 or tau <= 0:
        raise ValueError("need m >= 2 and tau > 0")
    if alpha1 <= 2:
        return False, "alpha1 must exceed 2"
    hits = []
    for label, k, step, shift in _excluded_sets(m, tau):
        n_max = math.floor((alpha1 + 1 - shift) / step)
        for n in range(1, n_max + 1):
            if abs(step * n + shift - alpha1) <= tol:
                hits.append(f"set {label} (k={k}) at n={n}")
    if hits:
        return False, "; ".join(hits)
    return True, "admissible"


def compute_alphas(m, tau, alpha1):
    al = np.empty(m)
    for i in _idx(m):
        if i % 2:
            al[i - 1] = alpha1 + 2 * (i - 1) + 2 * (i - 1) / tau
        else:
            al[i - 1] = alpha1 * tau + 2 * (i - 1) * tau + 2 * (i - 1)
    # recurrence cross-check
    for j in range(1, m):
        nxt = (al[j - 1] + 2) * tau ** ((-1) ** (j + 1)) + 2
        if abs(nxt - al[j]) > 1e-12 * abs(al[j]):
            raise ArithmeticError(f"alpha recurrence mismatch at j={j}")
    return al


def compute_betas(m, tau):
    be = np.empty(m)
    for l in _idx(m):
        if m % 2 == 0:
            be[l - 1] = tau ** nu(l) * (m - l + (m - l + 1) / tau)
        else:
            be[l - 1] = tau ** nu(l) * (m - l + 1 + (m - l) / tau)
    be[-1] = 1.0
    return be


def compute_a_and_d(config: TowerConfig, alphas):
    m, tau = config.m, config.tau
    tn = _tau_nu(m, tau)
    c = 2 * math.pi * (alphas[-1] + 2) * config.h0
    a = np.empty(m)
    for l in _idx(m):
        V = config.v1_at_0 if nu(l) else config.v0_at_0
        base = math.log(tau ** nu(l) * V / (2 * alphas[l - 1] ** 2))
        if m % 2 == 0:
            a[l - 1] = base + (-1) ** l / tau ** sigma(l) * c
        else:
            a[l - 1] = base + (-1) ** (l + 1) * tau ** nu(l) * c
    log_d = np.empty(m)
    for l in _idx(m):
        tail = np.sum(a[l:] / tn[l:])
        log_d[l - 1] = a[l - 1] + 2 * tn[l - 1] * tail
    return a, log_d


def _log_epsilon_at(config: TowerConfig, alphas, rho):
    m, tau = config.m, config.tau
    V0, V1, h0 = config.v0_at_0, config.v1_at_0, config.h0
    s = 4 * np.sum(np.log(alphas) / _tau_nu(m, tau))
    am = alphas[-1]
    if m % 2 == 0:
        num = (m * math.log(V0) + (m / tau) * math.log(tau * V1)
               + (2 * math.pi / tau) * (am + 2) * h0 - s
               + (m + m / tau) * math.log(rho / 2))
    else:
        num = ((m + 1) * math.log(V0) + ((m - 1) / tau) * math.log(tau * V1)
               + 2 * math.pi * (am + 2) * h0 - s
               + (m + 1 + (m - 1) / tau) * math.log(rho / 2))
    return num / (config.alpha1 - 2)


def compute_log_epsilon(config: TowerConfig, alphas):
    return _log_epsilon_at(config, alphas, config.rho)


def compute_epsilon(config: TowerConfig, alphas):
    le = compute_log_epsilon(config, alphas)
    if le < LOG_TINY:
        raise EpsilonUnderflow(f"log epsilon = {le:.3f} is below the smallest normal double")
    return math.exp(le)


def epsilon_rho_exponent(m, tau):
    """Power of rho in epsilon^(alpha1 - 2)."""
    return m + m / tau if m % 2 == 0 else m + 1 + (m - 1) / tau


def compute_gammas(log_delta, alphas, log_epsilon, h0=0.0):
    if log_epsilon >= 0:
        raise ValueError("log epsilon must be negative (domain not pierced)")
    den = -log_epsilon / (2 * math.pi) + h0
    return (-2 * alphas * log_delta + 4 * math.pi * alphas * h0) / den


def mean_field_masses(m, tau, alpha1):
    if m % 2 == 0:
        lam0 = 2 * math.pi * m * (alpha1 + (m - 2) * (1 + 1 / tau))
        lam1 = 2 * math.pi * m * (alpha1 * tau + m * (1 + tau)) / tau ** 2
    else:
        lam0 = 2 * math.pi * (m + 1) * (alpha1 + (m - 1) * (1 + 1 / tau))
        lam1 = 2 * math.pi * (m - 1) * (alpha1 * tau + (m - 1) * (1 + tau)) / tau ** 2
    return lam0, lam1


def compute_eta(alphas, betas):
    """Expansion exponent: half the smallest admissible bound."""
    m = len(alphas)
    a, b = alphas, betas
    r = b / a
    e1 = (b[0] + 1) / (a[0] - 2)
    cands = [1.0, e1]
    cands += [a[j] * (e1 - r[j]) for j in range(m)]
    cands += [0.5 * a[i] * (r[0] - r[i]) for i in range(1, m)]
    for i in range(m):
        for j in range(m):
            if i < j:
                cands.append(0.5 * a[i] * (r[i] - r[j]))
            elif j < i:
                cands.append(0.5 * a[i] * (r[j] - r[i]))
    eta = 0.5 * min(cands)
    if not eta > 0:
        raise ArithmeticError("no positive expansion exponent")
    return eta


@dataclass(frozen=True)
class CascadeTable:
    config: TowerConfig
    nu: np.ndarray
    sigma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    a: np.ndarray
    log_d: np.ndarray
    log_delta: np.ndarray
    log_epsilon: float
    gamma: np.ndarray
    log_delta0: float
    log_delta_m_plus_1: float
    lambda0: float
    lambda1: float
    eta: float
    gamma0: float
    gamma_tilde: np.ndarray = field(repr=False)

    @property
    def m(self):
        return self.config.m

    @property
    def tau(self):
        return self.config.tau

    @property
    def delta(self):
        return np.exp(self.log_delta)

    @property
    def epsilon(self):
        return math.exp(self.log_epsilon)

    @property
    def delta0(self):
        return math.exp(self.log_delta0)

    @property
    def delta_m_plus_1(self):
        return math.exp(self.log_delta_m_plus_1)

    @property
    def coeffs(self):
        """Tower weights (-1)^{i+1} / tau^{nu(i)}."""
        return _alt(self.m) / _tau_nu(self.m, self.tau)

    @property
    def log_boundaries(self):
        """log of the annulus radii sqrt(delta_{i-1} delta_i), i = 1..m+1."""
        ld = np.concatenate(([self.log_delta0], self.log_delta, [self.log_delta_m_plus_1]))
        return 0.5 * (ld[:-1] + ld[1:])

    @property
    def farfield_coefficient(self):
        """Predicted c in u ~ c log r away from the hole (unit disk)."""
        m = self.m
        return (-1) ** m * (self.alpha[-1] + 2) / self.tau ** nu(m)

    def scalars(self):
        c = self.config
        return {
            "m": c.m, "tau": c.tau, "alpha1": c.alpha1, "rho": c.rho,
            "v0_at_0": c.v0_at_0, "v1_at_0": c.v1_at_0, "h0": c.h0,
            "nu_coeff": c.nu_coeff, "domain_radius": c.domain_radius,
            "log_epsilon": self.log_epsilon, "epsilon": self.epsilon,
            "log_delta0": self.log_delta0, "log_delta_m_plus_1": self.log_delta_m_plus_1,
            "lambda0": self.lambda0, "lambda1": self.lambda1,
            "eta": self.eta, "gamma0": self.gamma0,
        }

    def rows(self):
        cols = ("i", "nu", "sigma", "alpha", "beta", "a", "log_d", "log_delta",
                "delta", "gamma", "gamma_tilde")
        data = [np.arange(1, self.m + 1), self.nu, self.sigma, self.alpha, self.beta,
                self.a, self.log_d, self.log_delta, self.delta, self.gamma, self.gamma_tilde]
        return cols, [tuple(col[k] for col in data) for k in range(self.m)]


def build_table(config: TowerConfig) -> CascadeTable:
    m, tau = config.m, config.tau
    idx = _idx(m)
    al = compute_alphas(m, tau, config.alpha1)
    be = compute_betas(m, tau)
    a, log_d = compute_a_and_d(config, al)
    log_rho = math.log(config.rho)
    log_delta = (log_d + be * log_rho) / al
    le = compute_log_epsilon(config, al)
    gam = compute_gammas(log_delta, al, le, config.h0)
    den = -le / (2 * math.pi) + config.h0
    gamma0 = 2.0 / den
    gt = ((4 / 3) * al * log_delta + 8 / 3 + (8 * math.pi / 3) * al * config.h0) / den
    lam0, lam1 = mean_field_masses(m, tau, config.alpha1)
    log_M0 = math.log(config.domain_radius)
    return CascadeTable(
        config=config,
        nu=np.array([nu(i) for i in idx]),
        sigma=np.array([sigma(i) for i in idx]),
        alpha=al, beta=be, a=a, log_d=log_d, log_delta=log_delta,
        log_epsilon=le, gamma=gam,
        log_delta0=2 * le - log_delta[0],
        log_delta_m_plus_1=2 * log_M0 - log_delta[-1],
        lambda0=lam0, lambda1=lam1,
        eta=compute_eta(al, be), gamma0=gamma0, gamma_tilde=gt,
    )


def _rel(lhs, rhs):
    lhs = np.atleast_1d(np.asarray(lhs, dtype=float))
    rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1.0)
    return float(np.max(np.abs(lhs - rhs) / scale)) if lhs.size else 0.0


@dataclass
class IdentityReport:
    errors: dict
    tol: float = IDENTITY_TOL

    @property
    def passed(self):
        return all(e <= self.tol for e in self.errors.values())

    @property
    def worst(self):
        return max(self.errors.values())


def identity_suite(table: CascadeTable, tol=IDENTITY_TOL) -> IdentityReport:
    """Evaluate both sides of every cascade identity.

    Relative errors are scaled by max(|lhs|, |rhs|, 1) so that identities
    whose exact value is zero are measured absolutely.
    """
    cfg = table.config
    m, tau = cfg.m, cfg.tau
    al, be, a, ld = table.alpha, table.beta, table.a, table.log_d
    tn = _tau_nu(m, tau)
    sgn = _alt(m)
    log_rho = math.log(cfg.rho)
    err = {}

    # alpha recurrence
    lhs = [(al[j - 1] + 2) * tau ** ((-1) ** (j + 1)) + 2 for j in range(1, m)]
    err["alpha_recurrence"] = _rel(lhs, al[1:])

    # partial alternating sums of alpha
    lhs, rhs = [], []
    for j in range(1, m + 1):
        lhs.append(np.sum(sgn[:j] * al[:j] / tn[:j]))
        rhs.append(-j - j / tau if j % 2 == 0 else cfg.alpha1 + j - 1 + (j - 1) / tau)
    err["alpha_partial_sums"] = _rel(lhs, rhs)

    # far-field mass balance
    lhs = 4 * math.pi * np.sum(sgn * al / tn) - 2 * math.pi * (cfg.alpha1 - 2)
    rhs = (-1) ** (m + 1) * 2 * math.pi / tn[-1] * (al[-1] + 2)
    err["farfield_balance"] = _rel(lhs, rhs)

    # beta recurrence
    lhs, rhs = [], []
    for l in range(2, m + 1):
        lhs.append(be[l - 1])
        rhs.append(tau * be[l - 2] - tau - 1 if l % 2 == 0 else be[l - 2] / tau - 1 - 1 / tau)
    err["beta_recurrence"] = _rel(lhs, rhs)

    # beta alternating tail
    lhs, rhs = [], []
    for l in range(1, m):
        lhs.append((be[l - 1] - 1) / (2 * tn[l - 1]))
        j = np.arange(l + 1, m + 1)
        rhs.append((-1) ** nu(l) * np.sum((-1.0) ** j * be[j - 1] / tn[j - 1]))
    err["beta_alternating_tail"] = _rel(lhs, rhs)

    # log d in terms of later log d
    lhs, rhs = [], []
    for l in range(1, m):
        s = 0.0
        for i in range(1, m - l + 1):
            w = tau ** sigma(i) if l % 2 == 0 else 1 / tau ** sigma(i)
            s += (-1) ** (i + 1) * w * ld[l + i - 1]
        lhs.append(ld[l - 1])
        rhs.append(a[l - 1] + 2 * s)
    err["log_d_recursion"] = _rel(lhs, rhs)

    # log d alternating tail
    lhs, rhs = [], []
    for l in range(1, m):
        lhs.append((ld[l - 1] - a[l - 1]) / (2 * tn[l - 1]))
        j = np.arange(l + 1, m + 1)
        rhs.append((-1) ** nu(l) * np.sum((-1.0) ** j * ld[j - 1] / tn[j - 1]))
    err["log_d_alternating_tail"] = _rel(lhs, rhs)

    # hole balance
    lhs = np.sum(sgn * table.gamma / tn)
    err["gamma_balance"] = _rel(lhs, 2 * math.pi * (cfg.alpha1 - 2))

    # tail sums of alpha log delta
    lhs, rhs = [], []
    for j in range(1, m + 1):
        i = np.arange(j + 1, m + 1)
        lhs.append(2 * np.sum((-1.0) ** i * al[i - 1] * table.log_delta[i - 1] / tn[i - 1]))
        rhs.append((-1) ** (j + 1) / tn[j - 1]
                   * (al[j - 1] * table.log_delta[j - 1] - a[j - 1] - log_rho))
    err["alpha_log_delta_tail"] = _rel(lhs, rhs)

    # exponent of rho in epsilon^(alpha1-2), measured from two rho values
    d = 1.0
    le1 = _log_epsilon_at(cfg, al, cfg.rho)
    le2 = _log_epsilon_at(cfg, al, cfg.rho * math.exp(d))
    slope = (cfg.alpha1 - 2) * (le2 - le1) / d
    err["epsilon_exponent"] = _rel([slope, epsilon_rho_exponent(m, tau)], [be[0] + 1] * 2)

    # masses vs alpha sums over parities
    odd = np.sum(al[0::2])
    even = np.sum(al[1::2])
    err["mass_alpha_sums"] = _rel([table.lambda0, table.lambda1 * tau ** 2],
                                  [4 * math.pi * odd, 4 * math.pi * even])
    return IdentityReport(err, tol)
