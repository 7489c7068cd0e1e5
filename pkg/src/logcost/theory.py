"""Closed-form performance engine for the logarithmic-cost family.

Evaluates the Gaussian moment pair (h_g, h_u) behind the mean-square
analysis, runs transient learning-curve recursions at three levels of
fidelity, and provides steady-state, tracking, stability, and impulsive
noise predictions.  Only the five analyzed kinds (LMS, LMF, SA, LMLS,
LLAD) carry moment rows; Huber, arctan and the normalized variants are
rejected rather than extrapolated.

The moment pair is defined against a zero-mean Gaussian error e with
power sigma_e_sq: h_g = E[e.g(e)] / sigma_e_sq and h_u = E[g(e)^2],
where g is the error gain of the kind (see filters.update_gain).  The
closed forms are parameterized by lam = 1/(2*alpha*sigma_e_sq) and
kappa = 1/(2*alpha^2*sigma_e_sq), so lam = alpha*kappa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz
from scipy.optimize import minimize_scalar

from . import filters, specfun
from .filters import LLAD, LMF, LMLS, LMS, SA, AlgorithmSpec

TABLE_KINDS = (LMS, LMF, SA, LMLS, LLAD)

# closed forms for the log kinds cancel catastrophically once the error
# power is small against 1/alpha; alternating moment series take over
_LMLS_SERIES_MIN_LAMBDA = 45.0
_LLAD_SERIES_MIN_KAPPA = 50.0
_SERIES_REL_FLOOR = 1e-18

_FIXED_POINT_DAMPING = 0.5
_FIXED_POINT_TOL = 1e-12
_FIXED_POINT_MAX_ITER = 10_000

DEFAULT_MSD_CEILING = 1e9

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class TheoryValidityError(ValueError):
    """Requested operating point lies outside the analysis validity region."""


@dataclass(frozen=True)
class EnvironmentStats:
    """Second-order description of the operating environment.

    R is the regressor autocorrelation matrix (symmetric positive
    definite), noise_var the measurement-noise power, tracking_Q_trace
    the trace of the random-walk increment covariance when the optimum
    drifts (zero for a fixed optimum).
    """

    R: np.ndarray
    noise_var: float
    tracking_Q_trace: float = 0.0
    filter_order: int | None = None

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError(f"R must be a square matrix, got shape {R.shape}")
        if not np.allclose(R, R.T, rtol=1e-10, atol=1e-14):
            raise ValueError("R must be symmetric")
        if np.linalg.eigvalsh(R)[0] <= 0.0:
            raise ValueError("R must be positive definite")
        if self.noise_var < 0.0:
            raise ValueError(f"noise_var must be >= 0, got {self.noise_var}")
        if self.tracking_Q_trace < 0.0:
            raise ValueError(f"tracking_Q_trace must be >= 0, got {self.tracking_Q_trace}")
        p = R.shape[0]
        if self.filter_order is not None and self.filter_order != p:
            raise ValueError(f"filter_order {self.filter_order} does not match R shape {R.shape}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "filter_order", p)

    @property
    def trace_r(self) -> float:
        return float(np.trace(self.R))

    @classmethod
    def white(cls, order, sigma_x_sq, noise_var, tracking_Q_trace=0.0):
        """Environment with i.i.d. regressor entries of power sigma_x_sq."""
        if sigma_x_sq <= 0.0:
            raise ValueError(f"sigma_x_sq must be > 0, got {sigma_x_sq}")
        return cls(sigma_x_sq * np.eye(order), noise_var, tracking_Q_trace)

    @classmethod
    def ar1(cls, order, rho, sigma_x_sq, noise_var, tracking_Q_trace=0.0):
        """Environment whose regressor is a first-order autoregression.

        Autocorrelation sigma_x_sq * rho^|i-j|, the stationary covariance
        of u_k = rho*u_{k-1} + sigma_x*sqrt(1-rho^2)*eps_k.
        """
        if not -1.0 < rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {rho}")
        if sigma_x_sq <= 0.0:
            raise ValueError(f"sigma_x_sq must be > 0, got {sigma_x_sq}")
        first_row = sigma_x_sq * rho ** np.arange(order)
        return cls(toeplitz(first_row), noise_var, tracking_Q_trace)


@dataclass(frozen=True)
class HPair:
    """Gaussian moment pair of an error gain, with its shape arguments."""

    h_g: float
    h_u: float
    lam: float
    kappa: float


@dataclass(frozen=True)
class TheoryCurve:
    """Predicted learning curves plus the analytic steady state.

    msd and emse run per iteration, recorded before each update.  The
    steady fields hold the fixed-point prediction (NaN when the step
    size lies outside the validity region).  diverged marks a recursion
    that left [0, ceiling]; the series are then truncated at the last
    recorded value.
    """

    msd: np.ndarray
    emse: np.ndarray
    steady_msd: float
    steady_emse: float
    diverged: bool = False


def _lmls_series(sigma_e_sq, alpha):
    # alternating moment expansions in s = alpha*sigma_e^2, truncated at
    # the smallest term; below s ~ 1/90 that term is already ~1e-19
    s = alpha * sigma_e_sq
    g_total = 0.0
    term = 3.0 * s
    sign = 1.0
    k = 1
    while True:
        g_total += sign * term
        nxt = term * (2 * k + 3) * s
        if nxt >= term or nxt < _SERIES_REL_FLOOR * abs(g_total):
            break
        term = nxt
        sign = -sign
        k += 1
    u_total = 0.0
    term = 15.0 * s * s
    sign = 1.0
    k = 0
    while True:
        u_total += sign * term
        nxt = term * (k + 2) * (2 * k + 7) * s / (k + 1)
        if nxt >= term or nxt < _SERIES_REL_FLOOR * abs(u_total):
            break
        term = nxt
        sign = -sign
        k += 1
    return g_total, sigma_e_sq * u_total


def _llad_series(sigma_e_sq, alpha):
    # both sums share the terms c_{k+2} t^k built from the absolute
    # Gaussian moments c_m = (m-1) c_{m-2}, c_2 = 1, c_3 = 2*sqrt(2/pi)
    t = alpha * math.sqrt(sigma_e_sq)
    even = 1.0
    odd = 2.0 * _SQRT_2_OVER_PI
    g_total = 0.0
    u_total = 0.0
    sign = 1.0
    tk = 1.0
    prev = math.inf
    k = 0
    while True:
        cm = even if k % 2 == 0 else odd
        term = cm * tk
        if term >= prev or (k > 0 and term < _SERIES_REL_FLOOR * abs(g_total)):
            break
        g_total += sign * term
        u_total += sign * (k + 1) * term
        if k % 2 == 0:
            even = (k + 3) * even
        else:
            odd = (k + 3) * odd
        prev = term
        sign = -sign
        tk *= t
        k += 1
    return alpha * g_total, alpha * alpha * sigma_e_sq * u_total


def h_pair(kind: str, sigma_e_sq: float, alpha: float) -> HPair:
    """Moment pair (h_g, h_u) of the given kind at error power sigma_e_sq."""
    if sigma_e_sq <= 0.0:
        raise ValueError(f"sigma_e_sq must be > 0, got {sigma_e_sq}")
    if alpha <= 0.0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    s2 = float(sigma_e_sq)
    lam = 1.0 / (2.0 * alpha * s2)
    kap = 1.0 / (2.0 * alpha * alpha * s2)
    if kind == LMS:
        h_g, h_u = 1.0, s2
    elif kind == LMF:
        h_g, h_u = 3.0 * s2, 15.0 * (s2 * s2 * s2)
    elif kind == SA:
        h_g, h_u = _SQRT_2_OVER_PI / math.sqrt(s2), 1.0
    elif kind == LMLS:
        if lam >= _LMLS_SERIES_MIN_LAMBDA:
            h_g, h_u = _lmls_series(s2, alpha)
        else:
            s_val = specfun.scaled_erfc_combo(lam)
            h_g = 1.0 - 2.0 * lam * (1.0 - s_val)
            h_u = s2 * (1.0 - 2.0 * lam * (lam + 2.0) + lam * (2.0 * lam + 5.0) * s_val)
    elif kind == LLAD:
        if kap >= _LLAD_SERIES_MIN_KAPPA:
            h_g, h_u = _llad_series(s2, alpha)
        else:
            m_val = specfun.scaled_erfi_ei_combo(kap)
            h_g = _SQRT_2_OVER_PI / math.sqrt(s2) * (1.0 - math.sqrt(kap * math.pi) + kap * m_val)
            h_u = 1.0 - 2.0 * kap + 2.0 * math.sqrt(kap / math.pi) * (1.0 + (kap - 1.0) * m_val)
    else:
        raise ValueError(f"no closed-form moment pair for kind {kind!r}")
    return HPair(h_g, h_u, lam, kap)


def _transient_pair(kind, sigma_e_sq, alpha):
    # zero error power means a stalled filter: no drive through the gain
    if sigma_e_sq <= 0.0:
        return 0.0, 0.0
    hp = h_pair(kind, sigma_e_sq, alpha)
    return hp.h_g, hp.h_u


def _steady_pair(kind, sigma_e_sq, alpha):
    """Small-error moment forms used by the steady-state fixed point.

    For the log kinds these are the vanishing-error-power limits of the
    full pair (the regime where the closed-form steady-state expressions
    hold); for LMS/LMF/SA the full forms are already polynomial.
    """
    s2 = sigma_e_sq
    if kind == LMS:
        return 1.0, s2
    if kind == LMF:
        return 3.0 * s2, 15.0 * (s2 * s2 * s2)
    if kind == SA:
        return _SQRT_2_OVER_PI / math.sqrt(s2), 1.0
    if kind == LMLS:
        return 3.0 * alpha * s2, 15.0 * alpha * alpha * (s2 * s2 * s2)
    if kind == LLAD:
        return alpha, alpha * alpha * s2
    raise ValueError(f"no closed-form moment pair for kind {kind!r}")


def _attached_steady(spec, mu, env):
    try:
        zeta, eta = steady_state_fixed_point(spec, mu, env)
    except TheoryValidityError:
        zeta = eta = math.nan
    return zeta, eta


def transient_white(
    spec: AlgorithmSpec,
    mu: float,
    sigma_x_sq: float,
    noise_var: float,
    p: int,
    msd0: float,
    n_iter: int,
    *,
    msd_ceiling: float = DEFAULT_MSD_CEILING,
) -> TheoryCurve:
    """Scalar MSD recursion for an i.i.d. regressor of power sigma_x_sq.

    Iterates MSD_{t+1} = (1 - 2*mu*sigma_x_sq*h_g) MSD_t
    + mu^2*p*sigma_x_sq*h_u with the moment pair re-evaluated at
    sigma_e_sq = sigma_x_sq*MSD_t + noise_var every step.  The EMSE
    series is sigma_x_sq times the MSD series.
    """
    if mu <= 0.0 or sigma_x_sq <= 0.0 or noise_var < 0.0 or msd0 < 0.0:
        raise ValueError("mu and sigma_x_sq must be > 0, noise_var and msd0 >= 0")
    if p < 1 or n_iter < 1:
        raise ValueError("p and n_iter must be >= 1")
    msd = np.empty(n_iter)
    cur = float(msd0)
    diverged = False
    count = 0
    for t in range(n_iter):
        msd[t] = cur
        count = t + 1
        if not (0.0 <= cur <= msd_ceiling):
            diverged = True
            break
        s2 = sigma_x_sq * cur + noise_var
        h_g, h_u = _transient_pair(spec.kind, s2, spec.alpha)
        cur = (1.0 - 2.0 * mu * sigma_x_sq * h_g) * cur + mu * mu * p * sigma_x_sq * h_u
    msd = msd[:count]
    env = EnvironmentStats.white(p, sigma_x_sq, noise_var)
    zeta, eta = _attached_steady(spec, mu, env)
    return TheoryCurve(msd, sigma_x_sq * msd, eta, zeta, diverged)


def transient_statespace(
    spec: AlgorithmSpec,
    mu: float,
    env: EnvironmentStats,
    initial_deviation_covariance: np.ndarray,
    n_iter: int,
    *,
    msd_ceiling: float = DEFAULT_MSD_CEILING,
) -> TheoryCurve:
    """Learning curves for a correlated regressor via the compact state.

    Tracks the vector W[k] = E||w_tilde||^2 weighted by the k-th power
    of R, k = 0..p-1, closing the recursion with the characteristic
    polynomial of R (the p-th power is a combination of the lower ones).
    W[0] is the MSD and W[1] the EMSE.
    """
    if mu <= 0.0 or n_iter < 1:
        raise ValueError("mu must be > 0 and n_iter >= 1")
    R = env.R
    p = env.filter_order
    C0 = np.asarray(initial_deviation_covariance, dtype=float)
    if C0.shape != (p, p):
        raise ValueError(f"initial_deviation_covariance must be {p}x{p}, got {C0.shape}")
    eigs = np.linalg.eigvalsh(R)
    # np.poly returns the monic characteristic coefficients highest first
    asc = np.poly(eigs)[1:][::-1]
    N = np.zeros((p, p))
    for k in range(p - 1):
        N[k, k + 1] = 1.0
    N[p - 1, :] = -asc
    Y = np.array([np.sum(eigs ** (k + 1)) for k in range(p)])
    W = np.empty(p)
    Mk = C0.copy()
    for k in range(p):
        W[k] = np.trace(Mk)
        if k < p - 1:
            Mk = R @ Mk

    msd = np.empty(n_iter)
    emse = np.empty(n_iter)
    r_scalar = R[0, 0]
    diverged = False
    count = 0
    for t in range(n_iter):
        m = W[0]
        e = W[1] if p > 1 else r_scalar * W[0]
        msd[t] = m
        emse[t] = e
        count = t + 1
        if not (0.0 <= m <= msd_ceiling):
            diverged = True
            break
        s2 = e + env.noise_var
        h_g, h_u = _transient_pair(spec.kind, s2, spec.alpha)
        W = W - (2.0 * mu * h_g) * (N @ W) + (mu * mu * h_u) * Y
    zeta, eta = _attached_steady(spec, mu, env)
    return TheoryCurve(msd[:count], emse[:count], eta, zeta, diverged)


def transient_matrix_oracle(
    spec: AlgorithmSpec,
    mu: float,
    env: EnvironmentStats,
    C0: np.ndarray,
    n_iter: int,
    *,
    msd_ceiling: float = DEFAULT_MSD_CEILING,
) -> TheoryCurve:
    """Full deviation-covariance recursion; cross-validates the state form.

    Evolves C_{t+1} = C_t - mu*h_g*(R C_t + C_t R) + mu^2*h_u*R and reads
    MSD = Tr(C), EMSE = Tr(R C).  Algebraically identical to
    transient_statespace, reimplemented at matrix level on purpose.
    """
    if mu <= 0.0 or n_iter < 1:
        raise ValueError("mu must be > 0 and n_iter >= 1")
    R = env.R
    p = env.filter_order
    C = np.array(C0, dtype=float)
    if C.shape != (p, p):
        raise ValueError(f"C0 must be {p}x{p}, got {C.shape}")
    if not np.allclose(C, C.T, rtol=1e-10, atol=1e-14):
        raise ValueError("C0 must be symmetric")
    msd = np.empty(n_iter)
    emse = np.empty(n_iter)
    diverged = False
    count = 0
    for t in range(n_iter):
        m = float(np.trace(C))
        e = float(np.sum(R * C))  # Tr(RC) for symmetric C
        msd[t] = m
        emse[t] = e
        count = t + 1
        if not (0.0 <= m <= msd_ceiling):
            diverged = True
            break
        s2 = e + env.noise_var
        h_g, h_u = _transient_pair(spec.kind, s2, spec.alpha)
        RC = R @ C
        C = C - mu * h_g * (RC + RC.T) + (mu * mu * h_u) * R
    zeta, eta = _attached_steady(spec, mu, env)
    return TheoryCurve(msd[:count], emse[:count], eta, zeta, diverged)


def steady_state_fixed_point(spec: AlgorithmSpec, mu: float, env: EnvironmentStats):
    """Steady-state (EMSE, MSD) from the implicit balance equation.

    Solves zeta = (mu/2) Tr(R) h_u(zeta + noise_var)/h_g(zeta + noise_var)
    by damped fixed-point iteration from zero, using the small-error
    moment forms of the kind.  Non-convergence signals a step size
    outside the analytic validity region.
    """
    if mu <= 0.0:
        raise ValueError(f"mu must be > 0, got {mu}")
    if spec.kind not in TABLE_KINDS:
        raise ValueError(f"no closed-form moment pair for kind {spec.kind!r}")
    tr_r = env.trace_r
    sn2 = env.noise_var
    half_step = 0.5 * mu * tr_r
    zeta = 0.0
    for _ in range(_FIXED_POINT_MAX_ITER):
        s2 = zeta + sn2
        if s2 <= 0.0:
            target = 0.0
        else:
            h_g, h_u = _steady_pair(spec.kind, s2, spec.alpha)
            target = half_step * h_u / h_g
        new = (1.0 - _FIXED_POINT_DAMPING) * zeta + _FIXED_POINT_DAMPING * target
        if not math.isfinite(new):
            raise TheoryValidityError(
                f"steady-state iteration diverged for {spec.kind} at mu={mu}"
            )
        # relative stop so tiny fixed points (small mu) keep full accuracy
        if abs(new - zeta) <= _FIXED_POINT_TOL * abs(new):
            zeta = new
            break
        zeta = new
    else:
        raise TheoryValidityError(
            f"steady-state iteration did not converge for {spec.kind} at mu={mu}"
        )
    eta = env.filter_order * zeta / tr_r
    return zeta, eta


def steady_state_lmls(mu: float, alpha: float, env: EnvironmentStats):
    """Closed-form LMLS steady state (the smaller quadratic root).

    Written with the conjugate of the naive root expression: with
    q = 5*alpha*mu*Tr(R)*noise_var, zeta = noise_var*q/(1 - q + sqrt(1 - 2q)),
    which keeps full precision where the direct subtraction loses it.
    """
    if mu <= 0.0 or alpha <= 0.0:
        raise ValueError("mu and alpha must be > 0")
    q = 5.0 * alpha * mu * env.trace_r * env.noise_var
    radicand = 1.0 - 2.0 * q
    if radicand < 0.0:
        raise TheoryValidityError(
            f"step size outside validity: 10*alpha*mu*Tr(R)*noise_var = {2.0 * q} > 1"
        )
    zeta = env.noise_var * q / (1.0 - q + math.sqrt(radicand))
    eta = env.filter_order * zeta / env.trace_r
    return zeta, eta


def steady_state_llad(mu: float, alpha: float, env: EnvironmentStats):
    """Closed-form LLAD steady state; the LMS value at effective step mu*alpha."""
    if mu <= 0.0 or alpha <= 0.0:
        raise ValueError("mu and alpha must be > 0")
    denom = 2.0 - mu * alpha * env.trace_r
    if denom <= 0.0:
        raise TheoryValidityError(
            f"step size outside validity: mu*alpha*Tr(R) = {mu * alpha * env.trace_r} >= 2"
        )
    zeta = mu * alpha * env.trace_r * env.noise_var / denom
    eta = env.filter_order * zeta / env.trace_r
    return zeta, eta


def tracking_emse(kind: str, mu: float, alpha: float, env: EnvironmentStats) -> float:
    """Steady excess error while the optimum performs a random walk.

    Balances the adaptation term (growing in mu) against the lag term
    Tr(Q)/mu; only LMLS and LLAD are covered.
    """
    if mu <= 0.0 or alpha <= 0.0:
        raise ValueError("mu and alpha must be > 0")
    sn2 = env.noise_var
    if sn2 <= 0.0:
        raise ValueError(f"noise_var must be > 0 for tracking, got {sn2}")
    tr_r = env.trace_r
    lag = env.tracking_Q_trace / mu
    if kind == LMLS:
        return (3.0 * alpha * mu * sn2 * sn2 * tr_r + lag) / (6.0 * sn2)
    if kind == LLAD:
        denom = 2.0 - alpha * mu * tr_r
        if denom <= 0.0:
            raise TheoryValidityError(
                f"step size outside validity: mu*alpha*Tr(R) = {mu * alpha * tr_r} >= 2"
            )
        return (alpha * mu * sn2 * tr_r + lag) / denom
    raise ValueError(f"tracking form only covers LMLS and LLAD, got {kind!r}")


def tracking_optimal_mu(kind: str, alpha: float, env: EnvironmentStats) -> float:
    """Step size minimizing tracking_emse, by 1-D search over log10(mu)."""
    if env.tracking_Q_trace <= 0.0:
        raise ValueError("tracking_Q_trace must be > 0: without drift the optimum is mu -> 0")
    hi = 6.0
    if kind == LLAD:
        hi = math.log10(2.0 / (alpha * env.trace_r)) - 1e-9
    res = minimize_scalar(
        lambda exp10: tracking_emse(kind, 10.0**exp10, alpha, env),
        bounds=(-12.0, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(10.0**res.x)


def stability_beta(
    sigma_e_sq: float,
    alpha: float,
    n_samples: int,
    *,
    rng: np.random.Generator | None = None,
    chunk: int = 1 << 20,
) -> float:
    """Monte Carlo estimate of the LMLS stability ratio.

    beta = E[e.g(e)] / E[g(e)^2] over Gaussian errors; the analysis
    shows beta >= 1, which widens the usable step-size range against
    plain LMS.
    """
    if sigma_e_sq <= 0.0:
        raise ValueError(f"sigma_e_sq must be > 0, got {sigma_e_sq}")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if rng is None:
        rng = np.random.default_rng()
    spec = AlgorithmSpec(LMLS, alpha=alpha)
    sig = math.sqrt(sigma_e_sq)
    num = 0.0
    den = 0.0
    left = int(n_samples)
    while left > 0:
        m = min(chunk, left)
        e = sig * rng.standard_normal(m)
        g = filters.update_gain(spec, e)
        num += float(np.sum(e * g))
        den += float(np.sum(g * g))
        left -= m
    return num / den


def impulsive_emse_llad(
    mu: float,
    alpha: float,
    env: EnvironmentStats,
    nu_i: float,
    sigma_no_sq: float,
    sigma_ni_sq: float,
) -> float:
    """LLAD steady EMSE under Bernoulli-gated impulsive noise.

    The background component has power sigma_no_sq; with probability
    nu_i an impulse of power sigma_ni_sq is added, so the total noise
    power is sigma_no_sq + sigma_ni_sq (env.noise_var is not consulted
    here).  At nu_i = 0 this reduces exactly to steady_state_llad.
    """
    if mu <= 0.0 or alpha <= 0.0:
        raise ValueError("mu and alpha must be > 0")
    if not 0.0 <= nu_i < 1.0:
        raise ValueError(f"nu_i must lie in [0, 1), got {nu_i}")
    if sigma_no_sq < 0.0 or sigma_ni_sq < 0.0:
        raise ValueError("noise powers must be >= 0")
    tr_r = env.trace_r
    numer = mu * tr_r * (nu_i + alpha * alpha * (1.0 - nu_i) * sigma_no_sq)
    denom = alpha * (1.0 - nu_i) * (2.0 - alpha * mu * tr_r)
    if nu_i > 0.0:
        sn2 = sigma_no_sq + sigma_ni_sq
        if sn2 <= 0.0:
            raise ValueError("total noise power must be > 0 when nu_i > 0")
        denom += math.sqrt(8.0 / math.pi) * nu_i / math.sqrt(sn2)
    if denom <= 0.0:
        raise TheoryValidityError(
            f"impulsive steady state invalid: denominator {denom} <= 0"
        )
    return numer / denom


def alpha_opt(nu_i: float, sigma_no_sq: float) -> float:
    """Design parameter minimizing the impulsive steady EMSE (approximate).

    alpha_opt = sqrt(nu_i/(1 - nu_i)) / sigma_no; the exact minimizer of
    impulsive_emse_llad lands within a few tens of percent of this.
    """
    if not 0.0 < nu_i < 1.0:
        raise ValueError(f"nu_i must lie in (0, 1), got {nu_i}")
    if sigma_no_sq <= 0.0:
        raise ValueError(f"sigma_no_sq must be > 0, got {sigma_no_sq}")
    return math.sqrt(nu_i / (1.0 - nu_i)) / math.sqrt(sigma_no_sq)


def price_factorization_check(
    n_samples: int,
    correlation: float,
    *,
    kind: str = LLAD,
    alpha: float = 1.0,
    rng: np.random.Generator | None = None,
    chunk: int = 1 << 20,
):
    """Both sides of the Gaussian factorization E[x.g(y)] = (E[xy]/E[y^2]) E[y.g(y)].

    Draws zero-mean unit-variance jointly Gaussian pairs at the given
    correlation, evaluates the gain of the requested kind, and returns
    (lhs, rhs) estimated from the same sample for assertion of
    closeness.  correlation = +/-1 degenerates to x = +/-y, where the
    identity holds exactly.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if not -1.0 <= correlation <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {correlation}")
    if rng is None:
        rng = np.random.default_rng()
    spec = AlgorithmSpec(kind, alpha=alpha)
    rho = float(correlation)
    orth = math.sqrt(max(0.0, 1.0 - rho * rho))
    s_xy = s_yy = s_xg = s_yg = 0.0
    left = int(n_samples)
    while left > 0:
        m = min(chunk, left)
        z1 = rng.standard_normal(m)
        z2 = rng.standard_normal(m)
        y = z1
        x = rho * z1 + orth * z2
        g = filters.update_gain(spec, y)
        s_xy += float(np.sum(x * y))
        s_yy += float(np.sum(y * y))
        s_xg += float(np.sum(x * g))
        s_yg += float(np.sum(y * g))
        left -= m
    n = float(n_samples)
    lhs = s_xg / n
    rhs = (s_xy / s_yy) * (s_yg / n)
    return lhs, rhs
