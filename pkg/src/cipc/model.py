"""Outage model of truncated channel-inversion power control (CIPC).

The transmitter inverts the MISO channel so that the receive power is always
the agreed constant ``q``; it stays silent when that would need more than
``p_max``. With ``N_t`` i.i.d. Rayleigh antennas the channel gain is
Gamma(N_t, 1), so

    p_t(q)     = Gamma(N_t, q/p_max) / Gamma(N_t)        (transmit probability)
    eps(q)     = Q(A(q)),  A = sqrt(T) [ln(1+g) - R ln 2] / sqrt(1 - (1+g)^-2)
    outage(q)  = eps(q) p_t(q) + 1 - p_t(q)

with g = q / noise_var. Derivative helpers and the convexity interval assume
``noise_var == 1`` and refuse anything else.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

from cipc import specfun
from cipc.errors import DomainError, UnsupportedConfigError

LN2 = math.log(2.0)
LOG2E = 1.0 / LN2
UNDERFLOW_FLOOR = 1e-300
# largest evaluation point inside the open interval (lo, hi)
KNEE_MARGIN = 1e-12


@dataclass(frozen=True)
class SystemConfig:
    """One link scenario. ``p_max`` is linear power; it may be ``inf``."""

    n_t: int
    blocklength: int
    rate: float
    p_max: float
    noise_var: float = 1.0

    def __post_init__(self):
        if isinstance(self.n_t, bool) or not isinstance(self.n_t, int) or self.n_t < 1:
            raise DomainError(f"n_t must be a positive integer, got {self.n_t!r}")
        if (
            isinstance(self.blocklength, bool)
            or not isinstance(self.blocklength, int)
            or self.blocklength < 1
        ):
            raise DomainError(f"blocklength must be a positive integer, got {self.blocklength!r}")
        for name in ("rate", "p_max", "noise_var"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and value > 0):
                raise DomainError(f"{name} must be > 0, got {value!r}")
        for name in ("rate", "noise_var"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    @property
    def q_rate(self) -> float:
        """Smallest receive power meeting R <= log2(1 + q/noise_var)."""
        try:
            return self.noise_var * math.expm1(self.rate * LN2)
        except OverflowError:
            return math.inf

    @property
    def knee(self) -> float:
        """p_max (N_t - 1): inflection point of the transmit probability."""
        if self.n_t == 1:
            return 0.0
        return self.p_max * (self.n_t - 1)

    def replace(self, **changes) -> "SystemConfig":
        fields = dict(
            n_t=self.n_t,
            blocklength=self.blocklength,
            rate=self.rate,
            p_max=self.p_max,
            noise_var=self.noise_var,
        )
        fields.update(changes)
        return SystemConfig(**fields)


@dataclass(frozen=True)
class OutageBreakdown:
    q: float
    snr: float
    eps: float
    pt: float
    outage: float
    rate_feasible: bool
    eps_underflowed: bool


@dataclass(frozen=True)
class ConvexInterval:
    q0: float
    q_rate: float
    lo: float
    hi: float
    nonempty: bool

    @property
    def hi_admissible(self) -> float:
        """Largest point used by certified routines; hi itself is excluded."""
        return self.hi - KNEE_MARGIN * self.hi

    def __contains__(self, q: float) -> bool:
        return self.nonempty and self.lo < q < self.hi


def _check_q(q: float, allow_zero: bool = False) -> float:
    q = float(q)
    if math.isnan(q) or q < 0.0 or (q == 0.0 and not allow_zero):
        raise DomainError(f"receive power q must be {'>=' if allow_zero else '>'} 0, got {q}")
    return q


def _require_unit_noise(cfg: SystemConfig) -> None:
    if cfg.noise_var != 1.0:
        raise UnsupportedConfigError(
            f"derivative and convexity results assume noise_var == 1, got {cfg.noise_var}"
        )


# -- decoding error -----------------------------------------------------------

def normal_approx_argument(cfg: SystemConfig, q: float) -> float:
    """(C(g) - R) / sqrt(V(g)/T) in bits, using the log2 capacity and dispersion."""
    q = _check_q(q)
    snr = q / cfg.noise_var
    capacity = math.log1p(snr) * LOG2E
    dispersion = LOG2E**2 * (snr * (snr + 2.0)) / (1.0 + snr) ** 2
    return (capacity - cfg.rate) / math.sqrt(dispersion / cfg.blocklength)


def _a_of_snr(cfg: SystemConfig, snr: float) -> float:
    # s(g) = sqrt((1+g)^2 - 1); sqrt(1 - (1+g)^-2) = s / (1+g)
    s = math.sqrt(snr * (snr + 2.0))
    return math.sqrt(cfg.blocklength) * (math.log1p(snr) - cfg.rate * LN2) * (1.0 + snr) / s


def decoding_error(cfg: SystemConfig, q: float) -> float:
    """Finite-blocklength decoding error at SNR q/noise_var (normal approximation)."""
    return specfun.gaussian_q(normal_approx_argument(cfg, q))


def decoding_error_ln_form(cfg: SystemConfig, q: float) -> float:
    """Same quantity written with natural logs, as in the closed-form outage."""
    q = _check_q(q)
    return specfun.gaussian_q(_a_of_snr(cfg, q / cfg.noise_var))


# -- transmit probability -------------------------------------------------------

def transmit_probability(cfg: SystemConfig, q: float) -> float:
    """P(||h||^2 >= q/p_max), the upper regularized gamma of order N_t."""
    q = _check_q(q, allow_zero=True)
    return specfun.upper_gamma_regularized(cfg.n_t, q / cfg.p_max)


def silence_probability(cfg: SystemConfig, q: float) -> float:
    """1 - p_t(q), computed without cancellation."""
    q = _check_q(q, allow_zero=True)
    return specfun.lower_gamma_regularized(cfg.n_t, q / cfg.p_max)


def outage_probability(cfg: SystemConfig, q: float) -> OutageBreakdown:
    q = _check_q(q)
    snr = q / cfg.noise_var
    eps = decoding_error(cfg, q)
    underflowed = eps < UNDERFLOW_FLOOR
    if underflowed:
        eps = 0.0
    pt = transmit_probability(cfg, q)
    outage = eps * pt + silence_probability(cfg, q)
    return OutageBreakdown(
        q=q,
        snr=snr,
        eps=eps,
        pt=pt,
        outage=min(1.0, outage),
        rate_feasible=cfg.rate <= math.log1p(snr) * LOG2E,
        eps_underflowed=underflowed,
    )


def outage_closed_form(cfg: SystemConfig, q: float) -> float:
    """Single-expression outage 1 - [1 - gamma(N_t, q/p_max)/Gamma(N_t)] [1 - Q(A)]."""
    q = _check_q(q)
    cdf = specfun.lower_gamma_regularized(cfg.n_t, q / cfg.p_max)
    return 1.0 - (1.0 - cdf) * (1.0 - decoding_error_ln_form(cfg, q))


# -- derivatives (noise_var == 1) -------------------------------------------------

def a_of_q(cfg: SystemConfig, q: float) -> float:
    _require_unit_noise(cfg)
    return _a_of_snr(cfg, _check_q(q))


def dA_dq(cfg: SystemConfig, q: float) -> float:
    _require_unit_noise(cfg)
    q = _check_q(q)
    s2 = q * (q + 2.0)
    margin = math.log1p(q) - cfg.rate * LN2
    return math.sqrt(cfg.blocklength) * (1.0 - margin / s2) / math.sqrt(s2)


def d2A_dq2(cfg: SystemConfig, q: float) -> float:
    _require_unit_noise(cfg)
    q = _check_q(q)
    s = math.sqrt(q * (q + 2.0))
    margin = math.log1p(q) - cfg.rate * LN2
    psi1 = 3.0 * margin / s**5
    psi2 = 3.0 * margin / s**3
    psi3 = 2.0 / s**3
    psi4 = 1.0 / s
    return math.sqrt(cfg.blocklength) / (1.0 + q) * (psi1 + psi2 - psi3 - psi4)


def d_eps_dq(cfg: SystemConfig, q: float) -> float:
    a = a_of_q(cfg, q)
    return -specfun.gaussian_pdf(a) * dA_dq(cfg, q)


def d2_eps_dq2(cfg: SystemConfig, q: float) -> float:
    a = a_of_q(cfg, q)
    slope = dA_dq(cfg, q)
    return specfun.gaussian_pdf(a) * (a * slope * slope - d2A_dq2(cfg, q))


def d_pt_dq(cfg: SystemConfig, q: float) -> float:
    q = _check_q(q)
    y = q / cfg.p_max
    log_density = -y + (cfg.n_t - 1) * math.log(y) - math.lgamma(cfg.n_t)
    return -math.exp(log_density) / cfg.p_max


def d2_pt_dq2(cfg: SystemConfig, q: float) -> float:
    q = _check_q(q)
    y = q / cfg.p_max
    log_mag = -y + (cfg.n_t + 1) * math.log(y) - 3.0 * math.log(q) - math.lgamma(cfg.n_t)
    return math.exp(log_mag) * (q - cfg.p_max * (cfg.n_t - 1))


def _decode_success(cfg: SystemConfig, q: float) -> float:
    # 1 - eps = Q(-A), free of cancellation when eps is close to 1
    return specfun.gaussian_q(-a_of_q(cfg, q))


def d_outage_dq(cfg: SystemConfig, q: float) -> float:
    pt = transmit_probability(cfg, q)
    return -d_pt_dq(cfg, q) * _decode_success(cfg, q) + pt * d_eps_dq(cfg, q)


def d2_outage_dq2(cfg: SystemConfig, q: float) -> float:
    pt = transmit_probability(cfg, q)
    return (
        -d2_pt_dq2(cfg, q) * _decode_success(cfg, q)
        + 2.0 * d_pt_dq(cfg, q) * d_eps_dq(cfg, q)
        + pt * d2_eps_dq2(cfg, q)
    )


# -- convexity interval ---------------------------------------------------------

def g_aux(x: float) -> float:
    """ln(x) / (x^2 - 1) for x > 1; decreases from 1/2 to 0."""
    x = float(x)
    if not x > 1.0:
        raise DomainError(f"g_aux needs x > 1, got {x}")
    return _g_of_q(x - 1.0)


def _g_of_q(q: float) -> float:
    if math.isinf(q):
        return 0.0
    return math.log1p(q) / (q * (q + 2.0))


@functools.lru_cache(maxsize=None)
def solve_q0() -> float:
    """Root of ln(1+Q) / ((1+Q)^2 - 1) = 1/3.

    Bisection on h(Q) = 3 ln(1+Q) - Q(Q+2), which is positive below the root
    and negative above it because G is strictly decreasing, then Newton polish.
    """

    def h(q):
        return 3.0 * math.log1p(q) - q * (q + 2.0)

    lo, hi = 1e-6, 2.0
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    for _ in range(3):
        q -= h(q) / (3.0 / (1.0 + q) - 2.0 * (q + 1.0))
    return q


def convex_interval(cfg: SystemConfig) -> ConvexInterval:
    _require_unit_noise(cfg)
    q0 = solve_q0()
    q_rate = cfg.q_rate
    lo = max(q0, q_rate)
    hi = cfg.knee
    return ConvexInterval(q0=q0, q_rate=q_rate, lo=lo, hi=hi, nonempty=lo < hi)


def pt_at_knee(n_t: int) -> float:
    """Transmit probability at q = p_max (N_t - 1); independent of p_max."""
    if isinstance(n_t, bool) or not isinstance(n_t, int) or n_t < 2:
        raise DomainError(f"pt_at_knee needs an integer n_t >= 2, got {n_t!r}")
    return specfun.upper_gamma_regularized(n_t, n_t - 1)
