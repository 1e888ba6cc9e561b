"""Closed-form coverage and rate engine.

Evaluates the pathloss-process description of the two-tier network
under independent exponential blocking (LOS probability exp(-r/mu)):
intensity measures and densities, tier association probabilities,
serving-pathloss PDFs, the conditional backhaul pathloss process,
SINR/SNR coverage integrals, load PMFs, and the rate-coverage series
for dynamic (IRA), static (ORA), fiber-backhauled (WB) and macro-only
resource models.

Every semi-infinite pathloss integral is evaluated in distance space,
where the integrands decay like exp(-pi*lambda*r^2) and quadrature is
well conditioned: a pathloss density splits exactly into a LOS part
2*pi*lam*r*exp(-r/mu) dr and an NLOS part 2*pi*lam*r*(1-exp(-r/mu)) dr
under the substitutions l = r^alpha_los / l = r^alpha_nlos.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import PchipInterpolator
from scipy.special import hyp2f1

from .config import NetworkConfig, interferer_gain_distribution
from .numerics import find_root, integrate, log_gamma

__all__ = [
    "ConvergenceError",
    "CalibrationError",
    "PathlossLaw",
    "Omega",
    "LoadPmf",
    "los_prob",
    "intensity_measure",
    "intensity_density",
    "association_probability",
    "split_association",
    "serving_pathloss_pdf",
    "conditional_backhaul_intensity",
    "mbs_coverage",
    "sbs_access_coverage",
    "backhaul_snr_ccdf",
    "joint_sbs_backhaul_coverage",
    "load_pmf",
    "load_pmf_table",
    "rate_coverage",
    "RateModel",
    "calibrate_mu",
    "CalibrationResult",
]

KM2_TO_M2 = 1e-6
_TIERS = ("m", "s")
# exp(-LAMBDA_CUTOFF) bounds every truncated serving-integral tail
_LAMBDA_CUTOFF = 60.0
_LOAD_TAIL = 1e-4
_LOAD_CAP = 2000


class ConvergenceError(RuntimeError):
    """A quadrature or series failed to reach its tolerance."""


class CalibrationError(RuntimeError):
    """mu calibration could not bracket a root."""


def los_prob(r, mu: float):
    """LOS probability exp(-r/mu) of a link of length r (meters)."""
    if mu <= 0:
        raise ValueError("mu must be > 0")
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("r must be >= 0")
    out = np.exp(-r_arr / mu)
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------
# Stable kernels for the intensity measure:
#   g(t) = 1 - (1+t) e^{-t}   (LOS mass integral / mu^2)
#   h(t) = t^2/2 - g(t)       (NLOS mass integral / mu^2)
# ----------------------------------------------------------------------

def _g_stable(t):
    t = np.asarray(t, dtype=float)
    small = t < 1e-3
    ts = np.where(small, t, 0.0)
    series = ts**2 / 2 - ts**3 / 3 + ts**4 / 8 - ts**5 / 30 + ts**6 / 144
    direct = -np.expm1(-t) - t * np.exp(-t)
    return np.where(small, series, direct)


def _h_stable(t):
    t = np.asarray(t, dtype=float)
    small = t < 1e-3
    ts = np.where(small, t, 0.0)
    series = ts**3 / 3 - ts**4 / 8 + ts**5 / 30 - ts**6 / 144
    direct = t**2 / 2 - _g_stable(t)
    return np.where(small, series, direct)


@dataclass(frozen=True)
class PathlossLaw:
    """Analytic description of the pathloss processes of both tiers.

    `lambda_m`/`lambda_s` are per m^2; exponents are keyed by link type
    and tier ('a_m', 'a_s', 'b_m', 'b_s'); `mu` in meters.
    """

    mu: float
    lambda_m: float
    lambda_s: float
    alpha_los: dict
    alpha_nlos: dict

    @classmethod
    def from_config(cls, config: NetworkConfig, mu: float | None = None) -> "PathlossLaw":
        return cls(
            mu=float(mu if mu is not None else config.require_mu()),
            lambda_m=config.lambda_m * KM2_TO_M2,
            lambda_s=config.lambda_s * KM2_TO_M2,
            alpha_los=dict(config.alpha_los),
            alpha_nlos=dict(config.alpha_nlos),
        )

    def lam(self, tier: str) -> float:
        return self.lambda_m if tier == "m" else self.lambda_s

    def alpha(self, k: str, i: str, state: str) -> float:
        key = f"{k}_{i}"
        return self.alpha_los[key] if state == "los" else self.alpha_nlos[key]

    # intensity measure of the pathloss process on [0, l)
    def intensity_state(self, k: str, i: str, l, state: str):
        l = np.asarray(l, dtype=float)
        if np.any(l < 0):
            raise ValueError("pathloss argument must be >= 0")
        a = self.alpha(k, i, state)
        x = l ** (1.0 / a)
        kern = _g_stable(x / self.mu) if state == "los" else _h_stable(x / self.mu)
        return 2 * math.pi * self.lam(i) * self.mu**2 * kern

    def intensity(self, k: str, i: str, l):
        return self.intensity_state(k, i, l, "los") + self.intensity_state(k, i, l, "nlos")

    # density = d(intensity)/dl
    def density_state(self, k: str, i: str, l, state: str):
        l = np.asarray(l, dtype=float)
        if np.any(l <= 0):
            raise ValueError("density defined for l > 0")
        a = self.alpha(k, i, state)
        x = l ** (1.0 / a)
        w = np.exp(-x / self.mu) if state == "los" else -np.expm1(-x / self.mu)
        return 2 * math.pi * self.lam(i) / a * l ** (2.0 / a - 1.0) * w

    def density(self, k: str, i: str, l):
        return self.density_state(k, i, l, "los") + self.density_state(k, i, l, "nlos")


def intensity_measure(law: PathlossLaw, k: str, i: str, l):
    """Intensity measure of the (k, i) pathloss process on [0, l)."""
    return law.intensity(k, i, l)


def intensity_density(law: PathlossLaw, k: str, i: str, l):
    """Intensity density of the (k, i) pathloss process at l."""
    return law.density(k, i, l)


@dataclass(frozen=True)
class Omega:
    """Tier selectivity ratios of the biased access association rule."""

    s_over_m: float

    @classmethod
    def from_config(cls, config: NetworkConfig) -> "Omega":
        num = config.p_s * config.t_s * config.beta["a_s"] * config.g_main_s
        den = config.p_m * config.t_m * config.beta["a_m"] * config.g_main_m
        return cls(s_over_m=num / den)

    def val(self, j: str, i: str) -> float:
        if j == i:
            return 1.0
        return self.s_over_m if (j, i) == ("s", "m") else 1.0 / self.s_over_m


# ----------------------------------------------------------------------
# Association probabilities and serving-pathloss PDFs
# ----------------------------------------------------------------------

def _exclusion_exponent(law: PathlossLaw, omega: Omega, tier: str, l):
    """Sum over tiers j of Lambda_{a_j}((0, Omega_{j,tier} * l])."""
    out = np.zeros_like(np.asarray(l, dtype=float))
    for j in _TIERS:
        if law.lam(j) > 0:
            out = out + law.intensity("a", j, omega.val(j, tier) * l)
    return out


def _serving_r_cutoff(law: PathlossLaw, omega: Omega | None, tier: str, k: str = "a") -> float:
    """Distance beyond which the serving integrand is < exp(-60)."""

    def grow(r):
        l = r ** law.alpha(k, tier, "los")
        if k == "a":
            return _exclusion_exponent(law, omega, tier, np.asarray(l)) - _LAMBDA_CUTOFF
        return law.intensity(k, tier, l) - _LAMBDA_CUTOFF

    lo, hi = 1.0, 1e8
    if grow(hi) < 0:
        return hi
    if grow(lo) > 0:
        return lo
    return find_root(lambda r: float(grow(r)), lo, hi, x_tol=1.0)


def _state_weight(r, mu: float, state: str):
    return np.exp(-r / mu) if state == "los" else -np.expm1(-r / mu)


def association_probability(law: PathlossLaw, omega: Omega, tier: str) -> float:
    """Probability that the typical user associates to `tier`."""
    if law.lam(tier) == 0:
        return 0.0
    r_max = _serving_r_cutoff(law, omega, tier)
    total = 0.0
    for state in ("los", "nlos"):
        a = law.alpha("a", tier, state)

        def f(r, a=a, state=state):
            l = r**a
            return (
                2 * math.pi * law.lam(tier) * r
                * _state_weight(r, law.mu, state)
                * np.exp(-_exclusion_exponent(law, omega, tier, l))
            )

        res = integrate(f, 0.0, r_max, abs_tol=1e-12, rel_tol=1e-9)
        if not res.converged:
            raise ConvergenceError(f"association integral ({tier}, {state}) did not converge")
        total += res.value
    return total


def split_association(law: PathlossLaw, omega: Omega):
    """SBS association probability split by serving-link state."""
    out = {}
    r_max = _serving_r_cutoff(law, omega, "s") if law.lam("s") > 0 else 1.0
    for state in ("los", "nlos"):
        if law.lam("s") == 0:
            out[state] = 0.0
            continue
        a = law.alpha("a", "s", state)

        def f(r, a=a, state=state):
            l = r**a
            return (
                2 * math.pi * law.lam("s") * r
                * _state_weight(r, law.mu, state)
                * np.exp(-_exclusion_exponent(law, omega, "s", l))
            )

        res = integrate(f, 0.0, r_max, abs_tol=1e-12, rel_tol=1e-9)
        if not res.converged:
            raise ConvergenceError(f"split association integral ({state}) did not converge")
        out[state] = res.value
    return out["los"], out["nlos"]


def serving_pathloss_pdf(law: PathlossLaw, omega: Omega, tier: str, l,
                         a_i: float | None = None, state: str | None = None):
    """PDF of the serving-link pathloss given association to `tier`.

    With `state` set, the PDF is further conditioned on the serving
    access link being LOS/NLOS (SBS tier split).
    """
    l = np.asarray(l, dtype=float)
    if state is None:
        dens = law.density("a", tier, l)
        norm = a_i if a_i is not None else association_probability(law, omega, tier)
    else:
        dens = law.density_state("a", tier, l, state)
        if a_i is None:
            a_los, a_nlos = split_association(law, omega)
            norm = a_los if state == "los" else a_nlos
        else:
            norm = a_i
    out = np.exp(-_exclusion_exponent(law, omega, tier, l)) * dens / norm
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------
# Conditional backhaul pathloss process (tagged SBS at distance d from
# the typical user, MBS exclusion zone from the access association).
# ----------------------------------------------------------------------

_GL_ANGLE_N = 48
_GL_ANGLE_X, _GL_ANGLE_W = leggauss(_GL_ANGLE_N)


def _arc_integral(r, d, excl, mu, state):
    """Integral over theta of w(D) 1(D > excl), D^2 = r^2+d^2-2rd cos(theta).

    Vectorized over r; uses the arc symmetry around theta = pi.
    """
    r = np.asarray(r, dtype=float)
    rd = 2.0 * r * d
    with np.errstate(divide="ignore", invalid="ignore"):
        cstar = np.where(rd > 0, (r**2 + d**2 - excl**2) / np.where(rd > 0, rd, 1.0), np.inf)
    # degenerate radius: D = r + d constant on the circle
    const_d = np.abs(r + d)
    theta_c = np.arccos(np.clip(cstar, -1.0, 1.0))
    theta_c = np.where(cstar >= 1.0, 0.0, theta_c)
    empty = cstar <= -1.0
    half = 0.5 * (math.pi - theta_c)
    mid = 0.5 * (math.pi + theta_c)
    theta = mid[:, None] + half[:, None] * _GL_ANGLE_X[None, :]
    dsq = r[:, None] ** 2 + d**2 - 2.0 * r[:, None] * d * np.cos(theta)
    dd = np.sqrt(np.maximum(dsq, 0.0))
    w = np.exp(-dd / mu) if state == "los" else -np.expm1(-dd / mu)
    arc = 2.0 * half * (w * _GL_ANGLE_W[None, :]).sum(axis=1)
    if state == "los":
        const_w = np.exp(-const_d / mu)
    else:
        const_w = -np.expm1(-const_d / mu)
    arc = np.where(rd > 0, arc, 2 * math.pi * const_w * (const_d > excl))
    return np.where(empty, 0.0, arc)


def _conditional_mbs_angular_density(law, r, d, excl_los, excl_nlos):
    """Integral over theta of the conditional MBS density seen by the
    tagged SBS at radius r (both blocking states of the MBS links to the
    typical user)."""
    return law.lambda_m * (
        _arc_integral(r, d, excl_los, law.mu, "los")
        + _arc_integral(r, d, excl_nlos, law.mu, "nlos")
    )


def conditional_backhaul_intensity(
    law: PathlossLaw,
    omega: Omega,
    access_state: str,
    l,
    l_a_star: float,
    theta_star: float = 0.0,
):
    """Intensity measure on (0, l] and density at l of the MBS pathloss
    process perceived by the tagged SBS.

    Conditioning: the typical user associates to an SBS whose access
    link has pathloss `l_a_star` and state `access_state`; the MBS
    exclusion zone around the user follows from the association rule.
    The result is invariant to `theta_star` (rotation symmetry), which
    is accepted for interface completeness.
    """
    del theta_star
    if l <= 0 or l_a_star <= 0:
        raise ValueError("l and l_a_star must be > 0")
    d = l_a_star ** (1.0 / law.alpha("a", "s", access_state))
    excl = omega.val("s", "m") * l_a_star
    excl_los = excl ** (1.0 / law.alpha("a", "m", "los"))
    excl_nlos = excl ** (1.0 / law.alpha("a", "m", "nlos"))
    breaks = sorted(
        {abs(d - excl_los), d + excl_los, abs(d - excl_nlos), d + excl_nlos}
    )

    measure = 0.0
    density = 0.0
    for b_state in ("los", "nlos"):
        a_b = law.alpha("b", "m", b_state)
        r_up = l ** (1.0 / a_b)

        def f(r, b_state=b_state):
            psi = _conditional_mbs_angular_density(law, r, d, excl_los, excl_nlos)
            return psi * _state_weight(r, law.mu, b_state) * r

        res = integrate(f, 0.0, r_up, abs_tol=1e-12, rel_tol=1e-7,
                        breakpoints=[b for b in breaks if b < r_up])
        if not res.converged:
            raise ConvergenceError(
                f"conditional backhaul measure ({b_state}) did not converge "
                f"near the exclusion breakpoints"
            )
        measure += res.value
        psi_edge = float(
            _conditional_mbs_angular_density(law, np.array([r_up]), d, excl_los, excl_nlos)[0]
        )
        w_edge = float(_state_weight(np.asarray(r_up), law.mu, b_state))
        density += psi_edge * w_edge * l ** (2.0 / a_b - 1.0) / a_b
    return measure, density


# ----------------------------------------------------------------------
# Interference exponent (PGFL of the SBS pathloss process outside the
# exclusion zone) on fixed distance grids, vectorized over the batch of
# serving pathlosses.
# ----------------------------------------------------------------------

_GL_INNER_N = 12
_GL_INNER_X, _GL_INNER_W = leggauss(_GL_INNER_N)


def _inner_grid(mu: float):
    edges = np.concatenate([[0.0], np.geomspace(1.0, 60.0 * mu, 16)])
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_INNER_X[None, :]).ravel()
    weights = (half[:, None] * np.broadcast_to(_GL_INNER_W, (len(half), _GL_INNER_N))).ravel()
    return nodes, weights


def _power_tail(x, alpha: float):
    """Integral over (x, inf) of v / (v^alpha + 1) dv for alpha > 2."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    big = x**alpha > 10.0
    if np.any(big):
        xb = x[big]
        acc = np.zeros_like(xb)
        for k in range(14):
            acc += (-1.0) ** k * xb ** (2.0 - alpha * (k + 1)) / (alpha * (k + 1) - 2.0)
        out[big] = acc
    if np.any(~big):
        xs = x[~big]
        total = (math.pi / alpha) / math.sin(2.0 * math.pi / alpha)
        out[~big] = total - (xs**2 / 2.0) * hyp2f1(1.0, 2.0 / alpha, 1.0 + 2.0 / alpha, -(xs**alpha))
    return out


def _pgfl_interference_exponent(law: PathlossLaw, gain_values, gain_probs,
                                coef, excl_ratio, l):
    """V(l) = sum_G p_G * integral over the SBS pathloss process outside
    (0, excl_ratio*l] of (1 - 1/(1 + coef_G*l/z)) for each gain point.

    `coef` maps a gain value to coef_G (threshold and link-budget
    constants already folded in).  Vectorized over l.
    """
    l = np.asarray(l, dtype=float)
    if law.lambda_s == 0:
        return np.zeros_like(l)
    nodes, weights = _inner_grid(law.mu)
    v = np.zeros_like(l)
    a_excl = excl_ratio * l
    for g_val, p in zip(gain_values, gain_probs):
        c_arr = coef * g_val * l
        for state in ("los", "nlos"):
            alpha = law.alpha("a", "s", state)
            r0 = a_excl ** (1.0 / alpha)
            rr = r0[:, None] + nodes[None, :]
            w = np.exp(-rr / law.mu) if state == "los" else -np.expm1(-rr / law.mu)
            c2 = c_arr[:, None]
            with np.errstate(over="ignore"):
                integrand = np.where(c2 > 0, c2 * rr * w / (rr**alpha + c2), 0.0)
            j = (integrand * weights[None, :]).sum(axis=1)
            if state == "nlos":
                r_top = r0 + 60.0 * law.mu
                pos = c_arr > 0
                tail = np.zeros_like(c_arr)
                if np.any(pos):
                    cs = c_arr[pos] ** (1.0 / alpha)
                    tail[pos] = c_arr[pos] ** (2.0 / alpha) * _power_tail(r_top[pos] / cs, alpha)
                j = j + tail
            v += 2 * math.pi * law.lambda_s * p * j
    return v


# ----------------------------------------------------------------------
# Coverage integrals
# ----------------------------------------------------------------------

def _access_coverage(law: PathlossLaw, omega: Omega, config: NetworkConfig,
                     tier: str, tau: float, interference: bool = True,
                     a_i: float | None = None) -> float:
    """P(access SINR > tau | association to `tier`); SBS-tier
    interference only, backhaul-free serving link budget."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if a_i is None:
        a_i = association_probability(law, omega, tier)
    if a_i == 0.0:
        raise ValueError(f"tier {tier} has zero association probability")
    serve = (config.power(tier) * config.beta[f"a_{tier}"]
             * config.gain_main(tier) * config.gain_main("u"))
    noise_coef = tau * config.noise_power() / serve
    gd = interferer_gain_distribution(config, "access", "s")
    coef = tau * config.p_s * config.beta["a_s"] / serve
    excl_ratio = omega.val("s", tier)
    r_max = _serving_r_cutoff(law, omega, tier)
    total = 0.0
    for state in ("los", "nlos"):
        a = law.alpha("a", tier, state)

        def f(r, a=a, state=state):
            l = r**a
            expo = noise_coef * l + _exclusion_exponent(law, omega, tier, l)
            if interference and tau > 0:
                expo = expo + _pgfl_interference_exponent(
                    law, gd.values, gd.probabilities, coef, excl_ratio, l)
            return (2 * math.pi * law.lam(tier) * r
                    * _state_weight(r, law.mu, state) * np.exp(-expo))

        res = integrate(f, 0.0, r_max, abs_tol=1e-11, rel_tol=1e-7)
        if not res.converged:
            raise ConvergenceError(
                f"access coverage integral (tier {tier}, serving state {state}, "
                f"tau={tau:g}) did not converge")
        total += res.value
    return min(total / a_i, 1.0)


def mbs_coverage(law: PathlossLaw, omega: Omega, config: NetworkConfig,
                 tau: float, interference: bool = True,
                 a_i: float | None = None) -> float:
    """P(access SINR > tau | served by an MBS)."""
    return _access_coverage(law, omega, config, "m", tau, interference, a_i)


def sbs_access_coverage(law: PathlossLaw, omega: Omega, config: NetworkConfig,
                        tau: float, interference: bool = True,
                        a_i: float | None = None) -> float:
    """P(access SINR > tau | served by an SBS)."""
    return _access_coverage(law, omega, config, "s", tau, interference, a_i)


def backhaul_snr_ccdf(law: PathlossLaw, config: NetworkConfig, tau: float) -> float:
    """P(SNR of the typical noise-limited backhaul link > tau)."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    serve = (config.p_m * config.beta["b_m"] * config.g_main_m * config.g_main_s)
    noise_coef = tau * config.noise_power() / serve
    r_max = _serving_r_cutoff(law, None, "m", k="b")
    total = 0.0
    for state in ("los", "nlos"):
        a = law.alpha("b", "m", state)

        def f(r, a=a, state=state):
            l = r**a
            return (2 * math.pi * law.lambda_m * r
                    * _state_weight(r, law.mu, state)
                    * np.exp(-noise_coef * l - law.intensity("b", "m", l)))

        res = integrate(f, 0.0, r_max, abs_tol=1e-11, rel_tol=1e-7)
        if not res.converged:
            raise ConvergenceError(
                f"backhaul SNR integral (state {state}, tau={tau:g}) did not converge")
        total += res.value
    return min(total, 1.0)


def joint_sbs_backhaul_coverage(law: PathlossLaw, omega: Omega,
                                config: NetworkConfig, tau1: float,
                                tau2: float, a_s: float | None = None) -> float:
    """Joint SBS access and backhaul coverage in its product form."""
    return (sbs_access_coverage(law, omega, config, tau1, a_i=a_s)
            * backhaul_snr_ccdf(law, config, tau2))


# ----------------------------------------------------------------------
# Load PMFs (area-biased and unbiased Poisson-Voronoi kernels)
# ----------------------------------------------------------------------

_LOG_3p5 = 3.5 * math.log(3.5)
_LGAMMA_3p5 = float(log_gamma(3.5))


def load_pmf(kernel: str, lambda_cell: float, lambda_points: float, n):
    """PMF of the cell load: kernel 'K_t' (tagged cell, support n >= 1)
    or 'K' (typical cell, support n >= 0)."""
    if lambda_cell <= 0 or lambda_points <= 0:
        raise ValueError("densities must be > 0")
    n_arr = np.asarray(n)
    if np.any(n_arr < 0):
        raise ValueError("n must be >= 0")
    t = lambda_points / lambda_cell
    nf = n_arr.astype(float)
    if kernel == "K_t":
        with np.errstate(divide="ignore"):
            logp = (_LOG_3p5 + log_gamma(nf + 3.5) - _LGAMMA_3p5
                    - log_gamma(np.maximum(nf, 1.0))
                    + (nf - 1.0) * math.log(t)
                    - (nf + 3.5) * math.log(3.5 + t))
        out = np.where(n_arr >= 1, np.exp(logp), 0.0)
    elif kernel == "K":
        logp = (_LOG_3p5 + log_gamma(nf + 3.5) - _LGAMMA_3p5
                - log_gamma(nf + 1.0)
                + nf * math.log(t)
                - (nf + 3.5) * math.log(3.5 + t))
        out = np.exp(logp)
    else:
        raise ValueError("kernel must be 'K_t' or 'K'")
    return float(out) if out.ndim == 0 else out


def load_pmf_table(kernel: str, lambda_cell: float, lambda_points: float,
                   tail_mass: float = _LOAD_TAIL, cap: int = _LOAD_CAP):
    """Support and masses of the load PMF truncated once the cumulative
    mass reaches 1 - tail_mass (hard cap on the support size)."""
    start = 1 if kernel == "K_t" else 0
    n = np.arange(start, cap + 1)
    masses = load_pmf(kernel, lambda_cell, lambda_points, n)
    csum = np.cumsum(masses)
    idx = int(np.searchsorted(csum, 1.0 - tail_mass)) + 1
    idx = min(idx, len(n))
    return n[:idx], masses[:idx]


@dataclass(frozen=True)
class LoadPmf:
    """Truncated load PMF of one cell kind.

    kernel 'K_t' is the area-biased (tagged) cell with support n >= 1 and
    mean 1 + (9/7) * lambda_points/lambda_cell; kernel 'K' is the typical
    cell with support n >= 0 and mean lambda_points/lambda_cell.
    """

    kernel: str
    lambda_cell: float
    lambda_points: float
    support: np.ndarray
    masses: np.ndarray

    @classmethod
    def build(cls, kernel: str, lambda_cell: float, lambda_points: float,
              tail_mass: float = _LOAD_TAIL, cap: int = _LOAD_CAP) -> "LoadPmf":
        n, masses = load_pmf_table(kernel, lambda_cell, lambda_points, tail_mass, cap)
        return cls(kernel, lambda_cell, lambda_points, n, masses)

    @property
    def n_max(self) -> int:
        return int(self.support[-1])

    def mean(self) -> float:
        return float((self.support * self.masses).sum())

    def total_mass(self) -> float:
        return float(self.masses.sum())


# ----------------------------------------------------------------------
# Rate coverage (series over the load PMFs with memoized coverage
# factors on monotone log-threshold interpolants)
# ----------------------------------------------------------------------

SCHEMES = ("IRA", "ORA", "WB", "MACRO_ONLY")


class _CoverageTable:
    """Monotone interpolant of a coverage function over log-threshold.

    Refined until the interpolation error at panel midpoints is below
    `tol`; outside the grid the (certified < 1e-6 / < 1e-9) plateau
    values are used.  Keeping one shared table per factor preserves the
    exact term-by-term dominance relations between resource models.
    """

    def __init__(self, fn, tol: float = 2e-4):
        self.fn = fn
        self.tol = tol
        lo = 1e-8
        hi = 1.0
        while fn(hi) > 1e-9 and hi < 1e18:
            hi *= 16.0
        xs = list(np.log(np.geomspace(lo, hi, 17)))
        ys = [fn(math.exp(x)) for x in xs]
        for _ in range(6):
            interp = self._build(xs, ys)
            new_x, new_y = [], []
            for i in range(len(xs) - 1):
                xm = 0.5 * (xs[i] + xs[i + 1])
                ym = fn(math.exp(xm))
                if abs(float(interp(xm)) - ym) > tol / 2:
                    new_x.append(xm)
                    new_y.append(ym)
            if not new_x:
                break
            xs, ys = map(list, zip(*sorted(zip(xs + new_x, ys + new_y))))
        self.x_lo, self.x_hi = xs[0], xs[-1]
        self.y_lo, self.y_hi = ys[0], ys[-1]
        self._interp = self._build(xs, ys)
        self.n_nodes = len(xs)

    @staticmethod
    def _build(xs, ys):
        y = np.minimum.accumulate(np.clip(np.asarray(ys, dtype=float), 0.0, 1.0))
        return PchipInterpolator(np.asarray(xs), y, extrapolate=False)

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        with np.errstate(divide="ignore"):
            x = np.where(tau > 0, np.log(np.where(tau > 0, tau, 1.0)), -np.inf)
        x_cl = np.clip(x, self.x_lo, self.x_hi)
        out = np.clip(self._interp(x_cl), 0.0, 1.0)
        out = np.where(x <= self.x_lo, self.y_lo, out)
        out = np.where(x >= self.x_hi, np.where(np.isinf(tau), 0.0, self.y_hi), out)
        return out


class RateModel:
    """Rate-coverage evaluator for one parameter set.

    Builds the pathloss law, association probabilities, load PMF tables
    and coverage interpolants once, then evaluates the rate-coverage
    series for any scheme and threshold.  Pure/immutable after
    construction; a macro-only companion model backs the MACRO_ONLY
    scheme (lambda_s = 0).
    """

    def __init__(self, config: NetworkConfig, law: PathlossLaw | None = None,
                 omega: Omega | None = None, coverage_tol: float = 2e-4):
        self.config = config
        self.law = law if law is not None else PathlossLaw.from_config(config)
        self.omega = omega if omega is not None else Omega.from_config(config)
        self.coverage_tol = coverage_tol
        self.a_m = association_probability(self.law, self.omega, "m")
        self.a_s = (association_probability(self.law, self.omega, "s")
                    if config.lambda_s > 0 else 0.0)
        self._tables: dict = {}
        self._loads: dict = {}
        self._macro: RateModel | None = None

    # -- coverage factors ----------------------------------------------
    def _table(self, family: str) -> _CoverageTable:
        if family not in self._tables:
            if family == "access_m":
                fn = lambda t: mbs_coverage(self.law, self.omega, self.config, t, a_i=self.a_m)
            elif family == "access_s":
                fn = lambda t: sbs_access_coverage(self.law, self.omega, self.config, t, a_i=self.a_s)
            elif family == "backhaul":
                fn = lambda t: backhaul_snr_ccdf(self.law, self.config, t)
            else:
                raise ValueError(family)
            self._tables[family] = _CoverageTable(fn, self.coverage_tol)
        return self._tables[family]

    def coverage(self, family: str, tau):
        return self._table(family)(tau)

    def _load_table(self, tier: str):
        if tier not in self._loads:
            a_i = self.a_m if tier == "m" else self.a_s
            self._loads[tier] = load_pmf_table(
                "K_t", self.config.density(tier) / a_i, self.config.lambda_u)
        return self._loads[tier]

    def _macro_model(self) -> "RateModel":
        if self._macro is None:
            self._macro = RateModel(self.config.with_updates(lambda_s=0.0),
                                    law=PathlossLaw.from_config(
                                        self.config.with_updates(lambda_s=0.0),
                                        mu=self.law.mu),
                                    coverage_tol=self.coverage_tol)
        return self._macro

    @staticmethod
    def _exp2m1(e):
        e = np.asarray(e, dtype=float)
        with np.errstate(over="ignore"):
            return np.where(e < 1020.0, np.exp2(np.minimum(e, 1020.0)) - 1.0, np.inf)

    # -- the rate-coverage series ---------------------------------------
    def rate_coverage(self, scheme: str, rho: float,
                      eta: float | None = None) -> float:
        """P(typical-user downlink rate > rho) for the given scheme.

        `eta` overrides the configured access bandwidth fraction for ORA
        (the coverage factors do not depend on it, so split sweeps reuse
        one model).
        """
        if rho < 0:
            raise ValueError("rho must be >= 0")
        if rho == 0:
            return 1.0
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        if scheme == "MACRO_ONLY":
            return self._macro_model().rate_coverage("WB", rho)
        eta = self.config.eta_a if eta is None else float(eta)
        if scheme == "ORA" and not (0 < eta < 1):
            raise ValueError("ORA requires eta_a in (0, 1)")

        cfg = self.config
        w = cfg.bandwidth_w
        ratio_um = cfg.lambda_u / cfg.lambda_m

        n_m, pmf_m = self._load_table("m")
        if scheme == "IRA":
            e_m = (rho / w) * (n_m + self.a_s * ratio_um)
        elif scheme == "ORA":
            e_m = rho * n_m / (eta * w)
        else:
            e_m = rho * n_m / w
        total = self.a_m * float(np.sum(pmf_m * self.coverage("access_m", self._exp2m1(e_m))))

        if self.a_s > 0:
            n_s, pmf_s = self._load_table("s")
            if scheme == "IRA":
                e_a = (rho * n_s / w) * (1.0 + cfg.lambda_m * n_s / cfg.lambda_u)
                e_b = rho * (n_s + ratio_um) / w
            elif scheme == "ORA":
                e_a = rho * n_s / (eta * w)
                e_b = rho * (n_s + self.a_s * ratio_um) / ((1.0 - eta) * w)
            else:  # WB
                e_a = rho * n_s / w
                e_b = None
            fac = self.coverage("access_s", self._exp2m1(e_a))
            if e_b is not None:
                fac = fac * self.coverage("backhaul", self._exp2m1(e_b))
            total += self.a_s * float(np.sum(pmf_s * fac))
        return min(total, 1.0)

    def rate_ccdf(self, scheme: str, rhos, eta: float | None = None):
        return np.array([self.rate_coverage(scheme, float(r), eta=eta)
                         for r in np.asarray(rhos)])

    def median_rate(self, scheme: str, lo: float = 1e2, hi: float = 1e12,
                    eta: float | None = None) -> float:
        """Threshold solving P(rate > rho) = 0.5 (bisection on log rho)."""
        g = lambda x: self.rate_coverage(scheme, math.exp(x), eta=eta) - 0.5
        return math.exp(find_root(g, math.log(lo), math.log(hi), x_tol=1e-4))

    def diagnostics(self) -> dict:
        out = {
            "a_m": self.a_m,
            "a_s": self.a_s,
            "coverage_tol": self.coverage_tol,
            "load_tail_mass": _LOAD_TAIL,
        }
        for tier, (n, _) in self._loads.items():
            out[f"n_max_{tier}"] = int(n[-1])
        for fam, tab in self._tables.items():
            out[f"coverage_nodes_{fam}"] = tab.n_nodes
        return out


_MODEL_CACHE: dict = {}


def _cached_model(config: NetworkConfig, law: PathlossLaw | None,
                  omega: Omega | None) -> RateModel:
    key = (config.hash(), None if law is None else law.mu)
    if key not in _MODEL_CACHE or omega is not None:
        model = RateModel(config, law=law, omega=omega)
        if omega is not None:
            return model
        if len(_MODEL_CACHE) > 32:
            _MODEL_CACHE.clear()
        _MODEL_CACHE[key] = model
    return _MODEL_CACHE[key]


def rate_coverage(config: NetworkConfig, law: PathlossLaw | None = None,
                  omega: Omega | None = None, scheme: str = "IRA",
                  rho: float = 1e6) -> float:
    """Rate coverage P(rate > rho); convenience wrapper over RateModel."""
    return _cached_model(config, law, omega).rate_coverage(scheme, rho)


# ----------------------------------------------------------------------
# mu calibration against the sampled blockage process
# ----------------------------------------------------------------------

@dataclass
class CalibrationResult:
    mu: float
    saturated: bool
    a_m_empirical: float
    a_m_stderr: float
    a_m_analytic: float
    n_iter: int


def calibrate_mu(config: NetworkConfig, window, n_iter: int,
                 bracket=(20.0, 2000.0), seed: int = 0,
                 x_tol: float = 1.0) -> CalibrationResult:
    """Choose mu so the analytic MBS association probability matches the
    empirical value measured on the sampled blockage process.

    A_m(mu) is not monotone (an intermediate-mu dip favors the closer
    tier), so the bracket is scanned on a coarse log grid and the
    rightmost sign change -- the branch that continues to the all-LOS
    limit -- is refined by bisection to `x_tol` meters.  Returns the
    bracket top with `saturated=True` when the empirical value is
    already consistent with it (e.g. no blockage at all); raises
    CalibrationError when the bracket holds no crossing otherwise.
    """
    from .simulator import empirical_association_prob

    if config.blockage_model != "germ_grain":
        raise CalibrationError("calibration measures the germ-grain process; "
                               "set blockage_model = germ_grain")
    omega = Omega.from_config(config)
    emp = empirical_association_prob(config, window, n_iter, seed)

    def gap(mu: float) -> float:
        law = PathlossLaw.from_config(config, mu=mu)
        return association_probability(law, omega, "m") - emp.a_m

    lo, hi = bracket
    grid = np.geomspace(lo, hi, 16)
    gaps = [gap(m) for m in grid]
    crossing = None
    for k in range(len(grid) - 1, 0, -1):
        if gaps[k] == 0.0 or (gaps[k] < 0) != (gaps[k - 1] < 0):
            crossing = (grid[k - 1], grid[k])
            break
    if crossing is not None:
        mu_hat = find_root(gap, crossing[0], crossing[1], x_tol=x_tol)
        saturated = False
    elif abs(gaps[-1]) <= max(3.0 * emp.a_m_stderr, 0.01):
        mu_hat, saturated = hi, True
    else:
        raise CalibrationError(
            f"no sign change of A_m(mu) - A_m_hat on [{lo}, {hi}] "
            f"(endpoint gaps {gaps[0]:.4f}, {gaps[-1]:.4f})")
    law = PathlossLaw.from_config(config, mu=mu_hat)
    return CalibrationResult(
        mu=mu_hat,
        saturated=saturated,
        a_m_empirical=emp.a_m,
        a_m_stderr=emp.a_m_stderr,
        a_m_analytic=association_probability(law, omega, "m"),
        n_iter=n_iter,
    )
