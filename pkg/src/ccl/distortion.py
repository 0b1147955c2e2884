"""Layer decoding probabilities and the average per-user distortion.

A user decodes layer i when the quasi-lower-bound rate of its L_i-th
stream exceeds R^C_i.  Everything below is expressed through the
normalized thresholds ``gamma_i = (eta - 2) / (2 rho_i*)``, where ``rho_i*``
is the local-average SIR needed for rate ``R^C_i``; in those units
``pi * lam * r_L2**2`` is Gamma(L2, 1) distributed and the density drops out.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammainc, gammaincc, gammaln

from .geometry import conditional_distance_cdf, nth_distance_pdf, sample_nearest_distances
from .phy import local_average_sir, threshold_r_L2
from .special import incomplete_gamma, inverse_qlb, inverse_qlb_array

CLAMP_TOL = 1e-9
# Gamma(s, x) x^eta' is below 1e-290 past this point for every s used here.
_NEGLIGIBLE_TAIL = 700.0


class NumericalInstabilityError(ArithmeticError):
    pass


class DegenerateLayersWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DecodingProbabilities:
    p_none: float
    p_layer1_only: float
    p_both: float

    def __post_init__(self):
        for name in ("p_none", "p_layer1_only", "p_both"):
            p = getattr(self, name)
            if not -CLAMP_TOL <= p <= 1.0 + CLAMP_TOL:
                raise NumericalInstabilityError(f"{name}={p} is not a probability")
        if abs(self.p_none + self.p_layer1_only + self.p_both - 1.0) > 1e-10:
            raise NumericalInstabilityError("decoding probabilities do not sum to one")

    def as_tuple(self):
        return (self.p_none, self.p_layer1_only, self.p_both)


@dataclass(frozen=True)
class DistortionModel:
    source_rates: tuple
    sigma2: float = 1.0

    @property
    def levels(self):
        """Distortion after decoding 0, 1 and 2 layers."""
        r1, r2 = self.source_rates
        return (self.sigma2, self.sigma2 * 2.0 ** (-2 * r1), self.sigma2 * 2.0 ** (-2 * (r1 + r2)))

    @property
    def floor(self):
        return self.levels[2]


def _check(R, eta):
    if not R >= 0 or math.isnan(R):
        raise ValueError(f"rate must be positive, got {R}")
    if not eta > 2:
        raise ValueError("eta must exceed 2")


def gamma_coeff(R, M, eta):
    """``(eta - 2) / (2 rho*)`` with ``rho*`` the SIR that supports ``R`` bits/symbol."""
    _check(R, eta)
    rho = inverse_qlb(M, R)
    if rho == 0.0:
        return math.inf
    return (eta - 2) / (2.0 * rho)


def tail_coefficients(L1, L2, eta):
    """Signed coefficients alpha'_n and exponents eta'_n, n = 0..L2-L1-1.

    The coefficients already carry the 1/Gamma(L2) normalization of the
    Gamma(L2, 1) law of ``pi lam r_L2^2``.
    """
    if not 1 <= L1 < L2:
        raise ValueError(f"need 1 <= L1 < L2, got {L1}, {L2}")
    m = L2 - L1 - 1
    n = np.arange(m + 1)
    log_mag = gammaln(m + 1) - gammaln(n + 1) - gammaln(m - n + 1) - gammaln(m + 1) - gammaln(L1) - np.log(n + L1)
    alpha = np.where(n % 2, -1.0, 1.0) * np.exp(log_mag)
    return alpha, 2.0 * (n + L1) / eta


def _tail_sum(g1, g_lim, L1, L2, eta):
    # sum_n alpha'_n g1^eta'_n Gamma(L2 - eta'_n, g_lim) / Gamma(L2)  ==  E[P(ok1 | x) 1(x > g_lim)]
    if math.isinf(g_lim) or g_lim > _NEGLIGIBLE_TAIL:
        return 0.0
    alpha, etap = tail_coefficients(L1, L2, eta)
    terms = [a * g1**e * incomplete_gamma(L2 - e, g_lim, "upper") for a, e in zip(alpha, etap)]
    return math.fsum(terms)


def _lower_reg(L2, g):
    if math.isinf(g):
        return 1.0
    return incomplete_gamma(L2, g, "lower") / math.gamma(L2)


def _gammas(R1, R2, M, eta):
    return gamma_coeff(R1, M, eta), gamma_coeff(R2, M, eta)


def _degenerate(L1, L2):
    if L1 == L2:
        warnings.warn(
            "L1 == L2: both layers gated by r_L2 alone (single-threshold model)",
            DegenerateLayersWarning,
            stacklevel=3,
        )
        return True
    return False


def p_layer1_success(R1, L1, L2, eta, M):
    """P(layer 1 decodes) at channel rate R1."""
    _check(R1, eta)
    g1 = gamma_coeff(R1, M, eta)
    if _degenerate(L1, L2):
        return _lower_reg(L2, g1)
    return _clamp(_lower_reg(L2, g1) + _tail_sum(g1, g1, L1, L2, eta))


def p_joint_ok1_fail2(R1, R2, L1, L2, eta, M):
    """P(layer 1 decodes and layer 2 does not)."""
    _check(R1, eta)
    _check(R2, eta)
    g1, g2 = _gammas(R1, R2, M, eta)
    if _degenerate(L1, L2):
        return _clamp(max(0.0, _lower_reg(L2, g1) - _lower_reg(L2, g2)))
    if R1 >= R2:
        return _clamp(_tail_sum(g1, g2, L1, L2, eta))
    return _clamp(_lower_reg(L2, g1) - _lower_reg(L2, g2) + _tail_sum(g1, g1, L1, L2, eta))


def p_joint_ok1_ok2(R1, R2, L1, L2, eta, M):
    """P(both layers decode)."""
    _check(R1, eta)
    _check(R2, eta)
    g1, g2 = _gammas(R1, R2, M, eta)
    if _degenerate(L1, L2):
        return _lower_reg(L2, min(g1, g2))
    if R1 >= R2:
        return _clamp(_lower_reg(L2, g1) - _tail_sum(g1, g2, L1, L2, eta) + _tail_sum(g1, g1, L1, L2, eta))
    return _clamp(_lower_reg(L2, g2))


def _clamp(p):
    if not -CLAMP_TOL <= p <= 1.0 + CLAMP_TOL:
        raise NumericalInstabilityError(f"probability {p} outside [0, 1] beyond tolerance")
    return min(1.0, max(0.0, p))


def decoding_probabilities(R1, R2, link):
    """(p_none, p_layer1_only, p_both) for channel rates (R1, R2) under ``link``."""
    args = (link.L1, link.L2, link.eta, link.M)
    with warnings.catch_warnings():
        if link.L1 == link.L2:
            warnings.simplefilter("ignore", DegenerateLayersWarning)
            _degenerate(link.L1, link.L2)
        ok1 = p_layer1_success(R1, *args)
        only1 = p_joint_ok1_fail2(R1, R2, *args)
        both = p_joint_ok1_ok2(R1, R2, *args)
    if abs(only1 + both - ok1) > CLAMP_TOL:
        raise NumericalInstabilityError(f"joint probabilities {only1} + {both} != {ok1}")
    return DecodingProbabilities(1.0 - ok1, only1, both)


def average_distortion(probs, Rs1, Rs2, sigma2=1.0):
    """Expected MSE distortion of a Gaussian source given the decoding probabilities."""
    if not (Rs1 > 0 and Rs2 > 0):
        raise ValueError("source rates must be positive")
    p0, p1, p2 = probs.as_tuple() if hasattr(probs, "as_tuple") else probs
    levels = DistortionModel((Rs1, Rs2), sigma2).levels
    return p0 * levels[0] + p1 * levels[1] + p2 * levels[2]


def distortion(R1, R2, link, source_rates, sigma2=1.0):
    return average_distortion(decoding_probabilities(R1, R2, link), *source_rates, sigma2=sigma2)


# Vectorized surface used by the optimizer and the level-set export.  Same
# formulas, with scipy's regularized incomplete gamma in place of ours.


def probability_surface(R1, R2, link):
    """Arrays (p_none, p_layer1_only, p_both) over broadcast rate arrays."""
    R1, R2 = np.broadcast_arrays(np.asarray(R1, dtype=float), np.asarray(R2, dtype=float))
    L1, L2, eta, M = link.L1, link.L2, link.eta, link.M
    with np.errstate(divide="ignore"):
        g1 = (eta - 2) / (2.0 * inverse_qlb_array(M, R1))
        g2 = (eta - 2) / (2.0 * inverse_qlb_array(M, R2))
    low1 = gammainc(L2, g1)
    low2 = gammainc(L2, g2)
    if L1 == L2:
        ok1 = low1
        both = gammainc(L2, np.minimum(g1, g2))
        only1 = np.maximum(ok1 - both, 0.0)
        return 1.0 - ok1, only1, both

    alpha, etap = tail_coefficients(L1, L2, eta)
    # gammaincc is regularized; alpha already carries 1 / Gamma(L2)
    log_norm = gammaln(L2 - etap)

    def tail(g, glim):
        total = np.zeros_like(g)
        live = np.isfinite(glim) & (glim <= _NEGLIGIBLE_TAIL)
        for a, e, ln in zip(alpha, etap, log_norm):
            total[live] += a * g[live] ** e * gammaincc(L2 - e, glim[live]) * math.exp(ln)
        return total

    t11 = tail(g1, g1)
    t12 = tail(g1, g2)
    ok1 = low1 + t11
    case1 = R1 >= R2
    only1 = np.where(case1, t12, low1 - low2 + t11)
    both = np.where(case1, low1 - t12 + t11, low2)
    return (
        np.clip(1.0 - ok1, 0.0, 1.0),
        np.clip(only1, 0.0, 1.0),
        np.clip(both, 0.0, 1.0),
    )


def distortion_surface(R1, R2, link, source_rates, sigma2=1.0):
    p0, p1, p2 = probability_surface(R1, R2, link)
    levels = DistortionModel(tuple(source_rates), sigma2).levels
    return p0 * levels[0] + p1 * levels[1] + p2 * levels[2]


# Oracles.  Neither touches the incomplete-gamma path above.


def quadrature_probabilities(R1, R2, link, density=1.0):
    """(p_ok1, p_ok1_fail2, p_ok1_ok2) by integrating the distance laws directly.

    Outer integral over ``v = r_L2`` with its PDF, inner probability from the
    conditional law of ``r_L1`` given ``v`` (a polynomial CDF), all in real
    distance units at the given density.
    """
    L1, L2, eta, M = link.L1, link.L2, link.eta, link.M
    r2_hat = threshold_r_L2(R2, eta, density, M)
    rho1 = inverse_qlb(M, R1)
    c1 = (eta - 2) / (2 * math.pi * density * rho1)

    def p_ok1_given(v):
        # threshold_r_L1 with the inverse rate hoisted out of the integrand
        cut = min(v, (c1 * v ** (eta - 2)) ** (1.0 / eta))
        return conditional_distance_cdf(L1, L2, cut, v)

    def f(v):
        return nth_distance_pdf(L2, density, v) * p_ok1_given(v)

    a = math.sqrt(c1)
    scale = 1.0 / math.sqrt(math.pi * density)
    v_max = scale * math.sqrt(L2 + 60.0 + 12.0 * math.sqrt(L2))
    opts = dict(epsabs=1e-15, epsrel=1e-13, limit=400)

    def integral(lo, hi):
        if hi <= lo:
            return 0.0
        pts = [p for p in (a, r2_hat) if lo < p < hi]
        return integrate.quad(f, lo, hi, points=pts or None, **opts)[0]

    ok1 = integral(0.0, v_max)
    fail2 = integral(min(r2_hat, v_max), v_max)
    return ok1, fail2, ok1 - fail2


def mc_decoding_frequencies(R1, R2, link, density, n_samples, seed):
    """Empirical (p_none, p_layer1_only, p_both) over sampled PPP geometries.

    Layer i decodes when the local-average SIR of stream L_i exceeds the SIR
    needed for R^C_i.  Returns the frequencies and their standard errors.
    """
    L1, L2, eta, M = link.L1, link.L2, link.eta, link.M
    r = sample_nearest_distances(density, L2, n_samples, seed)
    r1, r2 = r[:, L1 - 1], r[:, L2 - 1]
    ok = np.isfinite(r2)
    rho1 = np.zeros(n_samples)
    rho2 = np.zeros(n_samples)
    rho1[ok] = local_average_sir(r1[ok], r2[ok], eta, density)
    rho2[ok] = local_average_sir(r2[ok], r2[ok], eta, density)
    dec1 = rho1 > inverse_qlb(M, R1)
    dec2 = rho2 > inverse_qlb(M, R2)
    freqs = np.array([np.mean(~dec1), np.mean(dec1 & ~dec2), np.mean(dec1 & dec2)])
    se = np.sqrt(freqs * (1.0 - freqs) / n_samples)
    return freqs, se
