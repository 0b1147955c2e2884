"""Scalar special functions behind the closed-form rate and outage expressions.

Everything here works in nats; :func:`qlb_rate` and :func:`inverse_qlb` are
the only functions that speak bits/symbol.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.optimize.elementwise import find_root
from scipy.special import digamma, exp1, roots_laguerre

LOG2E = 1.0 / math.log(2.0)

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000

# Below this SNR the closed form for I_M loses digits to cancellation
# (about 4e-9 relative at M = 8, mu = 0.05); 200-node Gauss-Laguerre stays
# near 1e-14 up to mu = 2, and the two agree to 1e-14 at the cutover.
QUADRATURE_CUTOVER = 0.3
_LAGUERRE_NODES = 200


@dataclass(frozen=True)
class ErgodicRateSpec:
    """Effective diversity order of a PZF stream, ``dof_M = n_r - L_2 + 1``."""

    dof_M: int

    def __post_init__(self):
        if int(self.dof_M) != self.dof_M or self.dof_M < 1:
            raise ValueError(f"dof_M must be a positive integer, got {self.dof_M}")

    @classmethod
    def from_antennas(cls, n_r, L2):
        return cls(int(n_r) - int(L2) + 1)

    def rate(self, rho):
        return qlb_rate(self.dof_M, rho)

    def inverse(self, R):
        return inverse_qlb(self.dof_M, R)


def poisson_partial(n, x):
    """Truncated Poisson sum ``exp(-x) * sum_{i<n} x**i / i!``.

    Negative ``x`` is allowed (the alternating case shows up as
    ``poisson_partial(M, -1/mu)``).  The result overflows to ``inf`` only
    when the true value does.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x = float(x)
    if x == 0.0:
        return 1.0
    terms = [1.0]
    term = 1.0
    for i in range(1, n):
        term *= x / i
        terms.append(term)
    s = math.fsum(terms)
    if s == 0.0:
        return 0.0
    log_mag = -x + math.log(abs(s))
    if log_mag > 709.0:
        return math.copysign(math.inf, s)
    return math.copysign(math.exp(log_mag), s)


def _expint_cf(n, x):
    # modified Lentz on the even continued fraction, x > 1
    b = x + n
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        a = -i * (n - 1 + i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * math.exp(-x)
    raise ArithmeticError("exp_integral continued fraction did not converge")


def _expint_series(n, x):
    nm1 = n - 1
    ans = 1.0 / nm1 if nm1 else -math.log(x) - np.euler_gamma
    fact = 1.0
    for i in range(1, _MAX_ITER):
        fact *= -x / i
        if i != nm1:
            delta = -fact / (i - nm1)
        else:
            psi = -np.euler_gamma + math.fsum(1.0 / k for k in range(1, nm1 + 1))
            delta = fact * (-math.log(x) + psi)
        ans += delta
        if abs(delta) < abs(ans) * _EPS:
            return ans
    raise ArithmeticError("exp_integral series did not converge")


def exp_integral(n, x):
    """Generalized exponential integral ``E_n(x) = int_1^inf t**-n exp(-x t) dt``."""
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    n = int(n)
    x = float(x)
    if x < 0.0 or (x == 0.0 and n == 1):
        raise ValueError(f"E_{n}({x}) diverges")
    if x == 0.0:
        return 1.0 / (n - 1)
    if math.isinf(x):
        return 0.0
    if x > 1.0:
        return _expint_cf(n, x)
    return _expint_series(n, x)


def _log_prefactor(s, x):
    return s * math.log(x) - x


def _lower_series(s, x):
    # gamma(s, x) = x^s e^-x sum_k x^k / (s (s+1) ... (s+k)), s > 0
    term = 1.0 / s
    total = term
    ap = s
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(_log_prefactor(s, x))
    raise ArithmeticError("incomplete gamma series did not converge")


def _upper_cf(s, x):
    # Lentz on Gamma(s, x) = e^-x x^s / (x+1-s - 1(1-s)/(x+3-s - ...)), any real s, x > 0
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * math.exp(_log_prefactor(s, x))
    raise ArithmeticError("incomplete gamma continued fraction did not converge")


def _upper_nonpositive(s, x):
    if x >= 1.0:
        return _upper_cf(s, x)
    m = math.ceil(-s)
    s0 = s + m
    if s0 >= 1.0:
        # s rounded away when lifted, as for s = -1e-19
        s0 -= 1.0
        m -= 1
    if s0 == 0.0:
        val = exp_integral(1, x)
    else:
        val = math.gamma(s0) - _lower_series(s0, x)
    # Gamma(a-1, x) = (Gamma(a, x) - x^(a-1) e^-x) / (a-1)
    a = s0
    for _ in range(m):
        val = (val - math.exp(_log_prefactor(a - 1.0, x))) / (a - 1.0)
        a -= 1.0
    return val


def incomplete_gamma(s, x, kind="upper"):
    """Non-regularized incomplete gamma function of real order.

    ``kind='upper'`` gives ``Gamma(s, x)``, ``kind='lower'`` gives
    ``gamma(s, x)``.  The upper function accepts ``s <= 0`` for ``x > 0``.
    """
    if kind not in ("upper", "lower"):
        raise ValueError(f"kind must be 'upper' or 'lower', got {kind!r}")
    s = float(s)
    x = float(x)
    if x < 0.0 or math.isnan(x):
        raise ValueError("x must be nonnegative")
    if s <= 0.0:
        if kind == "lower" or x == 0.0:
            raise ValueError(f"{kind} incomplete gamma diverges for s={s}, x={x}")
        if math.isinf(x):
            return 0.0
        return _upper_nonpositive(s, x)

    full = math.gamma(s)
    if x == 0.0:
        return full if kind == "upper" else 0.0
    if math.isinf(x):
        return 0.0 if kind == "upper" else full
    if x < s + 1.0:
        lower = _lower_series(s, x)
        return lower if kind == "lower" else full - lower
    upper = _upper_cf(s, x)
    return upper if kind == "upper" else full - upper


@lru_cache(maxsize=None)
def _laguerre_rule():
    nodes, weights = roots_laguerre(_LAGUERRE_NODES)
    keep = weights > 0.0
    return nodes[keep], weights[keep]


def _ergodic_I_quadrature(M, mu):
    g, w = _laguerre_rule()
    logpoly = (M - 1) * np.log(g) - math.lgamma(M)
    return float(np.sum(w * np.log1p(mu * g) * np.exp(logpoly)))


def _ergodic_I_closed(M, mu):
    y = 1.0 / mu
    terms = [poisson_partial(M, -y) * exp_integral(1, y)]
    for m in range(1, M):
        terms.append(poisson_partial(m, y) * poisson_partial(M - m, -y) / m)
    return math.fsum(terms)


def ergodic_I(M, mu):
    """``E[ln(1 + mu G)]`` for ``G ~ Gamma(M, 1)``, in nats.

    Closed form for ``mu >= QUADRATURE_CUTOVER``; Gauss-Laguerre below it,
    where the closed form cancels catastrophically.
    """
    if M < 1 or int(M) != M:
        raise ValueError("M must be a positive integer")
    mu = float(mu)
    if not mu > 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    if mu < QUADRATURE_CUTOVER:
        return _ergodic_I_quadrature(int(M), mu)
    return _ergodic_I_closed(int(M), mu)


def qlb_rate(M, rho):
    """Quasi-lower-bound ergodic rate in bits/symbol at local-average SIR ``rho``."""
    if not rho > 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    return ergodic_I(M, rho) * LOG2E


def inverse_qlb(M, R):
    """Local-average SIR at which :func:`qlb_rate` equals ``R`` bits/symbol."""
    R = float(R)
    if R < 0.0 or math.isnan(R):
        raise ValueError(f"R must be nonnegative, got {R}")
    if R == 0.0:
        return 0.0
    if math.isinf(R):
        return math.inf
    target = R / LOG2E

    def residual(rho):
        return ergodic_I(M, rho) - target

    lo = hi = 1.0
    if residual(hi) < 0.0:
        while residual(hi) < 0.0:
            lo, hi = hi, 2.0 * hi
    else:
        while residual(lo) > 0.0:
            lo, hi = 0.5 * lo, lo
    if residual(hi) == 0.0:
        return hi
    return brentq(residual, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


# Vectorized counterparts.  These back onto scipy's E_1 and an elementwise
# root finder; the scalar functions above remain the reference path.


def _poly_exp(n, x):
    # sum_{i<n} x^i / i!
    term = np.ones_like(x)
    total = np.ones_like(x)
    for i in range(1, n):
        term = term * x / i
        total = total + term
    return total


def ergodic_I_array(M, mu):
    """Elementwise :func:`ergodic_I` for an array of SNRs."""
    mu = np.asarray(mu, dtype=float)
    if np.any(~(mu > 0.0)):
        raise ValueError("mu must be positive")
    out = np.empty_like(mu)
    small = mu < QUADRATURE_CUTOVER
    if np.any(small):
        g, w = _laguerre_rule()
        weights = w * np.exp((M - 1) * np.log(g) - math.lgamma(M))
        out[small] = np.log1p(np.multiply.outer(mu[small], g)) @ weights
    big = ~small
    if np.any(big):
        y = 1.0 / mu[big]
        # Pi_m(y) Pi_{M-m}(-y) = P_m(y) P_{M-m}(-y): the exponentials cancel
        total = _poly_exp(M, -y) * np.exp(y) * exp1(y)
        for m in range(1, M):
            total = total + _poly_exp(m, y) * _poly_exp(M - m, -y) / m
        out[big] = total
    return out


def inverse_qlb_array(M, R):
    """Elementwise :func:`inverse_qlb`; ``R`` in bits/symbol."""
    R = np.asarray(R, dtype=float)
    if np.any(R < 0.0) or np.any(np.isnan(R)):
        raise ValueError("R must be nonnegative")
    out = np.zeros_like(R)
    out[np.isinf(R)] = np.inf
    pos = (R > 0.0) & np.isfinite(R)
    if np.any(pos):
        target = R[pos] / LOG2E
        # Jensen gives I <= ln(1 + M rho); E[ln G] = digamma(M) gives I >= ln(rho) + digamma(M)
        lo = np.log(np.expm1(target) / M)
        hi = np.maximum(target - digamma(M), lo) + 1e-9
        res = find_root(
            lambda t, c: ergodic_I_array(M, np.exp(t)) - c,
            (lo, hi),
            args=(target,),
            tolerances=dict(xatol=1e-300, xrtol=1e-15, fatol=1e-300, frtol=1e-15),
        )
        out[pos] = np.exp(res.x)
    return out
