"""Homogeneous PPP sampling and the ordered-distance laws of a PPP seen from the origin."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson


def stream(seed, index=0):
    """Independent generator for realization ``index`` under ``seed``.

    Philox is counter based, so stream ``(seed, i)`` does not depend on the
    order in which realizations are drawn.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


@dataclass(frozen=True)
class PPPRealization:
    density: float
    window_radius: float
    distances: np.ndarray
    seed: int

    def __post_init__(self):
        d = self.distances
        if d.size and (np.any(np.diff(d) < 0) or d[0] < 0 or d[-1] > self.window_radius):
            raise ValueError("distances must be sorted and inside the window")

    def __len__(self):
        return self.distances.size

    def nearest(self, n):
        return self.distances[n - 1]


def window_radius(density, min_points, tail_prob=1e-6):
    """Disc radius such that ``P(fewer than min_points nodes) < tail_prob``."""
    if not density > 0:
        raise ValueError("density must be positive")
    mean = float(min_points)
    while poisson.cdf(min_points - 1, mean) >= tail_prob:
        mean *= 1.1
    return math.sqrt(mean / (math.pi * density))


def sample_ppp(density, radius, seed, index=0):
    """Sample a PPP on a disc and return the sorted distances to the centre."""
    if not density > 0 or not radius > 0:
        raise ValueError("density and radius must be positive")
    rng = stream(seed, index)
    count = rng.poisson(density * math.pi * radius**2)
    r = radius * np.sqrt(rng.random(count))
    r.sort()
    return PPPRealization(float(density), float(radius), r, int(seed))


def sample_nearest_distances(density, n_nearest, n_samples, seed, radius=None, chunk=8192):
    """Nearest ``n_nearest`` distances for ``n_samples`` independent PPP draws.

    Returns an ``(n_samples, n_nearest)`` array; rows whose disc held fewer
    than ``n_nearest`` points are padded with ``inf``.  Chunk ``c`` always
    uses stream ``(seed, c)`` so the output does not depend on how callers
    split the work.
    """
    if radius is None:
        radius = window_radius(density, n_nearest + 20)
    area_mean = density * math.pi * radius**2
    out = np.empty((n_samples, n_nearest))
    for c, start in enumerate(range(0, n_samples, chunk)):
        stop = min(start + chunk, n_samples)
        rng = stream(seed, c)
        counts = rng.poisson(area_mean, size=stop - start)
        width = max(int(counts.max()), n_nearest)
        r = radius * np.sqrt(rng.random((stop - start, width)))
        r[np.arange(width)[None, :] >= counts[:, None]] = np.inf
        part = np.partition(r, n_nearest - 1, axis=1)[:, :n_nearest]
        out[start:stop] = np.sort(part, axis=1)
    return out


def nth_distance_pdf(n, density, v):
    """PDF of the n-th nearest distance, ``2 (pi lam)^n v^(2n-1) exp(-pi lam v^2) / (n-1)!``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    v = np.asarray(v, dtype=float)
    pl = math.pi * density
    with np.errstate(divide="ignore"):
        logf = math.log(2.0) + n * math.log(pl) + (2 * n - 1) * np.log(v) - pl * v**2 - gammaln(n)
    out = np.where(v > 0, np.exp(logf), 0.0)
    return out if out.ndim else float(out)


def joint_distance_pdf(l, n, density, u, v):
    """Joint PDF of ``(r_l, r_n)``, ``l < n``; zero outside ``u <= v``."""
    if not 1 <= l < n:
        raise ValueError(f"need 1 <= l < n, got l={l}, n={n}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    pl = math.pi * density
    inside = (u <= v) & (u > 0)
    uu = np.where(inside, u, 1.0)
    vv = np.where(inside, v, 2.0)
    logc = math.log(4.0) + n * math.log(pl) - gammaln(n - l) - gammaln(l)
    with np.errstate(divide="ignore"):
        gap = (n - l - 1) * np.log(vv**2 - uu**2) if n - l - 1 else 0.0
        logf = logc + gap + np.log(vv) + (2 * l - 1) * np.log(uu) - pl * vv**2
    out = np.where(inside, np.exp(logf), 0.0)
    return out if out.ndim else float(out)


def conditional_coefficients(l, k):
    """Signed coefficients ``alpha_{n,l,k} (-1)^n`` for ``n = 0..k-l-1``."""
    if not 1 <= l < k:
        raise ValueError(f"need 1 <= l < k, got l={l}, k={k}")
    m = k - l - 1
    n = np.arange(m + 1)
    log_alpha = (
        math.log(2.0)
        + gammaln(k)
        - gammaln(m + 1)
        - gammaln(l)
        + gammaln(m + 1)
        - gammaln(n + 1)
        - gammaln(m - n + 1)
    )
    return np.where(n % 2, -1.0, 1.0) * np.exp(log_alpha)


def conditional_distance_pdf(l, k, u, v):
    """PDF of ``r_l`` given ``r_k = v``; does not depend on the density."""
    coeffs = conditional_coefficients(l, k)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ValueError("v must be positive")
    x = np.clip(u / v, 0.0, None)
    powers = 2 * (np.arange(coeffs.size) + l)
    # alpha (-1)^n v^{-p} u^{p-1} = alpha (-1)^n (u/v)^{p-1} / v
    terms = coeffs * x[..., None] ** (powers - 1)
    out = np.where((u <= v) & (u >= 0), terms.sum(axis=-1) / v, 0.0)
    return out if out.ndim else float(out)


def conditional_distance_cdf(l, k, u, v):
    """CDF of ``r_l`` given ``r_k = v``, the polynomial antiderivative of the PDF."""
    coeffs = conditional_coefficients(l, k)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    x = np.clip(u / v, 0.0, 1.0)
    powers = 2 * (np.arange(coeffs.size) + l)
    out = (coeffs / powers * x[..., None] ** powers).sum(axis=-1)
    return out if out.ndim else float(out)
