"""PHY model: PZF receiver, local-average SIR, per-stream rates and decoding thresholds.

The analytic functions work in the interference-limited regime (no noise),
where the pathloss intercept and transmit power cancel.  The Monte Carlo
estimator keeps them so that the cancellation itself can be tested.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import stream
from .special import inverse_qlb, qlb_rate

COND_LIMIT = 1e12


class RankDeficientError(np.linalg.LinAlgError):
    pass


class InsufficientPointsError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    n_r: int = 8
    eta: float = 3.75
    beta: float = 1.0
    power_P: float = 1.0
    noise_N0: float = 0.0
    coherence_n: int = 1

    def __post_init__(self):
        if not self.eta > 2:
            raise ValueError("eta must exceed 2")
        if self.n_r < 1:
            raise ValueError("n_r must be positive")
        if not (self.beta > 0 and self.power_P > 0 and self.noise_N0 >= 0):
            raise ValueError("beta and power_P must be positive, noise_N0 nonnegative")


@dataclass(frozen=True)
class SirSample:
    stream_index: int
    sir: float


def _check_geometry(eta, density):
    if not eta > 2:
        raise ValueError("eta must exceed 2")
    if not density > 0:
        raise ValueError("density must be positive")


def local_average_sir(r_l, r_L2, eta, density):
    """SIR of stream l with the interference beyond r_L2 replaced by its mean."""
    _check_geometry(eta, density)
    r_l = np.asarray(r_l, dtype=float)
    r_L2 = np.asarray(r_L2, dtype=float)
    if np.any(r_l <= 0) or np.any(r_l > r_L2):
        raise ValueError("need 0 < r_l <= r_L2")
    out = r_L2 ** (eta - 2) / r_l**eta * (eta - 2) / (2 * math.pi * density)
    return out if out.ndim else float(out)


def mean_interference(r_L2, eta, density, outer=math.inf):
    """Ensemble mean of ``sum_j r_j^-eta`` over PPP nodes in the annulus ``(r_L2, outer)``."""
    _check_geometry(eta, density)
    tail = 0.0 if math.isinf(outer) else outer ** (2 - eta)
    return 2 * math.pi * density * (r_L2 ** (2 - eta) - tail) / (eta - 2)


def interference_window(r_ref, eta, rel_tail=1e-4):
    """Window radius beyond which the mean interference is below ``rel_tail`` of what is inside."""
    return r_ref * (rel_tail / (1.0 + rel_tail)) ** (-1.0 / (eta - 2))


def _pinv_columns(H):
    H = np.asarray(H)
    n_r, L = H.shape
    if L > n_r:
        raise RankDeficientError(f"cannot zero-force {L} streams with {n_r} antennas")
    Q, R = np.linalg.qr(H)
    diag = np.abs(np.diag(R))
    if diag.min() == 0 or diag.max() / diag.min() > COND_LIMIT:
        raise RankDeficientError("channel matrix is numerically rank deficient")
    # H (H^H H)^{-1} = Q R^{-H}
    return Q @ np.linalg.inv(R).conj().T


def pzf_filter(H):
    """Column-normalized pseudo-inverse ``H (H^H H)^-1`` of an ``n_r x L_2`` channel."""
    P = _pinv_columns(H)
    return P / np.linalg.norm(P, axis=0)


def pzf_gains(H):
    """``||h_l^dagger||^-2`` for every column of the unnormalized pseudo-inverse."""
    P = _pinv_columns(H)
    return 1.0 / np.sum(np.abs(P) ** 2, axis=0)


def complex_gaussian(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def pzf_gain_samples(n_r, L2, n_draws, seed, stream_index=0):
    """Draw ``||h_l^dagger||^-2`` for i.i.d. CN(0,1) channels, one value per draw."""
    rng = stream(seed, 0)
    H = complex_gaussian(rng, (n_draws, n_r, L2))
    # Gram inverse diagonal equals the squared column norms of the pseudo-inverse
    G = np.linalg.inv(np.conj(np.swapaxes(H, 1, 2)) @ H)
    return 1.0 / np.real(G[:, stream_index, stream_index])


def _rate_chunk(distances, l, L2, params, n_draws, seed, chunk_index):
    rng = stream(seed, chunk_index)
    H = complex_gaussian(rng, (n_draws, params.n_r, L2))
    far = distances[L2:]
    h_far = complex_gaussian(rng, (n_draws, far.size))
    scale = params.beta * params.power_P
    # |g_l^H h_l|^2 for the normalized PZF filter is 1 / [(H^H H)^-1]_ll
    gram_inv = np.linalg.inv(np.conj(np.swapaxes(H, 1, 2)) @ H)
    gain = 1.0 / np.real(gram_inv[:, l - 1, l - 1])
    signal = scale * distances[l - 1] ** -params.eta * gain
    # projection of a CN(0, I) vector on a unit filter is CN(0, 1)
    interference = scale * (np.abs(h_far) ** 2 @ far**-params.eta)
    return np.log2(1.0 + signal / (interference + params.noise_N0))


def mc_conditional_rate(phi, l, L2, params, draws, seed, chunk=256, workers=1):
    """Monte Carlo ``E[log2(1 + SIR_l) | phi]`` over fading, with its standard error.

    Chunk ``c`` draws from stream ``(seed, c)``; results are concatenated in
    chunk order, so the estimate does not depend on ``workers``.
    """
    if not 1 <= l <= L2 <= params.n_r:
        raise ValueError("need 1 <= l <= L2 <= n_r")
    distances = phi.distances if hasattr(phi, "distances") else np.asarray(phi, dtype=float)
    if distances.size < L2 + 1:
        raise InsufficientPointsError(f"need at least {L2 + 1} nodes, realization has {distances.size}")
    sizes = [min(chunk, draws - s) for s in range(0, draws, chunk)]
    jobs = [(distances, l, L2, params, n, seed, c) for c, n in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _rate_chunk(*a), jobs))
    else:
        parts = [_rate_chunk(*a) for a in jobs]
    samples = np.concatenate(parts)
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(samples.size))


def threshold_r_L2(R2, eta, density, M):
    """Largest ``r_L2`` at which layer 2 at rate ``R2`` still decodes."""
    _check_geometry(eta, density)
    if not R2 > 0:
        raise ValueError("R2 must be positive")
    return math.sqrt((eta - 2) / (2 * math.pi * density * inverse_qlb(M, R2)))


def threshold_r_L1(R1, v, eta, density, M):
    """Largest ``r_L1`` decoding layer 1 at rate ``R1`` given ``r_L2 = v``."""
    _check_geometry(eta, density)
    if not R1 > 0 or not v > 0:
        raise ValueError("R1 and v must be positive")
    return ((eta - 2) / (2 * math.pi * density) * v ** (eta - 2) / inverse_qlb(M, R1)) ** (1.0 / eta)


def stream_rate(r_l, r_L2, eta, density, M):
    """Quasi-lower-bound rate in bits/symbol of a stream at the given geometry."""
    return qlb_rate(M, local_average_sir(r_l, r_L2, eta, density))
