"""Core parameter types shared across the package."""

from dataclasses import dataclass, field


@dataclass(frozen=True)
class LayerSpec:
    """One successive-refinement layer.

    source_rate is R^S_i in bits per source sample, diversity is the MDS
    macro-diversity order L_i, cache_fraction is mu_i and channel_rate is
    R^C_i in bits/symbol.
    """

    source_rate: float
    diversity: int
    cache_fraction: float = 0.0
    channel_rate: float = 1.0

    def __post_init__(self):
        if not self.source_rate > 0:
            raise ValueError("source_rate must be positive")
        if int(self.diversity) != self.diversity or self.diversity < 1:
            raise ValueError("diversity must be a positive integer")
        if not 0.0 <= self.cache_fraction <= 1.0:
            raise ValueError("cache_fraction must lie in [0, 1]")
        if not self.channel_rate > 0:
            raise ValueError("channel_rate must be positive")


@dataclass(frozen=True)
class SystemParams:
    """Global network constants.

    Only eta and n_r come from the reference scenario; density, K, N,
    file size and bandwidth are implementer defaults.
    """

    eta: float = 3.75
    n_r: int = 8
    density: float = 1.0
    K: int = 20
    N: int = 100
    file_samples: float = 1e4
    bandwidth_hz: float = 1e6
    sigma2: float = 1.0
    mu: float = 0.3

    def __post_init__(self):
        if not self.eta > 2:
            raise ValueError("eta must exceed 2")
        if self.n_r < 1 or self.K < 1 or self.N < 1:
            raise ValueError("n_r, K and N must be positive")
        if not self.density > 0 or not self.bandwidth_hz > 0 or not self.file_samples > 0:
            raise ValueError("density, bandwidth and file size must be positive")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")


@dataclass(frozen=True)
class LinkModel:
    """The pieces of the PHY model the outage formulas depend on."""

    eta: float
    n_r: int
    L1: int
    L2: int

    def __post_init__(self):
        if not self.eta > 2:
            raise ValueError("eta must exceed 2")
        if not 1 <= self.L1 <= self.L2 <= self.n_r:
            raise ValueError(f"need 1 <= L1 <= L2 <= n_r, got L1={self.L1}, L2={self.L2}, n_r={self.n_r}")

    @property
    def M(self):
        """Effective diversity order of every PZF stream."""
        return self.n_r - self.L2 + 1

    @classmethod
    def from_layers(cls, system, layers):
        return cls(system.eta, system.n_r, layers[0].diversity, layers[1].diversity)


def default_layers():
    return (LayerSpec(1.0, 2, 0.3), LayerSpec(2.0, 4, 0.3))


@dataclass
class OptimizationState:
    """One iterate of the alternating rate / cache-split search."""

    rates: tuple
    cache_split: tuple
    latency: float
    distortion: float
    iteration: int
    step: str = "rates"
    extra: dict = field(default_factory=dict)
