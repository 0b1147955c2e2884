"""JSON scenario files for the command-line front end.

Keys carry their unit in the name.  Unknown keys are rejected at every
level so that a typo never silently falls back to a default.

Only ``pathloss_exponent``, ``rx_antennas``, the layer source rates and the
layer diversity orders come from the reference scenario.  Density, users,
file size, bandwidth and the cache fraction are implementer defaults.
"""

import json
from dataclasses import dataclass, field

from .optimize import PsoConfig
from .params import LayerSpec, SystemParams


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "pathloss_exponent": 3.75,
    "rx_antennas": 8,
    "density_per_m2": 1.0,
    "users": 20,
    "files": 100,
    "file_samples": 1e4,
    "bandwidth_hz": 1e6,
    "cache_fraction": 0.3,
    "layers": [
        {"source_rate_bits_per_sample": 1.0, "diversity": 2},
        {"source_rate_bits_per_sample": 2.0, "diversity": 4},
    ],
    "channel_rates_bits_per_symbol": [1.0, 1.0],
    "cache_split": [0.3, 0.3],
    "target_distortion": 0.2,
    "outer_iterations": 10,
    "pso": {
        "swarm_size": 40,
        "max_iters": 200,
        "inertia": 0.7,
        "cognitive_coeff": 1.5,
        "social_coeff": 1.5,
        "penalty_weight": 1e3,
        "rate_min_bits_per_symbol": 0.01,
        "rate_max_bits_per_symbol": 12.0,
    },
    "monte_carlo": {
        "samples": 100_000,
        "rate_pairs_bits_per_symbol": [[0.5, 0.5], [1.0, 1.5], [1.5, 1.0], [2.0, 2.0], [0.8, 3.0]],
        "densities_per_m2": [0.5, 2.0],
        "pzf_draws": 100_000,
        "rate_geometries": 0,
        "rate_draws": 1000,
    },
    "sweep": {"target_distortion_min": 0.05, "target_distortion_max": 0.6, "points": 12},
    "levelset": {"rate_min_bits_per_symbol": 0.05, "rate_max_bits_per_symbol": 6.0, "points": 50},
    "caching_demo": {"users": 4, "t": 2, "edge_nodes": 4, "diversity": 2, "layer_bits": 1200},
}

_LAYER_KEYS = {"source_rate_bits_per_sample", "diversity"}


def _merge(defaults, given, path):
    if not isinstance(given, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or 'config'}: {', '.join(sorted(unknown))}")
    out = {}
    for key, default in defaults.items():
        value = given.get(key, default)
        if isinstance(default, dict):
            value = _merge(default, value, f"{path}.{key}" if path else key)
        out[key] = value
    return out


def _pair(value, name):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{name} must be a list of two numbers")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be numeric") from exc


@dataclass
class ScenarioConfig:
    system: SystemParams
    layers: tuple
    rates: tuple
    cache_split: tuple
    target_distortion: float
    outer_iterations: int
    pso: PsoConfig
    monte_carlo: dict
    sweep: dict
    levelset: dict
    caching_demo: dict
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, data, seed=0):
        cfg = _merge(DEFAULTS, data, "")
        layers = cfg["layers"]
        if not isinstance(layers, list) or len(layers) != 2:
            raise ConfigError("layers must list exactly two layers")
        try:
            specs = []
            for i, layer in enumerate(layers):
                if not isinstance(layer, dict) or set(layer) != _LAYER_KEYS:
                    raise ConfigError(f"layers[{i}] needs exactly the keys {sorted(_LAYER_KEYS)}")
                specs.append(LayerSpec(float(layer["source_rate_bits_per_sample"]), int(layer["diversity"])))
            system = SystemParams(
                eta=float(cfg["pathloss_exponent"]),
                n_r=int(cfg["rx_antennas"]),
                density=float(cfg["density_per_m2"]),
                K=int(cfg["users"]),
                N=int(cfg["files"]),
                file_samples=float(cfg["file_samples"]),
                bandwidth_hz=float(cfg["bandwidth_hz"]),
                mu=float(cfg["cache_fraction"]),
            )
            p = cfg["pso"]
            pso = PsoConfig(
                swarm_size=int(p["swarm_size"]),
                max_iters=int(p["max_iters"]),
                inertia=float(p["inertia"]),
                cognitive_coeff=float(p["cognitive_coeff"]),
                social_coeff=float(p["social_coeff"]),
                penalty_weight=float(p["penalty_weight"]),
                rate_bounds=(float(p["rate_min_bits_per_symbol"]), float(p["rate_max_bits_per_symbol"])),
                seed=int(seed),
            )
            outer = int(cfg["outer_iterations"])
            if outer < 1:
                raise ConfigError("outer_iterations must be positive")
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        return cls(
            system=system,
            layers=tuple(specs),
            rates=_pair(cfg["channel_rates_bits_per_symbol"], "channel_rates_bits_per_symbol"),
            cache_split=_pair(cfg["cache_split"], "cache_split"),
            target_distortion=float(cfg["target_distortion"]),
            outer_iterations=outer,
            pso=pso,
            monte_carlo=cfg["monte_carlo"],
            sweep=cfg["sweep"],
            levelset=cfg["levelset"],
            caching_demo=cfg["caching_demo"],
            raw=cfg,
        )


def load_config(path=None, seed=0):
    """Read a scenario file; ``None`` gives the built-in default scenario."""
    if path is None:
        return ScenarioConfig.from_dict({}, seed)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return ScenarioConfig.from_dict(data, seed)
