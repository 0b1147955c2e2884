"""Command-line front end: ``ccl <command> --config FILE [--out CSV] [--seed N] [--threads N]``.

Exit codes: 0 ok, 1 a validation check failed, 2 bad configuration,
3 domain error (for example an unreachable distortion target).
"""

import argparse
import csv
import logging
import math
import os
import sys

import numpy as np
from scipy import stats

from .caching import (
    CachingConfig,
    codeword_length,
    decode_user,
    deliver,
    join_from_ens,
    place,
    split_for_ens,
)
from .config import ConfigError, load_config
from .distortion import (
    decoding_probabilities,
    distortion,
    distortion_surface,
    mc_decoding_frequencies,
    quadrature_probabilities,
)
from .geometry import sample_ppp, stream
from .optimize import (
    InfeasibleTargetError,
    alternate_optimize,
    delta_T,
    latency,
    normalized_source_rates,
    uniform_baseline,
)
from .params import LinkModel
from .phy import ChannelParams, interference_window, mc_conditional_rate, pzf_gain_samples, stream_rate

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3

log = logging.getLogger("ccl")


def fmt(x):
    """17 significant digits, enough for a lossless float round trip."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    if path is None:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _link(cfg):
    return LinkModel.from_layers(cfg.system, cfg.layers)


def _source_rates(cfg):
    return tuple(layer.source_rate for layer in cfg.layers)


def cmd_eval(cfg, args):
    R1, R2 = cfg.rates
    split = cfg.cache_split
    w = normalized_source_rates(cfg.layers)
    gap = abs(split[0] * w[0] + split[1] * w[1] - cfg.system.mu)
    if gap > 1e-10:
        log.warning("cache split violates sum_i mu_i w_i = mu by %.3g", gap)
    probs = decoding_probabilities(R1, R2, _link(cfg))
    D = distortion(R1, R2, _link(cfg), _source_rates(cfg), cfg.system.sigma2)
    T = latency(cfg.rates, split, cfg.layers, cfg.system)
    T_norm = T * cfg.system.bandwidth_hz / cfg.system.file_samples
    header = ["R1", "R2", "mu1", "mu2", "p_none", "p_layer1_only", "p_both", "D", "T_s", "T_norm"]
    row = [R1, R2, split[0], split[1], *probs.as_tuple(), D, T, T_norm]
    for name, value in zip(header, row):
        print(f"{name:>14} {fmt(value)}")
    write_csv(args.out, header, [row])
    return EXIT_OK


def levelset_grid(cfg):
    g = cfg.levelset
    rates = np.linspace(float(g["rate_min_bits_per_symbol"]), float(g["rate_max_bits_per_symbol"]), int(g["points"]))
    R1, R2 = np.meshgrid(rates, rates, indexing="ij")
    D = distortion_surface(R1, R2, _link(cfg), _source_rates(cfg), cfg.system.sigma2)
    return rates, D


def cmd_levelset(cfg, args):
    rates, D = levelset_grid(cfg)
    rows = [(rates[i], rates[j], D[i, j]) for i in range(rates.size) for j in range(rates.size)]
    write_csv(args.out, ["R1", "R2", "D"], rows)
    print(f"grid {rates.size}x{rates.size}, D in [{fmt(D.min())}, {fmt(D.max())}]")
    return EXIT_OK


def _state_rows(result):
    best = math.inf
    for s in result.trace:
        best = min(best, s.latency)
        yield [s.iteration, s.step, s.rates[0], s.rates[1], s.cache_split[0], s.cache_split[1], s.distortion, s.latency, best]


def cmd_optimize(cfg, args):
    result = alternate_optimize(cfg.system, cfg.layers, cfg.target_distortion, cfg.outer_iterations, cfg.pso)
    header = ["iteration", "step", "R1", "R2", "mu1", "mu2", "D", "T_s", "best_T_s"]
    write_csv(args.out, header, _state_rows(result))
    b = result.best
    print(f"D0={fmt(cfg.target_distortion)} rates=({fmt(b.rates[0])}, {fmt(b.rates[1])})")
    print(f"split=({fmt(b.cache_split[0])}, {fmt(b.cache_split[1])}) D={fmt(b.distortion)} T_s={fmt(b.latency)}")
    return EXIT_OK


def sweep_targets(cfg):
    """Evenly spaced targets strictly inside the configured interval."""
    s = cfg.sweep
    return np.linspace(float(s["target_distortion_min"]), float(s["target_distortion_max"]), int(s["points"]) + 2)[1:-1]


def sweep_rows(cfg):
    for D0 in sweep_targets(cfg):
        try:
            result = alternate_optimize(cfg.system, cfg.layers, D0, cfg.outer_iterations, cfg.pso)
            T_unif, _ = uniform_baseline(cfg.system, cfg.layers, D0, cfg.pso)
        except InfeasibleTargetError as exc:
            log.warning("D0=%g infeasible: %s", D0, exc)
            yield [D0, "infeasible"] + [math.nan] * 7
            continue
        b = result.best
        yield [D0, "ok", b.cache_split[0], b.cache_split[1], b.rates[0], b.rates[1], b.latency, T_unif, delta_T(T_unif, b.latency)]


def cmd_sweep(cfg, args):
    header = ["D0", "status", "mu1", "mu2", "R1", "R2", "T_opt_s", "T_unif_s", "delta_T"]
    rows = []
    for row in sweep_rows(cfg):
        rows.append(row)
        print(" ".join(fmt(v) for v in row))
    write_csv(args.out, header, rows)
    return EXIT_OK


def _substream_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def two_proportion_z(p1, p2, n1, n2):
    pooled = (p1 * n1 + p2 * n2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    if se == 0:
        return 0.0 if p1 == p2 else math.inf
    return (p1 - p2) / se


def simulate_report(cfg, seed, threads=1):
    """Closed form vs quadrature vs Monte Carlo; returns (lines, all_passed)."""
    mc = cfg.monte_carlo
    link = _link(cfg)
    n = int(mc["samples"])
    lines = []
    ok = True

    def check(name, passed, detail):
        nonlocal ok
        ok &= bool(passed)
        lines.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")

    densities = [float(d) for d in mc["densities_per_m2"]]
    freqs = {}
    for i, (R1, R2) in enumerate(mc["rate_pairs_bits_per_symbol"]):
        closed = decoding_probabilities(R1, R2, link).as_tuple()
        ok1, only1, both = quadrature_probabilities(R1, R2, link)
        quad = (1 - ok1, only1, both)
        err = max(abs(c - q) / max(abs(q), 1e-300) for c, q in zip(closed, quad) if q > 1e-12)
        check(f"quadrature R=({R1}, {R2})", err <= 1e-6, f"max rel err {err:.2e}")
        for j, lam in enumerate(densities):
            f, se = mc_decoding_frequencies(R1, R2, link, lam, n, _substream_seed(seed, 100 * i + j))
            freqs[i, j] = f
            z = max(abs(a - b) / s if s > 0 else (0.0 if a == b else math.inf) for a, b, s in zip(f, closed, se))
            lines.append(f"      closed {np.round(closed, 5)}  mc(lam={lam}) {np.round(f, 5)}")
            check(f"mc R=({R1}, {R2}) lam={lam}", z <= 3.0, f"max |z| {z:.2f}")
        if len(densities) == 2:
            z = max(abs(two_proportion_z(a, b, n, n)) for a, b in zip(freqs[i, 0], freqs[i, 1]))
            crit = stats.norm.ppf(1 - 0.01 / 2)
            check(f"density invariance R=({R1}, {R2})", z <= crit, f"max |z| {z:.2f} vs {crit:.2f}")

    M = link.M
    gains = pzf_gain_samples(cfg.system.n_r, link.L2, int(mc["pzf_draws"]), seed)
    ks = stats.kstest(gains, stats.gamma(M).cdf)
    check(f"pzf gain ~ Gamma({M}, 1)", ks.pvalue > 0.01, f"KS p-value {ks.pvalue:.3f}")

    # Quasi-lower bound against the fading Monte Carlo, informational only
    n_geo = int(mc.get("rate_geometries", 0) or 0)
    if n_geo:
        dev = rate_deviation(cfg, n_geo, int(mc["rate_draws"]), seed, threads)
        lines.append(f"INFO  qlb - mc rate over {n_geo} geometries: median {np.median(dev):+.4f} bits/symbol")
    return lines, ok


def rate_deviation(cfg, n_geo, draws, seed, threads=1, l=None):
    """Signed ``qlb - E[rate | geometry]`` for stream ``l`` over sampled geometries."""
    link = _link(cfg)
    s = cfg.system
    l = link.L1 if l is None else l
    params = ChannelParams(n_r=s.n_r, eta=s.eta)
    out = np.empty(n_geo)
    for g in range(n_geo):
        rng = stream(_substream_seed(seed, 10_000 + g), 0)
        r_guess = math.sqrt((link.L2 + 3 * math.sqrt(link.L2)) / (math.pi * s.density))
        radius = interference_window(r_guess, s.eta, rel_tail=1e-3)
        phi = sample_ppp(s.density, radius, int(rng.integers(2**62)))
        while len(phi) < link.L2 + 1:
            phi = sample_ppp(s.density, 2 * phi.window_radius, int(rng.integers(2**62)))
        mc_rate, _ = mc_conditional_rate(phi, l, link.L2, params, draws, _substream_seed(seed, 20_000 + g), workers=threads)
        qlb = stream_rate(phi.nearest(l), phi.nearest(link.L2), s.eta, s.density, link.M)
        out[g] = qlb - mc_rate
    return out


def cmd_simulate(cfg, args):
    lines, ok = simulate_report(cfg, args.seed, args.threads)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_CHECK


def caching_demo(K, t, n_ens, L, layer_bits, seed, N=None):
    """Place, deliver, MDS-split, recombine and decode one layer; returns (lines, all_ok)."""
    if K > 12:
        raise ValueError("caching demo supports K <= 12")
    N = K if N is None else N
    cfg = CachingConfig(K, N, t, L)
    rng = stream(seed, 0)
    library = rng.integers(0, 2, size=(N, layer_bits), dtype=np.uint8)
    demands = rng.integers(0, N, size=K)
    caches = place(cfg, library)
    cw = deliver(cfg, library, demands)
    coded = split_for_ens(cw, L, n_ens)
    keep = sorted(rng.choice(n_ens, size=L, replace=False).tolist())
    received = join_from_ens({j: coded[j] for j in keep}, cw, L, n_ens)
    expected = codeword_length(layer_bits, 1.0, K, t / K)
    lines = [
        f"K={K} t={t} N_E={n_ens} L={L} layer_bits={layer_bits}",
        f"multicast blocks {len(cw.blocks)}, block bits {cw.block_bits}, padding {cw.pad_bits}",
        f"delivered bits {cw.total_bits}, closed form {expected:g}, load {cw.total_bits / layer_bits:.6g} files",
        f"edge nodes used {keep}",
    ]
    all_ok = True
    for k in range(K):
        good = np.array_equal(decode_user(k, caches[k], received, demands), library[demands[k]])
        all_ok &= good
        lines.append(f"user {k} demand {int(demands[k])}: {'OK' if good else 'MISMATCH'}")
    return lines, all_ok


def cmd_caching_demo(cfg, args):
    d = cfg.caching_demo
    lines, ok = caching_demo(int(d["users"]), int(d["t"]), int(d["edge_nodes"]), int(d["diversity"]), int(d["layer_bits"]), args.seed)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "eval": cmd_eval,
    "levelset": cmd_levelset,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "caching-demo": cmd_caching_demo,
}


def build_parser():
    p = argparse.ArgumentParser(prog="ccl", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="scenario JSON; omitted means the built-in defaults")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get("CCL_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args)
    except (ValueError, ArithmeticError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
