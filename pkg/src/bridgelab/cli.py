"""Command-line experiments with seeds, config files, and JSON reports.

Every assertion a command makes cites a named invariant from the owning
module, and a report with the same config and seed is byte-identical
apart from the single `generated_at` key.  Exit status: 0 when all
configured assertions pass, 1 on an assertion failure, 2 on a usage or
config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone

import numpy as np

from . import checks, stats
from .bridges import (
    BridgeSpec,
    extract_eigen_ratio,
    extract_eigenvalue,
    sample_bridge_values,
    write_paths_csv,
)
from .chains import (
    INV_BRIDGE_INVARIANCE,
    INV_CONJUGATION,
    INV_DUALITY,
    INV_MEASURE_RELATION,
    INV_RECOVERY,
    INV_SEMIGROUP,
    bridges_equal,
    dual_chain,
    random_chain,
    read_chain,
    recover_from_single_bridge,
    seeded_transform_pair,
    transition_matrix,
)
from .kernels import Eigenpair, kernel_from_id
from .measure import DEFAULT_QUADRATURE
from .simulate import RngPolicy, euler_maruyama, poisson_flip_endpoints
from .stats import energy_distance_test, histogram_tv, ks_two_sample, mc_mean_with_se

SCHEMA_VERSION = 1

INV_FIRST_STEP = "flipbessel-first-step-separation"
INV_ZERO_DENSITY = "flipbessel-zero-density"
INV_VARIANT_SWAP = "flipbessel-variant-swap"
INV_FRACTION_POSITIVE = "flipbessel-fraction-positive"
INV_EXTRACTION = "extraction-s-independence"
INV_SDE_TV = "sde-histogram-tv"


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------
# option plumbing
# ------------------------------------------------------------------

COMMON_OPTS = {
    "seed": (int, 7, "master seed for all RNG streams"),
    "threads": (int, 1, "worker count for chunked sampling"),
    "out": (str, None, "output path or prefix for JSON/CSV artifacts"),
    "tol": (float, 1e-6, "residual tolerance for deterministic checks"),
}

COMMANDS = {
    "verify-kernels": {
        "kernel": (str, "gaussian", "catalog kernel id"),
    },
    "verify-chain": {
        "chain": (str, "random:6:1", "'random:n:seed' or a chain file path"),
        "t0": (float, 1.0, "horizon for the single-bridge recovery"),
    },
    "sample-bridge": {
        "kernel": (str, "gaussian", "catalog kernel id"),
        "x": (float, 0.0, "start state"),
        "t": (float, 1.0, "horizon"),
        "y": (float, 0.0, "end state"),
        "grid": (str, "9", "grid point count, or comma-separated times"),
        "n": (int, 100, "number of paths"),
    },
    "compare-bridges": {
        "a": (str, "gaussian", "first kernel id"),
        "b": (str, "tanh:1:0", "second kernel id"),
        "x": (float, 0.0, "start state"),
        "t": (float, 1.0, "horizon"),
        "y": (float, 0.5, "end state"),
        "grid": (str, "9", "grid point count, or comma-separated times"),
        "n": (int, 100_000, "paths for the marginal KS test"),
        "energy_n": (int, 5000, "paths per pool for the energy test"),
        "permutations": (int, 500, "permutations for the energy test"),
        "p_min": (float, 0.01, "reject equality below this p-value"),
    },
    "extract-psi": {
        "p": (str, "gaussian", "reference kernel id"),
        "q": (str, "tanh:1:0", "transformed kernel id"),
        "b": (float, 0.0, "anchor state"),
        "horizon": (float, 1.0, "extraction horizon"),
        "zlo": (float, -3.0, "grid start"),
        "zhi": (float, 3.0, "grid end"),
        "zn": (int, 61, "grid size"),
    },
    "bessel-demo": {
        "t": (float, 1.0, "horizon"),
        "n": (int, 1_000_000, "endpoint draws"),
    },
    "sde-crosscheck": {
        "kernel": (str, "tanh:1:0", "drift:k or tanh:k:c kernel id"),
        "x0": (float, 0.0, "start state"),
        "t": (float, 1.0, "horizon"),
        "dt": (float, 1e-3, "Euler step"),
        "n": (int, 1_000_000, "paths"),
        "tv_max": (float, 0.02, "maximum histogram TV distance"),
        "bins": (int, 60, "histogram bins"),
    },
}


def read_config_file(path):
    """One `key = value` pair per line; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bridgelab",
        description="bridge-law experiments over the transition-kernel catalog")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None,
                       help="key = value config file; flags override it")
        for key, (typ, _default, help_text) in {**COMMON_OPTS, **opts}.items():
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ,
                           default=None, help=help_text)
    return parser


def resolve_config(args):
    """Merge precedence: command-line flag > config file > default."""
    schema = {**COMMON_OPTS, **COMMANDS[args.command]}
    file_values = read_config_file(args.config) if args.config else {}
    unknown = set(file_values) - set(schema)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    resolved = {}
    for key, (typ, default, _help) in schema.items():
        cli_val = getattr(args, key)
        if cli_val is not None:
            resolved[key] = cli_val
        elif key in file_values:
            try:
                resolved[key] = typ(file_values[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from exc
        else:
            resolved[key] = default
    return resolved


def parse_grid(spec, t):
    if "," in spec:
        grid = np.array([float(v) for v in spec.split(",")])
    else:
        grid = np.linspace(0.0, t, int(spec))
    return grid


def chunk_sizes(n, threads):
    base = n // threads
    sizes = [base + (1 if i < n % threads else 0) for i in range(threads)]
    return [s for s in sizes if s > 0]


def pooled_bridge_values(spec, grid, n, policy, threads, stream_base):
    """Deterministic chunked sampling: worker i uses stream
    stream_base + i, chunks are merged in index order."""
    parts = []
    for i, size in enumerate(chunk_sizes(n, threads)):
        parts.append(sample_bridge_values(spec, grid, size,
                                          policy.stream(stream_base + i)))
    return np.vstack(parts)


# ------------------------------------------------------------------
# report assembly
# ------------------------------------------------------------------

def make_check(invariant, observed, threshold, passed):
    return {"invariant": invariant, "observed": float(observed),
            "threshold": float(threshold), "passed": bool(passed)}


def emit_report(cfg, command, checks_list, extra, out):
    report = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "config": {k: v for k, v in sorted(cfg.items())},
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "checks": checks_list,
        "passed": all(c["passed"] for c in checks_list),
    }
    report.update(extra)
    text = json.dumps(report, sort_keys=True, indent=2)
    if out:
        with open(out if out.endswith(".json") else out + ".json", "w") as fh:
            fh.write(text + "\n")
    print(text)
    if not report["passed"]:
        failed = [c["invariant"] for c in checks_list if not c["passed"]]
        print(f"FAILED invariants: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


# ------------------------------------------------------------------
# commands
# ------------------------------------------------------------------

def cmd_verify_kernels(cfg):
    kernel = kernel_from_id(cfg["kernel"])
    tol = cfg["tol"]
    q = DEFAULT_QUADRATURE
    lo, hi = kernel.measure.support
    if lo == 0.0:
        xs = [0.25, 0.5, 1.0, 2.0]
    else:
        xs = [-2.0, -0.5, 0.0, 0.5, 2.0]
    results = []

    norm_max = max(checks.normalization_residual(kernel, t, x, q)
                   for t in (0.25, 1.0, 4.0) for x in xs)
    results.append(make_check(checks.INV_NORMALIZATION, norm_max, tol, norm_max < tol))

    ck_max = max(checks.chapman_kolmogorov_residual(kernel, s, t, x, y, q)
                 for (s, t) in ((0.25, 0.25), (0.5, 0.5), (0.3, 0.7))
                 for x in xs[:3] for y in xs[-3:])
    results.append(make_check(checks.INV_CHAPMAN_KOLMOGOROV, ck_max, tol, ck_max < tol))

    if kernel.self_dual:
        if lo == 0.0:
            f_win, g_win = (0.5, 1.0), (1.5, 2.0)
        else:
            f_win, g_win = (0.5, 1.0), (-1.0, -0.5)
        dual = checks.duality_residual(kernel, 1.0, lambda x: np.ones_like(x),
                                       lambda x: np.ones_like(x), q,
                                       f_window=f_win, g_window=g_win)
        results.append(make_check(checks.INV_SELF_DUALITY, dual, tol, dual < tol))

    if kernel.eigenpair is not None and kernel.base is not None:
        eig_max = max(checks.eigen_residual(kernel.base, kernel.eigenpair, t, x, q)
                      for t in (0.5, 1.0) for x in (-1.0, 0.0, 1.5))
        results.append(make_check(checks.INV_EIGEN, eig_max, min(tol, 1e-8),
                                  eig_max < min(tol, 1e-8)))

    return results, {}


def cmd_verify_chain(cfg):
    spec = cfg["chain"]
    rng = np.random.default_rng(cfg["seed"])
    if spec.startswith("random:"):
        parts = spec.split(":")
        chain = random_chain(int(parts[1]), np.random.default_rng(int(parts[2])))
    else:
        with open(spec) as fh:
            chain = read_chain(fh)
    tol = cfg["tol"]
    results = []

    p1, p2 = transition_matrix(chain, 0.4), transition_matrix(chain, 0.9)
    semi = float(np.abs(p1 @ p2 - transition_matrix(chain, 1.3)).max())
    results.append(make_check(INV_SEMIGROUP, semi, 1e-10, semi < 1e-10))

    dual = dual_chain(chain)
    pt, pt_hat = transition_matrix(chain, 0.7), transition_matrix(dual, 0.7)
    dual_dev = float(np.abs(chain.m[:, None] * pt - (pt_hat * chain.m[:, None]).T).max())
    results.append(make_check(INV_DUALITY, dual_dev, 1e-11, dual_dev < 1e-11))

    chain_p, chain_q, psi, lam = seeded_transform_pair(chain.n,
                                                       np.random.default_rng(cfg["seed"]))
    qt = transition_matrix(chain_q, 0.8)
    conj = np.exp(-lam * 0.8) * transition_matrix(chain_p, 0.8) \
        * psi[None, :] / psi[:, None]
    conj_dev = float(np.abs(qt - conj).max())
    results.append(make_check(INV_CONJUGATION, conj_dev, 1e-12, conj_dev < 1e-12))

    states = list(range(0, chain.n, max(1, chain.n // 4)))[:4]
    equal, dev, _ = bridges_equal(chain_p, chain_q, states_x=states,
                                  ts=[0.3, 0.8, 1.5], states_y=states,
                                  s_fractions=[0.25, 0.5, 0.75], tol=1e-10)
    results.append(make_check(INV_BRIDGE_INVARIANCE, dev, 1e-10, equal))

    rec = recover_from_single_bridge(chain_p, chain_q, 0, cfg["t0"], chain.n - 1)
    m_dev = float(np.abs(rec.psi * rec.psi_hat * chain_p.m - chain_q.m).max()
                  / chain_q.m.max()) if rec.verified else float("inf")
    results.append(make_check(INV_MEASURE_RELATION, m_dev, 1e-9, m_dev < 1e-9))
    results.append(make_check(INV_RECOVERY, rec.max_bridge_dev, 1e-10, rec.verified))

    extra = {"recovered_lambda": None if not rec.verified else rec.lam,
             "seeded_lambda": lam}
    return results, extra


def cmd_sample_bridge(cfg):
    kernel = kernel_from_id(cfg["kernel"])
    spec = BridgeSpec(kernel, x=cfg["x"], t=cfg["t"], y=cfg["y"])
    grid = parse_grid(cfg["grid"], cfg["t"])
    policy = RngPolicy(cfg["seed"])
    values = pooled_bridge_values(spec, grid, cfg["n"], policy, cfg["threads"], 0)
    out = cfg["out"] or "bridge_samples"
    csv_path = out if out.endswith(".csv") else out + ".csv"
    with open(csv_path, "w") as fh:
        write_paths_csv(fh, grid, values)
    print(f"wrote {cfg['n']} paths on {grid.size} grid points to {csv_path}")
    return [], {"csv": csv_path, "n": cfg["n"]}


def cmd_compare_bridges(cfg):
    kern_a, kern_b = kernel_from_id(cfg["a"]), kernel_from_id(cfg["b"])
    spec_a = BridgeSpec(kern_a, x=cfg["x"], t=cfg["t"], y=cfg["y"])
    spec_b = BridgeSpec(kern_b, x=cfg["x"], t=cfg["t"], y=cfg["y"])
    grid = parse_grid(cfg["grid"], cfg["t"])
    mid = grid[np.argmin(np.abs(grid - 0.5 * cfg["t"]))]
    mid_idx = int(np.argmin(np.abs(grid - 0.5 * cfg["t"])))
    policy = RngPolicy(cfg["seed"])
    threads = cfg["threads"]

    vals_a = pooled_bridge_values(spec_a, grid, cfg["n"], policy, threads, 0)
    vals_b = pooled_bridge_values(spec_b, grid, cfg["n"], policy, threads, threads)
    ks = ks_two_sample(vals_a[:, mid_idx], vals_b[:, mid_idx], seed=cfg["seed"])

    n_e = min(cfg["energy_n"], cfg["n"])
    energy = energy_distance_test(vals_a[:n_e], vals_b[:n_e],
                                  cfg["permutations"], policy.stream(2 * threads),
                                  seed=cfg["seed"])

    results = [
        make_check(stats.INV_MARGINAL_KS, ks.p_value, cfg["p_min"],
                   ks.p_value > cfg["p_min"]),
        make_check(stats.INV_PATH_ENERGY, energy.p_value, cfg["p_min"],
                   energy.p_value > cfg["p_min"]),
    ]
    extra = {"reports": {"ks": json.loads(ks.to_json()),
                         "energy": json.loads(energy.to_json())},
             "mid_time": float(mid)}

    both_flip = (kern_a.bridge_family == "flipbessel"
                 and kern_b.bridge_family == "flipbessel")
    if both_flip and cfg["x"] == 0.0:
        tiny_grid = np.array([0.0, 1e-8 * cfg["t"], 0.5 * cfg["t"], cfg["t"]])
        n_fs = min(cfg["n"], 10_000)
        fa = float((pooled_bridge_values(spec_a, tiny_grid, n_fs, policy,
                                         1, 3 * threads)[:, 1] > 0).mean())
        fb = float((pooled_bridge_values(spec_b, tiny_grid, n_fs, policy,
                                         1, 3 * threads + 1)[:, 1] > 0).mean())
        results.append(make_check(INV_FIRST_STEP, abs(fa - fb), 1e-3,
                                  abs(fa - fb) < 1e-3))
        extra["first_step_positive_fraction"] = {"a": fa, "b": fb}

    if cfg["out"]:
        pool = np.sort(np.concatenate([vals_a[:, mid_idx], vals_b[:, mid_idx]]))
        sub = pool[:: max(1, pool.size // 2000)]
        cdf_a = np.searchsorted(np.sort(vals_a[:, mid_idx]), sub, side="right") / cfg["n"]
        cdf_b = np.searchsorted(np.sort(vals_b[:, mid_idx]), sub, side="right") / cfg["n"]
        with open(cfg["out"] + "_cdf.csv", "w") as fh:
            fh.write("value,cdf_a,cdf_b\n")
            for v, ca, cb in zip(sub, cdf_a, cdf_b):
                fh.write(f"{float(v)!r},{float(ca)!r},{float(cb)!r}\n")
    return results, extra


def cmd_extract_psi(cfg):
    kern_p, kern_q = kernel_from_id(cfg["p"]), kernel_from_id(cfg["q"])
    zs = np.linspace(cfg["zlo"], cfg["zhi"], cfg["zn"])
    b, horizon = cfg["b"], cfg["horizon"]
    psi = np.asarray(extract_eigen_ratio(kern_p, kern_q, b, horizon, 0.0, zs))
    psi_norm = psi / extract_eigen_ratio(kern_p, kern_q, b, horizon, 0.0, b)

    s_grid = np.linspace(horizon / 9.0, 8.0 * horizon / 9.0, 8)
    lam, lam_spread = extract_eigenvalue(kern_p, kern_q, b, horizon, s_grid)
    dev = 0.0
    for s in s_grid:
        ratio = psi / np.asarray(extract_eigen_ratio(kern_p, kern_q, b, horizon, s, zs))
        dev = max(dev, float(np.abs(ratio / ratio[0] - 1.0).max()))
    results = [make_check(INV_EXTRACTION, dev, 1e-10, dev < 1e-10)]

    if cfg["out"]:
        with open(cfg["out"] + ".csv", "w") as fh:
            fh.write("z,psi,psi_normalized\n")
            for z, p_raw, p_n in zip(zs, psi, psi_norm):
                fh.write(f"{float(z)!r},{float(p_raw)!r},{float(p_n)!r}\n")
    return results, {"lambda": lam, "lambda_spread": lam_spread}


def cmd_bessel_demo(cfg):
    t, n = cfg["t"], cfg["n"]
    kern_x = kernel_from_id("flipbessel:X")
    kern_y = kernel_from_id("flipbessel:Y")
    ys = np.array([0.5, 1.0, 2.0])
    big = (1 + np.exp(-2 * t)) / np.sqrt(2 * np.pi * t ** 3) * np.exp(-ys ** 2 / (2 * t))
    small = (1 - np.exp(-2 * t)) / np.sqrt(2 * np.pi * t ** 3) * np.exp(-ys ** 2 / (2 * t))
    dev_x = max(float(np.abs(kern_x.density(t, 0.0, ys) - big).max()),
                float(np.abs(kern_x.density(t, 0.0, -ys) - small).max()))
    swap = max(float(np.abs(kern_y.density(t, 0.0, -ys) - big).max()),
               float(np.abs(kern_y.density(t, 0.0, ys) - small).max()))
    results = [
        make_check(INV_ZERO_DENSITY, dev_x, 1e-10, dev_x < 1e-10),
        make_check(INV_VARIANT_SWAP, swap, 1e-10, swap < 1e-10),
    ]

    policy = RngPolicy(cfg["seed"])
    ends = poisson_flip_endpoints(0.0, t, n, policy.stream(0), "X")
    frac = float((ends > 0).mean())
    target = (1 + np.exp(-2 * t)) / 2
    se = np.sqrt(target * (1 - target) / n)
    results.append(make_check(INV_FRACTION_POSITIVE, abs(frac - target), 3 * se,
                              abs(frac - target) < 3 * se))

    tv = histogram_tv(ends, lambda y: kern_x.lebesgue_density(t, 0.0, y),
                      60, (-4.5 * np.sqrt(t), 4.5 * np.sqrt(t)))
    results.append(make_check(stats.INV_HISTOGRAM_TV, tv, 0.02, tv < 0.02))

    if cfg["out"]:
        ygrid = np.linspace(-4 * np.sqrt(t), 4 * np.sqrt(t), 201)
        ygrid = ygrid[ygrid != 0]
        with open(cfg["out"] + "_density.csv", "w") as fh:
            fh.write("y,density_X_from0,density_Y_from0,lebesgue_X_from0\n")
            for yy in ygrid:
                fh.write(f"{float(yy)!r},{float(kern_x.density(t, 0.0, yy))!r},"
                         f"{float(kern_y.density(t, 0.0, yy))!r},"
                         f"{float(kern_x.lebesgue_density(t, 0.0, yy))!r}\n")
    return results, {"fraction_positive": frac, "expected_fraction": float(target)}


def cmd_sde_crosscheck(cfg):
    kernel = kernel_from_id(cfg["kernel"])
    if kernel.drift is None:
        raise ConfigError(f"kernel {cfg['kernel']} has no drift function to simulate")
    policy = RngPolicy(cfg["seed"])
    parts = []
    for i, size in enumerate(chunk_sizes(cfg["n"], cfg["threads"])):
        parts.append(euler_maruyama(kernel.drift, cfg["x0"], cfg["t"], cfg["dt"],
                                    policy.stream(i), n_paths=size))
    ends = np.concatenate(parts)
    width = 4.5 * np.sqrt(cfg["t"]) + abs(cfg["x0"])
    tv = histogram_tv(ends, lambda y: kernel.lebesgue_density(cfg["t"], cfg["x0"], y),
                      cfg["bins"], (cfg["x0"] - width, cfg["x0"] + width))
    results = [make_check(INV_SDE_TV, tv, cfg["tv_max"], tv < cfg["tv_max"])]
    return results, {"n": cfg["n"], "dt": cfg["dt"]}


HANDLERS = {
    "verify-kernels": cmd_verify_kernels,
    "verify-chain": cmd_verify_chain,
    "sample-bridge": cmd_sample_bridge,
    "compare-bridges": cmd_compare_bridges,
    "extract-psi": cmd_extract_psi,
    "bessel-demo": cmd_bessel_demo,
    "sde-crosscheck": cmd_sde_crosscheck,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        results, extra = HANDLERS[args.command](cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return emit_report(cfg, args.command, results, extra, cfg.get("out"))


if __name__ == "__main__":
    sys.exit(main())
