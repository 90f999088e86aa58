"""Command-line front end.

Subcommands: kernel, sample, estimate, oracle, compare, verify.  A config
file (--config, TOML or JSON) supplies defaults; flags override.  JSON goes
to stdout or --output; CSV tables go to --csv or stdout.  Exit codes:
0 success, 1 verification failure, 2 configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import ConfigError, Resolved, load_config, resolve
from .estimator import charfn_suite, compare_with_oracle, estimate, oracle_estimate, periodization_tolerance
from .fields import QuadratureError
from .lattice import LatticeError, build_variant, gauge_residual
from .paths import RngStream, SamplerError, sample_brownian, sample_levy_jumps, sample_subordinated, sample_subordinator
from .specfun import DomainError, free_kernel_radial, levy_density_radial, subordinator_density
from .verify import SUITES, run_suites

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _emit_json(payload: dict, args) -> None:
    text = json.dumps(payload, indent=2, default=_json_default)
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _emit_csv(header: list[str], rows, args) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("%.12e" % v if isinstance(v, float) else str(v) for v in row))
    text = "\n".join(lines)
    if getattr(args, "csv", None):
        with open(args.csv, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _merge_config(args) -> dict:
    cfg = {}
    if args.config:
        cfg.update(load_config(args.config))
    for key in ("mass", "dim", "seed", "time"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "x", None) is not None:
        cfg["x"] = args.x
    if getattr(args, "field", None):
        cfg.setdefault("field", {"family": args.field})
        cfg["field"]["family"] = args.field
    if getattr(args, "potential", None):
        cfg.setdefault("potential", {"family": args.potential})
        cfg["potential"]["family"] = args.potential
    if getattr(args, "grid", None):
        n, box = args.grid.split(",")
        cfg["lattice"] = {"n": int(n), "box": float(box)}
    mc_over = {}
    for flag, key in (("paths", "paths"), ("slices", "slices"), ("cutoff", "cutoff"),
                      ("sampler", "sampler"), ("action", "action")):
        val = getattr(args, flag, None)
        if val is not None:
            mc_over[key] = val
    if mc_over:
        cfg.setdefault("mc", {}).update(mc_over)
    if getattr(args, "probe", None):
        cfg.setdefault("probe", {"family": args.probe})
        cfg["probe"]["family"] = args.probe
    if getattr(args, "kinetic", None):
        cfg["kinetic"] = args.kinetic
    return cfg


def cmd_kernel(args) -> int:
    cfg = _merge_config(args)
    res = resolve(cfg)
    t = res.t if res.t is not None else 1.0
    ys = np.linspace(args.y_min, args.y_max, args.points)
    rows = []
    for y in ys:
        n_val = levy_density_radial(abs(y), res.md) if y != 0 else float("inf")
        k_val = free_kernel_radial(abs(y), t, res.md)
        dens = subordinator_density(abs(y), t, res.md.m) if y > 0 else 0.0
        rows.append((float(y), float(t), float(k_val), float(n_val), float(dens)))
    _emit_csv(["y", "t", "k0", "n", "density"], rows, args)
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _merge_config(args)
    res = resolve(cfg)
    t = res.t if res.t is not None else 1.0
    rng = RngStream(res.seed, 0)
    if args.check_charfn:
        rows = charfn_suite(
            "jumps" if args.kind == "jumps" else "subordinated",
            res.md, t, [0.0, 0.5, 1.0, 2.0], args.paths, res.seed,
            eps_cut=res.mc.eps_cut,
        )
        _emit_csv(
            ["xi", "empirical_re", "empirical_im", "exact", "stderr_re", "stderr_im", "z"],
            [(r.xi, r.empirical.real, r.empirical.imag, r.exact, r.stderr_re, r.stderr_im, r.z)
             for r in rows],
            args,
        )
        return EXIT_OK
    steps = args.steps
    if args.kind == "brownian":
        p = sample_brownian(np.zeros(res.md.d), t / steps, steps, res.md.d, rng)
        times, values, marks = p.times, p.values, np.zeros(len(p.times), dtype=int)
    elif args.kind == "subordinator":
        sp = sample_subordinator(np.linspace(0, t, steps + 1), res.md.m, rng)
        times, values, marks = sp.times, sp.values[:, None], np.zeros(len(sp.times), dtype=int)
    elif args.kind == "subordinated":
        s = sample_subordinated(np.zeros(res.md.d), np.linspace(0, t, steps + 1),
                                res.md.m, res.md.d, rng)
        times, values, marks = s.path.times, s.path.values, np.zeros(len(s.path.times), dtype=int)
    elif args.kind == "jumps":
        p = sample_levy_jumps(np.zeros(res.md.d), t, res.md.m, res.md.d,
                              res.mc.eps_cut, t / steps, rng)
        marks = np.zeros(len(p.times), dtype=int)
        for s_j in p.jump_times:
            marks[np.searchsorted(p.times, s_j)] = 1
        times, values = p.times, p.values
    else:
        raise ConfigError(f"unknown sample kind {args.kind!r}")
    rows = [
        (float(ti),) + tuple(float(v) for v in np.atleast_1d(vi)) + (int(mk),)
        for ti, vi, mk in zip(times, values, marks)
    ]
    _emit_csv(["t"] + [f"x{i+1}" for i in range(values.shape[1])] + ["jump"], rows, args)
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _merge_config(args)
    res = resolve(cfg)
    if res.lattice is None:
        raise ConfigError("oracle needs a lattice (--grid N,L or [lattice] in config)")
    t = res.t if res.t is not None else 1.0
    op = build_variant(args.variant, res.lattice, res.fs, res.md, res.kinetic)
    diag = {
        "variant": args.variant,
        "floor": op.floor(),
        "floor_minus_mass": op.floor() - res.md.m,
        "hermiticity_defect": op.hermiticity_defect(),
        "config": res.config,
    }
    if args.gauge_check and args.variant != "h0":
        from .fields import make_gauge

        phi = make_gauge("windowed_cubic", res.md.d, width=3.0)
        diag["gauge_residual_windowed_cubic"] = gauge_residual(
            args.variant, res.fs, phi, res.lattice, res.md, res.kinetic
        )
    _emit_json(diag, args)
    if args.csv:
        col = op.semigroup(t)[:, res.lattice.at_origin_index()]
        rows = [
            tuple(float(c) for c in site) + (float(v.real), float(v.imag))
            for site, v in zip(res.lattice.sites, col)
        ]
        _emit_csv([f"x{i+1}" for i in range(res.md.d)] + ["semigroup_re", "semigroup_im"],
                  rows, args)
    return EXIT_OK


def _require_probe(res: Resolved):
    if res.probe is None:
        from .estimator import make_probe

        return make_probe("gaussian", res.md.d)
    return res.probe


def cmd_estimate(args) -> int:
    cfg = _merge_config(args)
    res = resolve(cfg)
    if res.t is None:
        raise ConfigError("estimate needs --time")
    g = _require_probe(res)
    rep = estimate(args.variant, res.fs, g, res.x, res.t, res.md, res.mc, res.seed)
    payload = rep.to_dict()
    payload["config"] = res.config
    _emit_json(payload, args)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _merge_config(args)
    res = resolve(cfg)
    if res.t is None:
        raise ConfigError("compare needs --time")
    if res.lattice is None:
        raise ConfigError("compare needs a lattice (--grid N,L)")
    g = _require_probe(res)
    rep = estimate(args.variant, res.fs, g, res.x, res.t, res.md, res.mc, res.seed)
    oracle = oracle_estimate(args.variant, res.fs, g, res.x, res.t, res.md,
                             res.lattice, res.kinetic)
    if res.md.d == 1:
        lat_tol = periodization_tolerance(res.lattice, res.md, g, res.x, res.t)
    else:
        lat_tol = args.lat_tol
    verdict = compare_with_oracle(rep, oracle, lat_tol)
    payload = {
        "verdict": verdict.to_dict(),
        "estimate": rep.to_dict(),
        "config": res.config,
    }
    _emit_json(payload, args)
    return EXIT_OK if verdict.passed else EXIT_VERIFY_FAIL


def cmd_verify(args) -> int:
    cfg = _merge_config(args)
    seed = cfg.get("seed")
    results = run_suites(args.suite, seed=seed)
    for r in results:
        print(r.line())
    n_fail = sum(not r.passed for r in results)
    print(f"-- {len(results) - n_fail}/{len(results)} checks passed")
    if args.output:
        payload = {
            "suite": args.suite,
            "results": [
                {"name": r.name, "pass": r.passed, "detail": r.detail, "elapsed_s": r.elapsed}
                for r in results
            ],
            "config": {"seed": seed},
        }
        with open(args.output, "w") as fh:
            json.dump(payload, fh, indent=2)
    return EXIT_OK if n_fail == 0 else EXIT_VERIFY_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="relkac",
        description="Relativistic magnetic semigroups: lattice oracles vs path-integral Monte Carlo",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, time_flag=True):
        p.add_argument("--config", help="TOML or JSON config file")
        p.add_argument("--mass", type=float, default=None)
        p.add_argument("--dim", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        if time_flag:
            p.add_argument("--time", "-t", dest="time", type=float, default=None)
        p.add_argument("--output", help="write JSON here instead of stdout")

    p = sub.add_parser("kernel", help="CSV table of kernel/density values")
    common(p)
    p.add_argument("--y-min", type=float, default=0.05)
    p.add_argument("--y-max", type=float, default=5.0)
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--csv", help="write CSV here instead of stdout")
    p.set_defaults(fn=cmd_kernel)

    p = sub.add_parser("sample", help="dump sampled paths as CSV")
    common(p)
    p.add_argument("--kind", choices=["brownian", "subordinator", "subordinated", "jumps"],
                   default="subordinated")
    p.add_argument("--steps", type=int, default=64)
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--check-charfn", action="store_true",
                   help="emit the empirical-vs-exact characteristic function table")
    p.add_argument("--csv", help="write CSV here instead of stdout")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("oracle", help="lattice operator diagnostics and semigroup column")
    common(p)
    p.add_argument("--variant", choices=["h0", "h1", "h2", "h3"], required=True)
    p.add_argument("--field", default=None)
    p.add_argument("--potential", default=None)
    p.add_argument("--grid", help="N,L")
    p.add_argument("--kinetic", choices=["spectral", "fd"], default=None)
    p.add_argument("--gauge-check", action="store_true")
    p.add_argument("--csv", help="write the semigroup column CSV here")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("estimate", help="Monte Carlo estimate of the semigroup at a point")
    common(p)
    p.add_argument("--variant", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--field", default=None)
    p.add_argument("--potential", default=None)
    p.add_argument("--probe", default=None)
    p.add_argument("--x", type=float, nargs="+", default=None)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--slices", type=int, default=None)
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--sampler", choices=["subordinated", "jumps"], default=None)
    p.add_argument("--action", choices=["sliced", "jump"], default=None)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("compare", help="estimate + oracle + PASS/FAIL verdict")
    common(p)
    p.add_argument("--variant", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--field", default=None)
    p.add_argument("--potential", default=None)
    p.add_argument("--probe", default=None)
    p.add_argument("--x", type=float, nargs="+", default=None)
    p.add_argument("--grid", help="N,L")
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--slices", type=int, default=None)
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--sampler", choices=["subordinated", "jumps"], default=None)
    p.add_argument("--action", choices=["sliced", "jump"], default=None)
    p.add_argument("--kinetic", choices=["spectral", "fd"], default=None)
    p.add_argument("--lat-tol", type=float, default=1e-3,
                   help="lattice allowance when the d=1 quadrature study is unavailable")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("verify", help="run verification suites")
    common(p, time_flag=False)
    p.add_argument("--suite", default="all",
                   help=f"one of {sorted(SUITES)} or 'all'")
    p.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, QuadratureError, SamplerError, LatticeError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
