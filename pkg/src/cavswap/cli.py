"""Command-line entry point: ``cavswap {sweep,asymscan,bound,single,multipartite}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure on every point.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .errors import ConfigError, EmissionZero, IntegrationError, NoHighEmissionPoint
from .lindblad import evolve_density, photon_emission_probability
from .metrics import evaluate_point
from .model import TABLE1, params_from_config, pulse_from_config
from .multipartite import (KernelTable, PostSelectedScheme, averaged_fidelity,
                           preset_scheme, scheme_sources)
from .qrt import two_time_correlation
from .sweep import (BOUND_AREAS, DEFAULT_AREAS, FAMILY_FALLING, FAMILY_SYMMETRIC,
                    SweepSettings, frontier_gain, run_asymmetric_scan, run_bound_check,
                    run_tradeoff_sweep, write_bound_report, write_curve_csv,
                    write_frontier_csv)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("cavswap")


class AllPointsFailed(RuntimeError):
    pass


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _params(cfg, args):
    spec = dict(cfg.get("params", {}))
    if args.preset:
        spec.setdefault("preset", args.preset)
    if not spec:
        raise ConfigError("no system parameters: pass --preset or a config with 'params'")
    return params_from_config(spec)


def _label(cfg, args):
    if "label" in cfg:
        return str(cfg["label"])
    return args.preset or cfg.get("params", {}).get("preset", "custom")


def _settings(cfg, args):
    tol = args.tolerance if args.tolerance is not None else cfg.get("tolerance")
    return SweepSettings(method=args.method or cfg.get("method", "moments"),
                         rtol=tol, atol=tol,
                         grid_points=args.grid_points or cfg.get("grid_points"),
                         threads=args.threads or int(cfg.get("threads", 1)))


def _sigma_range(cfg):
    rng = cfg.get("sigma_range")
    if rng is None:
        return None
    if not isinstance(rng, (list, tuple)) or not 2 <= len(rng) <= 4:
        raise ConfigError("sigma_range must be [lo, hi, count?, spacing?]")
    return tuple(rng)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def cmd_sweep(args, cfg):
    params = _params(cfg, args)
    curves = run_tradeoff_sweep(params, cfg.get("areas", DEFAULT_AREAS), _sigma_range(cfg),
                                label=_label(cfg, args), settings=_settings(cfg, args))
    if all(not c.points for c in curves):
        raise AllPointsFailed("every sweep point failed")
    summary = []
    for c in curves:
        path = write_curve_csv(c, args.out)
        summary.append({"area": c.pulse_area, "orientation": c.orientation,
                        "points": len(c.points), "failed": len(c.failures), "file": path})
        print(f"S={c.pulse_area:g}: {c.orientation} ({len(c.points)} points, "
              f"{len(c.failures)} failed) -> {path}")
    _write_json(os.path.join(args.out, "sweep_summary.json"), summary)


def cmd_asymscan(args, cfg):
    params = _params(cfg, args)
    a = cfg.get("asym", {})
    kw = {}
    for key in ("sigma1_range", "ratio_range", "symmetric_range"):
        if key in a:
            kw[key] = tuple(a[key])
    scan = run_asymmetric_scan(params, areas=a.get("areas", cfg.get("areas", DEFAULT_AREAS)),
                               settings=_settings(cfg, args), **kw)
    if not scan.samples:
        raise AllPointsFailed("every scan point failed")
    os.makedirs(args.out, exist_ok=True)
    path = write_frontier_csv(scan, args.out)
    gains = frontier_gain(scan, FAMILY_FALLING, FAMILY_SYMMETRIC)
    best = max(gains, key=lambda g: g[1]) if gains else None
    print(f"{len(scan.samples)} samples, {len(scan.failures)} failed -> {path}")
    if best:
        print(f"largest falling-edge gain over symmetric: {best[1]:.4f} at P_ex bin {best[0]:.2f}")


def cmd_bound(args, cfg):
    params = _params(cfg, args)
    b = cfg.get("bound", {})
    label = _label(cfg, args)
    settings = _settings(cfg, args)
    curves = run_tradeoff_sweep(params, b.get("areas", BOUND_AREAS), _sigma_range(cfg),
                                label=label, settings=settings)
    if all(not c.points for c in curves):
        raise AllPointsFailed("every sweep point failed")
    os.makedirs(args.out, exist_ok=True)
    try:
        check = run_bound_check(params, label=label, curves=curves,
                                threshold=float(b.get("threshold", 0.97)))
        payload = check.as_dict()
        payload["status"] = "ok"
        print(f"best F at P_ex > {check.threshold}: {check.best_fidelity:.4f} "
              f"(reference {check.reference_fidelity:.4f}, excess {check.excess:+.4f})")
    except NoHighEmissionPoint as exc:
        max_p = max(p.p_ex for c in curves for p in c.points)
        best = max((p.fidelity, p.p_ex) for c in curves for p in c.points)
        payload = {"config_label": label, "status": "no_high_emission", "message": str(exc),
                   "max_p_ex": max_p, "best_fidelity_any_p_ex": best[0]}
        print(str(exc))
    path = write_bound_report([payload], args.out, {"params": params.as_dict(),
                                                    "settings": settings.provenance()})
    print(f"-> {path}")


def cmd_single(args, cfg):
    params = _params(cfg, args)
    if "pulse" not in cfg:
        raise ConfigError("single needs a 'pulse' entry in the config")
    policy = pulse_from_config(cfg["pulse"])
    s = _settings(cfg, args)
    method = "grid" if args.dump_correlation else s.method
    ev, corr = evaluate_point(params, policy, method=method, rtol=s.rtol, atol=s.atol,
                              grid_points=s.grid_points, workers=s.threads,
                              keep_correlation=True)
    print(ev.swap.to_json(indent=2))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "single.json"), ev.as_dict())
        if corr is not None:
            corr.dump(os.path.join(args.out, "correlation.bin"))


def cmd_multipartite(args, cfg):
    m = cfg.get("multipartite", {})
    if args.scheme:
        scheme = PostSelectedScheme.load(args.scheme)
    elif "scheme" in m:
        scheme = PostSelectedScheme.from_dict(m["scheme"])
    else:
        scheme = preset_scheme(args.scheme_preset or m.get("preset", "bell"))
    sources = scheme_sources(scheme)
    per_source = m.get("sources", {})
    default = m.get("default_source", {})
    if not default and (args.preset or "params" in cfg):
        default = {"params": cfg.get("params", {"preset": args.preset})}
        if "pulse" in cfg:
            default["pulse"] = cfg["pulse"]
    setups = {}
    for sid in sources:
        spec = {**default, **per_source.get(sid, {})}
        if "params" not in spec or "pulse" not in spec:
            raise ConfigError(f"source {sid!r} needs 'params' and 'pulse'")
        setups[sid] = (params_from_config(spec["params"]), pulse_from_config(spec["pulse"]))
    s = _settings(cfg, args)
    tol = {} if s.rtol is None else {"rtol": s.rtol, "atol": s.atol}
    # one shared grid long enough for every source
    trajs = {sid: evolve_density(p, pol, **tol) for sid, (p, pol) in setups.items()}
    t_end = max(t.grid[-1] for t in trajs.values())
    n = s.grid_points or max(t.grid.size for t in trajs.values())
    grid = np.linspace(0.0, t_end, n)
    items, amps = {}, {}
    for sid, (p, pol) in setups.items():
        tr = evolve_density(p, pol, grid, **tol)
        corr = two_time_correlation(p, pol, tr, workers=s.threads)
        items[sid] = (corr, photon_emission_probability(tr), p.kappa)
        amps[sid] = tr.pure_amplitude[:, 1]
        if args.dump_correlation and args.out:
            os.makedirs(args.out, exist_ok=True)
            corr.dump(os.path.join(args.out, f"correlation_{sid}.bin"))
    table = KernelTable.from_correlations(items, amps)
    fid, parts = averaged_fidelity(scheme, table, return_parts=True)
    out = {"fidelity": fid, "survivors": parts["survivors"],
           "p_ex": {sid: v[1] for sid, v in items.items()}, "n_grid": int(n)}
    print(json.dumps(out, indent=2))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "multipartite.json"), out)


COMMANDS = {"sweep": cmd_sweep, "asymscan": cmd_asymscan, "bound": cmd_bound,
            "single": cmd_single, "multipartite": cmd_multipartite}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--threads", type=int, default=None, help="worker processes")
    common.add_argument("--grid-points", type=int, default=None,
                        help="grid size for the correlation-grid route")
    common.add_argument("--tolerance", type=float, default=None,
                        help="relative and absolute integrator tolerance")
    common.add_argument("--dump-correlation", action="store_true",
                        help="write the G(t,t') grid as binary + JSON sidecar")
    common.add_argument("--method", choices=("moments", "grid"), default=None,
                        help="moments: grid-free accumulators (default); grid: full G grid")
    common.add_argument("--preset", choices=sorted(TABLE1), default=None,
                        help="Table-1 style parameter row")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cavswap",
                                description="Rate-fidelity trade-off of cavity-mediated entanglement swapping")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep", parents=[common], help="constant-area width sweeps")
    sub.add_parser("asymscan", parents=[common], help="asymmetric-pulse scan and frontier")
    sub.add_parser("bound", parents=[common], help="high-emission fidelity vs cooperativity bound")
    sub.add_parser("single", parents=[common], help="one point; prints the swap result as JSON")
    mp = sub.add_parser("multipartite", parents=[common], help="post-selected multipartite fidelity")
    mp.add_argument("--scheme", help="scheme JSON file")
    mp.add_argument("--scheme-preset", choices=("bell", "ghz", "w"), default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args.config)
        if args.out is None and args.command not in ("single", "multipartite"):
            args.out = cfg.get("out", "out")
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AllPointsFailed, IntegrationError, EmissionZero) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
