"""Command line entry point: ``sweep``, ``single`` and ``selftest``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields

import numpy as np

from .channel import ScenarioConfig, drop_seed, generate_drop, load_scenario
from .harness import (ALGORITHMS, SWEEP_ALIASES, SweepSpec, emit, run_algorithm, run_sweep,
                      summarize, DropContext, drop_metrics)

_SPEC_FLAGS = ("drops", "cap_low", "cap_high", "tol", "max_iter", "tol_out", "max_outer")


def _scenario_fields():
    # drops are seeded from --seed, so the scenario's own seed is not a flag
    return [f for f in fields(ScenarioConfig) if f.name != "seed"]


def _add_scenario_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("scenario (overrides the config file)")
    for f in _scenario_fields():
        help_ = "smooth-max sharpness; not fixed by the model, 10 is a library choice" \
            if f.name == "alpha" else None
        g.add_argument("--" + f.name.replace("_", "-"), dest="sc_" + f.name,
                       type=type(f.default), default=None, help=help_)
    p.add_argument("--config", help="JSON scenario file (or a sweep file with a 'scenario' key)")


def _scenario(args) -> tuple:
    data, sweep = {}, {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        if "scenario" in doc:
            sweep = {k: v for k, v in doc.items() if k != "scenario"}
            doc = doc["scenario"]
        data = asdict(load_scenario(doc))
    for f in _scenario_fields():
        v = getattr(args, "sc_" + f.name)
        if v is not None:
            data[f.name] = v
    return ScenarioConfig(**data), sweep


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fblsecure",
                                description="Secure finite-blocklength precoding simulations.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="Monte-Carlo sweep over one scenario parameter")
    s.add_argument("--var", default=None, choices=sorted(SWEEP_ALIASES),
                   help="swept variable (default power_dbm)")
    s.add_argument("--values", type=float, nargs="+", default=None)
    s.add_argument("--algorithms", nargs="+", default=None, choices=ALGORITHMS)
    s.add_argument("--drops", type=int, default=None, help="drops per point (default 50)")
    s.add_argument("--seed", type=int, default=None, help="base seed (default 0)")
    s.add_argument("--cap-low", type=float, default=None)
    s.add_argument("--cap-high", type=float, default=None)
    s.add_argument("--tol", type=float, default=None, help="inner tolerance (default 0.01)")
    s.add_argument("--max-iter", type=int, default=None, help="inner iterations (default 15)")
    s.add_argument("--tol-out", type=float, default=None, help="outer tolerance (default 0.01)")
    s.add_argument("--max-outer", type=int, default=None, help="outer iterations (default 5)")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--timing", action="store_true", help="record wall time (breaks byte determinism)")
    s.add_argument("--out", default="sweep.csv", help="CSV output path")
    s.add_argument("--json", default=None, help="optional JSON output path")
    _add_scenario_flags(s)

    g = sub.add_parser("single", help="one drop with a full diagnostic dump")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--algorithms", nargs="+", default=list(ALGORITHMS), choices=ALGORITHMS)
    _add_scenario_flags(g)

    sub.add_parser("selftest", help="run the built-in oracle checks")
    return p


def _cmd_sweep(args) -> int:
    scenario, sweep_cfg = _scenario(args)
    spec_kw = dict(sweep_cfg)
    for key in _SPEC_FLAGS:
        v = getattr(args, key)
        if v is not None:
            spec_kw[key] = v
    if args.var is not None:
        spec_kw["var"] = args.var
    if args.values is not None:
        spec_kw["values"] = tuple(args.values)
    if args.algorithms is not None:
        spec_kw["algorithms"] = tuple(args.algorithms)
    if args.seed is not None:
        spec_kw["base_seed"] = args.seed
    spec_kw["timing"] = args.timing
    spec_kw["scenario"] = scenario
    spec = SweepSpec.from_dict(spec_kw)

    rows = run_sweep(spec, workers=args.workers)
    emit(rows, args.out, "csv")
    if args.json:
        emit(rows, args.json, "json", spec)
    for s in summarize(rows):
        print(f"{spec.var}={s['sweep_value']:<8g} {s['algorithm']:<11s} "
              f"sum secrecy {s['sum_secrecy_rate']:8.3f} +/- {s['sum_secrecy_rate_stderr']:.3f}")
    failed = [r for r in rows if r.error]
    if failed:
        summary = {"failed_rows": len(failed),
                   "errors": sorted({r.error for r in failed})[:20]}
        print(json.dumps(summary), file=sys.stderr)
        return 2
    return 0


def _cmd_single(args) -> int:
    scenario, _ = _scenario(args)
    spec = SweepSpec(scenario=scenario, values=(scenario.power_dbm,), drops=1,
                     algorithms=tuple(args.algorithms))
    channels = generate_drop(scenario, drop_seed(args.seed))
    params = scenario.fbl_params()
    ctx = DropContext(channels, params, spec)
    out = {"scenario": asdict(scenario), "seed": args.seed,
           "noise_w": scenario.noise_w(), "power_w": scenario.power_w,
           "dist_user": channels.dist_user.tolist(), "dist_eve": channels.dist_eve.tolist(),
           "algorithms": {}}
    status = 0
    for name in spec.algorithms:
        try:
            f, eps, delta, outer, inner = run_algorithm(name, ctx)
            entry = drop_metrics(f, eps, delta, channels, params)
            entry.update(outer_iters=outer, inner_iters_total=inner,
                         eps=np.asarray(eps).tolist(), delta=np.asarray(delta).tolist())
        except Exception as exc:
            entry = {"error": f"{type(exc).__name__}: {exc}"}
            status = 2
        out["algorithms"][name] = entry
    print(json.dumps(out, indent=1))
    return status


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"sweep": _cmd_sweep, "single": _cmd_single, "selftest": _cmd_selftest}[
            args.command](args)
    except (ValueError, OSError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
