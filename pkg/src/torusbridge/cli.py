"""Command-line front-end for batch simulation and CSV export.

Subcommands:
  simulate   run a batch and write paths.csv, endpoints.csv, manifest.json
  compare    run coupled model pairs and write agreement.csv
  field      evaluate a drift vector field on a grid into field.csv
  weights    recompute a finished run from its manifest and emit log weights
  check      run the acceptance suite and print one line per criterion

All floating-point CSV values are serialised with 17 significant digits,
and every run is a pure function of its flags (one master --seed, fixed
chunking), so re-runs produce byte-identical CSV files for any worker
count.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .analysis import agreement_rate, drift_field
from .engine import (
    BatchResult,
    SimConfig,
    config_from_dict,
    config_to_dict,
    model_from_dict,
    simulate_batch,
)

__all__ = ["main"]


def _fmt(value: float) -> str:
    """17-significant-digit decimal form, enough to round-trip a double."""
    return format(float(value), ".17g")


def _pair(text: str, flag: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"{flag} expects 'x,y'; got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ValueError(f"{flag} expects two numbers; got {text!r}") from None


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _merge_model(cfg_model: dict, ns: argparse.Namespace):
    """Model description from flags, with a config file filling the gaps."""
    variant = ns.model or cfg_model.get("variant")
    if variant is None:
        raise ValueError("a model is required (--model or --config)")
    base = dict(cfg_model) if cfg_model.get("variant") == variant else {}
    base["variant"] = variant
    if ns.sigma is not None:
        base["sigma"] = ns.sigma
    base.setdefault("sigma", cfg_model.get("sigma", 1.0))
    if ns.T is not None:
        base["horizon"] = ns.T
    base.setdefault("horizon", cfg_model.get("horizon", 1.0))
    if variant == "euclid-bridge":
        if ns.endpoint:
            base["endpoint"] = list(_pair(ns.endpoint, "--endpoint"))
        if "endpoint" not in base:
            raise ValueError("--endpoint x,y is required for euclid-bridge")
    if variant in ("proposed", "true-bridge"):
        if ns.target:
            base["target"] = list(_pair(ns.target, "--target"))
        if "target" not in base:
            raise ValueError(f"--target x,y is required for {variant}")
    if variant == "proposed" and getattr(ns, "scale_drift_by_sigma_sq", False):
        base["scale_by_sigma_sq"] = True
    if variant == "true-bridge" and ns.truncation is not None:
        base["truncation"] = ns.truncation
    return model_from_dict(base)


def _load_config_file(path: str) -> tuple[dict, dict]:
    """Read a config file (bare config block or a full manifest)."""
    data = json.loads(Path(path).read_text())
    if "config" in data and isinstance(data["config"], dict):
        return data["config"], data.get("output", {})
    return data, {}


def _endpoint_rows(batch: BatchResult):
    logw = batch.log_weights
    for pid in range(batch.n_paths):
        x = batch.terminal_points[pid]
        if batch.unresolved[pid]:
            k1 = k2 = ""
        else:
            k1 = str(int(batch.limiting_lattice_points[pid, 0]))
            k2 = str(int(batch.limiting_lattice_points[pid, 1]))
        lw = _fmt(logw[pid]) if logw is not None else ""
        yield [str(pid), _fmt(x[0]), _fmt(x[1]), k1, k2,
               str(int(batch.unresolved[pid])), lw]


def _path_rows(batch: BatchResult, thin: int):
    n = batch.config.n_steps
    steps = [i for i in range(n + 1) if i % thin == 0]
    if steps[-1] != n:
        steps.append(n)  # the terminal state is always kept
    for pid, sample in enumerate(batch.paths):
        for i in steps:
            yield [str(pid), str(i), _fmt(sample.times[i]),
                   _fmt(sample.states[i, 0]), _fmt(sample.states[i, 1])]


def cmd_simulate(ns: argparse.Namespace) -> int:
    cfg_block, out_block = _load_config_file(ns.config) if ns.config else ({}, {})
    model = _merge_model(cfg_block.get("model", {}), ns)
    start = _pair(ns.start, "--start") if ns.start else tuple(cfg_block.get("start", (0.0, 0.0)))
    config = SimConfig(
        model=model,
        start=start,
        n_steps=ns.steps if ns.steps is not None else cfg_block.get("n_steps", 1000),
        seed=ns.seed if ns.seed is not None else cfg_block.get("seed", 0),
        n_paths=ns.paths if ns.paths is not None else cfg_block.get("n_paths", 1),
        record_increments=bool(ns.record_increments or cfg_block.get("record_increments", False)),
    )
    thin = ns.thin if ns.thin is not None else int(out_block.get("thin", 1))
    if thin < 1:
        raise ValueError(f"--thin must be >= 1; got {thin}")
    cutoff = ns.cutoff if ns.cutoff is not None else out_block.get("weight_cutoff")

    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    batch = simulate_batch(config, n_workers=ns.workers, keep_paths=True, weight_cutoff=cutoff)
    _write_csv(out_dir / "paths.csv", "path_id,step,t,x1,x2", _path_rows(batch, thin))
    _write_csv(
        out_dir / "endpoints.csv",
        "path_id,xT1,xT2,k1,k2,unresolved,log_weight",
        _endpoint_rows(batch),
    )
    manifest = {
        "command": "simulate",
        "version": __version__,
        "config": config_to_dict(config),
        "output": {"dir": str(out_dir), "thin": thin, "weight_cutoff": cutoff,
                   "workers": ns.workers},
        "artifacts": ["paths.csv", "endpoints.csv", "manifest.json"],
        "wall_time_s": time.perf_counter() - started,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {batch.n_paths} paths to {out_dir} "
          f"({manifest['wall_time_s']:.2f}s)")
    return 0


def cmd_compare(ns: argparse.Namespace) -> int:
    sigma = ns.sigma if ns.sigma is not None else 1.0
    horizon = ns.T if ns.T is not None else 1.0
    target = _pair(ns.target or "0,0", "--target")
    start = _pair(ns.start, "--start")
    trunc = ns.truncation if ns.truncation is not None else 2

    def build(variant: str) -> SimConfig:
        desc = {"variant": variant, "sigma": sigma, "horizon": horizon}
        if variant in ("proposed", "true-bridge"):
            desc["target"] = list(target)
        if variant == "true-bridge":
            desc["truncation"] = trunc
        if variant == "euclid-bridge":
            ep = _pair(ns.endpoint, "--endpoint") if ns.endpoint else target
            desc["endpoint"] = list(ep)
        return SimConfig(
            model=model_from_dict(desc),
            start=start,
            n_steps=ns.steps,
            seed=ns.seed,
            n_paths=ns.pairs,
        )

    report = agreement_rate(build(ns.model_a), build(ns.model_b), n_workers=ns.workers)

    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def rows():
        for pid in range(report.n_pairs):
            ka = ["", ""] if report.unresolved_a[pid] else [
                str(int(report.offsets_a[pid, 0])), str(int(report.offsets_a[pid, 1]))]
            kb = ["", ""] if report.unresolved_b[pid] else [
                str(int(report.offsets_b[pid, 0])), str(int(report.offsets_b[pid, 1]))]
            yield [str(pid), *ka, *kb, str(int(report.agree[pid]))]

    _write_csv(out_dir / "agreement.csv",
               "pair_id,k1_prop,k2_prop,k1_true,k2_true,agree", rows())
    summary = {
        "n_pairs": report.n_pairs,
        "n_agree": report.n_agree,
        "rate": report.rate,
        "wilson_95": [report.wilson_low, report.wilson_high],
        "n_unresolved": report.n_unresolved,
        "config_digest": report.config_digest,
    }
    (out_dir / "agreement_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"agreement rate {report.rate:.4f} "
          f"(wilson 95% [{report.wilson_low:.4f}, {report.wilson_high:.4f}], "
          f"{report.n_agree}/{report.n_pairs})")
    return 0


def cmd_field(ns: argparse.Namespace) -> int:
    model = _merge_model({}, ns)
    rect = [float(v) for v in ns.rect.split(",")]
    if len(rect) != 4:
        raise ValueError(f"--rect expects 'x1min,x1max,x2min,x2max'; got {ns.rect!r}")
    points, vectors = drift_field(
        model, ns.t, (rect[0], rect[1]), (rect[2], rect[3]), ns.grid
    )
    out_dir = Path(ns.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = ([_fmt(p[0]), _fmt(p[1]), _fmt(b[0]), _fmt(b[1])]
            for p, b in zip(points, vectors))
    _write_csv(out_dir / "field.csv", "x1,x2,b1,b2", rows)
    print(f"wrote {len(points)} field samples to {out_dir / 'field.csv'}")
    return 0


def cmd_weights(ns: argparse.Namespace) -> int:
    manifest = json.loads(Path(ns.manifest).read_text())
    if "config" not in manifest:
        raise ValueError(f"{ns.manifest} does not look like a run manifest")
    config = config_from_dict(manifest["config"])
    batch = simulate_batch(
        config, n_workers=ns.workers, keep_paths=False, weight_cutoff=ns.cutoff
    )
    out_dir = Path(ns.out) if ns.out else Path(ns.manifest).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = ([str(pid), _fmt(lw)] for pid, lw in enumerate(batch.log_weights))
    _write_csv(out_dir / "weights.csv", "path_id,log_weight", rows)
    print(f"wrote {batch.n_paths} log weights to {out_dir / 'weights.csv'}")
    return 0


def cmd_check(ns: argparse.Namespace) -> int:
    from . import acceptance

    results = acceptance.run_all(ns.criterion)
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def _add_common_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma", type=float, default=None, help="diffusion coefficient (> 0)")
    p.add_argument("--T", type=float, default=None, help="time horizon (> 0)")
    p.add_argument("--target", default=None, help="conditioning torus point 'x,y' in [-1/2,1/2)^2")
    p.add_argument("--endpoint", default=None, help="plane endpoint 'x,y' (euclid-bridge)")
    p.add_argument("--truncation", type=int, default=None,
                   help="lift window radius K for true-bridge")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torusbridge",
        description="Simulate Brownian bridges on the flat torus and export CSV diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a batch and write paths/endpoints/manifest")
    p.add_argument("--model", choices=["free-bm", "euclid-bridge", "proposed", "true-bridge"],
                   default=None)
    _add_common_model_flags(p)
    p.add_argument("--steps", type=int, default=None, help="number of time steps (dt = T/steps)")
    p.add_argument("--paths", type=int, default=None, help="number of paths")
    p.add_argument("--seed", type=int, default=None, help="master seed (all randomness)")
    p.add_argument("--start", default=None, help="start point 'x,y' (default 0,0)")
    p.add_argument("--record-increments", action="store_true",
                   help="store Wiener increments on the paths")
    p.add_argument("--scale-drift-by-sigma-sq", dest="scale_drift_by_sigma_sq",
                   action="store_true",
                   help="multiply the nearest-lift drift by sigma^2")
    p.add_argument("--thin", type=int, default=None,
                   help="write every m-th state to paths.csv (terminal state always kept)")
    p.add_argument("--cutoff", type=float, default=None,
                   help="grid time S in (0,T): also emit Girsanov log weights on [0,S]")
    p.add_argument("--config", default=None,
                   help="JSON config (a manifest 'config' block or a full manifest)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--workers", type=int, default=1, help="worker threads (output-invariant)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="coupled model pairs and agreement rate")
    _add_common_model_flags(p)
    p.add_argument("--model-a", choices=["free-bm", "proposed", "true-bridge", "euclid-bridge"],
                   default="proposed", help="first model (default proposed)")
    p.add_argument("--model-b", choices=["free-bm", "proposed", "true-bridge", "euclid-bridge"],
                   default="true-bridge", help="second model (default true-bridge)")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--pairs", type=int, default=1000, help="number of coupled pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", default="0,0")
    p.add_argument("--out", default=".")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("field", help="drift vector field on a grid, written to field.csv")
    p.add_argument("--model", choices=["free-bm", "euclid-bridge", "proposed", "true-bridge"],
                   default="proposed")
    _add_common_model_flags(p)
    p.add_argument("--t", type=float, required=True, help="evaluation time, 0 <= t < T")
    p.add_argument("--grid", type=int, default=21, help="grid resolution per axis (>= 2)")
    p.add_argument("--rect", default="-0.5,0.5,-0.5,0.5",
                   help="rectangle 'x1min,x1max,x2min,x2max'")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("weights", help="recompute a run from its manifest and emit log weights")
    p.add_argument("--manifest", required=True, help="manifest.json of a finished run")
    p.add_argument("--cutoff", type=float, required=True,
                   help="grid time S in (0,T) the weights integrate to")
    p.add_argument("--out", default=None, help="output directory (default: manifest's)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("check", help="run the acceptance suite")
    p.add_argument("--criterion", type=int, action="append", default=None,
                   help="criterion number to run (repeatable; default all)")
    p.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    ns = _build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
