"""Command-line entry point: render, evaluate, plan, sweep.

Every run writes a manifest.json into the output directory (atomically, at
run end) recording the command, config hash, inputs, outputs, seed, and
wall-clock timings. Exit code is 0 iff the run completed without errors;
warnings do not change it.
"""

from __future__ import annotations

import argparse
import glob
import itertools
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import yaml

from . import __version__
from .composer import (
    RpfCache,
    build_predictor,
    compose_components,
    compose_frame,
    score_sequence,
)
from .config import (
    ConfigError,
    apply_override,
    config_from_dict,
    config_hash,
    config_to_dict,
    load_config,
)
from .geometry import RiskGrid
from .heatmap import export_heatmap
from .metrics import MetricsConfig, evaluate
from .planner import EgoState, export_trajectory, plan
from .scenario import ScenarioError, load_scenario


class CliError(Exception):
    """User-facing failure; message printed to stderr, exit code 2."""


_ABLATIONS = {
    "full": {},
    "no-velvar": {"enable_maf_velvar": False},
    "no-vrf": {"enable_vrf": False},
    "no-rpf": {"enable_rpf": False},
}


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="engine config file (YAML)")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed (planner)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="scenario-level parallelism")


def _load_cfg(args, extra_overrides: dict | None = None):
    if args.config:
        if not os.path.exists(args.config):
            raise CliError(f"config file not found: {args.config}")
        doc = yaml.safe_load(open(args.config, encoding="utf-8")) or {}
    else:
        doc = {}
    if extra_overrides:
        doc = dict(doc)
        abl = dict(doc.get("ablation") or {})
        abl.update(extra_overrides)
        doc["ablation"] = abl
    try:
        return config_from_dict(doc)
    except ConfigError as e:
        raise CliError(str(e)) from e


def _load_scenario_checked(path):
    if not os.path.exists(path):
        raise CliError(f"scenario file not found: {path}")
    try:
        return load_scenario(path)
    except ScenarioError as e:
        raise CliError(str(e)) from e


def _expand_globs(patterns) -> list[str]:
    paths = []
    for pat in patterns:
        hits = sorted(glob.glob(pat))
        paths.extend(hits if hits else ([pat] if os.path.exists(pat) else []))
    # de-duplicate, keep order
    seen, out = set(), []
    for p in paths:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def _write_manifest(out_dir: Path, payload: dict):
    tmp = out_dir / ".manifest.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, out_dir / "manifest.json")


class _Run:
    def __init__(self, command: str, args, cfg):
        self.command = command
        self.args = args
        self.cfg = cfg
        self.out_dir = Path(args.out)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.timings: dict = {}
        self._t0 = time.perf_counter()

    def finish(self):
        self.timings["total_s"] = round(time.perf_counter() - self._t0, 6)
        _write_manifest(
            self.out_dir,
            {
                "command": self.command,
                "config_hash": config_hash(self.cfg),
                "inputs": self.inputs,
                "outputs": sorted(self.outputs),
                "seed": self.args.seed,
                "threads": self.args.threads,
                "timings": self.timings,
                "version": __version__,
            },
        )


def cmd_render(args) -> int:
    cfg = _load_cfg(args)
    seq = _load_scenario_checked(args.scenario)
    run = _Run("render", args, cfg)
    run.inputs = [args.scenario] + ([args.config] if args.config else [])

    if args.frame is not None and not 0 <= args.frame < len(seq.frames):
        raise CliError(f"frame {args.frame} out of range (scenario has {len(seq.frames)} frames)")
    indices = range(len(seq.frames)) if args.frame is None else [args.frame]

    predictor = build_predictor(cfg)
    cache = RpfCache()
    stem_base = seq.name or Path(args.scenario).stem
    extra = {"config_hash": config_hash(cfg), "scenario": stem_base}
    t0 = time.perf_counter()
    for i in indices:
        frame = seq.frames[i]
        if args.components:
            grid, parts = compose_components(
                seq.frames[i], seq.lane_graph, cfg, predictor=predictor, frame_index=i, rpf_cache=cache
            )
            composed = RiskGrid(grid=grid, values=parts["maf"] + parts["vrf"] + parts["rpf"])
            for name, vals in parts.items():
                stem = run.out_dir / f"{stem_base}_f{i:04d}_{name}"
                run.outputs += export_heatmap(
                    RiskGrid(grid=grid, values=vals), stem, binary_pgm=not args.ascii, extra=extra
                )
        else:
            composed = compose_frame(
                frame, seq.lane_graph, cfg, predictor=predictor, frame_index=i, rpf_cache=cache
            )
        stem = run.out_dir / f"{stem_base}_f{i:04d}"
        run.outputs += export_heatmap(composed, stem, binary_pgm=not args.ascii, extra=extra)
    run.timings["compose_s"] = round(time.perf_counter() - t0, 6)
    run.finish()
    print(f"rendered {len(list(indices))} frame(s) -> {run.out_dir}")
    return 0


def _score_all(paths, cfg, threads: int):
    sequences = [_load_scenario_checked(p) for p in paths]
    if threads <= 1:
        return [score_sequence(s, cfg) for s in sequences]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [pool.submit(score_sequence, s, cfg) for s in sequences]
        return [f.result() for f in futs]  # submission order keeps aggregation deterministic


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args, extra_overrides=_ABLATIONS[args.ablation])
    paths = _expand_globs(args.scenarios)
    if not paths:
        raise CliError(f"no scenario files match: {' '.join(args.scenarios)}")
    run = _Run("evaluate", args, cfg)
    run.inputs = paths + ([args.config] if args.config else [])

    t0 = time.perf_counter()
    series = _score_all(paths, cfg, args.threads)
    run.timings["scoring_s"] = round(time.perf_counter() - t0, 6)

    mcfg = MetricsConfig(average="macro" if args.macro else "micro")
    report = evaluate(series, config=mcfg, config_hash=config_hash(cfg))
    report_path = run.out_dir / args.report
    report.save(report_path)
    run.outputs.append(str(report_path))

    cfg_path = run.out_dir / "config_used.yaml"
    with open(cfg_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=True)
    run.outputs.append(str(cfg_path))
    run.finish()

    wm = "n/a" if report.wmota is None else f"{report.wmota:.4f}"
    print(
        f"evaluated {len(paths)} scenario(s) [{args.ablation}]: "
        f"OT-F1={report.ot_f1:.4f} tau*={report.tau_star:.6g} PIC={report.pic:.4f} wMOTA={wm}"
    )
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def cmd_plan(args) -> int:
    cfg = _load_cfg(args)
    seq = _load_scenario_checked(args.scenario)
    if not 0 <= args.frame < len(seq.frames):
        raise CliError(f"frame {args.frame} out of range (scenario has {len(seq.frames)} frames)")
    run = _Run("plan", args, cfg)
    run.inputs = [args.scenario] + ([args.config] if args.config else [])

    frame = seq.frames[args.frame]
    t0 = time.perf_counter()
    riskgrid = compose_frame(frame, seq.lane_graph, cfg, frame_index=args.frame)
    run.timings["compose_s"] = round(time.perf_counter() - t0, 6)

    start = EgoState(frame.ego.x, frame.ego.y, frame.ego.heading, frame.ego.speed)
    t0 = time.perf_counter()
    result = plan(
        start,
        riskgrid,
        cfg.planner,
        footprint=(frame.ego.length, frame.ego.width),
        oob_value=cfg.rpf.lambda_off,
        seed=args.seed,
    )
    run.timings["plan_s"] = round(time.perf_counter() - t0, 6)

    traj_path = run.out_dir / args.trajectory
    export_trajectory(result, traj_path)
    run.outputs.append(str(traj_path))
    run.finish()
    print(f"planned {len(result.controls)} steps, cost {result.cost:.6g} -> {traj_path}")
    return 0


def _parse_param(spec: str):
    if "=" not in spec:
        raise CliError(f"--param needs block.field=v1,v2,... (got {spec!r})")
    key, _, values = spec.partition("=")
    vals = []
    for tok in values.split(","):
        try:
            vals.append(yaml.safe_load(tok))
        except yaml.YAMLError:
            vals.append(tok)
    return key.strip(), vals


def cmd_sweep(args) -> int:
    base_doc = {}
    if args.config:
        if not os.path.exists(args.config):
            raise CliError(f"config file not found: {args.config}")
        base_doc = yaml.safe_load(open(args.config, encoding="utf-8")) or {}
    paths = _expand_globs(args.scenarios)
    if not paths:
        raise CliError(f"no scenario files match: {' '.join(args.scenarios)}")
    if not args.param:
        raise CliError("sweep needs at least one --param block.field=v1,v2")

    keys, value_lists = [], []
    for spec in args.param:
        k, vals = _parse_param(spec)
        keys.append(k)
        value_lists.append(vals)

    cfg0 = _load_cfg(args)
    run = _Run("sweep", args, cfg0)
    run.inputs = paths + ([args.config] if args.config else [])
    combos = list(itertools.product(*value_lists))
    rows = []
    for combo_idx, combo in enumerate(combos):
        doc = dict(base_doc)
        label_parts = []
        for k, v in zip(keys, combo):
            doc = apply_override(doc, k, v)
            label_parts.append(f"{k.split('.')[-1]}={v}")
        try:
            cfg = config_from_dict(doc)
        except ConfigError as e:
            raise CliError(f"combination {', '.join(label_parts)}: {e}") from e
        sub = run.out_dir / f"combo_{combo_idx:03d}"
        sub.mkdir(parents=True, exist_ok=True)
        series = _score_all(paths, cfg, args.threads)
        report = evaluate(series, config_hash=config_hash(cfg))
        report.save(sub / "report.json")
        with open(sub / "config.yaml", "w", encoding="utf-8") as fh:
            yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=True)
        run.outputs += [str(sub / "report.json"), str(sub / "config.yaml")]
        rows.append({"combo": dict(zip(keys, combo)), "dir": sub.name, "ot_f1": report.ot_f1, "pic": report.pic})
        print(f"combo {combo_idx:03d} ({', '.join(label_parts)}): OT-F1={report.ot_f1:.4f} PIC={report.pic:.4f}")

    index_path = run.out_dir / "sweep_index.json"
    with open(index_path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=1)
        fh.write("\n")
    run.outputs.append(str(index_path))
    run.finish()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskfield",
        description="Compose BEV risk fields, evaluate actor-level risk metrics, and plan trajectories.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="rasterize composed risk fields to PGM/CSV heatmaps")
    _add_common(p)
    p.add_argument("--scenario", required=True, help="scenario file")
    p.add_argument("--frame", type=int, help="single frame index (default: all frames)")
    p.add_argument("--components", action="store_true", help="also export per-component grids")
    p.add_argument("--ascii", action="store_true", help="write P2 (ASCII) instead of P5 PGM")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("evaluate", help="run the full scoring pipeline and metric suite")
    _add_common(p)
    p.add_argument("scenarios", nargs="+", help="scenario files or glob patterns")
    p.add_argument("--report", default="report.json", help="report filename inside --out")
    p.add_argument("--ablation", choices=sorted(_ABLATIONS), default="full")
    p.add_argument("--macro", action="store_true", help="also report macro-averaged OT-F1")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plan", help="plan an ego trajectory against one composed frame")
    _add_common(p)
    p.add_argument("--scenario", required=True, help="scenario file")
    p.add_argument("--frame", type=int, default=0, help="frame index to plan against")
    p.add_argument("--trajectory", default="trajectory.txt", help="trajectory filename inside --out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sweep", help="evaluate a cartesian grid of config overrides")
    _add_common(p)
    p.add_argument("scenarios", nargs="+", help="scenario files or glob patterns")
    p.add_argument("--param", action="append", default=[], help="block.field=v1,v2,... (repeatable)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ConfigError, ScenarioError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
