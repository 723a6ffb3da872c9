"""Command-line front end: config parsing, study dispatch, result artifacts.

Output contract: every CSV starts with comment lines carrying the config hash
and seed, floats are written with 17 significant digits, and identical
(config, seed) pairs reproduce every CSV and JSON summary byte for byte.  The
run manifest additionally records wall-clock time and is the one output
exempt from byte-identical replay.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__, canvas, fem, harness, noise
from .harness import ErrorTable, StudyConfig
from .splines import SplineSpace

STUDIES = ("det-time", "det-space", "canvas", "tdr", "sdr", "total")

_CSV_COLUMNS = {
    "det-time": "param is the time step",
    "det-space": "param is the mesh width",
    "canvas": "modes table: param is the mode count; dt table: param is the slab length",
    "tdr": "param is the time step",
    "sdr": "param is the mesh width",
    "total": "one CSV per component, as for tdr and sdr",
}

_EPILOG = """\
study CSV columns (fixed per study): param, error, method, provenance, mc_stderr
  """ + "\n  ".join(f"{k}: {v}" for k, v in _CSV_COLUMNS.items()) + """
sample-path CSV columns: time, x, fem_value, exact_value
All floats use 17 significant digits; '#' lines carry the config hash and seed.
"""


def _fmt(x) -> str:
    return format(float(x), ".17g")


def load_config(path: str | None, overrides: dict) -> StudyConfig:
    data = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise SystemExit(f"error: config file not found: {p}")
        with open(p, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise SystemExit(f"error: cannot parse {p}: {exc}") from exc
    try:
        cfg = StudyConfig.from_mapping(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise SystemExit(f"error: bad config: {exc}") from exc
    return cfg.override(**overrides)


def config_hash(cfg: StudyConfig) -> str:
    blob = json.dumps(asdict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _header_lines(cfg: StudyConfig, extra: dict | None = None) -> list[str]:
    lines = [f"# config_hash={config_hash(cfg)}", f"# seed={cfg.seed}"]
    for key, val in (extra or {}).items():
        lines.append(f"# {key}={val}")
    return lines


def write_table_csv(path: Path, cfg: StudyConfig, table: ErrorTable) -> None:
    lines = _header_lines(cfg)
    lines.append("param,error,method,provenance,mc_stderr")
    for row in table.rows:
        se = "" if row.mc_stderr is None else _fmt(row.mc_stderr)
        lines.append(f"{_fmt(row.param)},{_fmt(row.error)},{row.method},{row.provenance},{se}")
    path.write_text("\n".join(lines) + "\n")


def _table_summary(table: ErrorTable) -> dict:
    return {
        "fitted_rate": table.fitted_rate,
        "rate_ci": table.rate_ci,
        "rows": [
            {"param": r.param, "error": r.error, "method": r.method,
             "provenance": r.provenance, "mc_stderr": r.mc_stderr}
            for r in table.rows
        ],
    }


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, allow_nan=True) + "\n")


def _manifest(cfg: StudyConfig, outputs: dict[str, str], started: float) -> dict:
    return {
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "version": __version__,
        "wall_clock_s": time.monotonic() - started,
        "config": asdict(cfg),
        "outputs": outputs,
    }


def run_study(name: str, cfg: StudyConfig) -> dict[str, str]:
    """Execute one named study; returns the files written (relative names)."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    summary: dict = {"config_hash": config_hash(cfg), "seed": cfg.seed, "study": name}
    outputs: dict[str, str] = {}

    def emit_table(stem: str, table: ErrorTable) -> None:
        csv_path = out / f"{stem}.csv"
        write_table_csv(csv_path, cfg, table)
        outputs[f"{stem}.csv"] = str(csv_path)

    if name == "det-time":
        table = harness.det_time_study(cfg)
        emit_table("det_time", table)
        summary.update(_table_summary(table))
    elif name == "det-space":
        table = harness.det_space_study(cfg)
        emit_table("det_space", table)
        summary.update(_table_summary(table))
    elif name == "canvas":
        modes_table, dt_table = harness.canvas_study(cfg)
        emit_table("canvas_modes", modes_table)
        emit_table("canvas_dt", dt_table)
        summary["slope_modes"] = modes_table.fitted_rate
        summary["slope_modes_ci"] = modes_table.rate_ci
        summary["slope_dt"] = dt_table.fitted_rate
        summary["slope_dt_ci"] = dt_table.rate_ci
        summary["modes_table"] = _table_summary(modes_table)
        summary["dt_table"] = _table_summary(dt_table)
    elif name == "tdr":
        table = harness.tdr_study(cfg)
        emit_table("tdr", table)
        summary.update(_table_summary(table))
    elif name == "sdr":
        table = harness.sdr_study(cfg)
        emit_table("sdr", table)
        summary.update(_table_summary(table))
    elif name == "total":
        result = harness.total_study(cfg)
        emit_table("total_tdr", result["tdr"])
        emit_table("total_sdr", result["sdr"])
        summary["tdr"] = _table_summary(result["tdr"])
        summary["sdr"] = _table_summary(result["sdr"])
        summary["tdr_component"] = result["tdr_component"]
        summary["sdr_component"] = result["sdr_component"]
        summary["total_bound"] = result["total_bound"]
    else:
        raise SystemExit(
            f"error: unknown study '{name}'; valid names: {', '.join(STUDIES)}"
        )

    json_path = out / f"{name.replace('-', '_')}_summary.json"
    write_json(json_path, summary)
    outputs[json_path.name] = str(json_path)
    manifest_path = out / f"{name.replace('-', '_')}_manifest.json"
    write_json(manifest_path, _manifest(cfg, outputs, started))
    outputs[manifest_path.name] = str(manifest_path)
    return outputs


def run_sample_path(cfg: StudyConfig) -> dict[str, str]:
    """One noise realization: spline trajectory vs the exact solution on a grid."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    grid = noise.NoiseGrid(cfg.T, cfg.grid_slabs, cfg.grid_modes)
    sample = noise.sample_noise(grid, cfg.seed)
    space = SplineSpace(cfg.sample_elements, cfg.degree)
    states = fem.imex_run(space, sample, cfg.sample_steps, cfg.mu)
    xs = np.linspace(0.0, 1.0, cfg.sample_points)
    eval_mat = space.evaluation_matrix(xs)
    dtau = cfg.T / cfg.sample_steps
    lines = _header_lines(cfg, {"elements": cfg.sample_elements, "steps": cfg.sample_steps})
    lines.append("time,x,fem_value,exact_value")
    for t_req in cfg.sample_times:
        m = int(round(t_req / dtau))
        m = min(max(m, 0), cfg.sample_steps)
        t = m * dtau
        fem_vals = eval_mat @ states[m]
        exact_vals = canvas.canvas_solution(sample, t, cfg.mu).evaluate(xs)
        for x, fv, ev in zip(xs, fem_vals, np.atleast_1d(exact_vals)):
            lines.append(f"{_fmt(t)},{_fmt(x)},{_fmt(fv)},{_fmt(ev)}")
    csv_path = out / "sample_path.csv"
    csv_path.write_text("\n".join(lines) + "\n")
    outputs = {"sample_path.csv": str(csv_path)}
    manifest_path = out / "sample_path_manifest.json"
    write_json(manifest_path, _manifest(cfg, outputs, started))
    outputs[manifest_path.name] = str(manifest_path)
    return outputs


def run_noise_dump(cfg: StudyConfig, out_file: str | None) -> dict[str, str]:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = Path(out_file) if out_file else out / "noise.bin"
    grid = noise.NoiseGrid(cfg.T, cfg.grid_slabs, cfg.grid_modes)
    noise.save_noise(noise.sample_noise(grid, cfg.seed), path)
    return {"noise.bin": str(path)}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--seed", type=int, help="override the study seed")
    parser.add_argument("--out-dir", help="output directory")
    parser.add_argument("--samples", type=int, help="Monte Carlo sample count")
    parser.add_argument("--mu", type=float, help="second-order coefficient")
    parser.add_argument("--degree", type=int, choices=(2, 3), help="spline degree")
    parser.add_argument("--threads", type=int, help="worker pool size (0 = auto)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chclab",
        description="Convergence laboratory for a noise-driven fourth-order equation",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"chclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_study = sub.add_parser("study", help="run a named convergence study",
                             epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p_study.add_argument("name", nargs="?", help=f"one of: {', '.join(STUDIES)}")
    p_study.add_argument("--study", dest="name_flag", help="study name (alternative to the positional)")
    _add_common(p_study)
    p_sample = sub.add_parser("sample-path", help="write one sampled trajectory vs the exact solution")
    _add_common(p_sample)
    p_dump = sub.add_parser("noise-dump", help="sample a noise matrix and write the binary dump")
    p_dump.add_argument("--out", help="dump file path")
    _add_common(p_dump)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("seed", "out_dir", "samples", "mu", "degree", "threads")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config, _overrides(args))
    if args.command == "study":
        name = args.name or args.name_flag
        if name is None:
            raise SystemExit(f"error: no study named; valid names: {', '.join(STUDIES)}")
        outputs = run_study(name, cfg)
    elif args.command == "sample-path":
        outputs = run_sample_path(cfg)
    else:
        outputs = run_noise_dump(cfg, args.out)
    for name, path in outputs.items():
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
