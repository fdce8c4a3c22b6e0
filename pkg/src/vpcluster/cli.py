"""Command-line front end: synth, calibrate, cluster, evaluate.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 internal error.
Options may also come from a JSON file given with --config (keys are the
long option names with dashes replaced by underscores); command-line flags
take precedence.  The default output directory is $VPCLUSTER_OUT or ".".
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .calibration import (CalibrationError, DEFAULT_FRAME_STRIDE, DEFAULT_N_THRESHOLDS,
                          DEFAULT_O_TH, calibrate, default_thresholds, write_roc_csv)
from .clustering import Clustering
from .evaluation import MaskCache, compare, series_over, write_report_csv, write_series_csv
from .geometry import DEFAULT_GRID_SIZE, GridTooCoarseError, ViewportSpec, sphere_grid
from .graph import window_affinity, write_edge_list
from .ingestion import (FORMATS, SynthConfig, TraceFormatError, frame_count, load_traces,
                        synchronize, synth_traces, write_ground_truth, write_traces)
from .pipeline import ALGORITHMS, check_algorithms, cluster_window, frame_window, windows_for

log = logging.getLogger("vpcluster")

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4
OUT_ENV = "VPCLUSTER_OUT"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option defaults")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_view(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fov-h", type=float, default=100.0, help="horizontal FoV, degrees")
    p.add_argument("--fov-v", type=float, default=100.0, help="vertical FoV, degrees")
    p.add_argument("--grid", type=int, default=DEFAULT_GRID_SIZE,
                   help="lattice points for overlap estimates")


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="trace file")
    p.add_argument("--format", default="auto", choices=FORMATS)
    p.add_argument("--fps", type=float, default=30.0, help="synchronization frame rate")
    p.add_argument("--duration", type=float,
                   help="seconds to synchronize (default: through the last sample)")


def _add_calibration(p: argparse.ArgumentParser) -> None:
    p.add_argument("--o-th", type=float, default=DEFAULT_O_TH, help="overlap threshold")
    p.add_argument("--thresholds", type=int, default=DEFAULT_N_THRESHOLDS,
                   help="number of ROC thresholds in (0, pi]")
    p.add_argument("--stride", type=int, default=DEFAULT_FRAME_STRIDE,
                   help="use every n-th frame for calibration pairs")


def _add_clustering(p: argparse.ArgumentParser, default_algo: str) -> None:
    p.add_argument("--g-th", default=repr(math.pi / 10),
                   help="neighbour threshold in radians, or 'auto' to calibrate")
    p.add_argument("--T", dest="T", type=float, help="window length, seconds (omit for one frame)")
    p.add_argument("--tau", type=float, help="frames-in-window threshold, seconds")
    p.add_argument("--window-stride", type=float, help="seconds between window starts (default T)")
    p.add_argument("--frame", type=int, default=0, help="frame index for single-frame runs")
    p.add_argument("--algo", default=default_algo,
                   help=f"comma-separated subset of {','.join(ALGORITHMS)}")
    p.add_argument("--max-iters", type=int, default=100, help="k-means iteration cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vpcluster", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {}

    p = commands["synth"] = sub.add_parser("synth", help="generate planted-cluster traces")
    _add_common(p)
    p.add_argument("--users", type=int, default=59)
    p.add_argument("--clusters", type=int, default=3)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--speed", type=float, default=0.2, help="attractor speed, rad/s")
    p.add_argument("--kappa", type=float, default=2000.0, help="von Mises-Fisher concentration")

    p = commands["calibrate"] = sub.add_parser("calibrate", help="ROC curve and geodesic threshold")
    _add_common(p)
    _add_input(p)
    _add_view(p)
    _add_calibration(p)

    p = commands["cluster"] = sub.add_parser("cluster", help="cluster users per frame or window")
    _add_common(p)
    _add_input(p)
    _add_view(p)
    _add_calibration(p)
    _add_clustering(p, "clique")
    p.add_argument("--dump-affinity", action="store_true", help="write the affinity edge list")

    p = commands["evaluate"] = sub.add_parser("evaluate", help="report table and overlap series")
    _add_common(p)
    _add_input(p)
    _add_view(p)
    _add_calibration(p)
    _add_clustering(p, ",".join(ALGORITHMS))
    p.add_argument("--clusterings", nargs="*", default=[],
                   help="external clustering JSON files to include in the report")
    parser.commands = commands
    return parser


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        sub = parser.commands[args.command]
        known = {a.dest for a in sub._actions}
        # one file may serve several commands: keys of other commands are skipped
        anywhere = {a.dest for p in parser.commands.values() for a in p._actions}
        unknown = sorted(set(cfg) - anywhere - {"command"})
        if unknown:
            raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
        sub.set_defaults(**{k: v for k, v in cfg.items() if k in known})
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# validation helpers; everything is checked before any file is written


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or ".")


def _spec(args) -> ViewportSpec:
    try:
        return ViewportSpec.from_degrees(float(args.fov_h), float(args.fov_v))
    except ValueError as exc:
        raise UsageError(f"invalid field of view: {exc}") from None


def _grid(args):
    if args.grid < 1:
        raise UsageError("--grid must be positive")
    return sphere_grid(args.grid)


def _check_calibration_args(args) -> None:
    if not 0 < args.o_th < 1:
        raise UsageError("--o-th must lie in (0, 1)")
    if args.thresholds < 1:
        raise UsageError("--thresholds must be positive")
    if args.stride < 1:
        raise UsageError("--stride must be positive")


def _g_th(args):
    if str(args.g_th).lower() == "auto":
        return "auto"
    try:
        value = float(args.g_th)
    except ValueError:
        raise UsageError(f"--g-th must be a number of radians or 'auto', got {args.g_th!r}") from None
    if not 0 < value <= math.pi:
        raise UsageError("--g-th must lie in (0, pi]")
    return value


def _algorithms(args) -> tuple[str, ...]:
    try:
        names = args.algo if isinstance(args.algo, (list, tuple)) else str(args.algo).split(",")
        return check_algorithms(a.strip() for a in names if a.strip())
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_window_args(args) -> None:
    if args.max_iters < 1:
        raise UsageError("--max-iters must be positive")
    if args.T is None:
        if args.tau is not None:
            raise UsageError("--tau needs --T")
        if args.frame < 0:
            raise UsageError("--frame must be non-negative")
        return
    tau = args.T if args.tau is None else args.tau
    if not 0 < tau <= args.T:
        raise UsageError("need 0 < --tau <= --T")
    if args.window_stride is not None and args.window_stride <= 0:
        raise UsageError("--window-stride must be positive")


def _load_dataset(args):
    if not args.input:
        raise UsageError("--input is required")
    if not args.fps > 0:
        raise UsageError("--fps must be positive")
    if args.duration is not None and not args.duration > 0:
        raise UsageError("--duration must be positive")
    try:
        samples = load_traces(args.input, args.format)
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc.strerror or exc}") from None
    except TraceFormatError as exc:
        raise DataError(f"{args.input}: {exc}") from None
    if not samples:
        raise DataError(f"{args.input}: no samples")
    duration = args.duration
    if duration is None:
        last = max(s.timestamp_s for s in samples)
        duration = (math.floor(last * args.fps + 1e-9) + 1) / args.fps
    if frame_count(duration, args.fps) < 1:
        raise DataError("duration shorter than one frame")
    return synchronize(samples, args.fps, duration)


def _windows(args, dataset):
    if args.T is None:
        if args.frame >= dataset.n_frames:
            raise UsageError(f"--frame {args.frame} beyond the last frame ({dataset.n_frames - 1})")
        return [frame_window(args.frame)]
    tau = args.T if args.tau is None else args.tau
    try:
        return windows_for(dataset, args.T, tau, args.window_stride)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _resolve_g_th(args, dataset, spec, grid):
    g_th = _g_th(args)
    if g_th != "auto":
        return g_th, None
    try:
        result = calibrate(dataset, spec, grid, args.o_th,
                           default_thresholds(args.thresholds), args.stride)
    except CalibrationError as exc:
        raise DataError(f"calibration failed: {exc}") from None
    log.info("calibrated g_th = %.6f rad (fallback=%s)", result.g_th, result.fallback)
    return result.g_th, result


def _write_all(out: Path, files: dict[str, str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8")
        log.info("wrote %s", out / name)


def _render(writer, *args) -> str:
    buf = io.StringIO()
    writer(*args, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> dict[str, str]:
    try:
        cfg = SynthConfig(args.users, args.clusters, args.duration, args.fps,
                          args.speed, args.kappa, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    dataset, truth = synth_traces(cfg)
    return {
        "traces.csv": _render(write_traces, dataset),
        "ground_truth.csv": _render(write_ground_truth, truth),
    }


def cmd_calibrate(args) -> dict[str, str]:
    spec = _spec(args)
    grid = _grid(args)
    _check_calibration_args(args)
    dataset = _load_dataset(args)
    try:
        result = calibrate(dataset, spec, grid, args.o_th,
                           default_thresholds(args.thresholds), args.stride)
    except CalibrationError as exc:
        raise DataError(f"calibration failed: {exc}") from None
    meta = {"h_fov_deg": args.fov_h, "v_fov_deg": args.fov_v, "grid": args.grid,
            "frame_stride": args.stride, "n_thresholds": args.thresholds}
    return {
        "roc.csv": _render(write_roc_csv, result.curve),
        "gth.json": result.to_json(**meta),
    }


def _cluster_all(args, dataset, spec, grid):
    algorithms = _algorithms(args)
    windows = _windows(args, dataset)
    g_th, calib = _resolve_g_th(args, dataset, spec, grid)
    results = [(w, cluster_window(dataset, w, g_th, algorithms, args.seed, args.max_iters))
               for w in windows]
    return algorithms, windows, g_th, calib, results


def cmd_cluster(args) -> dict[str, str]:
    spec = _spec(args)
    grid = _grid(args)
    _check_calibration_args(args)
    _algorithms(args)
    _g_th(args)
    _check_window_args(args)
    dataset = _load_dataset(args)
    algorithms, windows, g_th, calib, results = _cluster_all(args, dataset, spec, grid)
    files: dict[str, str] = {}
    for w, by_algo in results:
        for name in algorithms:
            files[f"{name}_w{w.start:06d}.json"] = by_algo[name].to_json(dataset.user_ids)
        if args.dump_affinity:
            aff = window_affinity(dataset.directions, w, g_th)
            files[f"affinity_w{w.start:06d}.csv"] = _render(write_edge_list, aff)
    if calib is not None:
        files["gth.json"] = calib.to_json()
    return files


def _read_external(paths, dataset) -> list[Clustering]:
    out = []
    for p in paths:
        try:
            data = json.loads(Path(p).read_text(encoding="utf-8"))
            out.append(Clustering.from_dict(data, dataset.user_ids))
        except OSError as exc:
            raise DataError(f"cannot read {p}: {exc.strerror or exc}") from None
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{p}: invalid clustering ({exc})") from None
    return out


def cmd_evaluate(args) -> dict[str, str]:
    spec = _spec(args)
    grid = _grid(args)
    _check_calibration_args(args)
    _algorithms(args)
    _g_th(args)
    _check_window_args(args)
    dataset = _load_dataset(args)
    external = _read_external(args.clusterings, dataset)
    algorithms, windows, g_th, calib, results = _cluster_all(args, dataset, spec, grid)
    cache = MaskCache(dataset, spec, grid)
    comparisons = [compare(by_algo, dataset, spec, grid, cache) for _, by_algo in results]
    by_window = {}
    for c in external:
        if c.window[0] + c.window[1] > dataset.n_frames:
            raise DataError(f"external clustering window {c.window} lies outside the dataset")
        by_window.setdefault(c.window, {})[c.algorithm] = c
    comparisons += [compare(group, dataset, spec, grid, cache) for _, group in sorted(by_window.items())]

    files = {"report.csv": _render(write_report_csv, comparisons)}
    summary = {"g_th_rad": g_th, "o_th": args.o_th, "h_fov_deg": args.fov_h,
               "v_fov_deg": args.fov_v, "grid": args.grid, "seed": args.seed,
               "table_cluster_min_users": 3, "series_cluster_min_users": 2,
               "summary_cluster_min_users": 4, "summary_mean_overlap": {}}
    for name in algorithms:
        # reuse the clusterings computed above rather than clustering again
        lookup = {w.start: by_algo[name] for w, by_algo in results}

        def clusterer(ds, w, lookup=lookup):
            return lookup[w.start]

        series = series_over(dataset, clusterer, windows, spec, grid, cache)
        files[f"series_{name}.csv"] = _render(write_series_csv, series.points)
        summary["summary_mean_overlap"][name] = series.summary
    files["summary.json"] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if calib is not None:
        files["gth.json"] = calib.to_json()
    return files


COMMANDS = {"synth": cmd_synth, "calibrate": cmd_calibrate,
            "cluster": cmd_cluster, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"vpcluster: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        files = COMMANDS[args.command](args)
        _write_all(_out_dir(args), files)
    except UsageError as exc:
        print(f"vpcluster: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, GridTooCoarseError) as exc:
        print(f"vpcluster: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"vpcluster: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
