"""Command line interface.

Every run writes its outputs next to a manifest.json recording the command
line, configuration, seed and stage timings.  Timings never go into
explanation.json, which must be byte-identical across reruns of a seed.

Exit codes: 0 success, 1 pipeline error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import shlex
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .blackbox import make_classifier
from .explain import ExplainConfig, explain, saliency
from .fidelity import CSV_HEADER, fidelity_report
from .geometry import (
    normalize,
    read_cloud_json,
    read_off,
    read_xyz,
    sample_mesh,
    write_cloud_json,
    write_saliency_ply,
    write_xyz,
)
from .perturb import generate_masks
from .seeding import derive_seed
from .shapes import SHAPE_NAMES, make_cross, make_shape
from .stability import DEFAULT_BALL_POINTS, DEFAULT_TRIALS, stability_run
from .stats import DistanceKind

DISTANCE_CHOICES = ("cosine", "wd", "ks", "ad")
SURROGATE_CHOICES = ("wls", "bayes")
METHOD_LABELS = {"cosine": "LIME", "wd": "SMILE-WD", "ad": "SMILE-AD", "ks": "SMILE-KS"}
BENCH_DISTANCE_ORDER = ("cosine", "wd", "ad", "ks")

SWEEP_AXES = {
    "clusters": ("clusters", int),
    "perturbations": ("perturbations", int),
    "kernel-width": ("kernel_width", float),
    "top-fraction": ("top_fraction", float),
    "distance": ("distance", None),
    "surrogate": ("surrogate", None),
}


def _add_common_options(parser, *, input_required=True):
    parser.add_argument("--input", required=input_required, help="point cloud or mesh (.off, .xyz, .json)")
    parser.add_argument("--model", default="toy", help="'toy' or 'bridge:CMDLINE' (default: toy)")
    parser.add_argument("--points", type=int, default=1024, help="sample count for mesh inputs (default: 1024)")
    parser.add_argument("--distance", choices=DISTANCE_CHOICES, default="wd")
    parser.add_argument("--surrogate", choices=SURROGATE_CHOICES, default="wls")
    parser.add_argument("--clusters", type=int, default=32)
    parser.add_argument("--perturbations", type=int, default=1000)
    parser.add_argument("--kernel-width", type=float, default=0.5)
    parser.add_argument("--top-fraction", type=float, default=0.2)
    parser.add_argument("--class", dest="explained_class", type=int, default=None,
                        help="class index to explain (default: the predicted class)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--out", default=".", help="output directory (default: current)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smilepc",
        description="Model-agnostic saliency explanations for point-cloud classifiers.",
    )
    parser.add_argument("--version", action="version", version=f"smilepc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explain", help="explain one classification")
    _add_common_options(p)
    p.add_argument("--dump-masks", action="store_true", help="also write the mask matrix as masks.json")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("sweep", help="grid of runs over config axes")
    _add_common_options(p)
    p.add_argument(
        "--sweep",
        action="append",
        required=True,
        metavar="AXIS=START:STOP:STEP|AXIS=v1,v2,...",
        help="sweep axis; repeat the flag for a grid product",
    )
    p.add_argument("--jobs", type=int, default=1, help="worker pool size (default: 1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stability", help="ball-insertion stability protocol")
    _add_common_options(p)
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--n-ball", type=int, default=DEFAULT_BALL_POINTS)
    p.add_argument("--radius", type=float, default=None,
                   help="ball radius (default: 5%% of the bounding-box diagonal)")
    p.add_argument("--dump-trials", action="store_true", help="write one saliency PLY per trial")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("bench", help="timing table over distances and surrogates")
    _add_common_options(p, input_required=False)
    p.add_argument("--cluster-grid", default=None,
                   help="comma-separated cluster counts (default: the --clusters value)")
    p.add_argument("--backends", action="store_true",
                   help="also micro-benchmark the compiled kernels against the pure backend")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("make-shape", help="generate one of the reference shapes")
    p.add_argument("name", choices=SHAPE_NAMES)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output file (.xyz or .json)")
    p.set_defaults(func=cmd_make_shape)
    return parser


def load_cloud(args):
    path = Path(args.input)
    suffix = path.suffix.lower()
    if suffix == ".off":
        mesh = read_off(path)
        cloud = sample_mesh(mesh, args.points, derive_seed("sample", args.seed))
    elif suffix == ".xyz":
        cloud = read_xyz(path)
    elif suffix == ".json":
        cloud = read_cloud_json(path)
    else:
        raise ValueError(f"unsupported input format {suffix!r}; use .off, .xyz or .json")
    return normalize(cloud)


def config_from_args(args) -> ExplainConfig:
    return ExplainConfig(
        clusters=args.clusters,
        perturbations=args.perturbations,
        kernel_width=args.kernel_width,
        distance=DistanceKind(args.distance),
        surrogate=args.surrogate,
        top_fraction=args.top_fraction,
        seed=args.seed,
        explained_class=args.explained_class,
        batch_size=args.batch_size,
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, args, config, *, duration: float, outputs, timings=None, extra=None):
    doc = {
        "tool": "smilepc",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "command": getattr(args, "argv_text", ""),
        "input": getattr(args, "input", None),
        "seed": getattr(args, "seed", None),
        "config": None if config is None else config.to_json_dict(),
        "duration_seconds": duration,
        "timings": timings or {},
        "outputs": list(outputs),
    }
    if extra:
        doc.update(extra)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _write_fidelity_csv(path, rows, prefix_header=(), prefix_rows=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*prefix_header, *CSV_HEADER])
        for i, report in enumerate(rows):
            prefix = prefix_rows[i] if prefix_rows else ()
            writer.writerow([*prefix, *report.to_csv_row()])


def cmd_explain(args) -> int:
    t0 = time.perf_counter()
    cloud = load_cloud(args)
    config = config_from_args(args)
    out = _out_dir(args)
    with make_classifier(args.model) as model:
        class_names = model.descriptor.class_names
        result = explain(cloud, model, config)
    report = fidelity_report(result)

    with open(out / "explanation.json", "w", encoding="utf-8") as fh:
        fh.write(result.to_json())
        fh.write("\n")
    write_saliency_ply(saliency(result, cloud), out / "saliency.ply")
    _write_fidelity_csv(out / "fidelity.csv", [report])
    outputs = ["explanation.json", "saliency.ply", "fidelity.csv"]
    if args.dump_masks:
        masks = generate_masks(config.perturbations, result.cluster_model.c, config.seed)
        with open(out / "masks.json", "w", encoding="utf-8") as fh:
            fh.write(masks.to_json())
            fh.write("\n")
        outputs.append("masks.json")
    write_manifest(
        out, args, config,
        duration=time.perf_counter() - t0,
        outputs=outputs,
        timings=result.timings,
    )

    label = class_names[result.explained_class]
    prob = float(result.f_original[result.explained_class])
    print(f"explained class: {result.explained_class} ({label}), p={prob:.4f}")
    print(f"top clusters: {', '.join(str(int(i)) for i in result.top_set)}")
    print(f"fidelity: R2w={report.r2w:.4f} adjR2w={report.adj_r2w:.4f} L1w={report.l1w:.3e}")
    return 0


def parse_sweep_spec(spec: str):
    axis, sep, rhs = spec.partition("=")
    if not sep or not rhs:
        raise ValueError(f"bad sweep spec {spec!r}; expected AXIS=RANGE or AXIS=v1,v2,...")
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    field, cast = SWEEP_AXES[axis]
    if cast is None:  # categorical
        choices = DISTANCE_CHOICES if field == "distance" else SURROGATE_CHOICES
        values = [v.strip() for v in rhs.split(",") if v.strip()]
        for v in values:
            if v not in choices:
                raise ValueError(f"bad value {v!r} for sweep axis {axis!r}; choose from {choices}")
    elif ":" in rhs:
        parts = rhs.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad range {rhs!r}; expected START:STOP:STEP")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"bad range {rhs!r}; need STEP > 0 and STOP >= START")
        count = int(round((stop - start) / step)) + 1
        values = [start + i * step for i in range(count) if start + i * step <= stop + step * 1e-9]
        values = [cast(round(v, 12)) if cast is int else cast(v) for v in values]
    else:
        values = [cast(v.strip()) for v in rhs.split(",") if v.strip()]
    if not values:
        raise ValueError(f"sweep axis {axis!r} has no values")
    return axis, field, values


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    axes = [parse_sweep_spec(s) for s in args.sweep]
    cloud = load_cloud(args)
    base = config_from_args(args)
    out = _out_dir(args)

    grid = list(itertools.product(*[values for _, _, values in axes]))
    axis_names = [axis for axis, _, _ in axes]
    field_names = [field for _, field, _ in axes]

    def run_one(combo):
        overrides = dict(zip(field_names, combo))
        seed = derive_seed("sweep", args.seed, *[f"{a}={v!r}" for a, v in zip(axis_names, combo)])
        cfg = replace(base, seed=seed, **overrides)
        result = explain(cloud, model, cfg)
        return cfg, fidelity_report(result)

    with make_classifier(args.model) as model:
        jobs = 1 if model.descriptor.serial_only else max(1, args.jobs)
        if jobs == 1:
            results = [run_one(combo) for combo in grid]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(run_one, grid))  # preserves grid order

    config_header = ("distance", "surrogate", "clusters", "perturbations",
                     "kernel_width", "top_fraction", "seed")
    prefix_rows = [
        (cfg.distance.value, cfg.surrogate, cfg.clusters, cfg.perturbations,
         cfg.kernel_width, cfg.top_fraction, cfg.seed)
        for cfg, _ in results
    ]
    _write_fidelity_csv(out / "sweep.csv", [rep for _, rep in results],
                        prefix_header=config_header, prefix_rows=prefix_rows)
    write_manifest(
        out, args, base,
        duration=time.perf_counter() - t0,
        outputs=["sweep.csv"],
        extra={"sweep": {"axes": {a: [str(v) for v in vals] for a, _, vals in axes},
                         "rows": len(grid)}},
    )
    print(f"wrote sweep.csv with {len(grid)} rows")
    return 0


def cmd_stability(args) -> int:
    t0 = time.perf_counter()
    cloud = load_cloud(args)
    config = config_from_args(args)
    out = _out_dir(args)
    dump_dir = None
    if args.dump_trials:
        dump_dir = out / "trials"
        dump_dir.mkdir(parents=True, exist_ok=True)
    with make_classifier(args.model) as model:
        report = stability_run(
            cloud, model, config,
            trials=args.trials,
            n_ball=args.n_ball,
            radius=args.radius,
            dump_dir=str(dump_dir) if dump_dir else None,
        )
    with open(out / "stability.json", "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    outputs = ["stability.json"]
    if dump_dir:
        outputs.append("trials/")
    write_manifest(out, args, config, duration=time.perf_counter() - t0, outputs=outputs)
    print(f"mean_jaccard: {report.mean_jaccard}")
    return 0


def _bench_backends(out: Path):
    from .kernels import _pure

    try:
        from .kernels import _compiled
    except ImportError:
        _compiled = None

    rng = np.random.default_rng(99)
    a = np.sort(rng.normal(size=1024))
    b = np.sort(rng.normal(size=1024))
    pts = np.ascontiguousarray(rng.normal(size=(1024, 3)))
    cen = np.ascontiguousarray(rng.normal(size=(32, 3)))
    spd = np.eye(33) * 34.0 + 1.0
    rhs = rng.normal(size=33)

    cases = [
        ("wd_sorted", lambda mod: mod.wd_sorted(a, b), 200),
        ("ks_sorted", lambda mod: mod.ks_sorted(a, b), 200),
        ("ad_sorted", lambda mod: mod.ad_sorted(a, b), 200),
        ("fps_indices", lambda mod: mod.fps_indices(pts, 32, 0), 20),
        ("assign_clusters", lambda mod: mod.assign_clusters(pts, cen), 20),
        ("solve_spd", lambda mod: mod.solve_spd(spd, rhs), 20),
    ]

    def best_of(func, mod, reps):
        best = float("inf")
        for _ in range(3):
            t0 = time.perf_counter()
            for _ in range(reps):
                func(mod)
            best = min(best, (time.perf_counter() - t0) / reps)
        return best

    rows = []
    print("\nkernel backend comparison (seconds per call, best of 3):")
    header = f"{'kernel':<16}{'pure':>12}{'compiled':>12}{'speedup':>10}"
    print(header)
    for name, func, reps in cases:
        t_pure = best_of(func, _pure, reps)
        if _compiled is not None:
            t_comp = best_of(func, _compiled, reps)
            speedup = t_pure / t_comp if t_comp > 0 else float("inf")
            print(f"{name:<16}{t_pure:>12.3e}{t_comp:>12.3e}{speedup:>9.1f}x")
            rows.append([name, t_pure, t_comp, speedup])
        else:
            print(f"{name:<16}{t_pure:>12.3e}{'n/a':>12}{'n/a':>10}")
            rows.append([name, t_pure, "", ""])
    if _compiled is None:
        print("compiled backend unavailable; install with a C compiler to enable it")
    with open(out / "backends.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kernel", "pure_seconds", "compiled_seconds", "speedup"])
        writer.writerows(rows)


def cmd_bench(args) -> int:
    t0 = time.perf_counter()
    if args.input:
        cloud = load_cloud(args)
    else:
        cloud = make_cross(args.points, derive_seed("bench-shape", args.seed))
    out = _out_dir(args)
    cluster_grid = (
        [int(v) for v in args.cluster_grid.split(",")] if args.cluster_grid else [args.clusters]
    )
    base = config_from_args(args)

    rows = []
    cells = {}
    with make_classifier(args.model) as model:
        for surrogate in SURROGATE_CHOICES:
            for c in cluster_grid:
                for dist in BENCH_DISTANCE_ORDER:
                    cfg = replace(base, surrogate=surrogate, clusters=c, distance=DistanceKind(dist))
                    t_run = time.perf_counter()
                    result = explain(cloud, model, cfg)
                    total = time.perf_counter() - t_run
                    cells[(surrogate, c, dist)] = (total, result.timings)
                    rows.append([
                        dist, surrogate, c, cfg.perturbations, total,
                        result.timings["cluster"], result.timings["realize"],
                        result.timings["classify"], result.timings["distance"],
                        result.timings["fit"],
                    ])

    labels = [METHOD_LABELS[d] for d in BENCH_DISTANCE_ORDER]
    print(f"{'':<24}" + "".join(f"{lab:>12}" for lab in labels))
    for surrogate in SURROGATE_CHOICES:
        for c in cluster_grid:
            total_cells = [cells[(surrogate, c, d)][0] for d in BENCH_DISTANCE_ORDER]
            dist_cells = [cells[(surrogate, c, d)][1]["distance"] for d in BENCH_DISTANCE_ORDER]
            print(f"{surrogate}/C={c} total (s)".ljust(24) + "".join(f"{v:>12.3f}" for v in total_cells))
            print(f"{surrogate}/C={c} dist (s)".ljust(24) + "".join(f"{v:>12.3f}" for v in dist_cells))

    with open(out / "bench.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["distance", "surrogate", "clusters", "perturbations", "total_seconds",
                         "cluster_seconds", "realize_seconds", "classify_seconds",
                         "distance_seconds", "fit_seconds"])
        writer.writerows(rows)
    outputs = ["bench.csv"]
    if args.backends:
        _bench_backends(out)
        outputs.append("backends.csv")
    write_manifest(out, args, base, duration=time.perf_counter() - t0, outputs=outputs)
    return 0


def cmd_make_shape(args) -> int:
    cloud = make_shape(args.name, args.n, args.seed)
    path = Path(args.out)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    suffix = path.suffix.lower()
    if suffix == ".xyz":
        write_xyz(cloud, path)
    elif suffix == ".json":
        write_cloud_json(cloud, path)
    else:
        raise ValueError(f"unsupported output format {suffix!r}; use .xyz or .json")
    print(f"wrote {args.name} with {cloud.n} points to {path}")
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv_text = "smilepc " + " ".join(shlex.quote(a) for a in argv)
    try:
        return args.func(args)
    except Exception as exc:  # pipeline errors: report and exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
