"""Command line front end: pack, validate, render, bench and gen."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .chartset_io import (AtlasSpec, ChartSetError, ResultFormatError, dump_chartset_json,
                          export_result, import_result, load_chart_set, render_svg)
from .corpus import generate
from .metrics import l2_stretch, validate_atlas
from .packer import pack

EXIT_OK, EXIT_USAGE, EXIT_PACK_FAILED, EXIT_INVALID = 0, 1, 2, 3

log = logging.getLogger("atlaspack")


class UsageError(Exception):
    pass


def _atlas_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError("atlas dimensions must be positive")
    return w, h


def _add_atlas_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--atlas", type=_atlas_size, required=True, metavar="WxH")
    p.add_argument("--gutter", type=int, default=1)
    p.add_argument("--scales", type=int, default=64, help="number of candidate scales")
    p.add_argument("--prerotate", action="store_true", help="align approximate OBBs first")
    p.add_argument("--t-opt", type=float, default=None,
                   help="hybrid switch height as a fraction of the atlas height")
    p.add_argument("--local-aabbs", type=int, default=10)
    p.add_argument("--texture-size", type=int, default=None, help="UV scale for OBJ input")


def _spec(args) -> AtlasSpec:
    w, h = args.atlas
    try:
        return AtlasSpec(w, h, gutter=args.gutter, scale_count=args.scales,
                         prerotate=args.prerotate, t_opt_fraction=args.t_opt,
                         local_aabb_count=args.local_aabbs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _pack(charts, spec, mode, jobs):
    variant = "chameleon" if mode == "chameleon" else "full"
    return pack(charts, spec, variant=variant, jobs=jobs)


def _emit(report: dict, kind: str) -> None:
    if kind == "json":
        print(json.dumps(report, sort_keys=True))
    else:
        for key, value in report.items():
            print(f"{key}: {value}")


def cmd_pack(args) -> int:
    charts = load_chart_set(args.input, texture_size=args.texture_size)
    spec = _spec(args)
    start = time.perf_counter()
    result = _pack(charts, spec, args.mode, args.jobs)
    elapsed = time.perf_counter() - start
    if not result.success:
        _emit({"status": "failed", "reason": result.diagnostics}, args.report)
        return EXIT_PACK_FAILED
    if args.out:
        export_result(result, args.out)
    if args.svg:
        render_svg(charts, result, spec, args.svg)
    stretch = l2_stretch(charts, result, spec)
    _emit({
        "status": "ok",
        "mode": args.mode,
        "charts": len(charts),
        "scale": f"{result.scale_index}/{result.scale_count}",
        "l2_stretch": round(stretch.l2_stretch, 6),
        "occupancy": round(stretch.occupancy, 6),
        "rows": result.stats.rows,
        "knees": result.stats.knees_detected,
        "knee_folds": result.stats.knee_folds,
        "seconds": round(elapsed, 4),
    }, args.report)
    return EXIT_OK


def cmd_validate(args) -> int:
    charts = load_chart_set(args.input, texture_size=args.texture_size)
    result = import_result(args.result)
    spec = _spec(args)
    ids = sorted(p.chart_id for p in result.placements)
    if ids != list(range(len(charts))):
        raise UsageError(f"result places chart ids {ids[:5]}... but the set has {len(charts)} charts")
    report = validate_atlas(charts, result, spec)
    _emit({
        "status": "ok" if report.ok else "invalid",
        "overlap_texels": report.overlap_texels,
        "gutter_violation_texels": report.gutter_violation_texels,
        "out_of_bounds_texels": report.out_of_bounds_texels,
        "missing_charts": len(report.missing_charts),
        "occupancy": round(report.occupancy, 6),
    }, args.report)
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_render(args) -> int:
    charts = load_chart_set(args.input, texture_size=args.texture_size)
    result = import_result(args.result)
    render_svg(charts, result, _spec(args), args.svg)
    return EXIT_OK


def cmd_bench(args) -> int:
    spec = _spec(args)
    corpus = Path(args.corpus)
    files = sorted(corpus.glob("*.json")) if corpus.is_dir() else [corpus]
    if not files:
        raise UsageError(f"no chart sets found in {corpus}")
    modes = args.modes.split(",")
    for mode in modes:
        if mode not in ("tabi", "chameleon"):
            raise UsageError(f"unknown mode {mode!r}")
    rows = []
    failed = False
    for path in files:
        charts = load_chart_set(path)
        for mode in modes:
            start = time.perf_counter()
            result = _pack(charts, spec, mode, args.jobs)
            seconds = time.perf_counter() - start
            row = {"input": path.name, "mode": mode, "charts": len(charts),
                   "seconds": round(seconds, 4)}
            if result.success:
                s = l2_stretch(charts, result, spec)
                row.update(scale=f"{result.scale_index}/{result.scale_count}",
                           l2_stretch=round(s.l2_stretch, 6), occupancy=round(s.occupancy, 6))
            else:
                failed = True
                row.update(scale=None, l2_stretch=None, occupancy=None)
            rows.append(row)
    aggregates = []
    for mode in modes:
        mine = [r for r in rows if r["mode"] == mode and r["l2_stretch"] is not None]
        n = max(len(mine), 1)
        aggregates.append({
            "input": "*mean*", "mode": mode, "charts": sum(r["charts"] for r in mine),
            "seconds": round(sum(r["seconds"] for r in mine), 4),
            "scale": None,
            "l2_stretch": round(sum(r["l2_stretch"] for r in mine) / n, 6),
            "occupancy": round(sum(r["occupancy"] for r in mine) / n, 6),
        })
    if args.report == "json":
        print(json.dumps({"rows": rows, "aggregate": aggregates}, sort_keys=True))
    else:
        header = ("input", "mode", "charts", "scale", "l2_stretch", "occupancy", "seconds")
        print("\t".join(header))
        for r in rows + aggregates:
            print("\t".join(str(r[k]) for k in header))
    return EXIT_PACK_FAILED if failed else EXIT_OK


def cmd_gen(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    charts = generate(args.seed, args.count, area=args.area)
    text = dump_chartset_json(charts)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atlaspack", description="Texture atlas packer")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pack", help="pack a chart set")
    p.add_argument("input")
    _add_atlas_args(p)
    p.add_argument("--mode", choices=("tabi", "chameleon"), default="tabi")
    p.add_argument("--out", help="write the placement file here")
    p.add_argument("--svg", help="write an SVG preview here")
    p.add_argument("--report", choices=("text", "json"), default="text")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("validate", help="check a placement file texel by texel")
    p.add_argument("input")
    p.add_argument("result")
    _add_atlas_args(p)
    p.add_argument("--report", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("render", help="draw a placement file as SVG")
    p.add_argument("input")
    p.add_argument("result")
    _add_atlas_args(p)
    p.add_argument("--svg", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", help="pack every chart set of a corpus")
    p.add_argument("corpus", help="directory of chart set files, or one file")
    _add_atlas_args(p)
    p.add_argument("--modes", default="tabi,chameleon")
    p.add_argument("--report", choices=("text", "json"), default="text")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="write a synthetic chart set")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--area", type=float, default=2.0 * 256 * 256,
                   help="total chart area in texels at scale 1")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ChartSetError, ResultFormatError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
