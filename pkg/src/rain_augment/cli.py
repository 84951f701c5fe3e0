"""Batch command line: rain-augment.

Renders a sweep of rainfall rates over an image directory with paired depth
maps and camera calibration, writing <out>/<rate>mm/<name>.png plus an
optional line-delimited JSON report.
"""

from __future__ import annotations

import argparse
import sys

from .pipeline import JobConfig, run_batch


def _parse_rates(text: str) -> tuple[float, ...]:
    try:
        rates = tuple(float(r) for r in text.split(",") if r.strip() != "")
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad rate list {text!r}") from exc
    if not rates:
        raise argparse.ArgumentTypeError("empty rate list")
    return rates


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rain-augment",
        description="Augment clear-weather images with physically-based rain.")
    parser.add_argument("--images", required=True, help="input image directory")
    parser.add_argument("--depth", required=True,
                        help="depth directory (16-bit PNG or .f32 raster, matched by stem)")
    parser.add_argument("--calib", required=True,
                        help="calibration JSON file, or a directory of per-image <stem>.json")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--rates", type=_parse_rates, default=(0.0, 5.0, 25.0, 50.0, 100.0, 200.0),
                        help="comma-separated rainfall rates in mm/hr (default: 0,5,25,50,100,200)")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--streaks", default="procedural",
                        help='streak sprite directory, or "procedural" (default)')
    parser.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    parser.add_argument("--depth-scale", type=float, default=1.0 / 256.0,
                        help="meters per unit for 16-bit PNG depth (default 1/256)")
    parser.add_argument("--fog-only", action="store_true",
                        help="emit only the volumetric attenuation layer")
    parser.add_argument("--depth-occlusion", action="store_true",
                        help="mask streaks hidden behind nearer scene content")
    parser.add_argument("--debug-dumps", action="store_true",
                        help="also write drop tables and environment maps")
    parser.add_argument("--png16", action="store_true", help="write 16-bit PNGs")
    parser.add_argument("--report", default=None, help="write a JSONL report here")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = JobConfig(images_dir=args.images, depth_dir=args.depth,
                    calib_path=args.calib, out_dir=args.out, rates=args.rates,
                    seed=args.seed, streaks_path=args.streaks,
                    workers=args.workers, fog_only=args.fog_only,
                    depth_occlusion=args.depth_occlusion,
                    debug_dumps=args.debug_dumps,
                    depth_scale=args.depth_scale,
                    bit_depth=16 if args.png16 else 8,
                    report_path=args.report)
    code, reports = run_batch(job)
    n_failed = sum(r["status"] != "ok" for r in reports)
    print(f"rendered {len(reports) - n_failed}/{len(reports)} outputs"
          + (f", {n_failed} failed" if n_failed else ""))
    for r in reports:
        if r["status"] != "ok":
            print(f"  FAILED {r['image']} @ {r['rate']:g}mm/hr: {r['error']}",
                  file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
