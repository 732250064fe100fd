"""render-figures: regenerate figure analogs from a run directory.

Scans <run_dir> recursively for experiment outputs (report.json), matches
them to figure recipes by experiment kind, and writes one image per match.
Exit codes: 0 all rendered, 1 nothing renderable or a recipe failed,
2 bad arguments.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .recipes import RECIPES, RecipeError


def discover_experiments(run_dir: Path):
    """Yields (kind, directory) for every report.json under run_dir."""
    for report in sorted(run_dir.rglob("report.json")):
        try:
            kind = json.loads(report.read_text()).get("kind")
        except (OSError, json.JSONDecodeError):
            continue
        if kind:
            yield kind, report.parent


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="render-figures", description=__doc__)
    ap.add_argument("run_dir", help="directory containing experiment outputs")
    ap.add_argument("--out", default=None, help="image output directory "
                    "(default: <run_dir>/figures)")
    ap.add_argument("--format", default="png", choices=("png", "svg"))
    ap.add_argument("--figures", default=None,
                    help="comma-separated figure ids (default: all that match)")
    args = ap.parse_args(argv)

    run_dir = Path(args.run_dir)
    if not run_dir.is_dir():
        print(f"error: {run_dir} is not a directory", file=sys.stderr)
        return 2
    wanted = None
    if args.figures:
        wanted = set(args.figures.split(","))
        unknown = wanted - set(RECIPES)
        if unknown:
            print(f"error: unknown figure ids {sorted(unknown)}; "
                  f"known: {sorted(RECIPES)}", file=sys.stderr)
            return 2
    out_dir = Path(args.out) if args.out else run_dir / "figures"

    by_kind = {}
    for kind, exp_dir in discover_experiments(run_dir):
        by_kind.setdefault(kind, []).append(exp_dir)

    rendered = 0
    failures = 0
    for fid, recipe in RECIPES.items():
        if wanted is not None and fid not in wanted:
            continue
        dirs = by_kind.get(recipe.kind, [])
        for i, exp_dir in enumerate(dirs):
            suffix = "" if len(dirs) == 1 else f"_{i}"
            out_path = out_dir / f"{fid}{suffix}.{args.format}"
            try:
                out_dir.mkdir(parents=True, exist_ok=True)
                recipe.render(exp_dir, out_path)
            except RecipeError as e:
                print(f"{fid}: {e}", file=sys.stderr)
                failures += 1
                continue
            print(f"{fid}: {exp_dir} -> {out_path}")
            rendered += 1
    if failures:
        return 1
    if rendered == 0:
        print("error: no renderable experiments found", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
