"""Standalone figure renderer.

Usage:
    ptchaos-figures <figure_spec.json>

The FigureSpec JSON names the artifact inputs, the figure kind, axis
scales, the output path stem, and an optional caption:

    {
      "kind": "echo",
      "inputs": ["out/echo_haar/echo_haar.csv"],
      "summary": "out/echo_haar/echo_haar.json",
      "output": "figs/echo_haar",
      "axes": {"y_scale": "log"},
      "caption": "weak-kick decay"
    }

Emits <output>.png and <output>.svg.  Inputs whose config hashes disagree
within one overlay are rejected.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .io import ArtifactError
from .render import render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ptchaos-figures", description=__doc__)
    parser.add_argument("spec", help="path to a FigureSpec JSON file")
    args = parser.parse_args(argv)
    try:
        with open(args.spec) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read figure spec: {exc}", file=sys.stderr)
        return 2
    out_dir = os.path.dirname(spec.get("output", "."))
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    try:
        paths, _ = render(spec)
    except ArtifactError as exc:
        print(f"figure error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
