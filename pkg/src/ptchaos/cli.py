"""Reproducible experiment runner.

Usage:
    ptchaos run <config.json> [--threads N] [--cap MAX_AMPLITUDES]
    ptchaos list-experiments [--json]

Exit codes: 0 all assertions passed; 1 assertion failure; 2 invalid config;
3 amplitude cap exceeded.

Every run writes, inside the configured output directory only:
  <name>.csv      rows with a header, preceded by a `# config_hash=` line
  <name>.json     summary (config echo, results, assertions)
  manifest.json   written atomically at the end; lists every artifact

The output directory comes from the config; the PTCHAOS_OUTPUT_DIR
environment variable overrides it.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
import time

MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "id": {
            "enum": [
                "haar",
                "haar_sites",
                "design",
                "lindblad_bernoulli",
                "swap_chain",
                "kicked_ising",
                "state_chaos",
            ]
        },
        "d_s": {"type": "integer", "minimum": 2},
        "d_e": {"type": "integer", "minimum": 2},
        "k": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 2},
        "depth": {"type": "integer", "minimum": 0},
        "preset": {"enum": ["chaotic", "integrable"]},
        "j_coupling": {"type": "number"},
        "b_field": {"type": "number"},
        "h_field": {"type": "number"},
        "local": {"enum": ["identity", "random"]},
        "phi_seed": {"type": "integer"},
        "init_seed": {"type": "integer"},
        "scramble_depth": {"type": "integer", "minimum": 0},
        "haar_initial": {"type": "boolean"},
    },
    "required": ["id"],
    "additionalProperties": False,
}

_EXPECT = {"type": "object"}

PARAMS_SCHEMAS = {
    "echo": {
        "type": "object",
        "properties": {
            "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "k_max": {"type": "integer", "minimum": 1},
            "samples": {"type": "integer", "minimum": 1},
        },
        "required": ["epsilon", "k_max"],
        "additionalProperties": False,
    },
    "sdy": {
        "type": "object",
        "properties": {
            "k": {"type": "integer", "minimum": 1},
            "samples": {"type": "integer", "minimum": 1},
        },
        "required": ["k"],
        "additionalProperties": False,
    },
    "tmi": {
        "type": "object",
        "properties": {
            "r1": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "r2": {"type": "array", "items": {"type": "string"}},
            "samples": {"type": "integer", "minimum": 1},
        },
        "required": ["r1"],
        "additionalProperties": False,
    },
    "loe": {
        "type": "object",
        "properties": {
            "site": {"type": "string"},
            "part_a": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "t_max": {"type": "integer", "minimum": 0},
            "x_op": {"enum": ["X", "Z", "identity"]},
            "assert_monotone": {"type": "boolean"},
            "max_entropy": {"type": "number"},
        },
        "required": ["site", "part_a", "t_max"],
        "additionalProperties": False,
    },
    "scaling": {
        "type": "object",
        "properties": {
            "k": {"type": "integer", "minimum": 1},
            "cuts": {
                "anyOf": [
                    {"const": "prefix"},
                    {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "properties": {
                                "id": {"type": "string"},
                                "labels": {"type": "array", "items": {"type": "string"}},
                            },
                            "required": ["id", "labels"],
                            "additionalProperties": False,
                        },
                    },
                ]
            },
            "include_b": {"type": "boolean"},
        },
        "required": ["k"],
        "additionalProperties": False,
    },
    "bff": {
        "type": "object",
        "properties": {
            "k": {"type": "integer", "minimum": 1},
            "x": {"type": "string"},
            "y": {"type": "string"},
            "layout": {"enum": ["local", "brickwork"]},
            "depth": {"type": "integer", "minimum": 0},
            "budget": {"type": "integer", "minimum": 1},
            "restarts": {"type": "integer", "minimum": 1},
            "allow_nonorthogonal": {"type": "boolean"},
        },
        "required": ["k", "x", "y"],
        "additionalProperties": False,
    },
    "random_butterfly": {
        "type": "object",
        "properties": {
            "k": {"type": "integer", "minimum": 1},
            "trials": {"type": "integer", "minimum": 100},
            "deltas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "r1": {
                "anyOf": [
                    {"const": "s_out"},
                    {"type": "array", "items": {"type": "string"}},
                ]
            },
        },
        "required": ["k", "trials", "deltas"],
        "additionalProperties": False,
    },
    "typicality": {
        "type": "object",
        "properties": {
            "d_s": {"type": "integer", "minimum": 2},
            "d_e": {"type": "integer", "minimum": 2},
            "k": {"type": "integer", "minimum": 1},
            "samples": {"type": "integer", "minimum": 2},
            "deltas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "regime": {"enum": ["haar", "design"]},
            "design_depth": {"type": "integer", "minimum": 0},
            "design_params": {
                "type": "object",
                "properties": {
                    "m": {"type": "number"},
                    "t": {"type": "integer"},
                    "eps": {"type": "number"},
                },
                "required": ["m", "t", "eps"],
                "additionalProperties": False,
            },
        },
        "required": ["d_e", "k", "samples", "deltas"],
        "additionalProperties": False,
    },
    "pesin": {
        "type": "object",
        "properties": {"k": {"type": "integer", "minimum": 1}},
        "required": ["k"],
        "additionalProperties": False,
    },
}


def config_schema(experiment: str) -> dict:
    needs_model = experiment != "typicality"
    schema = {
        "type": "object",
        "properties": {
            "experiment": {"const": experiment},
            "seed": {"type": "integer"},
            "output_dir": {"type": "string"},
            "name": {"type": "string"},
            "model": MODEL_SCHEMA,
            "params": PARAMS_SCHEMAS[experiment],
            "expect": _EXPECT,
        },
        "required": ["experiment", "seed", "output_dir", "params"]
        + (["model"] if needs_model else []),
        "additionalProperties": False,
    }
    return schema


class ConfigError(ValueError):
    pass


def load_and_validate(path: str) -> dict:
    import jsonschema

    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict) or "experiment" not in cfg:
        raise ConfigError("config must be an object with an 'experiment' field")
    exp = cfg["experiment"]
    if exp not in PARAMS_SCHEMAS:
        raise ConfigError(f"unknown experiment {exp!r}")
    try:
        jsonschema.validate(cfg, config_schema(exp))
    except jsonschema.ValidationError as exc:
        field = "/".join(str(p) for p in exc.absolute_path) or "<top level>"
        raise ConfigError(f"invalid config field {field}: {exc.message}") from exc
    return cfg


def canonical_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path: str, config_hash: str, columns, rows) -> None:
    lines = [f"# config_hash={config_hash}"]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(str(row[c]) for c in columns))
    _atomic_write(path, "\n".join(lines) + "\n")


def run_config(cfg: dict, threads: int | None = None) -> int:
    from . import __version__
    from .experiments import EXPERIMENTS
    from .qcore import CapExceededError

    import numpy as np

    exp = cfg["experiment"]
    out_dir = os.environ.get("PTCHAOS_OUTPUT_DIR", cfg["output_dir"])
    os.makedirs(out_dir, exist_ok=True)
    name = cfg.get("name", exp)
    cfg_hash = canonical_hash(cfg)
    start = datetime.datetime.now(datetime.timezone.utc).isoformat()
    t0 = time.monotonic()
    rng = np.random.default_rng(cfg["seed"])
    runner, _ = EXPERIMENTS[exp]
    try:
        result = runner(cfg, rng)
    except CapExceededError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return 3
    csv_path = os.path.join(out_dir, f"{name}.csv")
    json_path = os.path.join(out_dir, f"{name}.json")
    write_csv(csv_path, cfg_hash, result.columns, result.rows)
    summary_doc = {
        "config": cfg,
        "config_hash": cfg_hash,
        "experiment": exp,
        "summary": result.summary,
        "assertions": [
            {"name": a.name, "passed": a.passed, "detail": a.detail}
            for a in result.assertions
        ],
    }
    _atomic_write(json_path, json.dumps(summary_doc, indent=2, sort_keys=True) + "\n")
    all_passed = all(a.passed for a in result.assertions)
    manifest = {
        "config_hash": cfg_hash,
        "code_version": __version__,
        "experiment": exp,
        "threads": threads,
        "started_utc": start,
        "finished_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "runtime_seconds": round(time.monotonic() - t0, 3),
        "outputs": [os.path.basename(csv_path), os.path.basename(json_path)],
        "assertions": summary_doc["assertions"],
        "all_passed": all_passed,
    }
    _atomic_write(
        os.path.join(out_dir, "manifest.json"),
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )
    for a in result.assertions:
        print(f"[{'PASS' if a.passed else 'FAIL'}] {a.name}: {a.detail}")
    return 0 if all_passed else 1


def list_experiments(as_json: bool = False) -> str:
    from .experiments import EXPERIMENTS

    if as_json:
        doc = {
            name: {"description": desc, "config_schema": config_schema(name)}
            for name, (_, desc) in EXPERIMENTS.items()
        }
        return json.dumps(doc, indent=2, sort_keys=True)
    width = max(len(n) for n in EXPERIMENTS)
    lines = [f"{'experiment':<{width}}  description"]
    lines.append("-" * (width + 50))
    for name, (_, desc) in EXPERIMENTS.items():
        lines.append(f"{name:<{width}}  {desc}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ptchaos", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--threads", type=int, default=None, help="cap BLAS threads")
    p_run.add_argument("--cap", type=int, default=None, help="max dense amplitudes")
    p_list = sub.add_parser("list-experiments", help="enumerate experiments")
    p_list.add_argument("--json", action="store_true", help="machine-readable output")
    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        print(list_experiments(as_json=args.json))
        return 0

    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(args.threads))
    try:
        cfg = load_and_validate(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.cap is not None:
        from .qcore import set_amplitude_cap

        set_amplitude_cap(args.cap)
    return run_config(cfg, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
