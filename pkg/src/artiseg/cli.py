"""Command-line interface: estimate articulation from a capture directory,
generate synthetic scenes, and score estimates against ground truth."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core_model import JointModel, MotionSequence
from .errors import (
    DegenerateGeometryError,
    EmptySegmentationError,
    FitFailureError,
    GenerationError,
    InputFormatError,
    InvalidParameterError,
)
from .pipeline import PipelineConfig, run_estimation
from .ply import read_ply
from .synth import SceneSpec, evaluate, generate_scene, load_truth

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_FIT_FAILURE = 3
EXIT_DEGENERATE = 4

log = logging.getLogger("artiseg")


def cmd_estimate(args) -> int:
    config = (PipelineConfig.from_json_file(args.config)
              if args.config else PipelineConfig())
    result = run_estimation(args.input_dir, config=config, out_dir=args.out,
                            dump_diagnostics=args.dump_diagnostics)
    log.info("wrote %s", result.out_dir / "result.json")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise InputFormatError(f"missing scene spec: {args.spec}") from exc
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid scene spec JSON: {exc}") from exc
    spec = SceneSpec.from_json_dict(data)
    scene = generate_scene(spec, out_dir=args.out)
    log.info("wrote %d frames to %s", len(scene.frames), scene.directory)
    return EXIT_OK


def cmd_eval(args) -> int:
    result_path = Path(args.result)
    try:
        with open(result_path, "r", encoding="utf-8") as fh:
            result = json.load(fh)
    except FileNotFoundError as exc:
        raise InputFormatError(f"missing result file: {result_path}") from exc
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid result JSON: {exc}") from exc
    try:
        joint = JointModel.from_json_dict(result["joint"])
        motions = MotionSequence(np.asarray(result["motions"], dtype=float))
    except KeyError as exc:
        raise InputFormatError(f"result JSON missing key {exc}") from exc
    truth = load_truth(args.truth)
    reference_points = None
    reference_labels = None
    ref_ply = result_path.parent / result.get("reference_cloud_ply", "reference_cloud.ply")
    if ref_ply.exists():
        reference_points, props = read_ply(ref_ply)
        if "is_object" in props:
            reference_labels = props["is_object"].astype(bool)
        else:
            reference_points = None
    metrics = evaluate(joint, motions, truth,
                       reference_points=reference_points,
                       reference_labels=reference_labels)
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artiseg",
        description="Articulated-object joint estimation and segmentation from "
                    "depth sequences guided by hand motion.",
        epilog="Set ARTISEG_WORKERS to cap the nearest-neighbor search threads "
               "(default: all available cores).")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="run the full estimation pipeline")
    est.add_argument("input_dir", help="directory with intrinsics.json, "
                                       "background depth, frames/")
    est.add_argument("--config", help="pipeline config JSON")
    est.add_argument("--out", help="output directory (default <input_dir>/result)")
    est.add_argument("--dump-diagnostics", action="store_true",
                     help="write per-iteration diagnostics.jsonl")
    est.set_defaults(func=cmd_estimate)

    syn = sub.add_parser("synth", help="generate a synthetic scene")
    syn.add_argument("spec", help="scene spec JSON")
    syn.add_argument("--out", required=True, help="output directory")
    syn.set_defaults(func=cmd_synth)

    ev = sub.add_parser("eval", help="score a result against scene ground truth")
    ev.add_argument("result", help="result.json produced by estimate")
    ev.add_argument("truth", help="truth.json produced by synth")
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputFormatError, InvalidParameterError, GenerationError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID_INPUT
    except FitFailureError as exc:
        log.error("fit failure: %s", exc)
        return EXIT_FIT_FAILURE
    except (DegenerateGeometryError, EmptySegmentationError) as exc:
        log.error("degenerate geometry: %s", exc)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
