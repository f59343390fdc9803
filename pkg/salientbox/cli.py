"""Command-line surface.

Exit codes: 0 on success, 1 when inputs fail validation (bad parameters,
degenerate boxes, unmatched image ids, a failed gradient check), 2 on I/O or
parse failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from salientbox.bench import run_bench
from salientbox.config import PROFILES, DecoderConfig, EncoderConfig, SizeStrata, ToolkitConfig
from salientbox.errors import FormatError, InvalidParameterError, SalientBoxError
from salientbox.evaluation import (
    OBJECTS_FEW,
    OBJECTS_MANY,
    OBJECTS_NONE,
    boxes_to_mask,
    count_stratified_pr,
    pixel_pr_curve,
    stratified_pr,
    subitizing_metrics,
)
from salientbox.formats import count_report_rows, detection_report_rows, map_pr_rows, require_paired
from salientbox.gradcheck import run_grad_check
from salientbox.models import BinaryMask, NoiseSpec, PRPoint, SubitizingOutput
from salientbox.pipeline import Pipeline, PipelineReport
from salientbox.storage.local_disk import FileMapStore, JsonRecordStore, atomic_write
from salientbox.synth import generate_dataset
from salientbox.utils import parse_area, parse_float_list, parse_int_range

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

DEFAULT_MAP_THRESHOLDS = [i / 255.0 for i in range(256)]


def _add_decoder_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--profile", type=int, choices=sorted(PROFILES), default=None)
    parser.add_argument("--stride", type=int, default=None)
    parser.add_argument("--theta-c", type=float, default=None)
    parser.add_argument("--peak-thresholds", type=parse_float_list, default=None)
    parser.add_argument("--smooth-sigma", type=float, default=None)
    parser.add_argument("--decode-res", choices=["native", "upsampled"], default=None)
    parser.add_argument("--box-rescale", action="store_true")
    parser.add_argument(
        "--no-register-lattice",
        dest="register_lattice",
        action="store_false",
        help="report upsampled boxes in raw upsampled pixels",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="salientbox", description="Proposal-free salient object decoding toolkit")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--threads", type=int, default=None, help="worker cap; overrides RSD_THREADS")
    commands = parser.add_subparsers(dest="command", required=True)

    encode = commands.add_parser("encode-gt", help="annotations -> Gaussian ground-truth maps")
    encode.add_argument("annotations", type=Path)
    encode.add_argument("--out", type=Path, required=True)

    decode = commands.add_parser("decode", help="maps + subitizing -> detection records")
    decode.add_argument("maps", type=Path)
    decode.add_argument("--out", type=Path, required=True)
    decode.add_argument("--subitizing", type=Path, default=None, help="JSON sidecar of per-image outputs")
    decode.add_argument("--sub-category", default=None)
    decode.add_argument("--sub-confidence", type=float, default=None)
    _add_decoder_flags(decode)

    eval_det = commands.add_parser("eval-det", help="detection precision/recall/F1")
    eval_det.add_argument("predictions", type=Path)
    eval_det.add_argument("ground_truth", type=Path)
    eval_det.add_argument("--taus", type=parse_float_list, default=[0.5])
    eval_det.add_argument("--strata", default=None, help="small=AxA,large=BxB")
    eval_det.add_argument("--out", type=Path, default=None)

    eval_map = commands.add_parser("eval-map", help="pixel-level PR curve")
    eval_map.add_argument("maps", type=Path)
    eval_map.add_argument("ground_truth", type=Path, help="mask maps, or annotation JSON to rasterize")
    eval_map.add_argument("--thresholds", type=parse_float_list, default=None)
    eval_map.add_argument("--out", type=Path, default=None)

    eval_count = commands.add_parser("eval-count", help="subitizing accuracy and confusion")
    eval_count.add_argument("predictions", type=Path)
    eval_count.add_argument("ground_truth", type=Path)
    eval_count.add_argument("--out", type=Path, default=None)

    synth = commands.add_parser("synth", help="seeded synthetic annotations and maps")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--n", type=int, default=1)
    synth.add_argument("--k", type=parse_int_range, default=(1, 3))
    synth.add_argument("--min-sep", type=int, default=3)
    synth.add_argument("--size-range", type=parse_int_range, default=(1, 3))
    synth.add_argument("--noise-sigma", type=float, default=0.0)
    synth.add_argument("--clutter", type=int, default=0)
    synth.add_argument("--profile", type=int, choices=sorted(PROFILES), default=None)
    synth.add_argument("--stride", type=int, default=16)
    synth.add_argument("--out", type=Path, required=True)

    grad = commands.add_parser("grad-check", help="analytic vs finite-difference loss gradients")
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--trials", type=int, default=200)
    grad.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)

    bench = commands.add_parser("bench", help="single-threaded decoder throughput")
    bench.add_argument("--n", type=int, default=1000)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--enforce-budget", action="store_true", help="exit 1 when median throughput misses the profile budget")
    _add_decoder_flags(bench)
    return parser


def decoder_config_from_args(args: argparse.Namespace, profile: int) -> DecoderConfig:
    overrides = {
        "stride": args.stride,
        "theta_c": args.theta_c,
        "peak_thresholds": args.peak_thresholds,
        "smooth_sigma": args.smooth_sigma,
        "decode_resolution": args.decode_res,
    }
    overrides = {key: value for key, value in overrides.items() if value is not None}
    return DecoderConfig.for_profile(
        profile, box_rescale=args.box_rescale, register_lattice=args.register_lattice, **overrides
    )


def parse_strata(text: Optional[str]) -> SizeStrata:
    if not text:
        return SizeStrata()
    values = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in ("small", "large") or not value:
            raise InvalidParameterError(f"expected small=AxA,large=BxB, got {text!r}")
        values[f"{key}_max_area" if key == "small" else "large_min_area"] = parse_area(value.strip())
    return SizeStrata(**values)


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out, text)
        logger.info("wrote %s", out)


def _batch_exit(pipeline: Pipeline, report: PipelineReport, what: str) -> int:
    logger.info(
        "%s: %d written, %d skipped, %d failed",
        what,
        len(report.written),
        len(report.skipped),
        len(report.invalid) + len(report.io_errors),
    )
    logger.info("%s: pipeline metrics %s", what, pipeline.metrics)
    if report.io_errors:
        return EXIT_IO
    if report.invalid:
        return EXIT_INVALID
    return EXIT_OK


def cmd_encode_gt(args: argparse.Namespace, pipeline: Pipeline) -> int:
    records = pipeline.load_annotations(JsonRecordStore(args.annotations))
    report = pipeline.encode(records, FileMapStore(args.out, suffix=pipeline.config.map_suffix))
    return _batch_exit(pipeline, report, "encode-gt")


def cmd_decode(args: argparse.Namespace, pipeline: Pipeline) -> int:
    if args.subitizing is not None:
        subitizing = pipeline.load_subitizing(JsonRecordStore(args.subitizing))
    elif args.sub_category is not None and args.sub_confidence is not None:
        subitizing = SubitizingOutput(category=args.sub_category, confidence=args.sub_confidence)
    else:
        raise InvalidParameterError("decode needs --subitizing FILE or both --sub-category and --sub-confidence")
    report = pipeline.decode(FileMapStore(args.maps), subitizing, JsonRecordStore(args.out))
    return _batch_exit(pipeline, report, "decode")


def cmd_eval_det(args: argparse.Namespace, pipeline: Pipeline) -> int:
    predictions = pipeline.load_detections(JsonRecordStore(args.predictions))
    annotations = pipeline.load_annotations(JsonRecordStore(args.ground_truth))
    require_paired((p.image for p in predictions), (a.image for a in annotations))

    gts = {}
    for record in annotations:
        if record.has_boxes:
            gts[record.image] = list(record.boxes)
        else:
            logger.warning("%s: count-only record left out of detection scoring", record.image)
    dets = {p.image: p.scored_boxes() for p in predictions if p.image in gts}
    strata = parse_strata(args.strata)

    by_tau: Dict[float, Dict[str, PRPoint]] = {}
    false_positives: Dict[float, int] = {}
    for tau in args.taus:
        points = stratified_pr(dets, gts, strata, tau)
        by_count = count_stratified_pr(dets, gts, tau)
        points[OBJECTS_FEW] = by_count[OBJECTS_FEW]
        points[OBJECTS_MANY] = by_count[OBJECTS_MANY]
        by_tau[tau] = points
        false_positives[tau] = by_count[OBJECTS_NONE].fp
    _emit(detection_report_rows(by_tau, false_positives, pipeline.config.csv_precision), args.out)
    return EXIT_OK


def _masks_from_annotations(pipeline: Pipeline, path: Path, maps: Dict[str, np.ndarray]) -> Dict[str, BinaryMask]:
    records = pipeline.load_annotations(JsonRecordStore(path))
    require_paired(maps, (record.image for record in records))
    masks = {}
    for record in records:
        if not record.has_boxes:
            logger.warning("%s: count-only record left out of pixel scoring", record.image)
            continue
        height, width = maps[record.image].shape
        masks[record.image] = boxes_to_mask(record.boxes, width, height, scale=width / record.width)
    return masks


def cmd_eval_map(args: argparse.Namespace, pipeline: Pipeline) -> int:
    maps = pipeline.load_maps(FileMapStore(args.maps))
    if args.ground_truth.suffix == ".json" or (args.ground_truth.is_dir() and any(args.ground_truth.glob("*.json"))):
        masks = _masks_from_annotations(pipeline, args.ground_truth, {k: m.values for k, m in maps.items()})
    else:
        masks = {k: BinaryMask(m.values >= 0.5) for k, m in pipeline.load_maps(FileMapStore(args.ground_truth)).items()}
        require_paired(maps, masks)
    images = sorted(masks)
    thresholds = args.thresholds or DEFAULT_MAP_THRESHOLDS
    points = pixel_pr_curve([maps[i] for i in images], [masks[i] for i in images], thresholds)
    _emit(map_pr_rows(thresholds, points, pipeline.config.csv_precision), args.out)
    return EXIT_OK


def cmd_eval_count(args: argparse.Namespace, pipeline: Pipeline) -> int:
    predictions = pipeline.load_detections(JsonRecordStore(args.predictions))
    annotations = {a.image: a for a in pipeline.load_annotations(JsonRecordStore(args.ground_truth))}
    require_paired((p.image for p in predictions), annotations)
    ordered = sorted(predictions, key=lambda p: p.image)
    accuracy, confusion = subitizing_metrics(
        [p.subitizing.category for p in ordered],
        [annotations[p.image].category for p in ordered],
    )
    _emit(count_report_rows(accuracy, confusion, pipeline.config.csv_precision), args.out)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace, pipeline: Pipeline) -> int:
    profile = args.profile or pipeline.config.profile
    cfg = EncoderConfig.for_profile(profile, stride=args.stride)
    noise = NoiseSpec(additive_sigma=args.noise_sigma, clutter_blobs=args.clutter)
    scenes = list(
        generate_dataset(
            args.seed,
            args.n,
            k_range=args.k,
            min_separation_cells=args.min_sep,
            size_range=args.size_range,
            cfg=cfg,
        )
    )
    report = pipeline.synthesize(
        scenes,
        noise,
        FileMapStore(args.out / "maps", suffix=pipeline.config.map_suffix),
        JsonRecordStore(args.out / "annotations"),
    )
    return _batch_exit(pipeline, report, "synth")


def cmd_grad_check(args: argparse.Namespace, pipeline: Pipeline) -> int:
    report = run_grad_check(seed=args.seed, trials=args.trials, perturb=args.perturb)
    status = "pass" if report.passed else "fail"
    sys.stdout.write(f"{status} trials={len(report.trials)} max_rel_error={report.max_rel_error:.3e}\n")
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_bench(args: argparse.Namespace, pipeline: Pipeline) -> int:
    profile = args.profile or pipeline.config.profile
    report = run_bench(profile, args.n, seed=args.seed, decoder_config=decoder_config_from_args(args, profile))
    sys.stdout.write(report.model_dump_json() + "\n")
    if args.enforce_budget and not report.meets_budget:
        return EXIT_INVALID
    return EXIT_OK


COMMANDS = {
    "encode-gt": cmd_encode_gt,
    "decode": cmd_decode,
    "eval-det": cmd_eval_det,
    "eval-map": cmd_eval_map,
    "eval-count": cmd_eval_count,
    "synth": cmd_synth,
    "grad-check": cmd_grad_check,
    "bench": cmd_bench,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
    )
    try:
        config = ToolkitConfig.from_env(threads=args.threads)
        decoder_config = None
        if args.command == "decode":
            decoder_config = decoder_config_from_args(args, args.profile or config.profile)
        pipeline = Pipeline(config, decoder_config)
        return COMMANDS[args.command](args, pipeline)
    except (FormatError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except (SalientBoxError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
