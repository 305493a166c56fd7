"""Command-line entry point: python -m cli.main <command> [options]

Exit codes: 0 success, 1 I/O or checkpoint failure, 2 validation error or failed gradient check.
Installed as the ``freqseg`` console script.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from core.errors import CheckpointError, ConfigurationError, MaskValidationError
from core.tensor_io import dump_tensor, load_tensor
from models.config import RunConfig
from models.dataset import Split
from network.freqdino import FreqDino
from network.wavelet import haar_decompose
from services.ablation_service import AblationService
from services.checkpoint_service import CheckpointService
from services.dataset_service import DatasetService
from services.evaluation_service import EvaluationService
from services.image_io import normalize_for_display, read_image, write_image
from services.inference_service import BAND_NAMES, InferenceService
from services.report_service import ReportService
from services.training_service import BEST_CHECKPOINT, TrainingService

logger = logging.getLogger("freqseg")

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2


def parse_overrides(pairs: List[str]) -> Dict[str, str]:
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigurationError(f"override {pair!r} is not key=value")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def load_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig.from_file(args.config, **parse_overrides(args.set))


def cmd_gen(args: argparse.Namespace) -> int:
    config = load_config(args)
    manifest = DatasetService(args.out).generate(args.n, config)
    print(json.dumps({"root": str(args.out), "count": manifest.count, "splits": manifest.split_counts()}))
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = load_config(args)
    dataset = DatasetService(args.data)
    train = dataset.load_split(Split.TRAIN)
    val = dataset.load_split(Split.VAL) if dataset.load_manifest().split(Split.VAL) else None
    result = TrainingService(config, args.out, progress=not args.quiet).fit(train, val, resume=args.resume)
    print(json.dumps({
        "epochs": len(result.history),
        "final_loss": result.final_loss,
        "best_val_dice": result.best_val_dice,
        "checkpoint": str(Path(args.out) / BEST_CHECKPOINT)
    }))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    model, _, _ = CheckpointService().restore(args.checkpoint)
    data = DatasetService(args.data).load_split(Split(args.split))
    evaluator = EvaluationService(spacing=model.config.hd_spacing, batch_size=model.config.batch_size)
    report = evaluator.evaluate(model, data, args.split)
    if args.report:
        ReportService().write_evaluation(args.report, report)
    print(report.model_copy(update={"records": []}).model_dump_json())
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    config = load_config(args)
    dataset = DatasetService(args.data)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    manifest = dataset.load_manifest()
    val = dataset.load_split(Split.VAL) if manifest.split(Split.VAL) else None
    report = AblationService(config, seeds, progress=not args.quiet).run(
        dataset.load_split(Split.TRAIN), dataset.load_split(Split.TEST), val, dataset=str(args.data)
    )
    path = ReportService().write_ablation(Path(args.out) / "ablation.jsonl", report)
    print(ReportService().ablation_summary(report))
    logger.info("ablation report written to %s", path)
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    model, _, _ = CheckpointService().restore(args.checkpoint)
    result = InferenceService(model).infer_file(
        args.image,
        args.out,
        probability=args.prob,
        dump_bands=args.dump_bands,
        dump_prototype=args.dump_prototype,
        suffix=".png" if args.png else ".pgm"
    )
    for path in result.written:
        print(path)
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    config = load_config(args)
    model = FreqDino(config)
    rng = np.random.default_rng(config.seed)
    size = config.image_size
    images = rng.uniform(0.0, 1.0, size=(1, 1, size, size))
    masks = (rng.uniform(size=(1, 1, size, size)) > 0.5).astype(np.uint8)
    report = model.grad_check(images, masks, eps=args.eps, tol=args.tol, coords=args.coords, seed=config.seed)
    print(report.model_dump_json(indent=2))
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_dwt(args: argparse.Namespace) -> int:
    """Band images of a raw grayscale image, or the model's bands and attention maps with --checkpoint"""
    current = read_image(args.image)[None, None]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).stem
    if args.checkpoint is not None:
        model, _, _ = CheckpointService().restore(args.checkpoint)
        for path in InferenceService(model).dump_inspection(model.inspect(current), out, stem):
            print(path)
        return EXIT_OK
    for level in range(args.levels):
        bands = haar_decompose(current)
        for name in BAND_NAMES:
            path = out / f"{stem}_level{level}_{name}.pgm"
            write_image(path, normalize_for_display(getattr(bands, name)[0, 0]))
            print(path)
        current = bands.ll
    return EXIT_OK


def cmd_dump(args: argparse.Namespace) -> int:
    dump_tensor(read_image(args.image)[None, None], args.out)
    print(args.out)
    return EXIT_OK


def cmd_load(args: argparse.Namespace) -> int:
    tensor = load_tensor(args.path)
    print(json.dumps({
        "shape": list(tensor.shape),
        "min": float(tensor.min()),
        "max": float(tensor.max()),
        "mean": float(tensor.mean())
    }))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freqseg", description="Frequency-guided boundary-aware segmentation")
    parser.add_argument("--config", type=Path, default=None, help="key=value configuration file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Per-key override")
    parser.add_argument("--log-level", default="INFO", help="Logging level")
    parser.add_argument("--quiet", action="store_true", help="Disable progress bars")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="Generate a synthetic dataset")
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("-n", type=int, default=100, help="Number of samples")
    gen.set_defaults(handler=cmd_gen)

    train = commands.add_parser("train", help="Train on a generated dataset")
    train.add_argument("--data", type=Path, required=True)
    train.add_argument("--out", type=Path, required=True, help="Directory for checkpoints and the training log")
    train.add_argument("--resume", action="store_true", help="Continue from last.ckpt in --out")
    train.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser("eval", help="Evaluate a checkpoint on a dataset split")
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    evaluate.add_argument("--data", type=Path, required=True)
    evaluate.add_argument("--split", choices=[s.value for s in Split], default=Split.TEST.value)
    evaluate.add_argument("--report", type=Path, default=None, help="JSONL report path")
    evaluate.set_defaults(handler=cmd_eval)

    ablate = commands.add_parser("ablate", help="Train and compare the four module combinations")
    ablate.add_argument("--data", type=Path, required=True)
    ablate.add_argument("--out", type=Path, required=True)
    ablate.add_argument("--seeds", default=None, help="Comma-separated seeds (default: config seed)")
    ablate.set_defaults(handler=cmd_ablate)

    infer = commands.add_parser("infer", help="Segment one image")
    infer.add_argument("--checkpoint", type=Path, required=True)
    infer.add_argument("--image", type=Path, required=True)
    infer.add_argument("--out", type=Path, required=True)
    infer.add_argument("--prob", action="store_true", help="Also write the mask probability map")
    infer.add_argument("--dump-bands", action="store_true", help="Write wavelet bands and attention maps")
    infer.add_argument("--dump-prototype", action="store_true", help="Write the boundary prototype (FQT1)")
    infer.add_argument("--png", action="store_true", help="Write PNG instead of PGM")
    infer.set_defaults(handler=cmd_infer)

    gradcheck = commands.add_parser("gradcheck", help="Finite-difference check of the full loss")
    gradcheck.add_argument("--eps", type=float, default=1e-5)
    gradcheck.add_argument("--tol", type=float, default=1e-4)
    gradcheck.add_argument("--coords", type=int, default=32)
    gradcheck.set_defaults(handler=cmd_gradcheck)

    dwt = commands.add_parser("dwt", help="Haar band images, or model bands and attention maps")
    dwt.add_argument("--image", type=Path, required=True)
    dwt.add_argument("--out", type=Path, required=True)
    dwt.add_argument("--levels", type=int, default=2)
    dwt.add_argument("--checkpoint", type=Path, default=None,
                     help="Dump the feature-map bands and attention maps of a trained model instead")
    dwt.set_defaults(handler=cmd_dwt)

    dump = commands.add_parser("dump", help="Convert an image into an FQT1 feature map")
    dump.add_argument("--image", type=Path, required=True)
    dump.add_argument("--out", type=Path, required=True)
    dump.set_defaults(handler=cmd_dump)

    load = commands.add_parser("load", help="Print shape and statistics of an FQT1 file")
    load.add_argument("path", type=Path)
    load.set_defaults(handler=cmd_load)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.handler(args)
    except (ValidationError, ConfigurationError, MaskValidationError) as exc:
        logger.error("validation error: %s", exc)
        return EXIT_VALIDATION
    except (OSError, CheckpointError) as exc:
        logger.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
