"""Command-line surface: ``verify | bench | flops | train``.

Exit codes: 0 success, 1 verification failure or training divergence,
2 usage error (bad flags, invalid config, unwritable output).
"""

import argparse
import logging

from pydantic import ValidationError

from analytics.export import write_csv
from config.settings import settings
from harness.scaling import RECORD_FIELDS, run_bench, slopes
from harness.verify import SUITES, format_report, verify
from layers.complexity import dense_flops, dense_param_count, flops, param_count
from monitoring.logging_config import setup_logging
from storage.datasets import save_dataset
from storage.weights import save_model
from tasks.datasets import TASKS
from tasks.model import VARIANTS
from tasks.optim import OPTIMIZERS, SCHEDULES
from tasks.training import TrainConfig, build_datasets, config_from_preset, train
from tensor.errors import DivergenceError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

DEFAULT_LATENT_NS = [1024, 2048, 4096, 8192, 16384, 32768, 65536]
DEFAULT_DENSE_NS = [256, 512, 1024, 2048, 4096]
FLOPS_FIELDS = [
    "n",
    "c",
    "c_r",
    "d",
    "kernels",
    "latent_flops",
    "dense_flops",
    "ratio",
    "params_bottleneck",
    "params_context",
    "params_total",
    "dense_params",
]
TRAIN_FIELDS = ["step", "loss", "eval_accuracy"]
VERIFY_FIELDS = ["suite", "seed", "error", "tolerance", "passed", "detail"]


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _latent_dims(parser: argparse.ArgumentParser, d: list[int], kernels: int | None) -> list[int]:
    """``--d 8 --kernels 3`` → [8, 8, 8]; an explicit list must match ``--kernels``."""
    if kernels is None or len(d) == kernels:
        return list(d)
    if len(d) == 1:
        return d * kernels
    parser.error(f"--d lists {len(d)} dims but --kernels is {kernels}")


def _shape_args(p: argparse.ArgumentParser, c_default: int, d_default: str) -> None:
    p.add_argument("--c", type=_positive_int, default=c_default, help="feature channels")
    p.add_argument("--cr", type=_positive_int, default=None, help="bottleneck channels (default c/4)")
    p.add_argument("--d", type=_int_list, default=_int_list(d_default), help="latent dims, one per kernel")
    p.add_argument("--kernels", type=_positive_int, default=None, help="kernel count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="main.py", description="Latent graph layer verification and benchmarks")
    parser.add_argument("--log-level", default=None, help="override LOG_LEVEL")
    parser.add_argument("--json-logs", action="store_true", help="JSON lines on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="equivalence, oracle and gradient suites")
    p.add_argument("--seed", type=int, default=settings.default_seed)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--tolerance", type=float, default=None, help="override every suite's tolerance")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--suites", default=",".join(SUITES), help="comma list of suites")
    p.add_argument("--out", default=None, help="per-trial CSV path")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("bench", help="wall-clock scaling of both variants")
    p.add_argument("--seed", type=int, default=settings.default_seed)
    p.add_argument("--n", type=_int_list, default=DEFAULT_LATENT_NS, help="latent layer sizes")
    p.add_argument("--dense-n", type=_int_list, default=DEFAULT_DENSE_NS, help="dense block sizes")
    _shape_args(p, c_default=64, d_default="64")
    p.add_argument("--repeats", type=int, default=settings.bench_repeats)
    p.add_argument("--affinity", choices=("sim", "lap"), default="sim")
    p.add_argument("--variant", choices=("latentgnn", "dense", "both"), default="both")
    p.add_argument("--dense-cap", type=_positive_int, default=None, help="raise the dense node cap for this run")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("flops", help="analytic FLOPs and parameter counts")
    p.add_argument("--n", type=_int_list, default=[16384])
    _shape_args(p, c_default=64, d_default="64")
    p.add_argument("--affinity", choices=("sim", "lap"), default="sim")
    p.add_argument("--latent-kind", choices=("identity", "free", "symmetric-factor"), default="free")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_flops)

    p = sub.add_parser("train", help="toy end-to-end training")
    p.add_argument("--preset", default=None, help="named preset from config/presets.yaml")
    p.add_argument("--task", choices=TASKS, default=None)
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--optimizer", choices=OPTIMIZERS, default=None)
    p.add_argument("--schedule", choices=SCHEDULES, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--eval-count", type=int, default=None)
    p.add_argument("--c", type=_positive_int, default=None)
    p.add_argument("--cr", type=_positive_int, default=None)
    p.add_argument("--d", type=_int_list, default=None)
    p.add_argument("--kernels", type=_positive_int, default=None)
    p.add_argument("--affinity", choices=("sim", "lap"), default=None, help="dense block variant")
    p.add_argument("--out", default=None, help="loss curve CSV")
    p.add_argument("--weights", default=None, help="write trained weights to this bundle")
    p.add_argument("--save-dataset", default=None, help="write the generated datasets to this bundle")
    p.set_defaults(handler=cmd_train)
    return parser


def cmd_verify(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.trials < 1:
        parser.error(f"--trials must be ≥ 1, got {args.trials}")
    if args.tolerance is not None and args.tolerance < 0:
        parser.error("--tolerance must be non-negative")
    suites = tuple(s for s in args.suites.split(",") if s)
    unknown = [s for s in suites if s not in SUITES]
    if unknown or not suites:
        parser.error(f"unknown suites {unknown}; expected some of {SUITES}")
    report = verify(args.seed, args.trials, args.tolerance, args.threads, suites)
    print(format_report(report))
    if args.out:
        rows = [
            {"suite": t.suite, "seed": t.seed, "error": repr(t.error), "tolerance": t.tolerance,
             "passed": int(t.passed), "detail": t.detail}
            for t in report.trials()
        ]
        write_csv(args.out, VERIFY_FIELDS, rows, {"command": "verify", "seed": args.seed, "trials": args.trials})
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_bench(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.repeats < 5:
        parser.error(f"--repeats must be ≥ 5, got {args.repeats}")
    c_r = args.cr or max(1, args.c // 4)
    dims = _latent_dims(parser, args.d, args.kernels)
    latent_ns = args.n if args.variant in ("latentgnn", "both") else []
    dense_ns = args.dense_n if args.variant in ("dense", "both") else []
    records = run_bench(latent_ns, dense_ns, args.c, c_r, dims, args.affinity, args.repeats, args.seed, args.dense_cap)
    config = {"command": "bench", "seed": args.seed, "c": args.c, "c_r": c_r, "d": dims,
              "affinity": args.affinity, "repeats": args.repeats}
    write_csv(args.out, RECORD_FIELDS, [r.row() for r in records], config)
    for variant, slope in slopes(records).items():
        message = f"{variant} log-log slope: {slope:.3f}"
        if args.out:
            print(message)
        else:
            logger.info(message)
    return EXIT_OK


def flops_row(n: int, c: int, c_r: int, dims: list[int], affinity: str, latent_kind: str) -> dict:
    latent = flops(n, c, c_r, dims)
    dense = dense_flops(n, c, affinity)
    params = param_count(c, c_r, dims, latent_kind)
    return {
        "n": n,
        "c": c,
        "c_r": c_r,
        "d": ";".join(str(d) for d in dims),
        "kernels": len(dims),
        "latent_flops": latent,
        "dense_flops": dense,
        "ratio": f"{dense / latent:.6f}",
        "params_bottleneck": params.bottleneck,
        "params_context": params.context,
        "params_total": params.total,
        "dense_params": dense_param_count(c),
    }


def cmd_flops(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    c_r = args.cr or max(1, args.c // 4)
    dims = _latent_dims(parser, args.d, args.kernels)
    rows = [flops_row(n, args.c, c_r, dims, args.affinity, args.latent_kind) for n in args.n]
    config = {"command": "flops", "c": args.c, "c_r": c_r, "d": dims, "affinity": args.affinity,
              "latent_kind": args.latent_kind}
    write_csv(args.out, FLOPS_FIELDS, rows, config)
    return EXIT_OK


def train_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> TrainConfig:
    """Preset (if any) → flags; stage shape flags apply to every stage."""
    overrides = {
        "task": args.task,
        "variant": args.variant,
        "seed": args.seed,
        "steps": args.steps,
        "lr": args.lr,
        "optimizer": args.optimizer,
        "schedule": args.schedule,
        "batch_size": args.batch_size,
        "train_count": args.train_count,
        "eval_count": args.eval_count,
        "c": args.c,
        "dense_variant": args.affinity,
    }
    if args.preset:
        config = config_from_preset(args.preset, **overrides)
    else:
        config = TrainConfig(**{key: value for key, value in overrides.items() if value is not None})
    if args.d is None and args.kernels is None and args.cr is None:
        return config
    stages = []
    for stage in config.stages:
        values = stage.model_dump()
        if args.cr is not None:
            values["c_r"] = args.cr
        if args.d is not None or args.kernels is not None:
            base = args.d if args.d is not None else stage.latent_dims[:1]
            values["latent_dims"] = _latent_dims(parser, base, args.kernels)
        stages.append(values)
    return TrainConfig(**{**config.model_dump(), "stages": stages})


def cmd_train(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    try:
        config = train_config(args, parser)
    except (ValidationError, KeyError) as e:
        logger.error(f"Invalid training configuration: {e}")
        return EXIT_USAGE
    datasets = build_datasets(config)
    if args.save_dataset:
        save_dataset(args.save_dataset, datasets[0])
        save_dataset(f"{args.save_dataset}-eval", datasets[1])
    try:
        result = train(config, datasets)
    except DivergenceError as e:
        logger.error(f"Training diverged: {e}")
        return EXIT_FAILED
    rows = [{"step": r.step, "loss": repr(r.loss), "eval_accuracy": r.eval_accuracy} for r in result.records]
    meta = {
        "command": "train",
        "seed": config.seed,
        "task": config.task,
        "variant": config.variant,
        "steps": config.steps,
        "lr": config.lr,
        "optimizer": config.optimizer,
        "stages": [f"{s.hidden}/{s.c_r}/{'+'.join(str(d) for d in s.latent_dims)}" for s in config.stages],
    }
    write_csv(args.out, TRAIN_FIELDS, rows, meta)
    if args.weights:
        save_model(args.weights, result.model)
    summary = f"{config.variant}: init accuracy {result.init_accuracy:.4f}, eval accuracy {result.eval_accuracy:.4f}"
    if args.out:
        print(summary)
    else:
        logger.info(summary)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        setup_logging(args.log_level or settings.log_level, args.json_logs or settings.json_logging)
        return args.handler(args, parser)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except OSError as e:
        logger.error(f"Cannot write output: {e}")
        return EXIT_USAGE
