"""CLI interface for the motion resolution adaptation lab.

Exit codes: 0 success, 1 usage error (unknown flag, bad value, missing
model), 2 data error, 3 training divergence.
"""

import logging
import sys
from collections.abc import Iterator, Mapping
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated

import typer
from returns.result import Failure, Success
from rich.console import Console
from rich.logging import RichHandler

from .classifier import DEFAULT_WIDTHS
from .codec import RATE_LADDER, QuantConfig, parse_rate_ladder, rate_ladder
from .config import parse_int_tuple, read_key_values, resolve
from .formatter import (
    display_bdrate,
    display_encode_summary,
    display_eval_results,
    display_label_summary,
    display_report,
    display_training_summary,
    print_error_message,
    print_progress_message,
    print_success_message,
)
from .gop import GopConfig
from .losses import DEFAULT_GAMMA, DEFAULT_SOFT_TEMPERATURE
from .motion import MotionConfig
from .pipeline import (
    EncodeRequest,
    run_bdrate_pipeline,
    run_encode_pipeline,
    run_eval_pipeline,
    run_gen_pipeline,
    run_label_pipeline,
    run_report_pipeline,
    run_train_pipeline,
)
from .policy import MissingModelError
from .training import TrainConfig, TrainingDiverged
from .types import ClassifierMode, FlowPrecision, Refinement, SequenceFormat, Variant

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3

# Exceptions of whichever click build typer runs on (bundled or standalone).
_click_exceptions = sys.modules[typer.Abort.__module__]

app = typer.Typer(
    help="Motion resolution adaptation lab for hierarchical B-frame coding",
    no_args_is_help=True,
)

ConfigOption = Annotated[
    Path | None,
    typer.Option("--config", help="key=value settings file; flags win over it"),
]
VerboseOption = Annotated[
    bool, typer.Option("--verbose", "-v", help="Log per-frame decisions at DEBUG")
]
SeedOption = Annotated[
    int | None, typer.Option("--seed", help="Seed of every random draw (default 0)")
]
CropOption = Annotated[
    bool,
    typer.Option("--crop", help="Crop frames to multiples of 16 instead of failing"),
]
GopOption = Annotated[
    int | None, typer.Option("--gop", help="GOP size: 2, 4, 8, 16 or 32 (default 32)")
]
IntraOption = Annotated[
    int | None,
    typer.Option("--intra", help="Intra period, a multiple of the GOP (default 32)"),
]
BlockOption = Annotated[
    int | None, typer.Option("--block", help="Motion block size: 4, 8 or 16")
]
RangeOption = Annotated[
    int | None,
    typer.Option("--search-range", help="Block search range in grid pixels"),
]
RefinementOption = Annotated[
    Refinement | None,
    typer.Option("--refinement", help="Sub-pixel refinement of the block search"),
]
FlowPrecisionOption = Annotated[
    FlowPrecision | None,
    typer.Option("--flow-precision", help="Precision of coded motion vectors"),
]


@app.command()
def gen(
    spec: Annotated[
        Path, typer.Option("--spec", help="Synthetic sequence spec (key=value)")
    ],
    out: Annotated[Path, typer.Option("--out", help="Output sequence file")],
    fmt: Annotated[
        SequenceFormat | None,
        typer.Option("--format", help="Output format (default: from the suffix)"),
    ] = None,
    seed: SeedOption = None,
    config: ConfigOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Generate a synthetic translating sequence."""
    console = Console()
    settings = _start(console, config, verbose)
    with _usage_errors(console):
        seed = resolve(seed, settings, "seed", None, int)

    print_progress_message(console, "🎨 Generating synthetic sequence...")
    match run_gen_pipeline(spec, out, seed, fmt):
        case Success((path, frames)):
            print_success_message(console, f"Wrote {frames} frames to {path}")
        case Failure(error_message):
            _fail(console, error_message)


@app.command()
def label(
    inputs: Annotated[
        list[Path], typer.Option("--in", help="Input sequence (repeatable)")
    ],
    out: Annotated[Path, typer.Option("--out", help="Output dataset file")],
    gop: GopOption = None,
    intra: IntraOption = None,
    rates: Annotated[
        str | None,
        typer.Option("--rates", help="Rate ladder of q_step:lambda pairs"),
    ] = None,
    temperature: Annotated[
        float | None,
        typer.Option("--temperature", help="Soft-label temperature (default 10)"),
    ] = None,
    block: BlockOption = None,
    search_range: RangeOption = None,
    refinement: RefinementOption = None,
    flow_precision: FlowPrecisionOption = None,
    crop: CropOption = False,
    config: ConfigOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Build an oracle-labelled training dataset by exhaustive search."""
    console = Console()
    settings = _start(console, config, verbose)
    with _usage_errors(console):
        gop_config = _gop_config(settings, gop, intra)
        motion = _motion_config(settings, block, search_range, refinement)
        precision = _flow_precision(settings, flow_precision)
        ladder = _ladder(resolve(rates, settings, "rates", None))
        quants = rate_ladder(ladder, precision)
        temperature = resolve(
            temperature, settings, "temperature", DEFAULT_SOFT_TEMPERATURE, float
        )

    print_progress_message(
        console,
        f"🏷️  Labelling {len(inputs)} sequence(s) at {len(quants)} rates...",
    )
    result = run_label_pipeline(
        inputs, out, gop_config, quants, motion, temperature, crop
    )
    match result:
        case Success(summary):
            display_label_summary(console, summary)
            print_success_message(console, f"Wrote dataset to {summary.path}")
        case Failure(error_message):
            _fail(console, error_message)


@app.command()
def train(
    dataset: Annotated[Path, typer.Option("--dataset", help="Labelled dataset")],
    mode: Annotated[
        ClassifierMode, typer.Option("--mode", help="bi (per layer) or mu (shared)")
    ],
    out: Annotated[
        Path,
        typer.Option("--out", help="Model file; bi adds _layer<L> per temporal layer"),
    ],
    epochs: Annotated[
        int | None, typer.Option("--epochs", help="Training epochs (default 30)")
    ] = None,
    batch_size: Annotated[
        int | None, typer.Option("--batch-size", help="Mini-batch size (default 32)")
    ] = None,
    learning_rate: Annotated[
        float | None,
        typer.Option("--learning-rate", help="SGD step size (default 0.001)"),
    ] = None,
    momentum: Annotated[
        float | None, typer.Option("--momentum", help="SGD momentum (default 0.9)")
    ] = None,
    gamma: Annotated[
        float | None, typer.Option("--gamma", help="Focal-loss focus (default 2)")
    ] = None,
    alpha: Annotated[
        str | None,
        typer.Option("--alpha", help="Focal weights 'a0,a1' (default: class freq.)"),
    ] = None,
    temperature: Annotated[
        float | None,
        typer.Option("--temperature", help="Soft-label temperature (default 10)"),
    ] = None,
    widths: Annotated[
        str | None,
        typer.Option("--widths", help="Convolution widths (default 16,32,64)"),
    ] = None,
    seed: SeedOption = None,
    config: ConfigOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Train Bi-Class or Mu-Class networks on a labelled dataset."""
    console = Console()
    settings = _start(console, config, verbose)
    with _usage_errors(console):
        alpha_text = resolve(alpha, settings, "alpha", None)
        widths_text = resolve(widths, settings, "widths", None)
        cfg = TrainConfig(
            gamma=resolve(gamma, settings, "gamma", DEFAULT_GAMMA, float),
            alpha=_alpha(alpha_text) if alpha_text else None,
            soft_temperature=resolve(
                temperature, settings, "temperature", DEFAULT_SOFT_TEMPERATURE, float
            ),
            learning_rate=resolve(
                learning_rate, settings, "learning_rate", 1e-3, float
            ),
            momentum=resolve(momentum, settings, "momentum", 0.9, float),
            epochs=resolve(epochs, settings, "epochs", 30, int),
            batch_size=resolve(batch_size, settings, "batch_size", 32, int),
            seed=resolve(seed, settings, "seed", 0, int),
            widths=parse_int_tuple(widths_text) if widths_text else DEFAULT_WIDTHS,
        )

    print_progress_message(console, f"🧠 Training {mode.value}-class networks...")
    match run_train_pipeline(dataset, mode, cfg, out):
        case Success(summary):
            display_training_summary(console, summary)
            names = ", ".join(str(p) for p in summary.paths)
            print_success_message(console, f"Wrote {names}")
        case Failure(TrainingDiverged() as diverged):
            print_error_message(console, str(diverged))
            raise typer.Exit(EXIT_DIVERGED)
        case Failure(error_message):
            _fail(console, str(error_message))


@app.command()
def encode(
    source: Annotated[Path, typer.Option("--in", help="Input sequence")],
    variant: Annotated[
        Variant, typer.Option("--variant", help="Resolution decision policy")
    ],
    out: Annotated[Path, typer.Option("--out", help="Output container")],
    max_layer: Annotated[
        int | None,
        typer.Option("--max-layer", help="Deepest adapted layer (default: all)"),
    ] = None,
    models: Annotated[
        list[Path] | None,
        typer.Option("--models", help="Classifier model file (repeatable)"),
    ] = None,
    log: Annotated[
        Path | None, typer.Option("--log", help="Per-frame decision log CSV")
    ] = None,
    complexity: Annotated[
        Path | None,
        typer.Option("--complexity", help="MAC ledger breakdown CSV"),
    ] = None,
    q_step: Annotated[
        float | None, typer.Option("--q-step", help="Quantizer step (default 16)")
    ] = None,
    lmbda: Annotated[
        float | None,
        typer.Option("--lambda", help="RD Lagrange multiplier (default 1.0)"),
    ] = None,
    gop: GopOption = None,
    intra: IntraOption = None,
    block: BlockOption = None,
    search_range: RangeOption = None,
    refinement: RefinementOption = None,
    flow_precision: FlowPrecisionOption = None,
    crop: CropOption = False,
    config: ConfigOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Encode a sequence under one resolution decision policy."""
    console = Console()
    settings = _start(console, config, verbose)
    with _usage_errors(console):
        gop_config = _gop_config(settings, gop, intra)
        max_layer = resolve(max_layer, settings, "max_layer", None, int)
        if max_layer is not None and not 0 <= max_layer <= gop_config.num_b_layers:
            raise ValueError(
                f"--max-layer must lie in [0, {gop_config.num_b_layers}]"
            )
        request = EncodeRequest(
            source=source,
            out=out,
            variant=variant,
            gop=gop_config,
            quant=QuantConfig(
                q_step=resolve(q_step, settings, "q_step", 16.0, float),
                flow_precision=_flow_precision(settings, flow_precision),
                lmbda=resolve(lmbda, settings, "lambda", 1.0, float),
            ),
            motion=_motion_config(settings, block, search_range, refinement),
            max_layer=max_layer,
            models=tuple(models or ()),
            log=log,
            complexity=complexity,
            crop=crop,
        )

    print_progress_message(
        console, f"🎞️  Encoding with variant {variant.value}..."
    )
    with _usage_errors(console, MissingModelError):
        result = run_encode_pipeline(request)
    match result:
        case Success(summary):
            display_encode_summary(console, summary)
            names = ", ".join(str(p) for p in summary.outputs)
            print_success_message(console, f"Wrote {names}")
        case Failure(error_message):
            _fail(console, error_message)


@app.command(name="eval")
def evaluate(
    source: Annotated[Path, typer.Option("--in", help="Source sequence")],
    recon: Annotated[Path, typer.Option("--recon", help="Encoded container")],
    variant: Annotated[
        str | None,
        typer.Option("--variant", help="Variant name for the rd point"),
    ] = None,
    sequence: Annotated[
        str | None,
        typer.Option("--sequence", help="Sequence name (default: file stem)"),
    ] = None,
    rdpoints: Annotated[
        Path | None,
        typer.Option("--rdpoints", help="Append the summary row to this CSV"),
    ] = None,
    crop: CropOption = False,
    config: ConfigOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Report per-frame PSNR and bits of a decoded container."""
    console = Console()
    _start(console, config, verbose)

    print_progress_message(console, "📊 Decoding and scoring...")
    match run_eval_pipeline(source, recon, variant, sequence, rdpoints, crop):
        case Success(summary):
            display_eval_results(console, summary)
        case Failure(error_message):
            _fail(console, error_message)


@app.command()
def bdrate(
    anchor: Annotated[Path, typer.Option("--anchor", help="Anchor rd-points CSV")],
    test: Annotated[Path, typer.Option("--test", help="Test rd-points CSV")],
    out: Annotated[
        Path | None, typer.Option("--out", help="Write the BD-rate table here")
    ] = None,
    config: ConfigOption = None,
    verbose: VerboseOption = False,
) -> None:
    """BD-rate (%) of a test curve against an anchor curve."""
    console = Console()
    _start(console, config, verbose)

    match run_bdrate_pipeline(anchor, test, out):
        case Success(frame):
            display_bdrate(console, frame)
        case Failure(error_message):
            _fail(console, error_message)


@app.command()
def report(
    logs: Annotated[
        list[Path], typer.Option("--logs", help="Decision log CSV (repeatable)")
    ],
    truth: Annotated[
        Path | None,
        typer.Option("--truth", help="Ground-truth log (default: exhaustive rows)"),
    ] = None,
    complexity: Annotated[
        list[Path] | None,
        typer.Option("--complexity", help="Complexity CSV from encode (repeatable)"),
    ] = None,
    out_dir: Annotated[
        Path, typer.Option("--out-dir", help="Directory for report CSVs")
    ] = Path("."),
    config: ConfigOption = None,
    verbose: VerboseOption = False,
) -> None:
    """Confusion matrices, candidate sets, search effort and complexity."""
    console = Console()
    _start(console, config, verbose)

    print_progress_message(console, f"🔎 Analysing {len(logs)} decision log(s)...")
    match run_report_pipeline(logs, out_dir, truth, complexity or ()):
        case Success(summary):
            display_report(console, summary)
            print_success_message(
                console, f"Wrote {len(summary.outputs)} report files to {out_dir}"
            )
        case Failure(error_message):
            _fail(console, error_message)


def run(argv: list[str] | None = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        code = app(args=argv, standalone_mode=False)
    except _click_exceptions.ClickException as e:
        e.show()
        return EXIT_USAGE
    except typer.Abort:
        return EXIT_USAGE
    return code if isinstance(code, int) else 0


def main() -> None:
    """Entry point for the CLI application."""
    sys.exit(run(sys.argv[1:]))


# Private helper functions


def _start(console: Console, config: Path | None, verbose: bool) -> dict[str, str]:
    """Install logging and read the optional settings file (I/O operation)."""
    _configure_logging(verbose)
    if config is None:
        return {}
    match read_key_values(config):
        case Success(values):
            return values
        case Failure(error_message):
            _fail(console, error_message)


def _configure_logging(verbose: bool) -> None:
    logger = logging.getLogger("omra_lab")
    logger.handlers.clear()
    logger.addHandler(RichHandler(console=Console(stderr=True), show_path=False))
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING)


@contextmanager
def _usage_errors(
    console: Console, *errors: type[Exception]
) -> Iterator[None]:
    """Turn bad flag values and missing models into exit code 1."""
    try:
        yield
    except errors or (ValueError, MissingModelError) as e:
        print_error_message(console, str(e))
        raise typer.Exit(EXIT_USAGE) from e


def _fail(console: Console, message: str) -> None:
    print_error_message(console, message)
    raise typer.Exit(EXIT_DATA)


def _gop_config(
    settings: Mapping[str, str], gop: int | None, intra: int | None
) -> GopConfig:
    return GopConfig(
        gop_size=resolve(gop, settings, "gop", 32, int),
        intra_period=resolve(intra, settings, "intra", 32, int),
    )


def _motion_config(
    settings: Mapping[str, str],
    block: int | None,
    search_range: int | None,
    refinement: Refinement | None,
) -> MotionConfig:
    return MotionConfig(
        block_size=resolve(block, settings, "block", 8, int),
        search_range=resolve(search_range, settings, "search_range", 8, int),
        refinement=resolve(
            refinement, settings, "refinement", Refinement.HALF_PEL, Refinement
        ),
    )


def _flow_precision(
    settings: Mapping[str, str], flow_precision: FlowPrecision | None
) -> FlowPrecision:
    return resolve(
        flow_precision,
        settings,
        "flow_precision",
        FlowPrecision.HALF_PEL,
        FlowPrecision,
    )


def _ladder(text: str | None) -> tuple[tuple[float, float], ...]:
    if text is None:
        return RATE_LADDER
    match parse_rate_ladder(text):
        case Success(ladder):
            return ladder
        case Failure(message):
            raise ValueError(message)


def _alpha(text: str) -> tuple[float, float]:
    values = tuple(float(v) for v in text.split(","))
    if len(values) != 2:
        raise ValueError("--alpha takes two comma-separated weights")
    return values


if __name__ == "__main__":
    main()
