"""Pipelines behind the command-line subcommands."""

from collections.abc import Sequence
from pathlib import Path

import attrs
import polars as pl
from returns.iterables import Fold
from returns.result import Failure, Result, Success

from .classifier import TinyCnn, load_model, save_model
from .codec import (
    ContainerHeader,
    QuantConfig,
    decode_container,
    decode_frames,
    read_factor,
)
from .dataset import LabeledSample, build_dataset, read_dataset, write_dataset
from .entropy import Bitstream
from .evaluation import (
    ConfusionMatrix,
    confusion,
    decision_pairs,
    derive_candidate_sets,
    per_layer_summary,
    rd_point,
    temporal_complexity,
)
from .frame_io import (
    Frame,
    generate_synthetic,
    mse,
    psnr,
    read_sequence,
    read_synthetic_spec,
    write_sequence,
)
from .gop import GopConfig, build_schedule
from .losses import DEFAULT_SOFT_TEMPERATURE
from .motion import MotionConfig
from .policy import (
    BiClassifier,
    MuClassifier,
    PolicyConfig,
    SequenceEncoding,
    encode_sequence,
    read_decision_log,
    write_decision_log,
)
from .reports import (
    append_rdpoints,
    bdrate_frame,
    complexity_frame,
    effort_frame,
    rdpoint_frame,
    read_complexity,
    read_rdpoints,
    write_confusion_reports,
    write_frame,
)
from .training import TrainConfig, TrainingDiverged, TrainOutcome, accuracy, train
from .types import FACTORS, ClassifierMode, SequenceFormat, Variant

#: Variants whose log carries a raw classifier prediction in S_pred.
PREDICTING_VARIANTS = ("mu", "co")


@attrs.frozen
class LabelSummary:
    path: Path
    samples: int
    label_counts: dict[int, int]


@attrs.frozen
class TrainSummary:
    outcome: TrainOutcome
    paths: list[Path]
    accuracy: float


@attrs.frozen
class EncodeRequest:
    """Everything ``encode`` needs; ``gop.num_frames`` follows the source."""

    source: Path
    out: Path
    variant: Variant
    gop: GopConfig
    quant: QuantConfig
    motion: MotionConfig
    max_layer: int | None = None
    models: tuple[Path, ...] = ()
    log: Path | None = None
    complexity: Path | None = None
    crop: bool = False


@attrs.frozen
class EncodeSummary:
    request: EncodeRequest
    encoding: SequenceEncoding
    outputs: list[Path]


@attrs.frozen
class FrameReport:
    poc: int
    kind: str
    layer: int
    bits: int
    mse: float
    psnr: float
    factor: int | None = None


@attrs.frozen
class EvalSummary:
    sequence: str
    variant: str
    q_step: float
    frames: list[FrameReport]
    bpp: float
    psnr: float
    temporal_complexity: float


@attrs.frozen
class VariantReport:
    """Decision quality of one variant against the ground-truth log."""

    variant: str
    column: str
    matrix: ConfusionMatrix
    candidate_sets: dict[int, tuple[int, ...]]


@attrs.frozen
class ReportSummary:
    variants: list[VariantReport]
    effort: pl.DataFrame
    layers: pl.DataFrame
    complexity: pl.DataFrame | None
    outputs: list[Path]


# gen


def run_gen_pipeline(
    spec_path: str | Path,
    out_path: str | Path,
    seed: int | None = None,
    fmt: SequenceFormat | None = None,
) -> Result[tuple[Path, int], str]:
    """Synthetic spec file -> sequence file; returns the path and frame count."""
    return (
        read_synthetic_spec(spec_path)
        .map(
            lambda spec: spec
            if seed is None
            else attrs.evolve(spec, texture_seed=seed)
        )
        .map(generate_synthetic)
        .bind(
            lambda frames: write_sequence(frames, out_path, fmt).map(
                lambda path: (path, len(frames))
            )
        )
    )


# label


def read_sequences(
    paths: Sequence[str | Path], crop: bool = False
) -> Result[list[list[Frame]], str]:
    """Read several sequences, stopping at the first failure (I/O operation)."""
    if not paths:
        return Failure("At least one input sequence is required")
    return Fold.collect(
        [read_sequence(path, crop=crop) for path in paths], Success(())
    ).map(list)


def run_label_pipeline(
    inputs: Sequence[str | Path],
    out_path: str | Path,
    gop: GopConfig,
    quants: list[QuantConfig],
    motion: MotionConfig | None = None,
    temperature: float = DEFAULT_SOFT_TEMPERATURE,
    crop: bool = False,
) -> Result[LabelSummary, str]:
    """Sequences -> oracle-labelled dataset file plus CSV manifest."""
    return (
        read_sequences(inputs, crop)
        .map(
            lambda sequences: build_dataset(
                sequences, gop, quants, motion, temperature
            )
        )
        .bind(
            lambda samples: write_dataset(samples, out_path).map(
                lambda path: LabelSummary(path, len(samples), _label_counts(samples))
            )
        )
    )


# train


def model_paths(out_path: str | Path, outcome: TrainOutcome) -> dict[int, Path]:
    """Output file per trained model: one for Mu, ``<stem>_layer<L>`` per Bi layer."""
    path = Path(out_path)
    if outcome.mode is ClassifierMode.MU:
        return dict.fromkeys(outcome.models, path)
    return {
        layer: path.with_name(f"{path.stem}_layer{layer}{path.suffix}")
        for layer in outcome.models
    }


def save_models(
    outcome: TrainOutcome, out_path: str | Path
) -> Result[list[Path], str]:
    targets = model_paths(out_path, outcome)
    return Fold.collect(
        [save_model(outcome.models[layer], path) for layer, path in targets.items()],
        Success(()),
    ).map(list)


def run_train_pipeline(
    dataset_path: str | Path,
    mode: ClassifierMode,
    cfg: TrainConfig,
    out_path: str | Path,
) -> Result[TrainSummary, str | TrainingDiverged]:
    """Dataset file -> trained model file(s) and training-set accuracy."""
    return read_dataset(dataset_path).bind(_require_samples).bind(
        lambda samples: train(samples, cfg, mode).bind(
            lambda outcome: save_models(outcome, out_path).map(
                lambda paths: TrainSummary(
                    outcome, paths, accuracy(outcome.models, samples, mode)
                )
            )
        )
    )


# encode


def load_models(paths: Sequence[str | Path]) -> Result[list[TinyCnn], str]:
    return Fold.collect([load_model(path) for path in paths], Success(())).map(list)


def build_policy(
    variant: Variant, max_layer: int | None, models: list[TinyCnn]
) -> PolicyConfig:
    """Bi models are keyed by the layer stored in their file.

    Raises MissingModelError when a classifier variant lacks its model.
    """
    bi_models = {
        model.layer: BiClassifier(model)
        for model in models
        if model.mode is ClassifierMode.BI
    }
    mu_models = [MuClassifier(m) for m in models if m.mode is ClassifierMode.MU]
    return PolicyConfig(
        variant=variant,
        max_adapt_layer=max_layer,
        bi_models=bi_models,
        mu_model=mu_models[0] if mu_models else None,
    )


def run_encode_pipeline(request: EncodeRequest) -> Result[EncodeSummary, str]:
    """Sequence -> container, optional decision log and complexity CSV.

    Raises MissingModelError before any frame is read when a classifier
    variant lacks its model.
    """
    return load_models(request.models).bind(
        lambda models: _read_and_encode(
            request, build_policy(request.variant, request.max_layer, models)
        )
    )


# eval


def run_eval_pipeline(
    source: str | Path,
    recon: str | Path,
    variant: str | None = None,
    sequence: str | None = None,
    rdpoints: str | Path | None = None,
    crop: bool = False,
) -> Result[EvalSummary, str]:
    """Score a container's decoded frames against the source sequence."""
    names = (sequence or Path(source).stem, variant or Path(recon).stem)
    return (
        read_sequence(source, crop=crop)
        .bind(lambda frames: _read_bytes(recon).map(lambda data: (frames, data)))
        .bind(lambda loaded: _evaluate(*loaded, *names))
        .bind(lambda summary: _record_rdpoint(summary, rdpoints))
    )


# bdrate


def run_bdrate_pipeline(
    anchor_path: str | Path,
    test_path: str | Path,
    out_path: str | Path | None = None,
) -> Result[pl.DataFrame, str]:
    """Two rd-point files -> per-sequence BD-rate table."""
    return (
        read_rdpoints(anchor_path)
        .bind(lambda anchor: read_rdpoints(test_path).map(lambda t: (anchor, t)))
        .bind(lambda curves: bdrate_frame(*curves))
        .bind(
            lambda frame: Success(frame)
            if out_path is None
            else write_frame(frame, out_path).map(lambda _: frame)
        )
    )


# report


def run_report_pipeline(
    logs: Sequence[str | Path],
    out_dir: str | Path,
    truth: str | Path | None = None,
    complexity: Sequence[str | Path] = (),
) -> Result[ReportSummary, str]:
    """Decision logs -> confusion reports, effort summary and complexity table."""
    if not logs:
        return Failure("At least one decision log is required")
    return (
        Fold.collect([read_decision_log(p) for p in logs], Success(()))
        .map(lambda frames: pl.concat(list(frames), how="vertical"))
        .bind(
            lambda combined: _ground_truth(combined, truth).map(
                lambda gt: (combined, gt)
            )
        )
        .bind(
            lambda data: _read_complexities(complexity).map(lambda cx: (*data, cx))
        )
        .bind(lambda data: _report(*data, Path(out_dir)))
    )


# Private helper functions


def _label_counts(samples: list[LabeledSample]) -> dict[int, int]:
    counts = dict.fromkeys(FACTORS, 0)
    for sample in samples:
        counts[sample.optimal_factor] += 1
    return counts


def _require_samples(
    samples: list[LabeledSample],
) -> Result[list[LabeledSample], str]:
    if not samples:
        return Failure("Dataset holds no samples")
    return Success(samples)


def _read_and_encode(
    request: EncodeRequest, policy: PolicyConfig
) -> Result[EncodeSummary, str]:
    return read_sequence(request.source, crop=request.crop).bind(
        lambda frames: _encode(request, policy, frames)
    )


def _encode(
    request: EncodeRequest, policy: PolicyConfig, frames: list[Frame]
) -> Result[EncodeSummary, str]:
    gop = attrs.evolve(request.gop, num_frames=len(frames))
    encoding = encode_sequence(frames, gop, request.quant, policy, request.motion)
    outputs: list[Result[Path, str]] = [_write_bytes(request.out, encoding.container)]
    if request.log is not None:
        outputs.append(write_decision_log(encoding.log, request.log))
    if request.complexity is not None:
        frame = complexity_frame(request.variant.value, encoding.ledger)
        outputs.append(write_frame(frame, request.complexity))
    return Fold.collect(outputs, Success(())).map(
        lambda paths: EncodeSummary(request, encoding, list(paths))
    )


def _read_bytes(file_path: str | Path) -> Result[bytes, str]:
    path = Path(file_path)
    if not path.exists():
        return Failure(f"Could not find '{file_path}'")
    try:
        return Success(path.read_bytes())
    except OSError as e:
        return Failure(f"Could not read '{file_path}': {e}")


def _write_bytes(file_path: Path, data: bytes) -> Result[Path, str]:
    try:
        file_path.write_bytes(data)
        return Success(file_path)
    except OSError as e:
        return Failure(f"Could not write '{file_path}': {e}")


def _evaluate(
    frames: list[Frame], data: bytes, sequence: str, variant: str
) -> Result[EvalSummary, str]:
    return decode_container(data).bind(
        lambda parsed: decode_frames(*parsed).bind(
            lambda recons: _score(frames, recons, *parsed, sequence, variant)
        )
    )


def _score(
    frames: list[Frame],
    recons: list[Frame],
    header: ContainerHeader,
    streams: list[Bitstream],
    sequence: str,
    variant: str,
) -> Result[EvalSummary, str]:
    if len(frames) != len(recons):
        return Failure(f"Source has {len(frames)} frames, container has {len(recons)}")
    if frames[0].shape != recons[0].shape:
        return Failure("Source and container frame sizes differ")

    schedule = build_schedule(header.gop)
    bits = {slot.poc: s.bit_count for slot, s in zip(schedule, streams, strict=True)}
    slots = {slot.poc: slot for slot in schedule}
    factors = {
        slot.poc: None if slot.is_intra else read_factor(s).value_or(None)
        for slot, s in zip(schedule, streams, strict=True)
    }
    reports = [
        FrameReport(
            poc=poc,
            kind=slots[poc].kind.value,
            layer=slots[poc].temporal_layer,
            bits=bits[poc],
            mse=mse(frames[poc], recons[poc]),
            psnr=psnr(frames[poc], recons[poc]),
            factor=factors[poc],
        )
        for poc in range(len(frames))
    ]
    bpp, quality = rd_point(frames, recons, sum(bits.values()))
    motion = temporal_complexity(frames) if len(frames) > 1 else 0.0
    return Success(
        EvalSummary(
            sequence, variant, header.quant.q_step, reports, bpp, quality, motion
        )
    )


def _record_rdpoint(
    summary: EvalSummary, rdpoints: str | Path | None
) -> Result[EvalSummary, str]:
    if rdpoints is None:
        return Success(summary)
    frame = rdpoint_frame(
        summary.sequence, summary.variant, [(summary.q_step, summary.bpp, summary.psnr)]
    )
    return append_rdpoints(frame, rdpoints).map(lambda _: summary)


def _ground_truth(
    combined: pl.DataFrame, truth: str | Path | None
) -> Result[pl.DataFrame, str]:
    if truth is not None:
        return read_decision_log(truth)
    exhaustive = combined.filter(pl.col("variant") == Variant.EXHAUSTIVE.value)
    if exhaustive.is_empty():
        return Failure("No ground truth: pass --truth or include an exhaustive log")
    return Success(exhaustive)


def _read_complexities(
    paths: Sequence[str | Path],
) -> Result[pl.DataFrame | None, str]:
    if not paths:
        return Success(None)
    return Fold.collect([read_complexity(p) for p in paths], Success(())).map(
        lambda frames: pl.concat(list(frames), how="vertical")
    )


def _report(
    combined: pl.DataFrame,
    truth: pl.DataFrame,
    complexity: pl.DataFrame | None,
    out_dir: Path,
) -> Result[ReportSummary, str]:
    variants, outputs = [], []
    layer_frames = []
    for (variant,), log in combined.group_by(["variant"], maintain_order=True):
        layer_frames.append(
            per_layer_summary(log).select(pl.lit(variant).alias("variant"), pl.all())
        )
        if variant == Variant.EXHAUSTIVE.value:
            continue
        column = "S_pred" if variant in PREDICTING_VARIANTS else "S_final"
        pairs = decision_pairs(log, truth, column)
        if not pairs:
            continue
        matrix = confusion(pairs)
        sets = derive_candidate_sets(matrix.conditionals)
        match write_confusion_reports(matrix, sets, out_dir, prefix=f"{variant}_"):
            case Success(paths):
                outputs.extend(paths)
            case Failure(message):
                return Failure(message)
        variants.append(VariantReport(str(variant), column, matrix, sets))

    effort = effort_frame(combined)
    layers = pl.concat(layer_frames, how="vertical")
    tables = {out_dir / "search_effort.csv": effort, out_dir / "layers.csv": layers}
    if complexity is not None:
        tables[out_dir / "complexity.csv"] = complexity
    for path, frame in tables.items():
        match write_frame(frame, path):
            case Success(written):
                outputs.append(written)
            case Failure(message):
                return Failure(message)
    return Success(ReportSummary(variants, effort, layers, complexity, outputs))
