"""
Resolution decision policies and the sequence encoder that applies them.

A policy decides the downsampling factor of every B-frame whose temporal
layer is at most ``max_adapt_layer``; deeper layers are coded at S=1. Frames
are coded in schedule order and every decision uses reconstructed
references, as the decoder would see them.

Per-frame search effort is recorded in the decision log and priced by the
complexity ledger:

=============  ===========================  ===================
variant        candidate evaluations        full encodes
=============  ===========================  ===================
fixedN         0                            1
exhaustive     0                            4
memc           4                            1 (motion reused)
memc_star      0 when k = 1, else 4         1
bi             0 when p >= 0.5, else 3      1
mu             0                            1
co             2                            1 (motion reused)
=============  ===========================  ===================
"""

import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Protocol

import attrs
import polars as pl
from returns.result import Failure, Result, Success

from .classifier import (
    DEFAULT_WIDTHS,
    INPUT_SIZE,
    TinyCnn,
    predict_bi,
    predict_mu,
    preprocess,
)
from .codec import (
    ContainerHeader,
    EncodeResult,
    QuantConfig,
    encode_bframe,
    encode_container,
    encode_intra,
)
from .complexity import (
    ComplexityLedger,
    Event,
    classifier_events,
    encode_events,
    evaluation_events,
    intra_events,
    ledger_for,
    sum_ledgers,
)
from .frame_io import Frame, check_codable_dimensions
from .gop import FrameSlot, GopConfig, build_schedule
from .motion import MotionConfig
from .search import MemcResult, memc_search, memc_star, omra_exhaustive
from .types import FACTORS, ClassifierMode, Variant, factor_index

logger = logging.getLogger(__name__)

BI_THRESHOLD = 0.5
BI_SEARCH_SET = (2, 4, 8)
CANDIDATE_SETS: dict[int, tuple[int, ...]] = {
    1: (1, 2),
    2: (2, 4),
    4: (2, 4),
    8: (4, 8),
}
DECISION_COLUMNS = [
    "poc",
    "layer",
    "k",
    "variant",
    "S_pred",
    "S_final",
    "evals",
    "bits",
    "mse",
    "classifier_calls",
    "encodes",
    *(f"cost_{s}" for s in FACTORS),
]


class MissingModelError(LookupError):
    """A classifier variant was asked to decide without its model."""


class ResolutionPredictor(Protocol):
    """Bi-Class style predictor: probability that S=1 is optimal."""

    def probability_full(
        self, x_t: Frame, ref_past: Frame, ref_future: Frame, slot: FrameSlot
    ) -> float: ...


class FactorPredictor(Protocol):
    """Mu-Class style predictor: a factor from FACTORS."""

    def predict_factor(
        self, x_t: Frame, ref_past: Frame, ref_future: Frame, slot: FrameSlot
    ) -> int: ...


@attrs.frozen
class BiClassifier:
    model: TinyCnn
    input_size: int = INPUT_SIZE

    def probability_full(
        self, x_t: Frame, ref_past: Frame, ref_future: Frame, slot: FrameSlot
    ) -> float:
        inputs = preprocess(x_t, ref_past, ref_future, self.input_size)
        return predict_bi(self.model, inputs)


@attrs.frozen
class MuClassifier:
    model: TinyCnn
    input_size: int = INPUT_SIZE

    def predict_factor(
        self, x_t: Frame, ref_past: Frame, ref_future: Frame, slot: FrameSlot
    ) -> int:
        inputs = preprocess(x_t, ref_past, ref_future, self.input_size)
        return predict_mu(self.model, inputs)


@attrs.frozen
class OracleLabels:
    """Stored oracle factors looked up by display index."""

    labels: dict[int, int]

    def predict_factor(
        self, x_t: Frame, ref_past: Frame, ref_future: Frame, slot: FrameSlot
    ) -> int:
        if slot.poc not in self.labels:
            raise MissingModelError(f"No stored label for poc {slot.poc}")
        return self.labels[slot.poc]

    def probability_full(
        self, x_t: Frame, ref_past: Frame, ref_future: Frame, slot: FrameSlot
    ) -> float:
        return 1.0 if self.predict_factor(x_t, ref_past, ref_future, slot) == 1 else 0.0


@attrs.frozen
class PolicyConfig:
    """Variant, adaptation depth (None adapts every layer) and its predictors."""

    variant: Variant
    max_adapt_layer: int | None = None
    bi_models: Mapping[int, ResolutionPredictor] = attrs.field(factory=dict)
    mu_model: FactorPredictor | None = None

    def __attrs_post_init__(self) -> None:
        if self.max_adapt_layer is not None and self.max_adapt_layer < 0:
            raise ValueError("max_adapt_layer must be non-negative")
        if self.variant is Variant.BI and not self.bi_models:
            raise MissingModelError("Variant 'bi' needs per-layer Bi-Class models")
        if self.variant in (Variant.MU, Variant.CO) and self.mu_model is None:
            raise MissingModelError(f"Variant '{self.variant.value}' needs a Mu model")

    def adapts(self, slot: FrameSlot) -> bool:
        if self.max_adapt_layer is None:
            return True
        return slot.temporal_layer <= self.max_adapt_layer


@attrs.frozen
class Decision:
    """Chosen factor and the effort spent choosing it."""

    factor: int
    predicted: int | None = None
    evaluations: int = 0
    classifier_calls: int = 0
    search: MemcResult | None = None


@attrs.frozen
class DecisionRecord:
    poc: int
    layer: int
    k: int
    variant: str
    S_pred: int | None
    S_final: int
    evals: int
    bits: int
    mse: float
    classifier_calls: int = 0
    encodes: int = 0
    costs: tuple[float, ...] | None = None


@attrs.frozen
class SequenceEncoding:
    """Container bytes, display-order reconstructions, decisions and MAC ledgers."""

    container: bytes
    recons: list[Frame]
    log: list[DecisionRecord]
    frame_ledgers: list[ComplexityLedger]
    frame_bits: list[int]

    @property
    def ledger(self) -> ComplexityLedger:
        return sum_ledgers(self.frame_ledgers)

    @property
    def total_bits(self) -> int:
        """Coded bits of every frame, intra frames included."""
        return sum(self.frame_bits)


# Decision procedures


def candidate_set(predicted: int) -> tuple[int, ...]:
    """Factors searched around a Mu-Class prediction."""
    factor_index(predicted)
    return CANDIDATE_SETS[predicted]


def decide_bi(
    models: Mapping[int, ResolutionPredictor],
    x_t: Frame,
    ref_past: Frame,
    ref_future: Frame,
    slot: FrameSlot,
    motion: MotionConfig | None = None,
) -> Decision:
    """S=1 when the layer's model says full resolution, else search {2, 4, 8}."""
    if slot.temporal_layer not in models:
        raise MissingModelError(f"No Bi-Class model for layer {slot.temporal_layer}")
    p = models[slot.temporal_layer].probability_full(x_t, ref_past, ref_future, slot)
    if p >= BI_THRESHOLD:
        return Decision(1, 1, 0, 1)
    search = memc_search(x_t, ref_past, ref_future, BI_SEARCH_SET, motion)
    return Decision(search.factor, None, search.evaluations, 1, search)


def decide_mu(
    model: FactorPredictor | None,
    x_t: Frame,
    ref_past: Frame,
    ref_future: Frame,
    slot: FrameSlot,
) -> Decision:
    if model is None:
        raise MissingModelError("No Mu-Class model")
    predicted = model.predict_factor(x_t, ref_past, ref_future, slot)
    return Decision(predicted, predicted, 0, 1)


def decide_co(
    model: FactorPredictor | None,
    x_t: Frame,
    ref_past: Frame,
    ref_future: Frame,
    slot: FrameSlot,
    motion: MotionConfig | None = None,
) -> Decision:
    """Mu-Class prediction refined by a warped-quality search of its candidate set."""
    predicted = decide_mu(model, x_t, ref_past, ref_future, slot).factor
    search = memc_search(x_t, ref_past, ref_future, candidate_set(predicted), motion)
    return Decision(search.factor, predicted, search.evaluations, 1, search)


# Sequence encoding


def encode_sequence(
    frames: list[Frame],
    gop: GopConfig,
    cfg: QuantConfig,
    policy: PolicyConfig,
    motion: MotionConfig | None = None,
    classifier_widths: tuple[int, ...] | None = None,
) -> SequenceEncoding:
    """Code a sequence in schedule order under one decision policy."""
    motion = motion or MotionConfig()
    if len(frames) != gop.num_frames:
        raise ValueError(f"Expected {gop.num_frames} frames, got {len(frames)}")
    width, height = frames[0].width, frames[0].height
    check_codable_dimensions(width, height)
    if policy.max_adapt_layer is not None and policy.max_adapt_layer > gop.num_b_layers:
        raise ValueError(f"max_adapt_layer must not exceed {gop.num_b_layers}")

    coder = _FrameCoder(frames, cfg, policy, motion, classifier_widths)
    streams, log, ledgers = [], [], []
    for slot in build_schedule(gop):
        result, record, ledger = coder.code(slot)
        streams.append(result.bitstream)
        ledgers.append(ledger)
        if record is not None:
            log.append(record)
            logger.debug(
                "poc %d layer %d %s S=%d evals=%d",
                record.poc,
                record.layer,
                record.variant,
                record.S_final,
                record.evals,
            )

    header = ContainerHeader(gop, cfg, width, height, motion)
    recons = [coder.recons[poc] for poc in range(len(frames))]
    return SequenceEncoding(
        encode_container(header, streams),
        recons,
        log,
        ledgers,
        [s.bit_count for s in streams],
    )


# Decision log files (I/O operations)


def decision_frame(log: list[DecisionRecord]) -> pl.DataFrame:
    costs = [r.costs or (None,) * len(FACTORS) for r in log]
    return pl.DataFrame(
        {
            "poc": [r.poc for r in log],
            "layer": [r.layer for r in log],
            "k": [r.k for r in log],
            "variant": [r.variant for r in log],
            "S_pred": [r.S_pred for r in log],
            "S_final": [r.S_final for r in log],
            "evals": [r.evals for r in log],
            "bits": [r.bits for r in log],
            "mse": [r.mse for r in log],
            "classifier_calls": [r.classifier_calls for r in log],
            "encodes": [r.encodes for r in log],
            **{f"cost_{s}": [c[i] for c in costs] for i, s in enumerate(FACTORS)},
        },
        schema=_DECISION_SCHEMA,
    )


def write_decision_log(
    log: list[DecisionRecord], file_path: str | Path
) -> Result[Path, str]:
    try:
        decision_frame(log).write_csv(file_path)
        return Success(Path(file_path))
    except OSError as e:
        return Failure(f"Could not write decision log: {e}")


def read_decision_log(file_path: str | Path) -> Result[pl.DataFrame, str]:
    """Read a decision log CSV, checking its columns."""
    path = Path(file_path)
    if not path.exists():
        return Failure(f"Could not find '{file_path}'")
    try:
        frame = pl.read_csv(path, schema_overrides=_DECISION_SCHEMA)
    except (OSError, pl.exceptions.PolarsError) as e:
        return Failure(f"Could not read decision log '{file_path}': {e}")
    missing = [c for c in DECISION_COLUMNS if c not in frame.columns]
    if missing:
        return Failure(f"Decision log '{file_path}' lacks columns {missing}")
    return Success(frame)


# Private helper functions

_DECISION_SCHEMA = {
    "poc": pl.Int64,
    "layer": pl.Int64,
    "k": pl.Int64,
    "variant": pl.Utf8,
    "S_pred": pl.Int64,
    "S_final": pl.Int64,
    "evals": pl.Int64,
    "bits": pl.Int64,
    "mse": pl.Float64,
    "classifier_calls": pl.Int64,
    "encodes": pl.Int64,
    **{f"cost_{s}": pl.Float64 for s in FACTORS},
}


class _FrameCoder:
    """Codes one slot at a time, keeping reconstructions for later references."""

    def __init__(
        self,
        frames: list[Frame],
        cfg: QuantConfig,
        policy: PolicyConfig,
        motion: MotionConfig,
        classifier_widths: tuple[int, ...] | None,
    ) -> None:
        self.frames = frames
        self.cfg = cfg
        self.policy = policy
        self.motion = motion
        self.widths = classifier_widths or _predictor_widths(policy)
        self.width, self.height = frames[0].width, frames[0].height
        self.recons: dict[int, Frame] = {}

    def code(
        self, slot: FrameSlot
    ) -> tuple[EncodeResult, DecisionRecord | None, ComplexityLedger]:
        x_t = self.frames[slot.poc]
        if slot.is_intra:
            result = encode_intra(x_t, self.cfg)
            self.recons[slot.poc] = result.recon
            return result, None, self._ledger(intra_events(self.width, self.height))

        past, future = self.recons[slot.ref_past], self.recons[slot.ref_future]
        variant = self.policy.variant if self.policy.adapts(slot) else Variant.FIXED1
        if variant is Variant.EXHAUSTIVE:
            oracle = omra_exhaustive(x_t, past, future, self.cfg, self.motion)
            decision = Decision(oracle.factor)
            result, costs, encodes = oracle.best, tuple(oracle.record.costs), 4
            events = [
                event
                for s in FACTORS
                for event in encode_events(self.width, self.height, s, self.motion)
            ]
        else:
            decision = self._decide(variant, x_t, past, future, slot)
            flows = decision.search.winning_flows if decision.search else None
            result = encode_bframe(
                x_t, past, future, decision.factor, self.cfg, self.motion, flows
            )
            costs, encodes = None, 1
            events = self._decision_events(decision) + encode_events(
                self.width, self.height, decision.factor, self.motion, flows is not None
            )

        self.recons[slot.poc] = result.recon
        record = DecisionRecord(
            poc=slot.poc,
            layer=slot.temporal_layer,
            k=slot.k,
            variant=self.policy.variant.value,
            S_pred=decision.predicted,
            S_final=decision.factor,
            evals=decision.evaluations,
            bits=result.rate,
            mse=result.distortion,
            classifier_calls=decision.classifier_calls,
            encodes=encodes,
            costs=costs,
        )
        return result, record, self._ledger(events)

    def _decide(
        self,
        variant: Variant,
        x_t: Frame,
        past: Frame,
        future: Frame,
        slot: FrameSlot,
    ) -> Decision:
        match variant:
            case Variant.MEMC:
                search = memc_search(x_t, past, future, FACTORS, self.motion)
                return Decision(search.factor, None, search.evaluations, 0, search)
            case Variant.MEMC_STAR:
                search = memc_star(x_t, past, future, slot, self.motion)
                return Decision(search.factor, None, search.evaluations, 0, search)
            case Variant.BI:
                return decide_bi(
                    self.policy.bi_models, x_t, past, future, slot, self.motion
                )
            case Variant.MU:
                return decide_mu(self.policy.mu_model, x_t, past, future, slot)
            case Variant.CO:
                return decide_co(
                    self.policy.mu_model, x_t, past, future, slot, self.motion
                )
            case _:
                return Decision(variant.fixed_factor)

    def _decision_events(self, decision: Decision) -> list[Event]:
        events: list[Event] = []
        if decision.classifier_calls:
            mode = ClassifierMode.MU
            if self.policy.variant is Variant.BI:
                mode = ClassifierMode.BI
            calls = decision.classifier_calls
            events += classifier_events(self.widths, mode.num_outputs) * calls
        if decision.search is not None:
            for s in decision.search.errors:
                events += evaluation_events(self.width, self.height, s, self.motion)
        return events

    def _ledger(self, events: list[Event]) -> ComplexityLedger:
        return ledger_for(events, self.width, self.height)


def _predictor_widths(policy: PolicyConfig) -> tuple[int, ...]:
    """Channel widths of the TinyCnn behind a policy, default widths otherwise."""
    predictors = [*policy.bi_models.values(), policy.mu_model]
    for predictor in predictors:
        model = getattr(predictor, "model", None)
        if isinstance(model, TinyCnn):
            return model.widths
    return DEFAULT_WIDTHS
