"""
Rich console output for every subcommand.
"""

import polars as pl
from rich.console import Console
from rich.table import Table

from .classifier import SHARED_LAYER
from .pipeline import (
    EncodeSummary,
    EvalSummary,
    LabelSummary,
    ReportSummary,
    TrainSummary,
    VariantReport,
)
from .types import FACTORS

MAX_FRAME_ROWS = 40


# Pure helper functions


def _format_number(value: float | int | None) -> str:
    """Large values with separators, small ones to four significant digits."""
    if value is None:
        return "-"
    if isinstance(value, int) or abs(value) >= 1000:
        return f"{value:,.0f}"
    return f"{value:.4g}" if abs(value) < 1 else f"{value:.2f}"


def _format_set(factors: tuple[int, ...]) -> str:
    return "{" + ", ".join(str(s) for s in factors) + "}"


# Console output (I/O operations)


def print_progress_message(console: Console, message: str) -> None:
    """One line of progress, printed as is."""
    console.print(message)


def print_error_message(console: Console, message: str) -> None:
    """Red error line; the CLI exits after printing it."""
    console.print(f"❌ Error: {message}", style="red")


def print_success_message(console: Console, message: str) -> None:
    console.print(f"✅ {message}", style="green")


def display_label_summary(console: Console, summary: LabelSummary) -> None:
    """Display oracle label counts (I/O operation)."""
    table = Table(show_header=False, box=None, padding=(0, 2))
    table.add_column("Label", style="bold")
    table.add_column("Count", justify="right")
    table.add_row("Samples:", str(summary.samples))
    for factor, count in summary.label_counts.items():
        table.add_row(f"S = {factor}:", str(count))

    console.print()
    console.print("🏷️  [bold]Oracle Labels[/bold]", style="blue")
    console.print("=" * 40)
    console.print(table)


def display_training_summary(console: Console, summary: TrainSummary) -> None:
    """Display final losses per trained network (I/O operation)."""
    table = Table(box=None, show_edge=False)
    table.add_column("Network", style="bold")
    table.add_column("Steps", justify="right")
    table.add_column("First epoch loss", justify="right")
    table.add_column("Last epoch loss", justify="right")

    outcome = summary.outcome
    for layer, losses in outcome.epoch_losses.items():
        name = "shared" if layer == SHARED_LAYER else f"layer {layer}"
        table.add_row(
            name,
            str(len(outcome.step_losses[layer])),
            _format_number(losses[0] if losses else None),
            _format_number(losses[-1] if losses else None),
        )

    console.print()
    console.print(
        f"🧠 [bold]{outcome.mode.value.capitalize()}-Class Training[/bold]",
        style="blue",
    )
    console.print("=" * 40)
    console.print(table)
    console.print(f"\nTraining-set accuracy: {summary.accuracy:.1%}")


def display_encode_summary(console: Console, summary: EncodeSummary) -> None:
    """Display decisions and complexity of an encoded sequence (I/O operation)."""
    encoding = summary.encoding
    counts = dict.fromkeys(FACTORS, 0)
    for record in encoding.log:
        counts[record.S_final] += 1

    table = Table(show_header=False, box=None, padding=(0, 2))
    table.add_column("Item", style="bold")
    table.add_column("Value", justify="right")
    table.add_row("Variant:", summary.request.variant.value)
    table.add_row("Frames:", str(len(encoding.recons)))
    table.add_row("Total bits:", _format_number(encoding.total_bits))
    for factor, count in counts.items():
        table.add_row(f"B-frames at S = {factor}:", str(count))
    table.add_row(
        "Candidate evaluations:", str(sum(r.evals for r in encoding.log))
    )
    table.add_row("kMAC/pixel:", _format_number(encoding.ledger.kmac_per_pixel))

    console.print()
    console.print("🎞️  [bold]Encoding Summary[/bold]", style="blue")
    console.print("=" * 40)
    console.print(table)


def display_eval_results(console: Console, summary: EvalSummary) -> None:
    """Display per-frame quality and the sequence summary (I/O operation)."""
    table = Table(box=None, show_edge=False)
    table.add_column("POC", justify="right", style="dim")
    table.add_column("Type")
    table.add_column("Layer", justify="right")
    table.add_column("S", justify="right")
    table.add_column("Bits", justify="right")
    table.add_column("MSE", justify="right")
    table.add_column("PSNR", justify="right", style="green")

    for frame in summary.frames[:MAX_FRAME_ROWS]:
        table.add_row(
            str(frame.poc),
            frame.kind,
            str(frame.layer),
            "-" if frame.factor is None else str(frame.factor),
            str(frame.bits),
            _format_number(frame.mse),
            f"{frame.psnr:.2f}",
        )

    console.print()
    console.print(
        f"📊 [bold]{summary.sequence} / {summary.variant}[/bold]", style="blue"
    )
    console.print("=" * 40)
    console.print(table)
    if len(summary.frames) > MAX_FRAME_ROWS:
        remaining = len(summary.frames) - MAX_FRAME_ROWS
        console.print(f"\n[dim]... and {remaining} more frames[/dim]")

    console.print(
        f"\nq_step {summary.q_step:g}: {summary.bpp:.4f} bpp, "
        f"{summary.psnr:.2f} dB mean PSNR, "
        f"temporal complexity {summary.temporal_complexity:.4f}"
    )


def display_bdrate(console: Console, frame: pl.DataFrame) -> None:
    """Display BD-rate per sequence and the mean (I/O operation)."""
    table = Table(box=None, show_edge=False)
    table.add_column("Sequence", style="dim")
    table.add_column("Anchor")
    table.add_column("Test")
    table.add_column("BD-rate %", justify="right", style="yellow")

    for row in frame.iter_rows(named=True):
        table.add_row(
            row["sequence"], row["anchor"], row["test"], f"{row['bd_rate']:.4f}"
        )

    console.print(table)
    console.print(f"\nMean BD-rate: {frame['bd_rate'].mean():.4f}%")


def display_report(console: Console, summary: ReportSummary) -> None:
    """Display confusion matrices, effort and complexity (I/O operation)."""
    for report in summary.variants:
        _display_confusion_direct(console, report)

    console.print("\n⏱️  [bold]Search Effort per Frame[/bold]", style="blue")
    console.print("-" * 40)
    _display_frame_direct(console, summary.effort)

    if summary.complexity is not None:
        console.print("\n🧮 [bold]Complexity (kMAC/pixel)[/bold]", style="blue")
        console.print("-" * 40)
        _display_frame_direct(console, summary.complexity)


def _display_confusion_direct(console: Console, report: VariantReport) -> None:
    """Display one variant's confusion counts and derived sets (I/O operation)."""
    console.print(
        f"\n🔎 [bold]{report.variant}[/bold] ({report.column} vs. ground truth, "
        f"accuracy {report.matrix.accuracy:.1%})",
        style="blue",
    )
    console.print("-" * 40)

    table = Table(box=None, show_edge=False)
    table.add_column("Predicted", style="dim")
    for factor in FACTORS:
        table.add_column(f"GT {factor}", justify="right")
    table.add_column("Candidate set", style="yellow")

    conditionals = report.matrix.conditionals
    for i, factor in enumerate(FACTORS):
        cells = [
            f"{int(report.matrix.counts[i, j])} ({conditionals[i, j]:.0%})"
            for j in range(len(FACTORS))
        ]
        table.add_row(
            str(factor), *cells, _format_set(report.candidate_sets[factor])
        )

    console.print(table)


def _display_frame_direct(console: Console, df: pl.DataFrame) -> None:
    """Display a small table of rows directly to console (I/O operation)."""
    table = Table(box=None, show_edge=False)
    for col in df.columns:
        table.add_column(col, style="dim" if df[col].dtype == pl.Utf8 else "bold")

    for row in df.iter_rows():
        table.add_row(
            *(
                _format_number(v) if isinstance(v, int | float) else str(v)
                for v in row
            )
        )

    console.print(table)
