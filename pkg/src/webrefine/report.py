"""Stage accounting reports: human table, machine TSV, and rendered figures.

The TSV round-trips through :func:`parse_tsv_report`; figures are written
next to the delimited output by the CLI report path.
"""
from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .records import StageStats, kept_rates

_COLUMNS = (
    "stage",
    "unit",
    "docs_in",
    "docs_out",
    "bytes_in",
    "bytes_out",
    "tokens_in",
    "tokens_out",
    "step_kept_rate",
    "cumulative_kept_rate",
)

# Figure-2-style accounting: document counts through the preparation and
# filtering phases, token counts once the dedup tokenizer has run.
TOKEN_UNIT_STAGES = {"fuzzy_dedup", "exact_dedup"}


def _sig4(x: Fraction) -> str:
    return f"{float(x):.4g}"


def _stage_unit(stats: StageStats) -> str:
    if stats.stage in TOKEN_UNIT_STAGES and stats.tokens_in is not None:
        return "tokens"
    return "docs"


def render_table(stats: list[StageStats], tokenizer_label: str = "whitespace") -> str:
    rates = kept_rates(stats)
    header = f"{'stage':<18} {'unit':<7} {'in':>10} {'out':>10} {'step kept':>10} {'cum kept':>10}"
    lines = [header, "-" * len(header)]
    for s, rate in zip(stats, rates):
        lines.append(
            f"{s.stage:<18} {_stage_unit(s):<7} {s.docs_in:>10} {s.docs_out:>10} "
            f"{_sig4(rate.step_kept_rate):>10} {_sig4(rate.cumulative_kept_rate):>10}"
        )
    lines.append(f"(token counts, where present, use the {tokenizer_label} tokenizer)")
    return "\n".join(lines) + "\n"


def to_tsv(stats: list[StageStats]) -> str:
    rates = kept_rates(stats)
    lines = ["\t".join(_COLUMNS)]
    for s, rate in zip(stats, rates):
        lines.append(
            "\t".join(
                str(v)
                for v in (
                    s.stage,
                    _stage_unit(s),
                    s.docs_in,
                    s.docs_out,
                    s.bytes_in,
                    s.bytes_out,
                    "" if s.tokens_in is None else s.tokens_in,
                    "" if s.tokens_out is None else s.tokens_out,
                    f"{rate.step_kept_rate.numerator}/{rate.step_kept_rate.denominator}",
                    f"{rate.cumulative_kept_rate.numerator}/{rate.cumulative_kept_rate.denominator}",
                )
            )
        )
    return "\n".join(lines) + "\n"


def parse_tsv_report(text: str) -> tuple[list[StageStats], list[Fraction], list[Fraction]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split("\t")
    if tuple(header) != _COLUMNS:
        raise ValueError("unrecognized report header")
    stats, steps, cums = [], [], []
    for line in lines[1:]:
        fields = dict(zip(_COLUMNS, line.split("\t")))
        stats.append(
            StageStats(
                stage=fields["stage"],
                docs_in=int(fields["docs_in"]),
                docs_out=int(fields["docs_out"]),
                bytes_in=int(fields["bytes_in"]),
                bytes_out=int(fields["bytes_out"]),
                tokens_in=int(fields["tokens_in"]) if fields["tokens_in"] else None,
                tokens_out=int(fields["tokens_out"]) if fields["tokens_out"] else None,
            )
        )
        steps.append(Fraction(fields["step_kept_rate"]))
        cums.append(Fraction(fields["cumulative_kept_rate"]))
    return stats, steps, cums


def emit_report(stats: list[StageStats], fmt: str = "human", tokenizer_label: str = "whitespace") -> str:
    if fmt == "human":
        return render_table(stats, tokenizer_label)
    if fmt == "tsv":
        return to_tsv(stats)
    raise ValueError(f"unknown report format {fmt!r}")


def save_stage_figure(stats: list[StageStats], path: Path, title: str = "Stage accounting"):
    """Bar chart of per-stage removal with the cumulative kept rate overlaid."""
    rates = kept_rates(stats)
    stages = [s.stage for s in stats]
    step = [float(r.step_kept_rate) for r in rates]
    cum = [float(r.cumulative_kept_rate) for r in rates]
    removed = [1.0 - s for s in step]
    fig, ax = plt.subplots(figsize=(max(6, 1.1 * len(stages)), 4))
    x = range(len(stages))
    ax.bar(x, removed, color="0.7", label="removed vs previous stage")
    ax.plot(x, cum, marker="o", color="tab:blue", label="kept overall")
    ax.set_xticks(list(x))
    ax.set_xticklabels(stages, rotation=45, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("fraction")
    ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_lsh_curve_figure(
    b: int, r: int, path: Path, points: Optional[list[float]] = None
):
    """Detection-probability S-curve for the configured bucket scheme."""
    from .fuzzy import match_probability

    xs = [i / 200 for i in range(201)]
    ys = [match_probability(x, b, r) for x in xs]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(xs, ys, color="tab:blue")
    if points:
        ax.scatter(points, [match_probability(p, b, r) for p in points], color="tab:red", zorder=3)
    ax.set_xlabel("signature agreement rate")
    ax.set_ylabel("detection probability")
    ax.set_title(f"LSH detection curve (b={b}, r={r})")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
