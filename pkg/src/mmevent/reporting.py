"""Report rendering: JSON, fixed-width tables, delimited files, figures."""

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import ContractError
from .scoring import CATEGORIES, LEVELS, ScoreReport

_CATEGORY_TITLES = {"textual": "Textual", "visual": "Visual", "multimedia": "Multimedia"}
_LEVEL_TITLES = {"mention": "Event Mention", "argument": "Argument Role"}


def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def emit_report(report: ScoreReport, format: str = "json") -> str:
    """Serialize a score report as canonical JSON or a text table."""
    if format == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if format == "table":
        rows = []
        for cat in CATEGORIES:
            for level in LEVELS:
                s = report.scores[f"{cat}-{level}"]
                rows.append(
                    (
                        _CATEGORY_TITLES[cat],
                        _LEVEL_TITLES[level],
                        _pct(s.precision),
                        _pct(s.recall),
                        _pct(s.f1),
                    )
                )
        header = ("Event", "Task", "P", "R", "F1")
        widths = [
            max(len(str(r[i])) for r in rows + [header]) for i in range(len(header))
        ]
        lines = [
            "  ".join(h.ljust(w) for h, w in zip(header, widths)),
            "  ".join("-" * w for w in widths),
        ]
        for r in rows:
            lines.append("  ".join(str(v).ljust(w) for v, w in zip(r, widths)))
        return "\n".join(lines) + "\n"
    raise ContractError(f"unknown report format {format!r}")


def report_rows(report: ScoreReport) -> list[dict]:
    out = []
    for cat in CATEGORIES:
        for level in LEVELS:
            s = report.scores[f"{cat}-{level}"]
            out.append(
                {
                    "category": cat,
                    "task": level,
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "tp": s.tp,
                    "fp": s.fp,
                    "fn": s.fn,
                }
            )
    return out


def write_report_files(report: ScoreReport, out_dir: str | Path,
                       stem: str = "report") -> list[Path]:
    """Render one report as JSON + TSV + text table + an F1 bar figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out_dir / f"{stem}.json"
    json_path.write_text(emit_report(report, "json"), encoding="utf-8")
    written.append(json_path)

    tsv_path = out_dir / f"{stem}.tsv"
    columns = ("category", "task", "precision", "recall", "f1", "tp", "fp", "fn")
    lines = ["\t".join(columns)]
    for row in report_rows(report):
        lines.append("\t".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                               for c in columns))
    tsv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(tsv_path)

    txt_path = out_dir / f"{stem}.txt"
    txt_path.write_text(emit_report(report, "table"), encoding="utf-8")
    written.append(txt_path)

    fig_path = out_dir / f"{stem}.png"
    _plot_single(report, fig_path)
    written.append(fig_path)
    return written


def _plot_single(report: ScoreReport, path: Path) -> None:
    labels = [f"{cat}\n{level}" for cat in CATEGORIES for level in LEVELS]
    rows = report_rows(report)
    x = range(len(rows))
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.27
    for k, metric in enumerate(("precision", "recall", "f1")):
        ax.bar(
            [i + (k - 1) * width for i in x],
            [100.0 * r[metric] for r in rows],
            width=width,
            label=metric.upper() if metric == "f1" else metric.capitalize(),
        )
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("%")
    ax.set_ylim(0, 105)
    ax.legend()
    ax.set_title("Extraction scores by category")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_comparison_files(
    named_reports: list[tuple[str, ScoreReport]],
    out_dir: str | Path,
    stem: str = "comparison",
) -> list[Path]:
    """Side-by-side F1 comparison of several runs (ablation layout)."""
    if not named_reports:
        raise ContractError("no reports to compare")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    keys = [f"{cat}-{level}" for cat in CATEGORIES for level in LEVELS]

    tsv_path = out_dir / f"{stem}.tsv"
    lines = ["\t".join(["run"] + keys)]
    for name, report in named_reports:
        lines.append(
            "\t".join([name] + [repr(report.scores[k].f1) for k in keys])
        )
    tsv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(tsv_path)

    txt_path = out_dir / f"{stem}.txt"
    header = ["Method"] + [k for k in keys]
    rows = [
        [name] + [_pct(report.scores[k].f1) for k in keys]
        for name, report in named_reports
    ]
    widths = [
        max(len(str(r[i])) for r in rows + [header]) for i in range(len(header))
    ]
    out_lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for r in rows:
        out_lines.append("  ".join(str(v).ljust(w) for v, w in zip(r, widths)))
    txt_path.write_text("\n".join(out_lines) + "\n", encoding="utf-8")
    written.append(txt_path)

    fig_path = out_dir / f"{stem}.png"
    fig, ax = plt.subplots(figsize=(10, 4.5))
    width = 0.8 / max(len(named_reports), 1)
    for k, (name, report) in enumerate(named_reports):
        ax.bar(
            [i + k * width for i in range(len(keys))],
            [100.0 * report.scores[key].f1 for key in keys],
            width=width,
            label=name,
        )
    ax.set_xticks([i + 0.4 for i in range(len(keys))])
    ax.set_xticklabels(keys, fontsize=7, rotation=20)
    ax.set_ylabel("F1 (%)")
    ax.legend(fontsize=8)
    ax.set_title("F1 comparison")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    written.append(fig_path)
    return written
