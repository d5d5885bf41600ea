"""Report rendering: the measured cost matrix plus the static ratings table.

Two tables come out of a full run. The first is measured: per-approach
encryption, decryption, and network averages from the benchmark, joined
with drill verdicts. The second is a fixed qualitative comparison
(vulnerability, complexity, attack sophistication) reproduced as static
data; nothing in it is computed by this harness.
"""

from __future__ import annotations

import csv
import io
import json
import textwrap

from ..backends import BackendKind
from .bench import CostRow
from .drill import RESILIENCE_VERDICTS, DrillResult

EVAL_COLUMNS = (
    "Approach",
    "Encryption time (msec) - Create",
    "Decryption time (msec) - Fetch",
    "Network time (usec)",
    "Resilience to attack",
    "Ease of data recoverability",
)

# Canonical row order of the measured table.
EVAL_ROW_ORDER = (
    BackendKind.LOCAL_FILE_PLAIN,
    BackendKind.REMOTE_FILE_PLAIN,
    BackendKind.LOCAL_FILE_ENCRYPTED,
    BackendKind.REMOTE_FILE_ENCRYPTED,
    BackendKind.LOCAL_DATABASE,
    BackendKind.REMOTE_DATABASE,
    BackendKind.PROPOSED_VAULT,
)

TABLE2_TITLE = "PROPOSED EVALUATION CRITERIA BY FUNCTIONALITY"

TABLE2_COLUMNS = (
    "Data Storage Approach",
    "Vulnerability",
    "(D)Encryption Costs on access",
    "Data transfer costs",
    "(D)Encryption costs at storage",
    "Usage complexity score",
    "Attack sophistication involved",
)

# Static qualitative matrix, reproduced verbatim (its own row order).
TABLE2_ROWS = (
    ("Unencrypted local filesystem.", "Data can be leaked/ransomed.", "None", "No", "None", "Low", "Low"),
    ("Encrypted local filesystem.", "Data can be ransomed.", "Low", "No", "Low", "Medium", "Low"),
    ("Unencrypted remote filesystem.", "Data can be leaked /ransomed.", "Low", "Yes", "None", "Medium", "Medium"),
    ("Encrypted remote filesystem.", "Data can be ransomed.", "Low", "Yes", "Low", "Medium", "Medium"),
    ("Local database.", "Data can be leaked/ransomed.", "Low", "No", "Medium", "Low", "Medium"),
    ("Remote database.", "Data can be leaked.", "Low", "Yes", "Medium", "Medium", "High"),
    ("Specialized, remote data storage (our proposal).", "Data cannot be leaked or ransomed.", "Medium", "Yes", "High", "High", "Very High"),
)

TABLE2_FOOTNOTE = (
    "Ratings in this table are fixed qualitative assessments, reproduced"
    " as-is; the harness does not compute them."
)


def table2_static_matrix() -> dict:
    return {
        "title": TABLE2_TITLE,
        "columns": list(TABLE2_COLUMNS),
        "rows": [list(row) for row in TABLE2_ROWS],
        "footnote": TABLE2_FOOTNOTE,
    }


def merge_drills(rows: list[CostRow], drills: list[DrillResult] | None) -> list[CostRow]:
    """Attach drill verdicts and static resilience labels to cost rows."""
    verdicts = {d.backend: d.verdict for d in (drills or [])}
    merged = []
    for row in rows:
        kind = BackendKind(row.backend)
        row.resilience_verdict = RESILIENCE_VERDICTS[kind]
        if row.backend in verdicts:
            row.recoverability_verdict = verdicts[row.backend]
        merged.append(row)
    return merged


def _ordered(rows: list[CostRow]) -> list[CostRow]:
    position = {kind.value: i for i, kind in enumerate(EVAL_ROW_ORDER)}
    return sorted(rows, key=lambda row: position.get(row.backend, 99))


def _display_cells(row: CostRow) -> list[str]:
    kind = BackendKind(row.backend)
    name = kind.display_name + (" [partial run]" if row.partial else "")
    return [
        name,
        f"{row.avg_encrypt_ms:.3f}",
        f"{row.avg_decrypt_ms:.3f}",
        f"{row.avg_network_us:.1f}",
        row.resilience_verdict or "",
        row.recoverability_verdict or "(not drilled)",
    ]


def _render_text_table(title: str, columns: tuple, data: list[list[str]], footnote: str | None = None) -> str:
    # The last column carries sentence-length verdicts; wrap it.
    wrap_width = 64
    wrapped_rows = []
    for cells in data:
        last = textwrap.wrap(cells[-1], wrap_width) or [""]
        wrapped_rows.append((cells[:-1], last))
    widths = [len(col) for col in columns]
    for cells, last in wrapped_rows:
        for i, cell in enumerate(cells):
            widths[i] = max(widths[i], len(cell))
        widths[-1] = max(widths[-1], max(len(line) for line in last))

    def fmt_line(cells: list[str]) -> str:
        return "  ".join(cell.ljust(width) for cell, width in zip(cells, widths)).rstrip()

    lines = [title, "=" * len(title), fmt_line(list(columns)), fmt_line(["-" * w for w in widths])]
    for cells, last in wrapped_rows:
        lines.append(fmt_line(cells + [last[0]]))
        for continuation in last[1:]:
            lines.append(fmt_line([""] * len(cells) + [continuation]))
    if footnote:
        lines.append("")
        lines.append(f"Note: {footnote}")
    return "\n".join(lines)


def emit_report(
    rows: list[CostRow],
    fmt: str = "text",
    *,
    drills: list[DrillResult] | None = None,
) -> str:
    """Render the full report in one of: text, csv, json."""
    if not rows:
        raise ValueError("report requires at least one cost row")
    rows = _ordered(merge_drills(rows, drills))

    if fmt == "json":
        return json.dumps(
            {
                "measured": [row.to_dict() for row in rows],
                "drills": [d.to_dict() for d in (drills or [])],
                "static_matrix": table2_static_matrix(),
            },
            indent=2,
        )

    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer)
        writer.writerow(EVAL_COLUMNS)
        for row in rows:
            writer.writerow(_display_cells(row))
        writer.writerow([])
        writer.writerow(TABLE2_COLUMNS)
        for static_row in TABLE2_ROWS:
            writer.writerow(static_row)
        return buffer.getvalue()

    if fmt == "text":
        params = {(row.n_create, row.n_fetch, row.seed, row.workers) for row in rows}
        header_bits = []
        if len(params) == 1:
            n_create, n_fetch, seed, workers = next(iter(params))
            header_bits.append(
                f"{n_create} creates / {n_fetch} fetches per approach"
                f" (seed {seed}, {workers} worker{'s' if workers != 1 else ''})"
            )
        measured = _render_text_table(
            "EVALUATION AGAINST OTHER APPROACHES OVER COST CRITERIA",
            EVAL_COLUMNS,
            [_display_cells(row) for row in rows],
        )
        static = _render_text_table(
            TABLE2_TITLE, TABLE2_COLUMNS, [list(r) for r in TABLE2_ROWS], TABLE2_FOOTNOTE
        )
        parts = header_bits + [measured, "", static]
        return "\n".join(parts)

    raise ValueError(f"unknown report format {fmt!r}")


def verdict_mismatches(drills: list[DrillResult]) -> list[str]:
    """Human-readable mismatch lines; empty means every verdict matched."""
    problems = []
    for drill in drills:
        if not drill.matches_expected:
            problems.append(
                f"{drill.backend}: got {drill.verdict!r}, expected"
                f" {drill.expected_verdict!r}"
            )
    return problems
