"""Plain-text rendering of pipeline, what-if and estimate results."""

from __future__ import annotations

from typing import Dict, List, Sequence

from .domain import DEFAULT_CATALOG, AirSet
from .sensitivity import RuntimeEstimate, humanize_seconds


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> List[str]:
    widths = [len(h) for h in header]
    for row in rows:
        widths = [max(w, len(str(c))) for w, c in zip(widths, row)]
    line = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    fmt = lambda cells: "| " + " | ".join(str(c).ljust(w) for c, w in zip(cells, widths)) + " |"  # noqa: E731
    return [line, fmt(header), line, *(fmt(r) for r in rows), line]


def _qa_name(code: str) -> str:
    try:
        return DEFAULT_CATALOG[code].name
    except KeyError:
        return code


def render_report(result) -> str:
    out: List[str] = ["ARCHITECTURE DECISION REPORT", "=" * 28, ""]
    if result.failed_at:
        out += [f"STATUS: failed at step '{result.failed_at}': {result.error}", ""]

    if result.extraction is not None:
        recs = result.extraction.records
        asrs = [r for r in recs if r.is_asr]
        out.append(f"Requirements: {len(recs)}   ASRs: {len(asrs)}")
        out.append("")
        rows = [
            (r.requirement_id, "Y" if r.is_asr else "N", ", ".join(r.qas) or "-", r.condition or "-")
            for r in recs
        ]
        out += _table(("ID", "ASR", "QAs", "Condition"), rows)
        out.append("")

    if result.cgs:
        out.append("Condition groups")
        out += _table(
            ("CG", "Nominal condition", "ASRs"),
            [(cg.cg_id, cg.nominal_condition, ", ".join(cg.asr_ids)) for cg in result.cgs],
        )
        out.append("")
    if result.ccgs:
        out.append("Concurrent condition groups")
        out += _table(
            ("CCG", "CGs"),
            [(c.ccg_id, ", ".join(str(i) for i in c.cg_ids)) for c in result.ccgs],
        )
        out.append("")

    if result.per_ccg:
        report_all = result.tie_break == "report-all"
        labels = [f"CCG{r.ccg.ccg_id}" for r in result.per_ccg]
        out.append("Architectural choices")
        rows = []
        for g in result.matrix.groups:
            cells = []
            for r in result.per_ccg:
                d = r.decisions[g.name]
                cells.append(" | ".join(d.tie_set) if report_all and len(d.tie_set) > 1 else d.chosen)
            rows.append((g.name, *cells))
        out += _table(("Choice group", *labels), rows)
        out.append("")

        out.append("QA satisfaction scores (raw x weight = weighted)")
        codes = [c for c in result.matrix.qas if any(r.weights[c] for r in result.per_ccg)]
        rows = []
        for code in codes:
            cells = [
                f"{r.scores[code].raw} x {r.scores[code].weight} = {r.scores[code].weighted}"
                for r in result.per_ccg
            ]
            rows.append((_qa_name(code), *cells))
        rows.append(("Objective", *(str(r.decisions.objective_value) for r in result.per_ccg)))
        out += _table(("QA", *labels), rows)
        out.append("")

        for r in result.per_ccg:
            out.append(f"CCG{r.ccg.ccg_id}  weights: " + ", ".join(f"{k}={v}" for k, v in r.weights.nonzero().items()))
            ties = [d for d in r.decisions.decisions if len(d.tie_set) > 1]
            for d in ties:
                out.append(f"  tie in {d.group}: {', '.join(d.tie_set)} (value {d.value}); chose {d.chosen}")
            out.append("  traceability:")
            for key, support in r.trace.by_choice.items():
                if not support:
                    out.append(f"    {key}: no weighted QA support")
                    continue
                parts = [f"{s.qa} (w={s.weight}; {', '.join(s.asr_ids)})" for s in support]
                out.append(f"    {key}: " + "; ".join(parts))
            out.append("")
    return "\n".join(out).rstrip() + "\n"


def render_whatif(title: str, entries) -> str:
    out = [title, ""]
    for e in entries:
        changed = {c: (e.weights_before[c], e.weights_after[c]) for c in e.weights_after.to_dict()}
        changed = {c: v for c, v in changed.items() if v[0] != v[1]}
        out.append(f"CCG{e.ccg_id}")
        if changed:
            out.append("  weights: " + ", ".join(f"{c} {a}->{b}" for c, (a, b) in changed.items()))
        else:
            out.append("  weights: unchanged")
        if e.changes:
            for g, before, after in e.changes:
                out.append(f"  {g}: {before} -> {after}")
        else:
            out.append("  decisions: unchanged")
    return "\n".join(out) + "\n"


def render_air_scan(per_ccg: Dict[int, List[AirSet]], histogram: Dict[int, int]) -> str:
    out = ["AIR scan", ""]
    for ccg_id, sets in per_ccg.items():
        out.append(f"CCG{ccg_id}: {len(sets)} AIR set(s)")
        for n, a in enumerate(sets, 1):
            changes = "; ".join(f"{g}: {b} -> {c}" for g, b, c in a.before.diff(a.after))
            out.append(f"  #{n} [{a.sensitive_qa}] {', '.join(a.removed_asr_ids)}  => {changes}")
    out.append("")
    out.append("AIR set size histogram: " + (", ".join(f"{k}: {v}" for k, v in histogram.items()) or "empty"))
    return "\n".join(out) + "\n"


def render_estimate(est: RuntimeEstimate) -> str:
    rows = [(
        f"~{est.n} REs",
        f"{est.worst_iterations:,}",
        humanize_seconds(est.best_time),
        humanize_seconds(est.worst_time),
    )]
    head = f"per-call latency {est.per_call_latency:g} s"
    return "\n".join([head, *_table(("System size", "Iterations", "Best case", "Worst case"), rows)]) + "\n"
