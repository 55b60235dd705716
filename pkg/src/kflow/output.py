"""Report serialization: JSON and Graphviz DOT."""

from __future__ import annotations

import json

from .engine import Report


def report_json(report: Report) -> str:
    """Stable JSON: keys sorted, timing confined to ``ms``."""
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def report_dot(report: Report) -> str:
    """The derivation slice as a digraph: premise -> conclusion, edges
    labelled by rule. Drawn values are boxes."""
    lines = [f"digraph {_quote(report.protocol)} {{", "  rankdir=LR;", "  node [shape=ellipse];"]
    derived = [s["value"] for s in report.trace]
    drawn = sorted({p for s in report.trace for p in s["premises"]} - set(derived))
    ids = {}
    for v in drawn + derived:
        ids.setdefault(v, f"n{len(ids)}")
    for v in drawn:
        lines.append(f"  {ids[v]} [label={_quote(v)}, shape=box];")
    for v in derived:
        lines.append(f"  {ids[v]} [label={_quote(v)}];")
    for s in report.trace:
        if not s["premises"]:
            src = "start"
            if "  start [shape=point];" not in lines:
                lines.insert(3, "  start [shape=point];")
            lines.append(f"  {src} -> {ids[s['value']]} [label={_quote(s['rule'])}];")
        for p in s["premises"]:
            lines.append(f"  {ids[p]} -> {ids[s['value']]} [label={_quote(s['rule'])}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
