"""Verification records and their JSON / LaTeX / text renderings."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from . import __version__

SCHEMA = "report-v1"
ZERO_VERDICTS = ("zero-structural", "probably-zero")
VERDICTS = ("zero-structural", "probably-zero", "nonzero", "error", "pass", "fail")


@dataclass
class CheckRecord:
    """One verified claim.

    ``expect`` is ``"zero"`` for identities and ``"nonzero"`` for mutants
    that must be rejected.  Numeric checks use the verdicts pass/fail.
    """

    name: str
    verdict: str
    trials: int = 0
    seed: int = 0
    expect: str = "zero"
    witness: dict | None = None
    detail: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def passed(self) -> bool:
        if self.verdict == "error":
            return False
        if self.verdict in ("pass", "fail"):
            return self.verdict == "pass"
        is_zero = self.verdict in ZERO_VERDICTS
        return is_zero if self.expect == "zero" else not is_zero

    def to_dict(self, timing: bool = False) -> dict:
        d = {"name": self.name, "verdict": self.verdict, "trials": self.trials,
             "seed": self.seed, "expect": self.expect, "passed": self.passed}
        if self.witness is not None:
            d["witness"] = self.witness
        if self.detail:
            d["detail"] = self.detail
        if timing:
            d["wall_time"] = self.wall_time
        return d


def record_from_verdict(name, verdict, expect="zero", detail=None, wall_time=0.0) -> CheckRecord:
    return CheckRecord(name=name, verdict=verdict.verdict, trials=verdict.trials,
                       seed=verdict.seed, expect=expect, witness=verdict.witness,
                       detail=dict(detail or {}), wall_time=wall_time)


@dataclass
class Report:
    command: str
    params: dict
    records: list[CheckRecord] = field(default_factory=list)
    sections: dict = field(default_factory=dict)
    catalog_version: str | None = None

    @property
    def run_id(self) -> str:
        blob = json.dumps({"command": self.command, "params": self.params}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def add(self, rec: CheckRecord) -> CheckRecord:
        self.records.append(rec)
        return rec

    def extend(self, recs) -> None:
        for r in recs:
            self.add(r)

    def to_dict(self, timing: bool = False) -> dict:
        return {
            "schema": SCHEMA,
            "run_id": self.run_id,
            "command": self.command,
            "params": self.params,
            "tool_version": __version__,
            "catalog_version": self.catalog_version,
            "passed": self.passed,
            "records": [r.to_dict(timing) for r in self.records],
            "sections": self.sections,
        }


def _fix_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {str(k): _fix_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_fix_floats(v) for v in obj]
    return obj


def to_json(report: Report, timing: bool = False) -> str:
    return json.dumps(_fix_floats(report.to_dict(timing)), sort_keys=True, indent=2,
                      ensure_ascii=False) + "\n"


def to_text(report: Report) -> str:
    lines = [f"# {report.command} {json.dumps(report.params, sort_keys=True)} run={report.run_id}"]
    for r in report.records:
        mark = "PASS" if r.passed else "FAIL"
        extra = f" trials={r.trials} seed={r.seed}" if r.trials else ""
        expect = "" if r.verdict in ("pass", "fail") else f" (expect {r.expect})"
        lines.append(f"{mark} {r.name}: {r.verdict}{expect}{extra}")
    for key, val in sorted(report.sections.items()):
        if isinstance(val, dict) and "summary" in val:
            lines.append(f"NOTE {key}: {val['summary']}")
    lines.append(f"RESULT {'PASS' if report.passed else 'FAIL'} "
                 f"({sum(r.passed for r in report.records)}/{len(report.records)})")
    return "\n".join(lines) + "\n"


_TEX = {"\\": r"\textbackslash{}", "_": r"\_", "&": r"\&", "%": r"\%", "#": r"\#",
        "^": r"\^{}", "$": r"\$", "{": r"\{", "}": r"\}"}


def _tex_escape(s: str) -> str:
    return "".join(_TEX.get(ch, ch) for ch in s)


def to_latex(report: Report) -> str:
    """Standalone document with one summary table per case (or one overall)."""
    groups: dict[str, list[CheckRecord]] = {}
    for r in report.records:
        key = r.detail.get("case", "all") if isinstance(r.detail, dict) else "all"
        groups.setdefault(key, []).append(r)
    out = [r"\documentclass{article}", r"\begin{document}",
           rf"\section*{{{_tex_escape(report.command)} (run {report.run_id})}}"]
    for key in sorted(groups):
        out.append(rf"\subsection*{{{_tex_escape(str(key))}}}")
        out.append(r"\begin{tabular}{lllr}")
        out.append(r"check & verdict & status & trials \\ \hline")
        for r in groups[key]:
            out.append(f"{_tex_escape(r.name)} & {_tex_escape(r.verdict)} & "
                       f"{'pass' if r.passed else 'FAIL'} & {r.trials} \\\\")
        out.append(r"\end{tabular}")
    out.append(r"\end{document}")
    return "\n".join(out) + "\n"


def emit(report: Report, fmt: str = "json", timing: bool = False) -> bytes:
    if fmt == "json":
        return to_json(report, timing).encode()
    if fmt == "latex":
        return to_latex(report).encode()
    if fmt == "text":
        return to_text(report).encode()
    raise ValueError(f"unknown format {fmt!r}")
