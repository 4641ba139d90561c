"""Pure log-derived metrics reports.

Everything here re-reads the JSONL artifacts a run left behind; no live
state is consulted, so regenerating a report is byte-stable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class ReportError(RuntimeError):
    def __init__(self, msg: str, offset: int | None = None):
        super().__init__(msg if offset is None else f"{msg} (record offset {offset})")
        self.offset = offset


def _read_jsonl(path: Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ReportError(f"{path.name}: corrupt record", offset=i) from e
    return out


@dataclass
class MetricsReport:
    run_dir: str
    method: str = ""
    seed: int = -1
    episodes: int = 0
    successes: int = 0
    transitions: int = 0
    intervention_curve: list[dict] = field(default_factory=list)  # per window
    critic_loss: list[dict] = field(default_factory=list)
    q_disagreement: list[dict] = field(default_factory=list)
    warmup_loss: list[dict] = field(default_factory=list)
    force_peaks: dict = field(default_factory=dict)
    zero_intervention_successes: list[int] = field(default_factory=list)  # transition idx
    empty: bool = False

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "run_dir": self.run_dir,
            "method": self.method,
            "seed": self.seed,
            "episodes": self.episodes,
            "successes": self.successes,
            "transitions": self.transitions,
            "intervention_curve": self.intervention_curve,
            "critic_loss": self.critic_loss,
            "q_disagreement": self.q_disagreement,
            "warmup_loss": self.warmup_loss,
            "force_peaks": self.force_peaks,
            "zero_intervention_successes": self.zero_intervention_successes,
            "empty": self.empty,
        }


def intervention_windows(transition_records: list[dict], window: int = 500) -> list[dict]:
    """Fraction of intervened steps per transition window."""
    out = []
    for lo in range(0, len(transition_records), window):
        block = transition_records[lo : lo + window]
        if not block:
            break
        rate = sum(1 for r in block if r["intervened"]) / len(block)
        out.append({"start": lo, "count": len(block), "rate": rate})
    return out


def first_zero_intervention_success(episodes: list[dict]) -> int | None:
    """Transition index at which the first unassisted success completed."""
    for ep in episodes:
        if ep.get("zero_intervention_success"):
            return ep["first_transition_index"] + ep["transitions"]
    return None


def export_report(run_dir: str | Path, window: int = 500) -> MetricsReport:
    run_dir = Path(run_dir)
    report = MetricsReport(run_dir=str(run_dir))
    meta_path = run_dir / "run_meta.json"
    episodes_path = run_dir / "episodes.jsonl"
    if not meta_path.exists() and not episodes_path.exists():
        report.empty = True
        return report
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        report.method = meta.get("method", "")
        report.seed = meta.get("seed", -1)

    episodes = _read_jsonl(episodes_path) if episodes_path.exists() else []
    report.episodes = len(episodes)
    report.successes = sum(1 for e in episodes if e.get("success"))
    report.force_peaks = {
        "fx": [e["peak_fx"] for e in episodes if e.get("transitions", 0) > 0],
        "fz": [e["peak_fz"] for e in episodes if e.get("transitions", 0) > 0],
        "my": [e["peak_my"] for e in episodes if e.get("transitions", 0) > 0],
    }
    fz = first_zero_intervention_success(episodes)
    report.zero_intervention_successes = [] if fz is None else [fz]

    tr_path = run_dir / "transitions.jsonl"
    if tr_path.exists():
        transitions = _read_jsonl(tr_path)
        report.transitions = len(transitions)
        report.intervention_curve = intervention_windows(transitions, window=window)

    metrics_path = run_dir / "metrics.jsonl"
    if metrics_path.exists():
        for rec in _read_jsonl(metrics_path):
            if rec.get("phase") == "warmup":
                report.warmup_loss.append(
                    {"step": rec["step"], "loss": rec["critic_loss"]}
                )
            elif "q_disagreement" in rec:
                report.q_disagreement.append(
                    {"update": rec["update"], "value": rec["q_disagreement"]}
                )
            if rec.get("phase") == "online" and "critic_loss" in rec:
                report.critic_loss.append(
                    {"update": rec.get("update", -1), "loss": rec["critic_loss"]}
                )
    if not episodes and not report.transitions and not report.warmup_loss:
        report.empty = True
    return report


def write_report(report: MetricsReport, out_path: str | Path) -> None:
    Path(out_path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def write_series_csv(report: MetricsReport, out_dir: str | Path) -> list[Path]:
    """Plot-ready CSV series next to the JSON report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def dump(name: str, header: list[str], rows: list[list]) -> None:
        p = out_dir / name
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
        written.append(p)

    dump(
        "intervention_rate.csv",
        ["start", "count", "rate"],
        [[w["start"], w["count"], w["rate"]] for w in report.intervention_curve],
    )
    dump(
        "critic_loss.csv",
        ["update", "loss"],
        [[r["update"], r["loss"]] for r in report.critic_loss],
    )
    dump(
        "q_disagreement.csv",
        ["update", "value"],
        [[r["update"], r["value"]] for r in report.q_disagreement],
    )
    dump(
        "warmup_loss.csv",
        ["step", "loss"],
        [[r["step"], r["loss"]] for r in report.warmup_loss],
    )
    return written
