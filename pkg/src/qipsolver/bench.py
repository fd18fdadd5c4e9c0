"""Benchmark runs, their CSV form, and the derived D_r and quartile tables."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

from .heur import HEURISTIC, RANDOM
from .instances import generate
from .model import parse_instance
from .search import SearchConfig, SearchStatus, relative_difference, solve

DEFAULT_SBARS = (0, 1, 2, 4, 8, 16, 32, 64)
SCENARIO_MODES = (HEURISTIC, RANDOM)


@dataclass(frozen=True)
class BenchRecord:
    """One completed run.  ``value`` is empty exactly when no verdict was reached."""

    instance_id: str
    family: str
    params: str
    mode: str
    sbar: int
    scenario_mode: str
    status: str
    nodes: int
    conflicts: int
    restarts: int
    value: str
    wall_time: float

    def row(self) -> dict:
        d = asdict(self)
        d["wall_time"] = f"{self.wall_time:.6f}"
        return d


FIELDS = [f.name for f in fields(BenchRecord)]
_INT_FIELDS = {"sbar", "nodes", "conflicts", "restarts"}


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class BenchTask:
    instance_id: str
    family: str
    params: str
    path: str
    mode: str
    sbar: int
    scenario_mode: str
    seed: int
    node_limit: int | None
    time_limit: float | None


def load_manifest(path: str | Path) -> list[dict]:
    """Rows of a manifest written by ``write_grid``; instance paths become absolute."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        missing = {"id", "family", "params", "path"} - set(r)
        if missing:
            raise SchemaError(f"manifest lacks columns {sorted(missing)}")
        r["path"] = str((path.parent / r["path"]).resolve())
    return rows


def plan(manifest: Sequence[dict], mode: str = "s", sbars: Sequence[int] = DEFAULT_SBARS,
         scenario_modes: Sequence[str] = SCENARIO_MODES, seed: int = 0,
         node_limit: int | None = None, time_limit: float | None = None) -> list[BenchTask]:
    """Runs per instance: one ``sbar = 0`` baseline, then every positive ``sbar`` per scenario mode.

    Scenario mode only affects how the scenario set is rebuilt, so the
    baseline is shared by both modes.
    """
    tasks = []
    for row in manifest:
        combos = [(0, HEURISTIC)] if 0 in sbars else []
        combos += [(s, sm) for sm in scenario_modes for s in sbars if s > 0]
        for s, sm in combos:
            tasks.append(BenchTask(row["id"], row["family"], row["params"], row.get("path", ""), mode, s, sm,
                                   seed, node_limit, time_limit))
    return tasks


def _load(task: BenchTask):
    if task.path:
        return parse_instance(Path(task.path).read_text())
    return generate(task.family, **json.loads(task.params))


def run_task(task: BenchTask) -> BenchRecord:
    """Solve one task; failures become records with status ``error``."""
    cfg = SearchConfig(sbar=task.sbar, relaxation_mode=task.mode, scenario_mode=task.scenario_mode,
                       seed=task.seed, node_limit=task.node_limit, time_limit=task.time_limit)
    base = dict(instance_id=task.instance_id, family=task.family, params=task.params, mode=task.mode,
                sbar=task.sbar, scenario_mode=task.scenario_mode)
    t0 = time.perf_counter()
    try:
        res = solve(_load(task), cfg)
    except Exception as exc:  # recorded, the bench goes on
        return BenchRecord(**base, status=f"error: {type(exc).__name__}: {exc}", nodes=0, conflicts=0,
                           restarts=0, value="", wall_time=time.perf_counter() - t0)
    if res.status is SearchStatus.FEASIBLE:
        value = str(res.value)
    elif res.status is SearchStatus.INFEASIBLE:
        value = "inf"
    else:
        value = ""
    st = res.stats
    return BenchRecord(**base, status=res.status.value, nodes=st.decision_nodes, conflicts=st.conflicts,
                       restarts=st.restarts, value=value, wall_time=st.wall_time)


def run_bench(tasks: Sequence[BenchTask], workers: int = 1) -> list[BenchRecord]:
    """Records in task order regardless of ``workers``."""
    if workers <= 1:
        return [run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_task, tasks, chunksize=1))


def write_csv(records: Iterable[BenchRecord], out) -> None:
    """Write to a path or an open text stream; the header is always written."""
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="") as fh:
            write_csv(records, fh)
        return
    w = csv.DictWriter(out, fieldnames=FIELDS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(r.row())


def read_csv(source) -> list[BenchRecord]:
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_csv(fh)
    text = source.read()
    if not text.strip():
        return []
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != FIELDS:
        raise SchemaError(f"expected columns {FIELDS}, found {reader.fieldnames}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            vals = {k: int(v) if k in _INT_FIELDS else v for k, v in row.items()}
            vals["wall_time"] = float(row["wall_time"])
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
        out.append(BenchRecord(**vals))
    return out


# ---------------------------------------------------------------- analysis


@dataclass(frozen=True)
class DrRow:
    instance_id: str
    family: str
    sbar: int
    scenario_mode: str
    nodes: int
    baseline_nodes: int
    d_r: float


def dr_table(records: Sequence[BenchRecord]) -> list[DrRow]:
    """D_r of every solved positive-``sbar`` run against the instance's solved ``sbar = 0`` run.

    Node counts of zero (instances settled without a decision node) are
    counted as one so the ratio stays defined.
    """
    solved = [r for r in records if r.status in ("feasible", "infeasible")]
    base = {}
    for r in solved:
        if r.sbar == 0:
            base.setdefault((r.instance_id, r.mode), r)
    out = []
    for r in solved:
        b = base.get((r.instance_id, r.mode))
        if r.sbar == 0 or b is None:
            continue
        d = relative_difference(max(r.nodes, 1), max(b.nodes, 1))
        out.append(DrRow(r.instance_id, r.family, r.sbar, r.scenario_mode, r.nodes, b.nodes, d))
    return out


def _median(xs: Sequence[float]) -> float:
    return float(statistics.median(xs))


@dataclass(frozen=True)
class BoxStats:
    count: int
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]


def box_stats(values: Sequence[float], whisker: float = 1.5) -> BoxStats:
    """Median-exclusive quartiles with whiskers at the most extreme points within ``whisker * IQR``."""
    xs = sorted(values)
    n = len(xs)
    if n == 0:
        raise ValueError("no values")
    med = _median(xs)
    if n == 1:
        q1 = q3 = med
    else:
        half = n // 2
        q1 = _median(xs[:half])
        q3 = _median(xs[half + (n % 2):])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - whisker * iqr, q3 + whisker * iqr
    inside = [x for x in xs if lo_fence <= x <= hi_fence]
    outliers = tuple(x for x in xs if x < lo_fence or x > hi_fence)
    return BoxStats(n, q1, med, q3, inside[0], inside[-1], outliers)


def dr_summary(rows: Sequence[DrRow]) -> dict[tuple[str, int], BoxStats]:
    """Box statistics of D_r per (scenario mode, sbar)."""
    groups: dict[tuple[str, int], list[float]] = {}
    for r in rows:
        groups.setdefault((r.scenario_mode, r.sbar), []).append(r.d_r)
    return {k: box_stats(v) for k, v in sorted(groups.items())}


@dataclass(frozen=True)
class AggregateRow:
    family: str
    sbar: int
    scenario_mode: str
    runs: int
    solved: int
    total_nodes: int
    median_nodes: float
    total_time: float


def aggregate(records: Sequence[BenchRecord]) -> list[AggregateRow]:
    groups: dict[tuple, list[BenchRecord]] = {}
    for r in records:
        groups.setdefault((r.family, r.sbar, r.scenario_mode), []).append(r)
    out = []
    for (fam, sbar, sm), rs in sorted(groups.items()):
        done = [r for r in rs if r.value != ""]
        out.append(AggregateRow(fam, sbar, sm, len(rs), len(done), sum(r.nodes for r in done),
                                _median([r.nodes for r in done]) if done else float("nan"),
                                sum(r.wall_time for r in rs)))
    return out


def format_report(records: Sequence[BenchRecord]) -> str:
    """Plain-text node/runtime table followed by the D_r quartile table."""
    lines = ["family      sbar  scenarios  runs  solved  total_nodes  median_nodes  time_s"]
    for a in aggregate(records):
        lines.append(f"{a.family:<11} {a.sbar:>4}  {a.scenario_mode:<9}  {a.runs:>4}  {a.solved:>6}  "
                     f"{a.total_nodes:>11}  {a.median_nodes:>12.1f}  {a.total_time:>6.2f}")
    lines.append("")
    lines.append("scenarios  sbar  count      q1  median      q3  whisker_lo  whisker_hi  outliers")
    for (sm, sbar), b in dr_summary(dr_table(records)).items():
        lines.append(f"{sm:<9}  {sbar:>4}  {b.count:>5}  {b.q1:>6.3f}  {b.median:>6.3f}  {b.q3:>6.3f}  "
                     f"{b.whisker_low:>10.3f}  {b.whisker_high:>10.3f}  {len(b.outliers):>8}")
    return "\n".join(lines) + "\n"
