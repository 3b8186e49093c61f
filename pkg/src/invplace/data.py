"""Order-log ingestion, SKU pooling, weekly train/test split and synthetic logs."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Dict, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from .core import ArrivalSequence, aggregate, rng_stream
from .demand import ScenarioSet

log = logging.getLogger(__name__)

HEADER = ("sku_id", "timestamp", "region_id", "district_id", "quantity")
WEEK_SECONDS = 7 * 86400
CV_TOL = 1e-12


class MalformedRow(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class OrderRecord:
    sku_id: str
    timestamp: datetime
    region_id: int
    district_id: int
    quantity: int


def _parse_row(row: dict, line: int) -> OrderRecord:
    try:
        ts = datetime.fromisoformat(row["timestamp"].strip())
    except (ValueError, AttributeError):
        raise MalformedRow(line, f"bad timestamp {row.get('timestamp')!r}") from None
    if ts.tzinfo is not None:
        ts = ts.replace(tzinfo=None)  # keep local wall-clock time
    fields = {}
    for name in ("region_id", "district_id", "quantity"):
        raw = (row.get(name) or "").strip()
        try:
            fields[name] = int(raw)
        except ValueError:
            raise MalformedRow(line, f"non-integer {name} {raw!r}") from None
    if fields["quantity"] < 1:
        raise MalformedRow(line, f"quantity must be positive, got {fields['quantity']}")
    if fields["district_id"] < 0 or fields["region_id"] < 0:
        raise MalformedRow(line, "negative region or district id")
    sku = (row.get("sku_id") or "").strip()
    if not sku:
        raise MalformedRow(line, "empty sku_id")
    return OrderRecord(sku, ts, fields["region_id"], fields["district_id"], fields["quantity"])


def parse_orders(
    source: Union[str, TextIO],
    skip_bad: bool = False,
    bad_rows: Optional[list] = None,
) -> List[OrderRecord]:
    """Strictly parse an order log. With ``skip_bad`` malformed rows are
    logged (and appended to ``bad_rows``) instead of aborting.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or tuple(h.strip() for h in reader.fieldnames) != HEADER:
        raise MalformedRow(1, f"expected header {','.join(HEADER)}, got {reader.fieldnames}")
    out = []
    for row in reader:
        line = reader.line_num
        try:
            if None in row or any(v is None for v in row.values()):
                raise MalformedRow(line, "wrong number of fields")
            out.append(_parse_row(row, line))
        except MalformedRow as e:
            if not skip_bad:
                raise
            log.warning("skipping %s", e)
            if bad_rows is not None:
                bad_rows.append(e)
    return out


# ---------------------------------------------------------------- weeks


def full_weeks(records: Sequence[OrderRecord], count: int = 3) -> List[date]:
    """Mondays of the first ``count`` weeks whose seven days all lie in the data span."""
    if not records:
        return []
    first = min(r.timestamp for r in records).date()
    last = max(r.timestamp for r in records).date()
    monday = first + timedelta(days=(7 - first.weekday()) % 7)
    out = []
    while monday + timedelta(days=6) <= last and len(out) < count:
        out.append(monday)
        monday += timedelta(days=7)
    return out


def _week_index(ts: datetime, mondays: Sequence[date]) -> int:
    for w, mon in enumerate(mondays):
        if mon <= ts.date() <= mon + timedelta(days=6):
            return w
    return -1


def weekly_totals(
    records: Sequence[OrderRecord],
    mondays: Optional[Sequence[date]] = None,
    region: Optional[int] = None,
) -> Dict[str, np.ndarray]:
    """Units ordered per SKU in each of the given weeks."""
    mondays = full_weeks(records) if mondays is None else list(mondays)
    out: Dict[str, np.ndarray] = {}
    for r in records:
        if region is not None and r.region_id != region:
            continue
        w = _week_index(r.timestamp, mondays)
        if w < 0:
            continue
        out.setdefault(r.sku_id, np.zeros(len(mondays), dtype=np.int64))[w] += r.quantity
    return out


def coefficient_of_variation(totals, ddof: int = 0) -> float:
    t = np.asarray(totals, dtype=float)
    mu = t.mean()
    if mu == 0:
        return float("inf")
    return float(t.std(ddof=ddof) / mu)


def passes_filters(totals, mean_lo=20.0, mean_hi=40.0, cv_max=0.5, ddof: int = 0) -> bool:
    """Mean in ``[mean_lo, mean_hi]`` and CV at most ``cv_max``; bounds inclusive."""
    t = np.asarray(totals, dtype=float)
    mu = t.mean()
    if mu < mean_lo - CV_TOL or mu > mean_hi + CV_TOL:
        return False
    return coefficient_of_variation(t, ddof) <= cv_max + CV_TOL


def pool_skus(
    records: Sequence[OrderRecord],
    mean_lo: float = 20.0,
    mean_hi: float = 40.0,
    cv_max: float = 0.5,
    region: Optional[int] = None,
    ddof: int = 0,
) -> List[str]:
    """SKUs whose weekly totals over the first three full weeks pass the filters."""
    mondays = full_weeks(records)
    if len(mondays) < 3:
        raise ValueError(f"records cover {len(mondays)} full weeks, need 3")
    totals = weekly_totals(records, mondays, region)
    return sorted(s for s, t in totals.items() if passes_filters(t, mean_lo, mean_hi, cv_max, ddof))


# ---------------------------------------------------------------- pooled weeks


@dataclass(frozen=True, eq=False)
class PooledWeek:
    region_id: int
    week: int
    sequence: ArrivalSequence
    sku_id: str


def pooled_weeks(
    records: Sequence[OrderRecord],
    region: int,
    skus: Sequence[str],
    n_districts: Optional[int] = None,
) -> List[PooledWeek]:
    """One arrival sequence per (SKU, week); multi-unit orders become
    simultaneous duplicate requests. Timestamps are seconds since Monday 00:00.
    """
    mondays = full_weeks(records)
    keep = set(skus)
    rows = [r for r in records if r.region_id == region and r.sku_id in keep]
    if n_districts is None:
        n_districts = 1 + max((r.district_id for r in rows), default=0)
    buckets: Dict[Tuple[str, int], list] = {}
    for r in rows:
        w = _week_index(r.timestamp, mondays)
        if w < 0:
            continue
        if r.district_id >= n_districts:
            raise ValueError(f"district {r.district_id} outside the region's {n_districts} districts")
        start = datetime.combine(mondays[w], datetime.min.time())
        sec = (r.timestamp - start).total_seconds()
        buckets.setdefault((r.sku_id, w), []).extend([(sec, r.district_id)] * r.quantity)
    out = []
    for sku in sorted(keep):
        for w in range(len(mondays)):
            ev = sorted(buckets.get((sku, w), []))
            ts = np.array([e[0] for e in ev], dtype=float)
            ty = np.array([e[1] for e in ev], dtype=np.int64)
            seq = ArrivalSequence(ts, ty, n_districts, {"sku": sku, "week": w, "region": region})
            out.append(PooledWeek(region, w, seq, sku))
    return out


def split_train_test(pooled: Sequence[PooledWeek], n_weeks: int = 3) -> Tuple[ScenarioSet, ScenarioSet]:
    """Weeks 1-2 of every SKU train, week 3 tests; SKUs missing a week are dropped."""
    by_sku: Dict[str, Dict[int, PooledWeek]] = {}
    for p in pooled:
        by_sku.setdefault(p.sku_id, {})[p.week] = p
    train, test = [], []
    for sku in sorted(by_sku):
        weeks = by_sku[sku]
        if set(weeks) != set(range(n_weeks)):
            log.warning("dropping SKU %s: has weeks %s", sku, sorted(weeks))
            continue
        train += [weeks[w] for w in range(n_weeks - 1)]
        test.append(weeks[n_weeks - 1])
    if not train or not test:
        raise ValueError("no SKU has all weeks")

    def mk(ps):
        seqs = tuple(p.sequence for p in ps)
        return ScenarioSet(tuple(aggregate(q) for q in seqs), seqs, tuple((p.sku_id, p.week) for p in ps))

    return mk(train), mk(test)


@dataclass(frozen=True, eq=False)
class RegionData:
    region_id: int
    n_fdc: int
    skus: tuple
    train: ScenarioSet
    test: ScenarioSet

    @property
    def mean_weekly_demand(self) -> float:
        """Mean units per SKU-week over train and test together."""
        tot = np.concatenate([self.train.matrix().sum(axis=1), self.test.matrix().sum(axis=1)])
        return float(tot.mean())


def ingest(
    records: Sequence[OrderRecord],
    regions: Optional[Sequence[int]] = None,
    mean_lo: float = 20.0,
    mean_hi: float = 40.0,
    cv_max: float = 0.5,
) -> List[RegionData]:
    """Pool, expand and split every requested region (default: all regions)."""
    if regions is None:
        regions = sorted({r.region_id for r in records})
    out = []
    for reg in regions:
        rows = [r for r in records if r.region_id == reg]
        skus = pool_skus(records, mean_lo, mean_hi, cv_max, region=reg)
        if not skus:
            log.warning("region %s: no SKU passes the filters", reg)
            continue
        n_districts = 1 + max(r.district_id for r in rows)
        train, test = split_train_test(pooled_weeks(records, reg, skus, n_districts))
        out.append(RegionData(reg, n_districts - 1, tuple(skus), train, test))
    return out


# ---------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class RegionSpec:
    region_id: int
    weekly_mean: tuple  # per district, district 0 first


@dataclass(frozen=True)
class SynthSpec:
    regions: tuple
    n_skus: int = 8
    overdispersion: float = 0.02
    weeks: int = 3
    seed: int = 0
    start: str = "2018-03-05"  # a Monday
    lead_days: int = 2
    trail_days: int = 1
    multi_unit_prob: float = 0.1
    n_slow_skus: int = 2  # low-volume SKUs the filters should drop

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        regs = tuple(RegionSpec(int(r["region_id"]), tuple(float(v) for v in r["weekly_mean"])) for r in d["regions"])
        kw = {k: v for k, v in d.items() if k != "regions"}
        return cls(regs, **kw)


def default_synth_spec(seed: int = 0) -> SynthSpec:
    """Three regions of different sizes, about 30 units per SKU-week each."""
    return SynthSpec(
        (
            RegionSpec(9, (10.0, 6.0, 5.0, 5.0, 4.0)),
            RegionSpec(2, (12.0, 8.0, 6.0, 4.0)),
            RegionSpec(5, (8.0, 9.0, 7.0, 3.0, 2.0, 1.0)),
        ),
        seed=seed,
    )


def _nb_counts(mean: np.ndarray, phi: float, rng: np.random.Generator) -> np.ndarray:
    """Negative binomial with variance ``mean + phi*mean^2``; ``phi == 0`` is deterministic."""
    mean = np.asarray(mean, dtype=float)
    if phi <= 0:
        return np.rint(mean).astype(np.int64)
    k = 1.0 / phi
    return rng.negative_binomial(k, k / (k + np.maximum(mean, 1e-12))).astype(np.int64)


def synth_generate(spec: SynthSpec) -> str:
    """Order-log CSV with the ingestion schema; identical bytes for a fixed seed."""
    start = datetime.fromisoformat(spec.start)
    if start.weekday() != 0:
        raise ValueError("synthetic data must start on a Monday")
    rows = []
    for reg in spec.regions:
        mean = np.asarray(reg.weekly_mean, dtype=float)
        n_total = spec.n_skus + spec.n_slow_skus
        for s in range(n_total):
            rng = rng_stream(spec.seed, reg.region_id, s)
            sku_mean = mean if s < spec.n_skus else mean * (5.0 / mean.sum())
            sku = f"R{reg.region_id}S{s:03d}"
            # partial weeks around the full ones, dropped at ingestion
            lead = (-spec.lead_days * 86400.0, 0.0)
            tail = (spec.weeks * WEEK_SECONDS, spec.weeks * WEEK_SECONDS + spec.trail_days * 86400.0)
            spans = [(w * WEEK_SECONDS, (w + 1) * WEEK_SECONDS, 1.0) for w in range(spec.weeks)]
            spans += [(lead[0], lead[1], spec.lead_days / 7.0), (tail[0], tail[1], spec.trail_days / 7.0)]
            for lo, hi, frac in spans:
                if hi <= lo:
                    continue
                counts = _nb_counts(sku_mean * frac, spec.overdispersion, rng)
                for dist, c in enumerate(counts):
                    units = int(c)
                    while units > 0:
                        q = 1
                        while q < units and rng.random() < spec.multi_unit_prob:
                            q += 1
                        sec = int(rng.integers(int(lo), int(hi)))
                        rows.append((sec, sku, reg.region_id, dist, q))
                        units -= q
    rows.sort()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for sec, sku, reg, dist, q in rows:
        ts = (start + timedelta(seconds=sec)).isoformat()
        w.writerow([sku, ts, reg, dist, q])
    return buf.getvalue()
