"""Dataset files and run configuration.

Three dataset formats are understood:

``events-csv``
    ``paper_id,pub_date,cite_date`` with ISO-8601 dates, one row per
    citation. A row with an empty ``cite_date`` registers an uncited paper.
    The observation window of every paper ends at the dataset's ``as_of``
    date, by default the latest citation date in the file.
``yearly-csv``
    ``paper_id,pub_year,year_offset,count``; ``year_offset`` 0 is the first
    year after publication. Missing offsets count as zero.
``json``
    ``{"papers": [...]}`` mirroring :class:`CitationHistory`; exact floats.

Any additional CSV columns (e.g. ``journal``) become per-paper tags.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
import os
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .core import DAYS_PER_YEAR, DEFAULT_M, CitationHistory
from .exceptions import ParseError, ValidationError

FORMATS = ("events-csv", "yearly-csv", "json")
EVENTS_COLUMNS = ("paper_id", "pub_date", "cite_date")
YEARLY_COLUMNS = ("paper_id", "pub_year", "year_offset", "count")
CONFIG_ENV = "CITATION_IMPACT_CONFIG"


@dataclass
class Dataset:
    papers: List[CitationHistory] = field(default_factory=list)
    source_path: Optional[str] = None

    def __post_init__(self):
        seen = set()
        for p in self.papers:
            if p.paper_id in seen:
                raise ValidationError(f"duplicate paper_id {p.paper_id!r}")
            seen.add(p.paper_id)

    @property
    def metadata(self) -> Dict[str, dict]:
        return {p.paper_id: dict(p.tags) for p in self.papers}

    def __len__(self):
        return len(self.papers)

    def __iter__(self):
        return iter(self.papers)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.papers == other.papers


def infer_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return "json"
    if suffix == ".csv":
        with open(path, newline="") as fh:
            header = fh.readline()
        return "yearly-csv" if "year_offset" in header else "events-csv"
    raise ValueError(f"cannot infer dataset format of {path}")


def _parse_date(text: str, line: int, path) -> dt.datetime:
    try:
        value = dt.datetime.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"invalid ISO-8601 date {text!r}", line, path) from None
    return value


def _days_between(a: dt.datetime, b: dt.datetime) -> float:
    return (b - a).total_seconds() / 86400.0


def _read_csv_rows(path, required):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return None, []
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise ParseError(f"missing columns {missing}", 1, path)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno, path)
            rows.append((lineno, dict(zip(header, (v.strip() for v in row)))))
    return header, rows


def _tags(row, fixed):
    return {k: v for k, v in row.items() if k not in fixed and v != ""}


def _load_events_csv(path, as_of=None) -> Dataset:
    header, rows = _read_csv_rows(path, EVENTS_COLUMNS)
    if header is None or not rows:
        return Dataset([], str(path))
    pubs, cites, tags, order = {}, {}, {}, []
    latest = None
    for lineno, row in rows:
        pid = row["paper_id"]
        if not pid:
            raise ParseError("empty paper_id", lineno, path)
        pub = _parse_date(row["pub_date"], lineno, path)
        if pid not in pubs:
            pubs[pid], cites[pid], tags[pid] = pub, [], _tags(row, EVENTS_COLUMNS)
            order.append(pid)
        elif pubs[pid] != pub:
            raise ValidationError(f"paper {pid!r} has conflicting pub_date", lineno, path)
        if row["cite_date"]:
            cite = _parse_date(row["cite_date"], lineno, path)
            if cite < pub:
                raise ValidationError(
                    f"citation of {pid!r} on {cite.date()} precedes publication on {pub.date()}",
                    lineno, path)
            cites[pid].append(cite)
            latest = cite if latest is None or cite > latest else latest
    if as_of is None:
        as_of = latest or max(pubs.values())
    elif not isinstance(as_of, dt.datetime):
        as_of = dt.datetime.fromisoformat(str(as_of))
    papers = []
    for pid in order:
        pub = pubs[pid]
        ev = np.sort([_days_between(pub, c) for c in cites[pid]])
        horizon = _days_between(pub, as_of)
        if ev.size and horizon < ev[-1]:
            raise ValidationError(f"paper {pid!r} has citations after as_of", path=path)
        papers.append(CitationHistory(pid, events=np.asarray(ev, dtype=float),
                                      publication_time=pub.date(), horizon=max(horizon, 0.0),
                                      tags=tags[pid]))
    return Dataset(papers, str(path))


def _load_yearly_csv(path) -> Dataset:
    header, rows = _read_csv_rows(path, YEARLY_COLUMNS)
    if header is None or not rows:
        return Dataset([], str(path))
    pub_year, counts, tags, order = {}, {}, {}, []
    for lineno, row in rows:
        pid = row["paper_id"]
        if not pid:
            raise ParseError("empty paper_id", lineno, path)
        try:
            year = int(row["pub_year"])
            offset = int(row["year_offset"])
            count = int(row["count"])
        except ValueError:
            raise ParseError("pub_year, year_offset and count must be integers", lineno, path) from None
        if offset < 0:
            raise ValidationError(f"citation of {pid!r} before publication (year_offset {offset})",
                                  lineno, path)
        if count < 0:
            raise ValidationError(f"negative count for {pid!r}", lineno, path)
        if pid not in pub_year:
            pub_year[pid], counts[pid], tags[pid] = year, {}, _tags(row, YEARLY_COLUMNS)
            order.append(pid)
        elif pub_year[pid] != year:
            raise ValidationError(f"paper {pid!r} has conflicting pub_year", lineno, path)
        if offset in counts[pid]:
            raise ValidationError(f"duplicate year_offset {offset} for {pid!r}", lineno, path)
        counts[pid][offset] = count
    papers = []
    for pid in order:
        n = max(counts[pid]) + 1
        arr = np.zeros(n, dtype=np.int64)
        for k, v in counts[pid].items():
            arr[k] = v
        papers.append(CitationHistory(pid, yearly_counts=arr,
                                      publication_time=dt.date(pub_year[pid], 1, 1),
                                      tags=tags[pid]))
    return Dataset(papers, str(path))


def _load_json(path) -> Dataset:
    text = Path(path).read_text()
    if not text.strip():
        return Dataset([], str(path))
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, path) from None
    papers = []
    for i, rec in enumerate(doc.get("papers", [])):
        try:
            pub = rec.get("publication_time")
            kwargs = dict(
                publication_time=dt.date.fromisoformat(pub) if pub else None,
                tags=dict(rec.get("tags", {})),
            )
            if "events" in rec:
                ev = np.asarray(rec["events"], dtype=float)
                if ev.size and ev.min() < 0:
                    raise ValidationError(
                        f"paper {rec['paper_id']!r} (record {i}) cited before publication", path=path)
                papers.append(CitationHistory(rec["paper_id"], events=ev,
                                              horizon=rec.get("horizon"), **kwargs))
            else:
                papers.append(CitationHistory(rec["paper_id"],
                                              yearly_counts=np.asarray(rec["yearly_counts"]),
                                              **kwargs))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"record {i}: {exc}", path=path) from None
        except ValueError as exc:
            raise ValidationError(f"record {i}: {exc}", path=path) from None
    return Dataset(papers, str(path))


def load_dataset(path, format: Optional[str] = None, *, as_of=None) -> Dataset:
    """Parse and validate a dataset file."""
    path = Path(path)
    fmt = format or infer_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    if fmt == "events-csv":
        ds = _load_events_csv(path, as_of)
    elif fmt == "yearly-csv":
        ds = _load_yearly_csv(path)
    else:
        ds = _load_json(path)
    if not ds.papers:
        warnings.warn(f"{path}: dataset is empty", stacklevel=2)
    return ds


def _tag_columns(ds: Dataset):
    return sorted({k for p in ds.papers for k in p.tags})


def save_dataset(ds: Dataset, path, format: str = "json") -> None:
    """Write ``ds``; loading the file back yields an equal dataset.

    ``events-csv`` stores whole days only, so event ages must be integral
    and publication dates must be set.
    """
    path = Path(path)
    if format == "json":
        doc = {"papers": []}
        for p in ds.papers:
            rec = {"paper_id": p.paper_id,
                   "publication_time": p.publication_time.isoformat() if p.publication_time else None}
            if p.is_yearly:
                rec["yearly_counts"] = [int(v) for v in p.yearly_counts]
            else:
                rec["events"] = [float(v) for v in p.events]
                rec["horizon"] = float(p.horizon)
            if p.tags:
                rec["tags"] = dict(p.tags)
            doc["papers"].append(rec)
        path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return
    extra = _tag_columns(ds)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if format == "yearly-csv":
            w.writerow(list(YEARLY_COLUMNS) + extra)
            for p in ds.papers:
                h = p.to_yearly()
                year = p.publication_time.year if p.publication_time else 0
                for k, v in enumerate(h.yearly_counts):
                    w.writerow([p.paper_id, year, k, int(v)] + [p.tags.get(c, "") for c in extra])
        elif format == "events-csv":
            w.writerow(list(EVENTS_COLUMNS) + extra)
            for p in ds.papers:
                if p.publication_time is None:
                    raise ValueError(f"{p.paper_id}: events-csv needs a publication date")
                pub = dt.datetime.combine(p.publication_time, dt.time())
                ev = p.as_events()
                tagvals = [p.tags.get(c, "") for c in extra]
                if ev.size == 0:
                    w.writerow([p.paper_id, pub.date().isoformat(), ""] + tagvals)
                for d in ev:
                    if d != math.floor(d):
                        raise ValueError(f"{p.paper_id}: events-csv stores whole days only")
                    cite = pub + dt.timedelta(days=float(d))
                    w.writerow([p.paper_id, pub.date().isoformat(), cite.date().isoformat()] + tagvals)
        else:
            raise ValueError(f"unknown format {format!r}")


@dataclass
class RunConfig:
    """Settings shared by all CLI commands; every field can be set from JSON."""

    m: float = DEFAULT_M
    grid: str = "auto"
    mu_grid_days: List[float] = field(default_factory=lambda: [90.0, 365.0, 1095.0, 3650.0])
    sigma_grid: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    mu_bounds_days: List[float] = field(default_factory=lambda: [1.0, 200 * DAYS_PER_YEAR])
    sigma_bounds: List[float] = field(default_factory=lambda: [0.05, 10.0])
    covariance: str = "cumulative"
    if_window_years: List[float] = field(default_factory=lambda: [3.0, 1.0])
    train_years: float = 10.0
    horizon_years: float = 30.0
    model: str = "wsb"
    seed: int = 0
    n_papers: int = 100
    lambda_range: List[float] = field(default_factory=lambda: [0.5, 3.5])
    mu_range_days: List[float] = field(default_factory=lambda: [365.0, 2500.0])
    sigma_range: List[float] = field(default_factory=lambda: [0.6, 1.6])
    out: str = "out"

    def __post_init__(self):
        self.validate()

    def validate(self):
        from .fitting import MODEL_KINDS

        def pair(name, lo_min=None):
            v = getattr(self, name)
            if len(v) != 2 or not v[0] < v[1]:
                raise ValidationError(f"{name} must be an increasing pair, got {v!r}")
            if lo_min is not None and v[0] <= lo_min:
                raise ValidationError(f"{name} must be above {lo_min}, got {v!r}")

        if not (self.m > 0 and math.isfinite(self.m)):
            raise ValidationError(f"m must be positive, got {self.m!r}")
        if self.grid not in ("auto", "yearly", "events"):
            raise ValidationError("grid must be auto, yearly or events")
        if self.covariance not in ("cumulative", "poisson", "iid"):
            raise ValidationError("covariance must be 'cumulative', 'poisson' or 'iid'")
        if self.model not in MODEL_KINDS:
            raise ValidationError(f"model must be one of {MODEL_KINDS}")
        if not self.mu_grid_days or min(self.mu_grid_days) <= 0:
            raise ValidationError("mu_grid_days must hold positive ages")
        if not self.sigma_grid or min(self.sigma_grid) <= 0:
            raise ValidationError("sigma_grid must hold positive values")
        pair("mu_bounds_days", 0.0)
        pair("sigma_bounds", 0.0)
        pair("lambda_range", 0.0)
        pair("mu_range_days", 0.0)
        pair("sigma_range", 0.0)
        w = self.if_window_years
        if len(w) != 2 or not w[0] > w[1] > 0:
            raise ValidationError("if_window_years must be [far, near] with far > near > 0")
        if not 0 < self.train_years < self.horizon_years:
            raise ValidationError("need 0 < train_years < horizon_years")
        if self.n_papers < 1:
            raise ValidationError("n_papers must be at least 1")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, path) from None
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}", path=path)
        return cls(**doc)

    @classmethod
    def load(cls, path=None, **overrides) -> "RunConfig":
        """Config from ``path``, else ``$CITATION_IMPACT_CONFIG``, else defaults."""
        path = path or os.environ.get(CONFIG_ENV)
        cfg = cls.from_file(path) if path else cls()
        for k, v in overrides.items():
            if v is not None:
                setattr(cfg, k, v)
        cfg.validate()
        return cfg

    def fit_options(self) -> dict:
        return {
            "grid": self.grid,
            "covariance": self.covariance,
            "mu_grid": tuple(math.log(d) for d in self.mu_grid_days),
            "sigma_grid": tuple(self.sigma_grid),
            "time_scales": tuple(self.mu_grid_days),
            "bounds_override": {
                "mu": tuple(math.log(d) for d in self.mu_bounds_days),
                "sigma": tuple(self.sigma_bounds),
            },
        }

    def to_dict(self) -> dict:
        return asdict(self)
