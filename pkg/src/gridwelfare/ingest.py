"""Trace-file ingestion: hourly market prices, wind power, and atom dumps.

Formats are fixed CSV with named headers (UTF-8, LF):

* price traces: ``hour,dayahead,realtime`` with exactly one row per slot;
  one file per market state, combined into a uniform iid process.
* wind traces: ``day,hour,power_100mw`` with every (day, hour) pair
  present exactly once; each hour's samples become equal-weight atoms.
* distribution dumps: ``slot,value,weight`` with full-precision floats so
  a dump/ingest round trip reproduces the atoms exactly.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .distributions import EmpiricalDistribution
from .errors import IngestionError
from .market import MarketProcess, MarketState

__all__ = [
    "parse_price_trace",
    "ingest_price_traces",
    "parse_wind_trace",
    "ingest_wind_trace",
    "dump_distributions",
    "parse_distributions",
]


def _rows(source: str, text: str, expected_header: str):
    lines = text.splitlines()
    if not lines:
        raise IngestionError(source, None, "empty file")
    header = lines[0].strip()
    if header != expected_header:
        raise IngestionError(source, 1, f"expected header {expected_header!r}, got {header!r}")
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        yield i, [c.strip() for c in line.split(",")]


def _number(source: str, line: int, token: str, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise IngestionError(source, line, f"bad {what}: {token!r}") from None


def parse_price_trace(source: str, text: str, t_slots: int) -> MarketState:
    """One market state from an ``hour,dayahead,realtime`` CSV."""
    beta = np.full(t_slots, np.nan)
    alpha = np.full(t_slots, np.nan)
    count = 0
    for line, cols in _rows(source, text, "hour,dayahead,realtime"):
        if len(cols) != 3:
            raise IngestionError(source, line, f"expected 3 columns, got {len(cols)}")
        hour = _number(source, line, cols[0], "hour")
        if hour != int(hour) or not 0 <= int(hour) < t_slots:
            raise IngestionError(source, line, f"hour {cols[0]} outside 0..{t_slots - 1}")
        h = int(hour)
        if not np.isnan(beta[h]):
            raise IngestionError(source, line, f"duplicate hour {h}")
        b = _number(source, line, cols[1], "day-ahead price")
        a = _number(source, line, cols[2], "real-time price")
        if b < 0 or a < 0:
            raise IngestionError(source, line, "negative price")
        beta[h], alpha[h] = b, a
        count += 1
    if count != t_slots:
        raise IngestionError(source, None, f"expected {t_slots} data rows, got {count}")
    return MarketState(beta, alpha)


def ingest_price_traces(paths, t_slots: int) -> MarketProcess:
    """Uniform iid market process from one price-trace CSV per state."""
    named = [(str(p), Path(p).read_text(encoding="utf-8")) for p in paths]
    return ingest_price_trace_texts(named, t_slots)


def ingest_price_trace_texts(named_texts, t_slots: int) -> MarketProcess:
    states = tuple(parse_price_trace(name, text, t_slots) for name, text in named_texts)
    if not states:
        raise IngestionError("<price traces>", None, "need at least one trace file")
    return MarketProcess(states=states, mode="iid")


def parse_wind_trace(source: str, text: str, t_slots: int) -> tuple:
    """Per-slot empirical distributions from a ``day,hour,power_100mw`` CSV."""
    seen: dict[tuple[int, int], float] = {}
    for line, cols in _rows(source, text, "day,hour,power_100mw"):
        if len(cols) != 3:
            raise IngestionError(source, line, f"expected 3 columns, got {len(cols)}")
        day = _number(source, line, cols[0], "day")
        hour = _number(source, line, cols[1], "hour")
        power = _number(source, line, cols[2], "power")
        if day != int(day):
            raise IngestionError(source, line, f"bad day index {cols[0]!r}")
        if hour != int(hour) or not 0 <= int(hour) < t_slots:
            raise IngestionError(source, line, f"hour {cols[1]} outside 0..{t_slots - 1}")
        if power < 0:
            raise IngestionError(source, line, "negative power")
        key = (int(day), int(hour))
        if key in seen:
            raise IngestionError(source, line, f"duplicate (day, hour) pair {key}")
        seen[key] = power
    if not seen:
        raise IngestionError(source, None, "no data rows")
    days = sorted({d for d, _ in seen})
    for d in days:
        for h in range(t_slots):
            if (d, h) not in seen:
                raise IngestionError(source, None, f"missing (day, hour) pair ({d}, {h})")
    return tuple(
        EmpiricalDistribution.from_samples([seen[(d, h)] for d in days]) for h in range(t_slots)
    )


def ingest_wind_trace(path, t_slots: int) -> tuple:
    return parse_wind_trace(str(path), Path(path).read_text(encoding="utf-8"), t_slots)


def dump_distributions(dists) -> str:
    """Full-precision ``slot,value,weight`` dump (round-trips exactly)."""
    out = io.StringIO()
    out.write("slot,value,weight\n")
    for t, d in enumerate(dists):
        for v, w in zip(d.values, d.weights):
            out.write(f"{t},{float(v)!r},{float(w)!r}\n")
    return out.getvalue()


def parse_distributions(text: str, source: str = "<atoms>") -> tuple:
    """Inverse of :func:`dump_distributions`."""
    per_slot: dict[int, list[tuple[float, float]]] = {}
    for line, cols in _rows(source, text, "slot,value,weight"):
        if len(cols) != 3:
            raise IngestionError(source, line, f"expected 3 columns, got {len(cols)}")
        slot = _number(source, line, cols[0], "slot")
        if slot != int(slot) or slot < 0:
            raise IngestionError(source, line, f"bad slot index {cols[0]!r}")
        value = _number(source, line, cols[1], "value")
        weight = _number(source, line, cols[2], "weight")
        per_slot.setdefault(int(slot), []).append((value, weight))
    if not per_slot:
        raise IngestionError(source, None, "no data rows")
    slots = sorted(per_slot)
    if slots != list(range(len(slots))):
        raise IngestionError(source, None, f"slots must be contiguous from 0, got {slots}")
    return tuple(EmpiricalDistribution.from_atoms(per_slot[t]) for t in slots)
