"""Price ingestion, return construction, and tabular persistence.

Every file this module writes is tab-separated text with `# key = value`
metadata lines and a `# columns:` header, numbers rendered with 17
significant digits so a load reproduces a save bit for bit. Output is
byte-stable: identical inputs always produce identical files.

Input price files are CSV with a header row naming `date` and `close`
columns (extras ignored); dates are ISO-8601, one row per trading day.
Calendar gaps are treated as consecutive trading days (dt = 1 trading
day).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date as _date

import numpy as np

from .estimator import InsufficientDataError, ReturnSeries, VolSeries
from .models import ModelKind, ModelParams, ModelSpec
from .sim import SimConfig, SimPath


class DataError(ValueError):
    """Unreadable, malformed, or invalid input data."""


@dataclass(frozen=True)
class PriceSeries:
    """Ordered (date, close) records with a source label."""

    dates: list[str]
    close: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.close, dtype=float)
        if len(self.dates) != arr.size:
            raise DataError("dates and close must have equal length")
        if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
            raise DataError("prices must be finite and > 0")
        if any(nxt <= prev for prev, nxt in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        object.__setattr__(self, "close", arr)

    def __len__(self) -> int:
        return len(self.dates)


def load_prices(path, label: str | None = None) -> PriceSeries:
    """Read a CSV of daily closes; rows are validated and date-sorted."""
    rows: list[tuple[str, float]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        cols = [c.strip().lower() for c in header]
        try:
            i_date = cols.index("date")
            i_close = cols.index("close")
        except ValueError:
            raise DataError(f"{path}: header must name 'date' and 'close' columns") from None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) <= max(i_date, i_close):
                raise DataError(f"{path} row {lineno}: too few columns")
            raw_date = row[i_date].strip()
            try:
                _date.fromisoformat(raw_date)
            except ValueError:
                raise DataError(f"{path} row {lineno}: bad date {raw_date!r}") from None
            try:
                close = float(row[i_close])
            except ValueError:
                raise DataError(f"{path} row {lineno}: bad close {row[i_close]!r}") from None
            if not (math.isfinite(close) and close > 0):
                raise DataError(f"{path} row {lineno}: close must be > 0, got {close!r}")
            rows.append((raw_date, close))
    rows.sort(key=lambda r: r[0])
    for (d1, _), (d2, _) in zip(rows, rows[1:]):
        if d1 == d2:
            raise DataError(f"{path}: duplicate date {d1}")
    return PriceSeries(
        dates=[r[0] for r in rows],
        close=np.array([r[1] for r in rows]),
        label=label if label is not None else str(path),
    )


def to_returns(prices: PriceSeries) -> ReturnSeries:
    """Zero-mean daily log-return increments: ln(S(t+1)/S(t)) minus the
    sample mean, which removes any constant drift exactly."""
    if len(prices) < 3:
        raise InsufficientDataError("need at least 3 price records")
    raw = np.diff(np.log(prices.close))
    dx = raw - raw.mean()
    # One more centering pass kills the last rounding residue.
    dx = dx - dx.mean()
    return ReturnSeries(dx, label=prices.label)


# ---------------------------------------------------------------------------
# Tab-separated persistence
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def _fmt_sigma(v: float) -> str:
    return "NA" if math.isnan(v) else format(v, ".17g")


def write_table(path, meta: dict, columns: list[tuple[str, list]]) -> None:
    """Write metadata plus named columns; all rows must align."""
    lengths = {len(vals) for _, vals in columns}
    if len(lengths) > 1:
        raise DataError("columns must have equal length")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in meta.items():
            fh.write(f"# {key} = {_fmt(value)}\n")
        fh.write("# columns: " + "\t".join(name for name, _ in columns) + "\n")
        n = lengths.pop() if lengths else 0
        for i in range(n):
            fh.write("\t".join(_fmt(vals[i]) for _, vals in columns) + "\n")


def read_table(path) -> tuple[dict, dict]:
    """Read a file written by write_table: (meta, columns-as-strings)."""
    meta: dict[str, str] = {}
    names: list[str] | None = None
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("columns:"):
                    names = body[len("columns:"):].split("\t")
                    names = [n.strip() for n in names if n.strip()]
                elif "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            if names is None:
                raise DataError(f"{path} line {lineno}: data before '# columns:' header")
            parts = line.split("\t")
            if len(parts) != len(names):
                raise DataError(
                    f"{path} line {lineno}: expected {len(names)} columns, got {len(parts)}"
                )
            rows.append(parts)
    if names is None:
        raise DataError(f"{path}: missing '# columns:' header")
    columns = {name: [row[j] for row in rows] for j, name in enumerate(names)}
    return meta, columns


def _floats(strings, path, name) -> np.ndarray:
    try:
        return np.array([float(s) for s in strings], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: bad number in column {name}: {exc}") from None


def _spec_meta(spec: ModelSpec) -> dict:
    return {"model": spec.kind.value, "k": spec.k, "alpha": spec.alpha, "m": spec.m}


def _spec_from_meta(meta: dict) -> ModelSpec:
    params = ModelParams(k=float(meta["k"]), alpha=float(meta["alpha"]), m=float(meta["m"]))
    return ModelSpec(ModelKind(meta["model"]), params)


def save_series(path, obj) -> None:
    """Persist a ReturnSeries, VolSeries, SimPath, or PriceSeries."""
    if isinstance(obj, ReturnSeries):
        meta = {"type": "ReturnSeries", "label": obj.label, "n": len(obj)}
        write_table(path, meta, [("index", list(range(len(obj)))), ("dx", list(obj.dx))])
    elif isinstance(obj, VolSeries):
        meta = {"type": "VolSeries", "estimator": obj.estimator_name, "n": len(obj)}
        if obj.spec is not None:
            meta.update(_spec_meta(obj.spec))
        cols = [
            ("index", list(range(len(obj)))),
            ("sigma", [_fmt_sigma(v) for v in obj.sigma]),
            ("estimator", [obj.estimator_name] * len(obj)),
        ]
        write_table(path, meta, cols)
    elif isinstance(obj, SimPath):
        cfg = obj.config
        meta = {
            "type": "SimPath",
            **_spec_meta(cfg.spec),
            "n_steps": cfg.n_steps,
            "dt": cfg.dt,
            "seed": cfg.seed,
            "y0": "stationary" if cfg.y0 is None else cfg.y0,
        }
        cols = [
            ("step", list(range(obj.x.size))),
            ("x", list(obj.x)),
            ("y", list(obj.y)),
            ("sigma", list(obj.sigma)),
        ]
        write_table(path, meta, cols)
    elif isinstance(obj, PriceSeries):
        meta = {"type": "PriceSeries", "label": obj.label, "n": len(obj)}
        write_table(path, meta, [("date", obj.dates), ("close", list(obj.close))])
    else:
        raise DataError(f"cannot save object of type {type(obj).__name__}")


def load_series(path):
    """Load whatever save_series wrote; the type tag picks the schema."""
    meta, columns = read_table(path)
    kind = meta.get("type")
    if kind == "ReturnSeries":
        _require(columns, path, "index", "dx")
        return ReturnSeries(_floats(columns["dx"], path, "dx"), label=meta.get("label", ""))
    if kind == "VolSeries":
        _require(columns, path, "index", "sigma", "estimator")
        sigma = np.array(
            [float("nan") if s == "NA" else float(s) for s in columns["sigma"]], dtype=float
        )
        names = set(columns["estimator"])
        if names and names != {meta.get("estimator")}:
            raise DataError(f"{path}: estimator column disagrees with metadata")
        spec = _spec_from_meta(meta) if "model" in meta else None
        return VolSeries(sigma, meta["estimator"], spec=spec)
    if kind == "SimPath":
        _require(columns, path, "step", "x", "y", "sigma")
        spec = _spec_from_meta(meta)
        y0 = None if meta["y0"] == "stationary" else float(meta["y0"])
        cfg = SimConfig(
            spec=spec,
            n_steps=int(meta["n_steps"]),
            dt=float(meta["dt"]),
            seed=int(meta["seed"]),
            y0=y0,
        )
        return SimPath(
            x=_floats(columns["x"], path, "x"),
            y=_floats(columns["y"], path, "y"),
            sigma=_floats(columns["sigma"], path, "sigma"),
            config=cfg,
        )
    if kind == "PriceSeries":
        _require(columns, path, "date", "close")
        return PriceSeries(
            dates=list(columns["date"]),
            close=_floats(columns["close"], path, "close"),
            label=meta.get("label", ""),
        )
    raise DataError(f"{path}: unknown or missing series type {kind!r}")


def _require(columns: dict, path, *names: str) -> None:
    missing = [n for n in names if n not in columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
