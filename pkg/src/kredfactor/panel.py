"""Monthly macro panel: parsing, stationarity transforms, windowing, standardization.

Panels are stored series-by-time (``q x T``) with ``NaN`` marking missing cells.
The input format is the FRED-MD layout: a header row (``sasdate`` followed by
mnemonics), a ``Transform:`` row with integer codes, then one row per month.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "TCODES",
    "LEADS_CONSUMED",
    "GROUP_NAMES",
    "DROP_ALIASES",
    "PanelError",
    "Month",
    "SeriesMeta",
    "Panel",
    "StandardizedPanel",
    "parse_month",
    "format_month",
    "read_metadata",
    "load_kred_metadata",
    "parse_panel_csv",
    "read_panel",
    "write_panel_csv",
    "apply_tcode",
    "transform_panel",
    "extract_balanced",
    "standardize",
]

TCODES = (1, 2, 3, 4, 5, 6, 7)
# leading observations lost to differencing
LEADS_CONSUMED = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}

GROUP_NAMES = {
    0: "unknown",
    1: "output and income",
    2: "labor market",
    3: "housing",
    4: "consumption, orders and inventories",
    5: "money and credit",
    6: "interest and exchange rates",
    7: "prices",
}

# alternate spellings of the regional housing-start mnemonics
DROP_ALIASES = {
    "HOUSETNE": "HOUSTNE",
    "HOUSEMW": "HOUSTMW",
    "HOUSETMW": "HOUSTMW",
    "HOUSETS": "HOUSTS",
    "HOUSETW": "HOUSTW",
}

MISSING_TOKENS = frozenset({"", "NA"})

Month = tuple[int, int]


class PanelError(ValueError):
    """Malformed or unusable panel input.

    ``row`` and ``column`` are 1-based file coordinates when the problem can be
    pinned to a cell; either may be ``None``.
    """

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


def parse_month(text: str) -> Month:
    """Parse ``YYYY-MM`` into ``(year, month)``."""
    try:
        year_s, month_s = text.strip().split("-")
        year, month = int(year_s), int(month_s)
    except ValueError:
        raise PanelError(f"bad month {text!r}, expected YYYY-MM") from None
    if not 1 <= month <= 12:
        raise PanelError(f"bad month {text!r}, month must be 1-12")
    return year, month


def format_month(m: Month) -> str:
    return f"{m[0]:04d}-{m[1]:02d}"


def _next_month(m: Month) -> Month:
    year, month = m
    return (year + 1, 1) if month == 12 else (year, month + 1)


def _month_index(m: Month) -> int:
    return m[0] * 12 + (m[1] - 1)


def _parse_sasdate(text: str, row: int) -> Month:
    parts = text.strip().split("/")
    try:
        if len(parts) != 3:
            raise ValueError
        month, day, year = (int(p) for p in parts)
    except ValueError:
        raise PanelError(f"bad date {text!r}, expected M/D/YYYY", row=row, column=1) from None
    if not (1 <= month <= 12 and 1 <= day <= 31):
        raise PanelError(f"bad date {text!r}", row=row, column=1)
    return year, month


def _parse_tcode(text: str, row: int, column: int, mnemonic: str) -> int:
    try:
        value = float(text)
    except ValueError:
        value = float("nan")
    if not value.is_integer() or int(value) not in TCODES:
        raise PanelError(
            f"invalid transform code {text!r} for {mnemonic}; allowed codes are 1-7",
            row=row,
            column=column,
        )
    return int(value)


@dataclass(frozen=True)
class SeriesMeta:
    """Identity of one series. ``group`` 0 means no metadata was supplied."""

    id: int
    mnemonic: str
    tcode: int
    group: int = 0
    description: str = ""

    def __post_init__(self) -> None:
        if self.tcode not in TCODES:
            raise PanelError(f"{self.mnemonic}: transform code {self.tcode} outside 1-7")
        if not 0 <= self.group <= 7:
            raise PanelError(f"{self.mnemonic}: group {self.group} outside 1-7")
        if not self.mnemonic:
            raise PanelError("empty mnemonic")
        if self.id < 1:
            raise PanelError(f"{self.mnemonic}: id must be positive")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Panel:
    """Dated ``q x T`` matrix; row ``i`` belongs to ``meta[i]``, column ``t`` to ``dates[t]``."""

    dates: tuple[Month, ...]
    meta: tuple[SeriesMeta, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "dates", tuple(tuple(d) for d in self.dates))
        object.__setattr__(self, "meta", tuple(self.meta))
        object.__setattr__(self, "values", _readonly(self.values))
        q, T = len(self.meta), len(self.dates)
        if self.values.shape != (q, T):
            raise PanelError(f"values shape {self.values.shape} does not match q={q}, T={T}")
        seen = set()
        for m in self.meta:
            if m.mnemonic in seen:
                raise PanelError(f"duplicate mnemonic {m.mnemonic}")
            seen.add(m.mnemonic)
        for t in range(1, T):
            if self.dates[t] != _next_month(self.dates[t - 1]):
                raise PanelError(
                    f"dates not consecutive: {format_month(self.dates[t - 1])} "
                    f"followed by {format_month(self.dates[t])}"
                )

    @property
    def q(self) -> int:
        return len(self.meta)

    @property
    def T(self) -> int:
        return len(self.dates)

    @property
    def mnemonics(self) -> list[str]:
        return [m.mnemonic for m in self.meta]

    def index_of(self, mnemonic: str) -> int:
        for i, m in enumerate(self.meta):
            if m.mnemonic == mnemonic:
                return i
        raise KeyError(mnemonic)

    def missing_counts(self) -> dict[str, int]:
        counts = np.isnan(self.values).sum(axis=1)
        return {m.mnemonic: int(c) for m, c in zip(self.meta, counts)}


@dataclass(frozen=True, eq=False)
class StandardizedPanel:
    """Rows of ``base`` centred and scaled to unit second moment (divisor ``T``)."""

    base: Panel
    means: np.ndarray
    sds: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        for name in ("means", "sds", "values"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def q(self) -> int:
        return self.base.q

    @property
    def T(self) -> int:
        return self.base.T

    @property
    def dates(self) -> tuple[Month, ...]:
        return self.base.dates

    @property
    def meta(self) -> tuple[SeriesMeta, ...]:
        return self.base.meta

    @property
    def mnemonics(self) -> list[str]:
        return self.base.mnemonics

    def unstandardize(self, z: np.ndarray | None = None) -> np.ndarray:
        z = self.values if z is None else np.asarray(z, dtype=float)
        return z * self.sds[:, None] + self.means[:, None]


# --------------------------------------------------------------------------- #
# metadata sidecar
# --------------------------------------------------------------------------- #


def read_metadata(source: str | Path | io.TextIOBase) -> dict[str, SeriesMeta]:
    """Read a sidecar table with columns ``id, mnemonic, tcode, group, description``."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_metadata(fh)
    reader = csv.DictReader(source)
    required = {"id", "mnemonic", "tcode", "group"}
    if reader.fieldnames is None or not required <= set(reader.fieldnames):
        raise PanelError(f"metadata needs columns {sorted(required)}", row=1)
    out: dict[str, SeriesMeta] = {}
    for lineno, rec in enumerate(reader, start=2):
        try:
            meta = SeriesMeta(
                id=int(rec["id"]),
                mnemonic=rec["mnemonic"].strip(),
                tcode=int(rec["tcode"]),
                group=int(rec["group"]),
                description=(rec.get("description") or "").strip(),
            )
        except (TypeError, ValueError) as exc:
            raise PanelError(f"bad metadata record: {exc}", row=lineno) from None
        if meta.mnemonic in out:
            raise PanelError(f"duplicate mnemonic {meta.mnemonic} in metadata", row=lineno)
        out[meta.mnemonic] = meta
    return out


def load_kred_metadata() -> dict[str, SeriesMeta]:
    """The bundled 88-series KRED variable list (ids, codes, groups 1-7)."""
    text = resources.files("kredfactor").joinpath("data/kred_series.csv").read_text("utf-8")
    return read_metadata(io.StringIO(text))


# --------------------------------------------------------------------------- #
# CSV input / output
# --------------------------------------------------------------------------- #


def parse_panel_csv(
    text: str | io.TextIOBase, metadata: Mapping[str, SeriesMeta] | None = None
) -> Panel:
    """Parse a FRED-MD style CSV into a :class:`Panel`.

    Empty cells and ``NA`` are missing. Ids, groups and descriptions come from
    ``metadata`` keyed by mnemonic; series absent from it get ``group=0`` and
    their 1-based column position as id. Transform codes always come from the
    file's own ``Transform:`` row.
    """
    if not isinstance(text, str):
        text = text.read()
    rows = list(csv.reader(io.StringIO(text)))
    # trailing blank lines are common in exported files
    while rows and all(not c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise PanelError("empty input", row=1)
    if len(rows) < 2:
        raise PanelError("missing Transform: row", row=2)

    header = [c.strip() for c in rows[0]]
    width = len(header)
    if width < 2:
        raise PanelError("header has no series columns", row=1)
    mnemonics = header[1:]
    seen: dict[str, int] = {}
    for j, name in enumerate(mnemonics, start=2):
        if not name:
            raise PanelError("empty mnemonic in header", row=1, column=j)
        if name in seen:
            raise PanelError(
                f"duplicate mnemonic {name} (first at column {seen[name]})", row=1, column=j
            )
        seen[name] = j

    trow = [c.strip() for c in rows[1]]
    if len(trow) != width:
        raise PanelError(f"ragged row: {len(trow)} cells, header has {width}", row=2)
    if trow[0].rstrip(":").lower() != "transform":
        raise PanelError(f"expected 'Transform:' label, found {trow[0]!r}", row=2, column=1)
    tcodes = [_parse_tcode(c, 2, j, name) for j, (c, name) in enumerate(zip(trow[1:], mnemonics), start=2)]

    metadata = metadata or {}
    meta = []
    for j, (name, code) in enumerate(zip(mnemonics, tcodes), start=1):
        side = metadata.get(name)
        if side is None:
            meta.append(SeriesMeta(id=j, mnemonic=name, tcode=code))
        else:
            meta.append(
                SeriesMeta(id=side.id, mnemonic=name, tcode=code, group=side.group,
                           description=side.description)
            )

    body = rows[2:]
    dates: list[Month] = []
    values = np.full((len(mnemonics), len(body)), np.nan)
    for t, rec in enumerate(body):
        lineno = t + 3
        if len(rec) != width:
            raise PanelError(f"ragged row: {len(rec)} cells, header has {width}", row=lineno)
        month = _parse_sasdate(rec[0], lineno)
        if dates and month != _next_month(dates[-1]):
            raise PanelError(
                f"non-consecutive month {format_month(month)} after {format_month(dates[-1])}",
                row=lineno,
                column=1,
            )
        dates.append(month)
        for i, cell in enumerate(rec[1:]):
            cell = cell.strip()
            if cell in MISSING_TOKENS:
                continue
            try:
                values[i, t] = float(cell)
            except ValueError:
                raise PanelError(
                    f"non-numeric value {cell!r} for {mnemonics[i]}", row=lineno, column=i + 2
                ) from None
            if not np.isfinite(values[i, t]):
                raise PanelError(
                    f"non-finite value {cell!r} for {mnemonics[i]}", row=lineno, column=i + 2
                )
    if not dates:
        raise PanelError("no data rows", row=3)
    return Panel(dates=tuple(dates), meta=tuple(meta), values=values)


def read_panel(path: str | Path, metadata: Mapping[str, SeriesMeta] | None = None) -> Panel:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_panel_csv(fh.read(), metadata)


def write_panel_csv(panel: Panel, dest: str | Path | io.TextIOBase) -> None:
    """Write ``panel`` in the same layout :func:`parse_panel_csv` reads."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_panel_csv(panel, fh)
        return
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(["sasdate", *panel.mnemonics])
    w.writerow(["Transform:", *(m.tcode for m in panel.meta)])
    for t, (year, month) in enumerate(panel.dates):
        col = panel.values[:, t]
        w.writerow([f"{month}/1/{year}", *("" if np.isnan(v) else repr(float(v)) for v in col)])


# --------------------------------------------------------------------------- #
# transforms
# --------------------------------------------------------------------------- #


def _diff(x: np.ndarray) -> np.ndarray:
    out = np.full_like(x, np.nan)
    out[1:] = x[1:] - x[:-1]
    return out


def apply_tcode(x: Sequence[float] | np.ndarray, code: int) -> np.ndarray:
    """Apply a FRED-MD transformation code to one series.

    1 level, 2 first difference, 3 second difference, 4 log, 5 log difference,
    6 second log difference, 7 change in the growth rate ``x_t / x_{t-1} - 1``.
    The result has the input's length; positions consumed by differencing, and
    positions depending on a missing input, are ``NaN``.
    """
    if code not in TCODES:
        raise PanelError(f"transform code {code} outside 1-7")
    x = np.asarray(x, dtype=float)
    if code >= 4:
        bad = np.flatnonzero(~np.isnan(x) & (x <= 0))
        if bad.size:
            raise PanelError(
                f"transform code {code} needs positive values; "
                f"got {x[bad[0]]!r} at date index {int(bad[0])}"
            )
    if code == 1:
        return x.copy()
    if code == 2:
        return _diff(x)
    if code == 3:
        return _diff(_diff(x))
    lx = np.log(x) if code in (4, 5, 6) else None
    if code == 4:
        return lx
    if code == 5:
        return _diff(lx)
    if code == 6:
        return _diff(_diff(lx))
    growth = np.full_like(x, np.nan)
    growth[1:] = x[1:] / x[:-1] - 1.0
    return _diff(growth)


def transform_panel(p: Panel) -> Panel:
    """Replace each row by its transformed version; dates and metadata unchanged."""
    out = np.empty_like(p.values)
    for i, m in enumerate(p.meta):
        try:
            out[i] = apply_tcode(p.values[i], m.tcode)
        except PanelError as exc:
            raise PanelError(f"{m.mnemonic}: {exc}") from None
    return Panel(dates=p.dates, meta=p.meta, values=out)


def _resolve_drops(p: Panel, drop: Iterable[str]) -> set[str]:
    names = set(p.mnemonics)
    resolved = set()
    unknown = []
    for d in drop:
        d = d.strip()
        if not d:
            continue
        if d not in names and DROP_ALIASES.get(d) in names:
            d = DROP_ALIASES[d]
        if d not in names:
            unknown.append(d)
        resolved.add(d)
    if unknown:
        raise PanelError(f"unknown mnemonic(s) in drop list: {', '.join(unknown)}")
    return resolved


def extract_balanced(p: Panel, start: Month, end: Month, drop: Iterable[str] = ()) -> Panel:
    """Restrict ``p`` to ``[start, end]`` minus ``drop``; the result must have no gaps.

    Transform before windowing so differencing draws on pre-window history.
    """
    start, end = tuple(start), tuple(end)
    if _month_index(start) > _month_index(end):
        raise PanelError(f"empty window {format_month(start)}..{format_month(end)}")
    if not p.dates or start < p.dates[0] or end > p.dates[-1]:
        span = f"{format_month(p.dates[0])}..{format_month(p.dates[-1])}" if p.dates else "empty"
        raise PanelError(
            f"window {format_month(start)}..{format_month(end)} outside panel range {span}"
        )
    dropped = _resolve_drops(p, drop)
    keep = [i for i, m in enumerate(p.meta) if m.mnemonic not in dropped]
    if not keep:
        raise PanelError("every series dropped")
    t0 = p.dates.index(start)
    t1 = p.dates.index(end) + 1
    sub = p.values[keep, t0:t1]
    holes = np.argwhere(np.isnan(sub))
    if holes.size:
        cells = [f"({p.meta[keep[i]].mnemonic}, {format_month(p.dates[t0 + t])})" for i, t in holes]
        raise PanelError(f"{len(cells)} missing value(s) in window: " + ", ".join(cells))
    return Panel(dates=p.dates[t0:t1], meta=tuple(p.meta[i] for i in keep), values=sub)


def standardize(p: Panel) -> StandardizedPanel:
    """Centre each row and scale by its root mean square deviation (divisor ``T``)."""
    x = p.values
    if np.isnan(x).any():
        i, t = np.argwhere(np.isnan(x))[0]
        raise PanelError(
            f"cannot standardize with missing values (first: {p.meta[i].mnemonic}, "
            f"{format_month(p.dates[t])})"
        )
    means = x.mean(axis=1)
    dev = x - means[:, None]
    sds = np.sqrt((dev**2).mean(axis=1))
    flat = np.flatnonzero(sds < 1e-12)
    if flat.size:
        names = ", ".join(p.meta[i].mnemonic for i in flat)
        raise PanelError(f"constant series cannot be standardized: {names}")
    z = dev / sds[:, None]
    # second pass removes the rounding left in the first centring
    z -= z.mean(axis=1, keepdims=True)
    return StandardizedPanel(base=p, means=means, sds=sds, values=z)
