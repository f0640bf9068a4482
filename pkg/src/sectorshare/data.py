"""Survey observation ingest, validation, and dataset assembly.

The input is a CSV with columns ``country,region,method,sector,year,
proportion,se``. Proportions are sector shares of users of one modern
contraceptive method. Each observation carries a known sampling standard
error. Rows are never dropped silently: anything excluded is recorded
with a reason code on the resulting :class:`Dataset`.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InputOutputError, ParseError, ValidationError
from .regions import lookup_region

log = logging.getLogger(__name__)

SECTOR_LABELS = ("public", "private_medical", "private_other")
METHOD_LABELS = (
    "female_sterilization",
    "oc_pills",
    "implants",
    "iud",
    "injectables",
)

CSV_COLUMNS = ("country", "region", "method", "sector", "year", "proportion", "se")

# Sectors are 1-based ids: 1 public, 2 private medical, 3 other private.
# Only sectors 1 and 2 enter the likelihood; sector 3 is the complement.
N_SECTORS = 3

DEFAULT_WINDOW = (1990.0, 2025.0)


def sector_id(label: str) -> int:
    try:
        return SECTOR_LABELS.index(label) + 1
    except ValueError:
        raise ValidationError(
            f"unknown sector label {label!r}; expected one of {SECTOR_LABELS}"
        ) from None


@dataclass(frozen=True)
class Observation:
    """One survey measurement of a sector share."""

    country: str
    region: str
    method: str
    sector: int  # 1..3
    year: float
    proportion: float
    se: float
    line: int | None = None

    def __post_init__(self):
        if self.sector not in (1, 2, 3):
            raise ValidationError(f"sector id must be 1, 2, or 3, got {self.sector}")
        if not math.isfinite(self.year):
            raise ValidationError(f"year must be finite, got {self.year}")
        if not 0.0 <= self.proportion <= 1.0:
            raise ParseError(
                f"proportion {self.proportion} outside [0, 1]", self.line
            )
        if not (self.se > 0.0 and self.se <= 1.0):
            raise ParseError(
                f"standard error {self.se} outside (0, 1]", self.line
            )


@dataclass(frozen=True)
class Exclusion:
    line: int | None
    reason: str
    detail: str


@dataclass
class Dataset:
    """Validated observations in array form plus label tables.

    Attributes
    ----------
    countries, regions, methods:
        Label tables. ``country_region[c]`` gives the region index of
        country ``c``. Method order follows the canonical vocabulary.
    country_idx, method_idx, sector, year, value, se:
        Parallel observation arrays.
    window:
        Estimation window (start year, end year), inclusive.
    year_grid:
        Years at which estimates are produced.
    exclusions:
        Rows excluded during ingest, each with a reason code.
    """

    countries: tuple[str, ...]
    regions: tuple[str, ...]
    methods: tuple[str, ...]
    country_region: np.ndarray
    country_idx: np.ndarray
    method_idx: np.ndarray
    sector: np.ndarray
    year: np.ndarray
    value: np.ndarray
    se: np.ndarray
    window: tuple[float, float] = DEFAULT_WINDOW
    year_grid: np.ndarray = field(default_factory=lambda: np.arange(1990.0, 2026.0))
    exclusions: list[Exclusion] = field(default_factory=list)
    source_digest: str | None = None

    def __post_init__(self):
        n = len(self.country_idx)
        for name in ("method_idx", "sector", "year", "value", "se"):
            if len(getattr(self, name)) != n:
                raise ValidationError(f"observation array {name!r} length mismatch")
        if len(self.country_region) != len(self.countries):
            raise ValidationError("country_region length must match countries")
        if n and (self.year.min() < self.window[0] or self.year.max() > self.window[1]):
            raise ValidationError("observation year outside the estimation window")

    @property
    def n_obs(self) -> int:
        return len(self.country_idx)

    @property
    def n_countries(self) -> int:
        return len(self.countries)

    @property
    def n_methods(self) -> int:
        return len(self.methods)

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def survey_years(self, c: int) -> np.ndarray:
        """Distinct survey years of country ``c``, ascending."""
        return np.unique(self.year[self.country_idx == c])

    def most_recent_survey_year(self, c: int) -> float:
        years = self.survey_years(c)
        if len(years) == 0:
            raise ValidationError(f"country {self.countries[c]!r} has no observations")
        return float(years[-1])

    def data_period(self, c: int) -> tuple[float, float]:
        """(first, last) survey year of country ``c``."""
        years = self.survey_years(c)
        if len(years) == 0:
            raise ValidationError(f"country {self.countries[c]!r} has no observations")
        return float(years[0]), float(years[-1])

    def observations(self) -> list[Observation]:
        return [
            Observation(
                country=self.countries[self.country_idx[i]],
                region=self.regions[self.country_region[self.country_idx[i]]],
                method=self.methods[self.method_idx[i]],
                sector=int(self.sector[i]),
                year=float(self.year[i]),
                proportion=float(self.value[i]),
                se=float(self.se[i]),
            )
            for i in range(self.n_obs)
        ]

    def subset(self, keep: np.ndarray) -> "Dataset":
        """Dataset restricted to observations where ``keep`` is True.

        Label tables are preserved so indices stay comparable across
        subsets of the same parent dataset.
        """
        keep = np.asarray(keep, dtype=bool)
        return Dataset(
            countries=self.countries,
            regions=self.regions,
            methods=self.methods,
            country_region=self.country_region.copy(),
            country_idx=self.country_idx[keep].copy(),
            method_idx=self.method_idx[keep].copy(),
            sector=self.sector[keep].copy(),
            year=self.year[keep].copy(),
            value=self.value[keep].copy(),
            se=self.se[keep].copy(),
            window=self.window,
            year_grid=self.year_grid.copy(),
            exclusions=list(self.exclusions),
            source_digest=self.source_digest,
        )

    def to_csv(self) -> str:
        """Serialize back to the ingest CSV format."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for i in range(self.n_obs):
            c = self.country_idx[i]
            writer.writerow(
                [
                    self.countries[c],
                    self.regions[self.country_region[c]],
                    self.methods[self.method_idx[i]],
                    SECTOR_LABELS[self.sector[i] - 1],
                    format(self.year[i], "g"),
                    repr(float(self.value[i])),
                    repr(float(self.se[i])),
                ]
            )
        return buf.getvalue()


def build_dataset(
    observations: list[Observation],
    *,
    window: tuple[float, float] = DEFAULT_WINDOW,
    year_grid: np.ndarray | None = None,
    exclusions: list[Exclusion] | None = None,
    source_digest: str | None = None,
) -> Dataset:
    """Assemble a :class:`Dataset` from validated observations."""
    if not observations:
        raise ValidationError("no observations to assemble")
    countries = tuple(sorted({o.country for o in observations}))
    regions = tuple(sorted({o.region for o in observations}))
    seen_methods = {o.method for o in observations}
    methods = tuple(m for m in METHOD_LABELS if m in seen_methods) + tuple(
        sorted(seen_methods - set(METHOD_LABELS))
    )
    c_of = {c: i for i, c in enumerate(countries)}
    r_of = {r: i for i, r in enumerate(regions)}
    m_of = {m: i for i, m in enumerate(methods)}

    country_region = np.full(len(countries), -1, dtype=np.int64)
    for o in observations:
        c = c_of[o.country]
        r = r_of[o.region]
        if country_region[c] == -1:
            country_region[c] = r
        elif country_region[c] != r:
            raise ValidationError(
                f"country {o.country!r} mapped to more than one region"
            )

    ds = Dataset(
        countries=countries,
        regions=regions,
        methods=methods,
        country_region=country_region,
        country_idx=np.array([c_of[o.country] for o in observations], dtype=np.int64),
        method_idx=np.array([m_of[o.method] for o in observations], dtype=np.int64),
        sector=np.array([o.sector for o in observations], dtype=np.int64),
        year=np.array([o.year for o in observations], dtype=np.float64),
        value=np.array([o.proportion for o in observations], dtype=np.float64),
        se=np.array([o.se for o in observations], dtype=np.float64),
        window=window,
        year_grid=(
            np.arange(math.ceil(window[0]), math.floor(window[1]) + 1, dtype=np.float64)
            if year_grid is None
            else np.asarray(year_grid, dtype=np.float64)
        ),
        exclusions=list(exclusions or []),
        source_digest=source_digest,
    )
    _check_sector_sums(ds)
    return ds


def _check_sector_sums(ds: Dataset) -> None:
    """Shares of one survey must sum to 1 when all three sectors appear."""
    cells: dict[tuple[int, int, float], dict[int, float]] = {}
    for i in range(ds.n_obs):
        key = (int(ds.country_idx[i]), int(ds.method_idx[i]), float(ds.year[i]))
        cells.setdefault(key, {})[int(ds.sector[i])] = float(ds.value[i])
    for (c, m, year), shares in cells.items():
        if len(shares) == N_SECTORS:
            total = sum(shares.values())
            if abs(total - 1.0) > 0.01:
                raise ValidationError(
                    f"sector shares for {ds.countries[c]}/{ds.methods[m]}/{year:g} "
                    f"sum to {total:.4f}, expected 1 within 0.01"
                )


def _float_field(raw: str, name: str, line: int) -> float:
    try:
        x = float(raw)
    except ValueError:
        raise ParseError(f"column {name!r} is not numeric: {raw!r}", line) from None
    if not math.isfinite(x):
        raise ParseError(f"column {name!r} is not finite: {raw!r}", line)
    return x


def parse_observations(
    source: str | os.PathLike | io.TextIOBase,
    *,
    window: tuple[float, float] = DEFAULT_WINDOW,
    year_grid: np.ndarray | None = None,
    strict_window: bool = False,
) -> Dataset:
    """Parse and validate an observation CSV into a :class:`Dataset`.

    Proportion units are detected per file: when more than half the
    proportion values exceed 1 the file is taken to be in percent and
    every proportion and standard error is divided by 100 (logged).
    Otherwise values are fractions and any single proportion above 1 is
    a validation error. Rows outside the estimation window are excluded
    with reason code ``year_outside_window`` (or rejected when
    ``strict_window`` is set). Nothing else is ever dropped.
    """
    if isinstance(source, io.TextIOBase):
        text = source.read()
        digest = hashlib.sha256(text.encode()).hexdigest()
    else:
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputOutputError(f"cannot read data file {source}: {exc}") from exc
        digest = hashlib.sha256(text.encode()).hexdigest()

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("data file is empty") from None
    header = [h.strip() for h in header]
    if header != list(CSV_COLUMNS):
        raise ValidationError(
            f"unexpected header {header}; expected {list(CSV_COLUMNS)}"
        )

    raw_rows: list[tuple[int, list[str]]] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(CSV_COLUMNS):
            raise ParseError(
                f"expected {len(CSV_COLUMNS)} fields, got {len(row)}", line_no
            )
        raw_rows.append((line_no, [cell.strip() for cell in row]))
    if not raw_rows:
        raise ValidationError("data file contains no observation rows")

    props = [_float_field(r[5], "proportion", ln) for ln, r in raw_rows]
    percent_form = sum(p > 1.0 for p in props) > len(props) / 2
    if percent_form:
        log.info(
            "proportions read as percent (%d of %d values exceed 1); dividing by 100",
            sum(p > 1.0 for p in props),
            len(props),
        )

    observations: list[Observation] = []
    exclusions: list[Exclusion] = []
    for (line_no, row), prop in zip(raw_rows, props):
        country, region, method, sector_label, year_s, _, se_s = row
        if not country:
            raise ParseError("country must not be empty", line_no)
        if method not in METHOD_LABELS:
            raise ParseError(
                f"unknown method {method!r}; expected one of {METHOD_LABELS}", line_no
            )
        if sector_label not in SECTOR_LABELS:
            raise ParseError(
                f"unknown sector {sector_label!r}; expected one of {SECTOR_LABELS}",
                line_no,
            )
        if not region:
            found = lookup_region(country)
            if found is None:
                raise ParseError(
                    f"country {country!r} has no bundled region; fill the region column",
                    line_no,
                )
            region = found
        year = _float_field(year_s, "year", line_no)
        se = _float_field(se_s, "se", line_no)
        if percent_form:
            prop = prop / 100.0
            se = se / 100.0
        if not window[0] <= year <= window[1]:
            if strict_window:
                raise ParseError(
                    f"year {year:g} outside window [{window[0]:g}, {window[1]:g}]",
                    line_no,
                )
            exclusions.append(
                Exclusion(line_no, "year_outside_window", f"year={year:g}")
            )
            continue
        observations.append(
            Observation(
                country=country,
                region=region,
                method=method,
                sector=sector_id(sector_label),
                year=year,
                proportion=prop,
                se=se,
                line=line_no,
            )
        )

    if exclusions:
        log.warning(
            "excluded %d row(s): %s",
            len(exclusions),
            "; ".join(f"line {e.line} [{e.reason}]" for e in exclusions),
        )
    return build_dataset(
        observations,
        window=window,
        year_grid=year_grid,
        exclusions=exclusions,
        source_digest=digest,
    )


@dataclass(frozen=True)
class SESummary:
    """Sampling-error summary over a dataset."""

    n_obs: int
    minimum: float
    maximum: float
    median: float
    per_method_mean: dict[str, float]


def summarize_se(dataset: Dataset) -> SESummary:
    """Min, max, and median of sampling SEs plus per-method means.

    The median uses linear interpolation between the middle order
    statistics, so two observations with SEs 0.02 and 0.04 summarize
    to a median of 0.03.
    """
    if dataset.n_obs == 0:
        raise ValidationError("cannot summarize an empty dataset")
    se = dataset.se
    per_method = {
        m: float(np.mean(se[dataset.method_idx == k]))
        for k, m in enumerate(dataset.methods)
        if np.any(dataset.method_idx == k)
    }
    return SESummary(
        n_obs=dataset.n_obs,
        minimum=float(np.min(se)),
        maximum=float(np.max(se)),
        median=float(np.median(se)),
        per_method_mean=per_method,
    )
