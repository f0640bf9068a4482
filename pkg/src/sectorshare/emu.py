"""Supply-share adjustment of service statistics.

A service statistic counts users reached through one supply source
only. Dividing by that source's estimated share of total supply scales
the count up to an all-sources estimate, with the posterior draws of
the share carrying the uncertainty through. The adjusted count over
the number of women of reproductive age gives an estimated modern use
rate, which is flagged when it exceeds one.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass

import numpy as np

from .data import SECTOR_LABELS, sector_id
from .errors import InputOutputError, ParseError, ValidationError
from .sampler import PosteriorDraws

SHARE_FLOOR = 1e-6
STAT_COLUMNS = ("country", "method", "sector", "year", "users", "wra")


@dataclass(frozen=True)
class ServiceStat:
    """One service-statistic row awaiting adjustment."""

    country: str
    method: str
    sector: int
    year: float
    users: float
    wra: float
    line: int | None = None

    def __post_init__(self):
        if self.sector not in (1, 2, 3):
            raise ValidationError(f"sector id must be 1, 2, or 3, got {self.sector}")
        if not (math.isfinite(self.users) and self.users >= 0.0):
            raise ParseError(f"users must be non-negative, got {self.users}", self.line)
        if not (math.isfinite(self.wra) and self.wra > 0.0):
            raise ParseError(f"wra must be positive, got {self.wra}", self.line)


def parse_service_stats(source) -> list[ServiceStat]:
    """Read service statistics from CSV.

    Expected header: ``country,method,sector,year,users,wra`` with the
    sector given by label. Raises line-numbered errors on bad rows.
    """
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InputOutputError(f"cannot read service statistics: {exc}") from exc
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("service statistics file is empty", 1) from None
    if tuple(h.strip() for h in header) != STAT_COLUMNS:
        raise ParseError(
            f"expected header {','.join(STAT_COLUMNS)}, got {','.join(header)}", 1
        )
    stats = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(STAT_COLUMNS):
            raise ParseError(
                f"expected {len(STAT_COLUMNS)} columns, got {len(row)}", line_no
            )
        country, method, sector_label, year_s, users_s, wra_s = (
            cell.strip() for cell in row
        )
        try:
            year = float(year_s)
            users = float(users_s)
            wra = float(wra_s)
        except ValueError as exc:
            raise ParseError(f"non-numeric field: {exc}", line_no) from None
        stats.append(
            ServiceStat(
                country=country,
                method=method,
                sector=sector_id(sector_label),
                year=year,
                users=users,
                wra=wra,
                line=line_no,
            )
        )
    if not stats:
        raise ParseError("service statistics file has no data rows", 2)
    return stats


def adjust_users(users: float, share_draws: np.ndarray) -> np.ndarray:
    """Scale a single-source user count up to all sources, per draw.

    Shares are floored away from zero so a vanishing share cannot
    produce an infinite adjustment.
    """
    if users < 0:
        raise ValidationError("users must be non-negative")
    share_draws = np.asarray(share_draws, dtype=np.float64)
    if share_draws.ndim != 1 or share_draws.size == 0:
        raise ValidationError("share_draws must be a non-empty vector")
    if np.any(share_draws <= 0.0) or np.any(share_draws > 1.0):
        raise ValidationError("share draws must lie in (0, 1]")
    return users / np.maximum(share_draws, SHARE_FLOOR)


def emu_summary(adjusted_users: np.ndarray, wra: float) -> dict:
    """Estimated modern-use summary from adjusted user counts."""
    if wra <= 0:
        raise ValidationError("wra must be positive")
    emu = np.asarray(adjusted_users, dtype=np.float64) / wra
    lo, med, hi = np.quantile(emu, [0.025, 0.5, 0.975])
    return {
        "emu_median": float(med),
        "emu_lo95": float(lo),
        "emu_hi95": float(hi),
        "flag_exceeds_one": bool(med > 1.0),
    }


def emu_adjust(draws: PosteriorDraws, stats: list[ServiceStat]) -> list[dict]:
    """Adjust each service statistic by its sector's posterior share.

    Returns one output row per input row with the raw rate, the share
    summary, and the adjusted estimated modern-use distribution.
    """
    dataset = draws.dataset
    rows = []
    for stat in stats:
        try:
            c = dataset.countries.index(stat.country)
        except ValueError:
            raise ValidationError(
                f"country {stat.country!r} not present in the fitted model"
            ) from None
        try:
            m = dataset.methods.index(stat.method)
        except ValueError:
            raise ValidationError(
                f"method {stat.method!r} not present in the fitted model"
            ) from None
        lo_y, hi_y = dataset.window
        if not lo_y <= stat.year <= hi_y:
            raise ValidationError(
                f"year {stat.year:g} outside the estimation window "
                f"[{lo_y:g}, {hi_y:g}]"
            )
        phi = draws.phi(c, np.array([stat.year]))
        share = phi[:, 0, m, stat.sector - 1]
        adjusted = adjust_users(stat.users, share)
        out = {
            "country": stat.country,
            "method": stat.method,
            "sector": SECTOR_LABELS[stat.sector - 1],
            "year": stat.year,
            "users": stat.users,
            "wra": stat.wra,
            "emu_raw": stat.users / stat.wra,
            "share_median": float(np.median(share)),
        }
        out.update(emu_summary(adjusted, stat.wra))
        rows.append(out)
    return rows
