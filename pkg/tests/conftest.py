"""Shared fixtures and independent reference implementations."""

from __future__ import annotations

import io

import numpy as np
import pytest

from sectorshare.data import parse_observations

# Default study countries and the survey year each basis is anchored at.
STUDY_ANCHORS = {
    "Afghanistan": 2015,
    "Benin": 2017,
    "Burkina Faso": 2010,
    "Cameroon": 2018,
    "Congo": 2005,
    "Congo Democratic Republic": 2013,
    "Cote d'Ivoire": 2011,
    "Ethiopia": 2019,
    "Ghana": 2014,
    "Guinea": 2018,
    "India": 2005,
    "Kenya": 2014,
    "Liberia": 2019,
    "Madagascar": 2008,
    "Malawi": 2015,
    "Mali": 2018,
    "Mozambique": 2011,
    "Myanmar": 2015,
    "Nepal": 2016,
    "Niger": 2012,
    "Nigeria": 2018,
    "Pakistan": 2017,
    "Philippines": 2017,
    "Rwanda": 2019,
    "Senegal": 2019,
    "Sierra Leone": 2019,
    "Tanzania": 2015,
    "Togo": 2013,
    "Uganda": 2016,
    "Zimbabwe": 2015,
}


def bspline_naive(x: float, k: int, i: int, t: np.ndarray) -> float:
    """Textbook B-spline recursion, kept independent of the package."""
    if k == 0:
        return 1.0 if t[i] <= x < t[i + 1] else 0.0
    c1 = 0.0
    if t[i + k] != t[i]:
        c1 = (x - t[i]) / (t[i + k] - t[i]) * bspline_naive(x, k - 1, i, t)
    c2 = 0.0
    if t[i + k + 1] != t[i + 1]:
        c2 = (
            (t[i + k + 1] - x)
            / (t[i + k + 1] - t[i + 1])
            * bspline_naive(x, k - 1, i + 1, t)
        )
    return c1 + c2


def reconstruct_naive(alpha: float, deltas: np.ndarray, k_star: int) -> np.ndarray:
    """Direct walk of the difference recursion, written from scratch."""
    K = len(deltas) + 1
    betas = [0.0] * K
    betas[k_star] = alpha
    k = k_star - 1
    while k >= 0:
        betas[k] = betas[k + 1] - deltas[k]
        k -= 1
    k = k_star + 1
    while k < K:
        betas[k] = betas[k - 1] + deltas[k - 1]
        k += 1
    return np.array(betas)


def make_csv(rows: list[tuple], header: bool = True) -> io.StringIO:
    lines = []
    if header:
        lines.append("country,region,method,sector,year,proportion,se")
    for row in rows:
        lines.append(",".join(str(x) for x in row))
    return io.StringIO("\n".join(lines) + "\n")


def obs_row(
    country="Zimbabwe",
    region="",
    method="injectables",
    sector="public",
    year=2015,
    proportion=0.42,
    se=0.05,
):
    return (country, region, method, sector, year, proportion, se)


@pytest.fixture
def small_dataset():
    """Two countries, two methods, three survey years each, all sectors."""
    rows = []
    surveys = {"Kenya": (2005, 2010, 2015), "Ghana": (2003, 2009, 2014)}
    shares = {
        ("Kenya", "oc_pills"): (0.55, 0.30),
        ("Kenya", "injectables"): (0.60, 0.25),
        ("Ghana", "oc_pills"): (0.40, 0.35),
        ("Ghana", "injectables"): (0.50, 0.30),
    }
    for country, years in surveys.items():
        for method in ("oc_pills", "injectables"):
            p1, p2 = shares[(country, method)]
            for year in years:
                p3 = 1.0 - p1 - p2
                rows.append(obs_row(country, "", method, "public", year, p1, 0.03))
                rows.append(
                    obs_row(country, "", method, "private_medical", year, p2, 0.03)
                )
                rows.append(
                    obs_row(country, "", method, "private_other", year, round(p3, 12), 0.03)
                )
    return parse_observations(make_csv(rows))
