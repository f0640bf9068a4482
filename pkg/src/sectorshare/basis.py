"""Cubic B-spline bases anchored at each country's latest survey year.

Interior knots sit on a lattice ``anchor + j * spacing`` restricted to
the estimation window, so every country has a knot exactly at its most
recent survey year. Boundary knots are replicated at the window edges
(clamped convention), which keeps the basis a partition of unity on the
whole window. The latent curve is parameterized by an intercept at the
reference basis function plus first differences of the coefficients, so
each basis set also carries the corresponding difference design matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import ValidationError

DEGREE = 3
DEFAULT_SPACING = 3.5
_TOL = 1e-8


def build_knots(
    recent_year: float,
    window: tuple[float, float] = (1990.0, 2025.0),
    spacing: float = DEFAULT_SPACING,
) -> np.ndarray:
    """Lattice knots ``recent_year + j * spacing`` inside the window.

    The returned array is ascending, includes ``recent_year`` itself,
    and never extends beyond the window edges.
    """
    start, end = float(window[0]), float(window[1])
    if not start < end:
        raise ValidationError(f"window start {start} must precede end {end}")
    if not spacing > 0:
        raise ValidationError(f"knot spacing must be positive, got {spacing}")
    if not start <= recent_year <= end:
        raise ValidationError(
            f"anchor year {recent_year} outside window [{start}, {end}]"
        )
    j_min = int(np.ceil((start - recent_year) / spacing - _TOL))
    j_max = int(np.floor((end - recent_year) / spacing + _TOL))
    knots = recent_year + spacing * np.arange(j_min, j_max + 1, dtype=np.float64)
    return np.clip(knots, start, end)


def clamped_knot_vector(
    interior: np.ndarray, window: tuple[float, float], degree: int = DEGREE
) -> np.ndarray:
    """Full knot vector with ``degree + 1`` copies of each window edge.

    Lattice points that coincide with a window edge are merged into the
    boundary replicas so no knot exceeds the allowed multiplicity.
    """
    start, end = float(window[0]), float(window[1])
    interior = np.asarray(interior, dtype=np.float64)
    inner = interior[(interior > start + _TOL) & (interior < end - _TOL)]
    return np.concatenate(
        [np.full(degree + 1, start), inner, np.full(degree + 1, end)]
    )


def evaluate_basis(
    years: np.ndarray, knot_vector: np.ndarray, degree: int = DEGREE
) -> np.ndarray:
    """Dense basis matrix ``B[i, k]`` at the given years.

    Rows sum to 1 everywhere in the window, including the right edge.
    Years outside the window are rejected.
    """
    years = np.atleast_1d(np.asarray(years, dtype=np.float64))
    start, end = knot_vector[0], knot_vector[-1]
    if np.any(years < start - _TOL) or np.any(years > end + _TOL):
        raise ValidationError("basis evaluation outside the knot span")
    years = np.clip(years, start, end)
    return BSpline.design_matrix(years, knot_vector, degree).toarray()


def reference_knot_index(knot_vector: np.ndarray, recent_year: float) -> int:
    """Index of the basis function peaking at the anchor year.

    Requires a knot at ``recent_year``; the basis construction
    guarantees one, so a miss indicates a construction bug.
    """
    if not np.any(np.abs(knot_vector - recent_year) < 1e-6):
        raise ValidationError(
            f"no knot at anchor year {recent_year}; knot construction is broken"
        )
    row = evaluate_basis(np.array([recent_year]), knot_vector)[0]
    return int(np.argmax(row))


def greville_sites(knot_vector: np.ndarray, degree: int = DEGREE) -> np.ndarray:
    """Greville abscissa (mean of interior support knots) per basis."""
    K = len(knot_vector) - degree - 1
    return np.array(
        [knot_vector[k + 1 : k + degree + 1].mean() for k in range(K)]
    )


def difference_design(B: np.ndarray, k_star: int) -> np.ndarray:
    """Map a basis matrix to the design over coefficient differences.

    With coefficients written as an intercept at ``k_star`` plus first
    differences ``d[h] = beta[h+1] - beta[h]``, the latent curve equals
    ``alpha + W @ d`` because the basis sums to one. Column ``h`` of W
    is the partial sum of basis columns above ``h`` (for ``h >= k_star``)
    or minus the partial sum up to ``h`` (for ``h < k_star``).
    """
    B = np.asarray(B, dtype=np.float64)
    n, K = B.shape
    if not 0 <= k_star < K:
        raise ValidationError(f"reference index {k_star} outside [0, {K})")
    suffix = np.cumsum(B[:, ::-1], axis=1)[:, ::-1]
    prefix = np.cumsum(B, axis=1)
    W = np.empty((n, K - 1))
    for h in range(K - 1):
        W[:, h] = suffix[:, h + 1] if h >= k_star else -prefix[:, h]
    return W


@dataclass(frozen=True)
class BasisSet:
    """Per-country latent-curve design.

    ``kind`` is "spline" for the penalized B-spline curve or "linear"
    for the comparison model whose latent curve is a straight line in
    time. Both expose the same difference-design interface: the latent
    value at time t is ``alpha + design_rows(t) @ d`` where d has
    ``n_diff`` entries (the coefficient first differences for splines,
    the single slope for the linear model).
    """

    kind: str
    window: tuple[float, float]
    anchor_year: float
    spacing: float
    year_grid: np.ndarray
    knot_vector: np.ndarray | None = None
    k_star: int = 0
    B_grid: np.ndarray | None = field(default=None, repr=False)
    W_grid: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    @property
    def n_basis(self) -> int:
        if self.kind != "spline":
            raise ValidationError("basis count is defined for spline bases only")
        return len(self.knot_vector) - DEGREE - 1

    @property
    def n_diff(self) -> int:
        return self.W_grid.shape[1]

    def basis_matrix(self, years: np.ndarray) -> np.ndarray:
        if self.kind != "spline":
            raise ValidationError("basis matrix is defined for spline bases only")
        return evaluate_basis(years, self.knot_vector)

    def design_rows(self, years: np.ndarray) -> np.ndarray:
        """Difference-design rows at arbitrary years inside the window."""
        years = np.atleast_1d(np.asarray(years, dtype=np.float64))
        if self.kind == "linear":
            return (years - self.anchor_year)[:, None]
        return difference_design(self.basis_matrix(years), self.k_star)

    def diff_intervals(self) -> np.ndarray:
        """Year interval ``[g[h], g[h+1]]`` associated with difference h.

        Used to decide which differences a country's survey period
        informs. The linear model's single slope spans all years.
        """
        if self.kind == "linear":
            return np.array([[-np.inf, np.inf]])
        g = greville_sites(self.knot_vector)
        return np.column_stack([g[:-1], g[1:]])


def build_basis_set(
    recent_year: float,
    *,
    kind: str = "spline",
    window: tuple[float, float] = (1990.0, 2025.0),
    spacing: float = DEFAULT_SPACING,
    year_grid: np.ndarray | None = None,
) -> BasisSet:
    """Construct the latent-curve design for one country."""
    if year_grid is None:
        year_grid = np.arange(np.ceil(window[0]), np.floor(window[1]) + 1)
    year_grid = np.asarray(year_grid, dtype=np.float64)
    if kind == "linear":
        return BasisSet(
            kind="linear",
            window=(float(window[0]), float(window[1])),
            anchor_year=float(recent_year),
            spacing=float(spacing),
            year_grid=year_grid,
            W_grid=(year_grid - recent_year)[:, None],
        )
    if kind != "spline":
        raise ValidationError(f"unknown basis kind {kind!r}")
    interior = build_knots(recent_year, window, spacing)
    kv = clamped_knot_vector(interior, window)
    B_grid = evaluate_basis(year_grid, kv)
    k_star = reference_knot_index(kv, recent_year)
    return BasisSet(
        kind="spline",
        window=(float(window[0]), float(window[1])),
        anchor_year=float(recent_year),
        spacing=float(spacing),
        year_grid=year_grid,
        knot_vector=kv,
        k_star=k_star,
        B_grid=B_grid,
        W_grid=difference_design(B_grid, k_star),
    )


def build_all_bases(dataset, **kwargs) -> dict[int, BasisSet]:
    """One basis set per country, anchored at its latest survey year."""
    return {
        c: build_basis_set(
            dataset.most_recent_survey_year(c),
            window=dataset.window,
            year_grid=dataset.year_grid,
            **kwargs,
        )
        for c in range(dataset.n_countries)
    }
