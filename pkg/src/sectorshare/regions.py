"""Bundled country-to-region lookup for the default study countries.

Region labels follow the UNSD geoscheme. African countries carry their
intermediate region; Asian countries, which have no intermediate level,
carry their sub-region. Input files may override any assignment by
filling the ``region`` column.
"""

from __future__ import annotations

COUNTRY_REGIONS: dict[str, str] = {
    "Afghanistan": "Southern Asia",
    "Benin": "Western Africa",
    "Burkina Faso": "Western Africa",
    "Cameroon": "Middle Africa",
    "Congo": "Middle Africa",
    "Congo Democratic Republic": "Middle Africa",
    "Cote d'Ivoire": "Western Africa",
    "Ethiopia": "Eastern Africa",
    "Ghana": "Western Africa",
    "Guinea": "Western Africa",
    "India": "Southern Asia",
    "Kenya": "Eastern Africa",
    "Liberia": "Western Africa",
    "Madagascar": "Eastern Africa",
    "Malawi": "Eastern Africa",
    "Mali": "Western Africa",
    "Mozambique": "Eastern Africa",
    "Myanmar": "South-eastern Asia",
    "Nepal": "Southern Asia",
    "Niger": "Western Africa",
    "Nigeria": "Western Africa",
    "Pakistan": "Southern Asia",
    "Philippines": "South-eastern Asia",
    "Rwanda": "Eastern Africa",
    "Senegal": "Western Africa",
    "Sierra Leone": "Western Africa",
    "Tanzania": "Eastern Africa",
    "Togo": "Western Africa",
    "Uganda": "Eastern Africa",
    "Zimbabwe": "Eastern Africa",
}


def _norm(name: str) -> str:
    return " ".join(name.split()).casefold()


_NORMALIZED = {_norm(k): v for k, v in COUNTRY_REGIONS.items()}


def lookup_region(country: str) -> str | None:
    """Return the bundled region for ``country``, or None if unknown."""
    return _NORMALIZED.get(_norm(country))
