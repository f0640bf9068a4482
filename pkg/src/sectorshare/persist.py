"""Run persistence: directories, manifests, and deterministic exports.

A run directory is fully reproducible from its manifest: the manifest
hash digests the configuration, seed, data digest, and package version
through canonical JSON, and every CSV written carries that hash on its
first line. Nothing in a run directory depends on wall-clock time, so
re-running the same command produces byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .basis import build_all_bases
from .data import Dataset, parse_observations, SECTOR_LABELS
from .diagnostics import diagnose, summarize, worst_diagnostics
from .errors import InputOutputError, ValidationError
from .model import PriorConfig
from .sampler import pack, PosteriorDraws, SamplerConfig
from .validation import ValidationReport

MANIFEST_NAME = "manifest.json"
FAILED_MARKER = "FAILED"


def canonical_json(obj) -> str:
    """JSON with sorted keys and no whitespace variance."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def manifest_hash(manifest: dict) -> str:
    """Digest of a manifest, ignoring any embedded hash field."""
    trimmed = {k: v for k, v in manifest.items() if k != "manifest_hash"}
    return hashlib.sha256(canonical_json(trimmed).encode("utf-8")).hexdigest()


def _config_dict(cfg: SamplerConfig) -> dict:
    # thread count is an execution detail; draws do not depend on it
    out = asdict(cfg)
    del out["n_threads"]
    return out


def _prior_dict(prior: PriorConfig) -> dict:
    return asdict(prior)


def build_manifest(
    *,
    variant: str,
    cfg: SamplerConfig,
    prior: PriorConfig,
    dataset: Dataset,
    spacing: float | None,
    command: str,
) -> dict:
    manifest = {
        "version": __version__,
        "command": command,
        "variant": variant,
        "config": _config_dict(cfg),
        "prior": _prior_dict(prior),
        "data_digest": dataset.source_digest
        or hashlib.sha256(dataset.to_csv().encode("utf-8")).hexdigest(),
        "n_observations": int(dataset.n_obs),
        "countries": list(dataset.countries),
        "methods": list(dataset.methods),
        "window": [float(dataset.window[0]), float(dataset.window[1])],
        "spacing": spacing,
    }
    manifest["manifest_hash"] = manifest_hash(manifest)
    return manifest


class RunWriter:
    """Writes one run directory; leaves a FAILED marker on error.

    Use as a context manager around the whole fitting pipeline. The
    directory must be empty or absent when the run starts.
    """

    def __init__(self, run_dir: str | os.PathLike, manifest: dict):
        self.dir = Path(run_dir)
        self.manifest = manifest
        self.hash = manifest["manifest_hash"]

    def __enter__(self) -> "RunWriter":
        if self.dir.exists() and any(self.dir.iterdir()):
            raise InputOutputError(
                f"run directory {self.dir} already exists and is not empty"
            )
        self.dir.mkdir(parents=True, exist_ok=True)
        self.write_json(MANIFEST_NAME, self.manifest)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            (self.dir / FAILED_MARKER).write_text(
                f"{exc_type.__name__}: {exc}\n", encoding="utf-8"
            )
        return False

    def path(self, name: str) -> Path:
        return self.dir / name

    def write_json(self, name: str, obj) -> Path:
        p = self.dir / name
        p.write_text(canonical_json(obj) + "\n", encoding="utf-8")
        return p

    def write_csv(self, name: str, header: list[str], rows) -> Path:
        p = self.dir / name
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# manifest_hash={self.hash}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow(row)
        return p

    def write_draws(self, name: str, draws: PosteriorDraws, variant: str) -> Path:
        return save_draws(self.path(name), draws, variant, self.hash)


def _format_float(x: float) -> str:
    return repr(float(x))


def save_draws(
    path: str | os.PathLike,
    draws: PosteriorDraws,
    variant: str,
    run_hash: str,
) -> Path:
    """Persist draws plus everything needed to rebuild them."""
    path = Path(path)
    if path.suffix != ".npz":
        raise ValidationError(f"draws archive name must end in .npz, got {path.name}")
    meta = {
        "variant": variant,
        "kind": draws.bases[0].kind,
        "spacing": float(draws.bases[0].spacing),
        "window": [float(draws.dataset.window[0]), float(draws.dataset.window[1])],
        "config": _config_dict(draws.cfg),
        "prior": _prior_dict(draws.prior),
        "manifest_hash": run_hash,
        "version": __version__,
    }
    np.savez(
        path,
        draws=draws.draws,
        lp=draws.lp,
        accept_count=draws.accept_count,
        proposal_count=draws.proposal_count,
        block_accept_count=draws.block_accept_count,
        block_proposal_count=draws.block_proposal_count,
        step_log=draws.step_log,
        rho=draws.packed.rho,
        data_csv=np.array(draws.dataset.to_csv()),
        meta=np.array(canonical_json(meta)),
    )
    return path


def load_draws(path: str | os.PathLike) -> PosteriorDraws:
    """Rebuild a :class:`PosteriorDraws` from a saved archive."""
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            data_csv = str(z["data_csv"])
            draws_arr = z["draws"]
            lp = z["lp"]
            acc = z["accept_count"]
            prop = z["proposal_count"]
            bacc = z["block_accept_count"]
            bprop = z["block_proposal_count"]
            step_log = z["step_log"]
            rho = z["rho"]
    except OSError as exc:
        raise InputOutputError(f"cannot read draws archive {path}: {exc}") from exc
    cfg = SamplerConfig(**meta["config"])
    prior = PriorConfig(**meta["prior"])
    window = (float(meta["window"][0]), float(meta["window"][1]))
    dataset = parse_observations(io.StringIO(data_csv), window=window)
    bases = build_all_bases(dataset, kind=meta["kind"], spacing=meta["spacing"])
    packed = pack(dataset, bases, rho, prior)
    if draws_arr.shape != (cfg.n_chains, cfg.n_stored, packed.n_params):
        raise ValidationError(
            f"draws archive shape {draws_arr.shape} does not match its "
            f"configuration; expected "
            f"({cfg.n_chains}, {cfg.n_stored}, {packed.n_params})"
        )
    return PosteriorDraws(
        packed=packed,
        dataset=dataset,
        bases=bases,
        cfg=cfg,
        prior=prior,
        draws=draws_arr,
        lp=lp,
        accept_count=acc,
        proposal_count=prop,
        block_accept_count=bacc,
        block_proposal_count=bprop,
        step_log=step_log,
        variant=meta["variant"],
    )


def summaries_rows(draws: PosteriorDraws):
    for r in summarize(draws):
        yield [
            r["country"],
            r["method"],
            r["sector"],
            format(r["year"], "g"),
            _format_float(r["median"]),
            _format_float(r["lo80"]),
            _format_float(r["hi80"]),
            _format_float(r["lo95"]),
            _format_float(r["hi95"]),
        ]


SUMMARY_HEADER = [
    "country",
    "method",
    "sector",
    "year",
    "median",
    "lo80",
    "hi80",
    "lo95",
    "hi95",
]


def diagnostics_rows(draws: PosteriorDraws):
    rows = diagnose(draws)
    for r in rows:
        yield [
            r.name,
            _format_float(r.mean),
            _format_float(r.sd),
            _format_float(r.rhat) if np.isfinite(r.rhat) else "nan",
            _format_float(r.ess) if np.isfinite(r.ess) else "nan",
            _format_float(r.accept_rate),
            ";".join(r.flags),
        ]


DIAGNOSTICS_HEADER = ["parameter", "mean", "sd", "rhat", "ess", "accept_rate", "flags"]


def rho_rows(rho: np.ndarray, methods: tuple[str, ...]):
    for s in range(rho.shape[0]):
        for i, mi in enumerate(methods):
            for j, mj in enumerate(methods):
                yield [SECTOR_LABELS[s], mi, mj, _format_float(rho[s, i, j])]


RHO_HEADER = ["sector", "method_i", "method_j", "rho"]


def draws_long_rows(draws: PosteriorDraws):
    """Long-format draw rows for the sampled parameters only."""
    names = draws.parameter_names()
    sampled = draws.sampled_indices()
    for chain in range(draws.n_chains):
        for it in range(draws.n_stored):
            vec = draws.draws[chain, it]
            for j in sampled:
                yield [chain, it, names[j], _format_float(vec[j])]


DRAWS_HEADER = ["chain", "iter", "parameter", "value"]


def basis_rows(draws: PosteriorDraws):
    for c in range(draws.dataset.n_countries):
        bs = draws.bases[c]
        if bs.kind != "spline":
            continue
        B = bs.B_grid
        for t, year in enumerate(bs.year_grid):
            for k in range(B.shape[1]):
                yield [
                    draws.dataset.countries[c],
                    format(year, "g"),
                    k,
                    _format_float(B[t, k]),
                ]


BASIS_HEADER = ["country", "year", "k", "value"]


def validation_rows(report: ValidationReport):
    for e in report.errors:
        yield [
            e.country,
            e.method,
            e.sector,
            format(e.year, "g"),
            _format_float(e.observed),
            _format_float(e.predicted_median),
            _format_float(e.error),
        ]


VALIDATION_HEADER = [
    "country",
    "method",
    "sector",
    "year",
    "observed",
    "predicted_median",
    "error",
]


def validation_summary_dict(report: ValidationReport) -> dict:
    """Validation scorecard as a JSON-ready dictionary, in percent."""
    def pct(metrics: dict) -> dict:
        return {
            "n": metrics["n"],
            "rmse_pct": 100.0 * metrics["rmse"],
            "mean_error_pct": 100.0 * metrics["mean_error"],
            "median_abs_error_pct": 100.0 * metrics["median_abs_error"],
        }

    return {
        "variant": report.variant,
        "n_train": report.n_train,
        "n_held_out": report.n_held_out,
        "overall": pct(report.overall),
        "by_sector": {k: pct(v) for k, v in report.by_sector.items()},
        "coverage": {
            "level": report.coverage.level,
            "mode": report.coverage.mode,
            "coverage_pct": report.coverage.coverage_pct,
            "above_pct": report.coverage.above_pct,
            "below_pct": report.coverage.below_pct,
            "median_pi_width": report.coverage.median_pi_width,
        },
    }


def convergence_dict(draws: PosteriorDraws) -> dict:
    return worst_diagnostics(diagnose(draws))


def read_manifest(run_dir: str | os.PathLike) -> dict:
    p = Path(run_dir) / MANIFEST_NAME
    try:
        manifest = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputOutputError(f"cannot read manifest {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest {p} is not valid JSON: {exc}") from exc
    if manifest_hash(manifest) != manifest.get("manifest_hash"):
        raise ValidationError(
            f"manifest {p} failed its hash self-check; the file was modified"
        )
    return manifest
