"""Tests for run manifests, draw archives, and CSV export helpers."""

import csv
import io
import json

import numpy as np
import pytest

from sectorshare.errors import InputOutputError, ValidationError
from sectorshare.model import PriorConfig
from sectorshare.persist import (
    BASIS_HEADER,
    DIAGNOSTICS_HEADER,
    DRAWS_HEADER,
    FAILED_MARKER,
    MANIFEST_NAME,
    RHO_HEADER,
    SUMMARY_HEADER,
    VALIDATION_HEADER,
    RunWriter,
    basis_rows,
    build_manifest,
    canonical_json,
    convergence_dict,
    diagnostics_rows,
    draws_long_rows,
    load_draws,
    manifest_hash,
    read_manifest,
    rho_rows,
    save_draws,
    summaries_rows,
    validation_rows,
    validation_summary_dict,
)
from sectorshare.sampler import SamplerConfig
from sectorshare.simulate import SimConfig, simulate_dataset
from sectorshare.validation import CoverageReport, HeldOutError, ValidationReport
from sectorshare.variants import fit_variant


@pytest.fixture(scope="module")
def sim():
    return simulate_dataset(SimConfig(seed=52, n_countries=3, n_regions=2))


@pytest.fixture(scope="module")
def cfg():
    return SamplerConfig(seed=33, n_chains=2, n_warmup=150, n_samples=200)


@pytest.fixture(scope="module")
def fit(sim, cfg):
    return fit_variant("zero_cov", sim.dataset, PriorConfig(), cfg)


@pytest.fixture(scope="module")
def manifest(sim, cfg):
    return build_manifest(
        variant="zero_cov",
        cfg=cfg,
        prior=PriorConfig(),
        dataset=sim.dataset,
        spacing=None,
        command="fit",
    )


class TestCanonicalJson:
    def test_sorted_and_compact(self):
        assert canonical_json({"b": 1, "a": [1.5, "x"]}) == '{"a":[1.5,"x"],"b":1}'

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            canonical_json({"x": float("nan")})

    def test_hash_ignores_embedded_hash(self):
        base = {"a": 1, "b": "two"}
        h = manifest_hash(base)
        assert manifest_hash({**base, "manifest_hash": h}) == h
        assert manifest_hash({**base, "manifest_hash": "garbage"}) == h


class TestManifest:
    def test_self_verifies(self, manifest):
        assert manifest_hash(manifest) == manifest["manifest_hash"]

    def test_deterministic(self, sim, cfg, manifest):
        again = build_manifest(
            variant="zero_cov",
            cfg=cfg,
            prior=PriorConfig(),
            dataset=sim.dataset,
            spacing=None,
            command="fit",
        )
        assert again == manifest

    def test_sensitive_to_inputs(self, sim, cfg, manifest):
        other = build_manifest(
            variant="zero_cov",
            cfg=SamplerConfig(seed=34, n_chains=2, n_warmup=150, n_samples=200),
            prior=PriorConfig(),
            dataset=sim.dataset,
            spacing=None,
            command="fit",
        )
        assert other["manifest_hash"] != manifest["manifest_hash"]

    def test_records_data_facts(self, sim, manifest):
        assert manifest["n_observations"] == sim.dataset.n_obs
        assert manifest["countries"] == list(sim.dataset.countries)
        assert manifest["window"] == [1990.0, 2025.0]


class TestRunWriter:
    def test_creates_directory_and_manifest(self, tmp_path, manifest):
        run = tmp_path / "runs" / "a"
        with RunWriter(run, manifest) as w:
            assert w.hash == manifest["manifest_hash"]
        assert read_manifest(run) == manifest
        assert not (run / FAILED_MARKER).exists()

    def test_accepts_existing_empty_directory(self, tmp_path, manifest):
        run = tmp_path / "empty"
        run.mkdir()
        with RunWriter(run, manifest):
            pass
        assert (run / MANIFEST_NAME).exists()

    def test_refuses_non_empty_directory(self, tmp_path, manifest):
        run = tmp_path / "busy"
        run.mkdir()
        (run / "leftover.txt").write_text("old run\n")
        with pytest.raises(InputOutputError):
            with RunWriter(run, manifest):
                pass

    def test_failed_marker_on_exception(self, tmp_path, manifest):
        run = tmp_path / "crash"
        with pytest.raises(RuntimeError, match="chain exploded"):
            with RunWriter(run, manifest):
                raise RuntimeError("chain exploded")
        marker = (run / FAILED_MARKER).read_text()
        assert marker == "RuntimeError: chain exploded\n"

    def test_csv_carries_manifest_hash(self, tmp_path, manifest):
        run = tmp_path / "csv"
        with RunWriter(run, manifest) as w:
            p = w.write_csv("table.csv", ["a", "b"], [[1, 2], [3, 4]])
        lines = p.read_text().splitlines()
        assert lines[0] == f"# manifest_hash={manifest['manifest_hash']}"
        rows = list(csv.reader(lines[1:]))
        assert rows == [["a", "b"], ["1", "2"], ["3", "4"]]

    def test_write_json_is_canonical(self, tmp_path, manifest):
        run = tmp_path / "json"
        with RunWriter(run, manifest) as w:
            p = w.write_json("extra.json", {"z": 1, "a": 2})
        assert p.read_text() == '{"a":2,"z":1}\n'


class TestManifestTamper:
    def test_detects_modified_field(self, tmp_path, manifest):
        run = tmp_path / "t"
        with RunWriter(run, manifest):
            pass
        doc = json.loads((run / MANIFEST_NAME).read_text())
        doc["n_observations"] += 1
        (run / MANIFEST_NAME).write_text(json.dumps(doc))
        with pytest.raises(ValidationError, match="hash self-check"):
            read_manifest(run)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(InputOutputError):
            read_manifest(tmp_path)

    def test_invalid_json(self, tmp_path):
        (tmp_path / MANIFEST_NAME).write_text("{not json")
        with pytest.raises(ValidationError, match="not valid JSON"):
            read_manifest(tmp_path)


class TestDrawArchive:
    def test_roundtrip(self, tmp_path, manifest, fit):
        run = tmp_path / "fit"
        with RunWriter(run, manifest) as w:
            p = w.write_draws("draws.npz", fit.draws, "zero_cov")
        loaded = load_draws(p)
        np.testing.assert_array_equal(loaded.draws, fit.draws.draws)
        np.testing.assert_array_equal(loaded.lp, fit.draws.lp)
        np.testing.assert_array_equal(loaded.packed.rho, fit.draws.packed.rho)
        np.testing.assert_array_equal(loaded.accept_count, fit.draws.accept_count)
        np.testing.assert_array_equal(loaded.step_log, fit.draws.step_log)
        assert loaded.cfg == fit.draws.cfg
        assert loaded.prior == fit.draws.prior
        assert loaded.variant == "zero_cov"
        assert loaded.parameter_names() == fit.draws.parameter_names()
        np.testing.assert_array_equal(loaded.phi(0), fit.draws.phi(0))

    def test_roundtrip_preserves_window(self, tmp_path):
        sim = simulate_dataset(
            SimConfig(seed=53, n_countries=2, n_regions=1, window=(1995, 2020))
        )
        cfg = SamplerConfig(seed=7, n_chains=2, n_warmup=60, n_samples=80)
        fit = fit_variant("zero_cov", sim.dataset, PriorConfig(), cfg)
        p = save_draws(tmp_path / "draws.npz", fit.draws, "zero_cov", "h" * 64)
        loaded = load_draws(p)
        assert loaded.dataset.window == (1995.0, 2020.0)
        assert loaded.bases[0].year_grid[0] == 1995.0
        assert loaded.bases[0].year_grid[-1] == 2020.0
        np.testing.assert_array_equal(loaded.draws, fit.draws.draws)
        np.testing.assert_array_equal(loaded.phi(1), fit.draws.phi(1))

    def test_requires_npz_suffix(self, tmp_path, fit):
        with pytest.raises(ValidationError, match="npz"):
            save_draws(tmp_path / "draws.bin", fit.draws, "zero_cov", "h" * 64)

    def test_missing_archive(self, tmp_path):
        with pytest.raises(InputOutputError):
            load_draws(tmp_path / "absent.npz")

    def test_shape_mismatch_rejected(self, tmp_path, fit):
        p = save_draws(tmp_path / "ok.npz", fit.draws, "zero_cov", "h" * 64)
        with np.load(p, allow_pickle=False) as z:
            arrays = {name: z[name] for name in z.files}
        arrays["draws"] = arrays["draws"][:, :, :-1]
        doctored = tmp_path / "doctored.npz"
        np.savez(doctored, **arrays)
        with pytest.raises(ValidationError, match="does not match"):
            load_draws(doctored)

    def test_save_is_byte_deterministic(self, tmp_path, fit):
        a = save_draws(tmp_path / "a.npz", fit.draws, "zero_cov", "h" * 64)
        b = save_draws(tmp_path / "b.npz", fit.draws, "zero_cov", "h" * 64)
        assert a.read_bytes() == b.read_bytes()


class TestRowGenerators:
    def test_summaries_shape_and_order(self, fit):
        rows = list(summaries_rows(fit.draws))
        ds = fit.draws.dataset
        T = len(fit.draws.bases[0].year_grid)
        assert len(rows) == ds.n_countries * T * ds.n_methods * 3
        assert len(SUMMARY_HEADER) == len(rows[0]) == 9
        for row in rows[:200]:
            med, lo80, hi80, lo95, hi95 = map(float, row[4:])
            assert lo95 <= lo80 <= med <= hi80 <= hi95

    def test_diagnostics_rows_cover_sampled_params(self, fit):
        rows = list(diagnostics_rows(fit.draws))
        assert len(rows) == len(fit.draws.sampled_indices())
        assert len(rows[0]) == len(DIAGNOSTICS_HEADER)
        for row in rows:
            float(row[1]), float(row[2]), float(row[5])

    def test_rho_rows_full_grid(self, fit):
        M = fit.draws.dataset.n_methods
        rows = list(rho_rows(fit.rho, fit.draws.dataset.methods))
        assert len(rows) == 2 * M * M
        assert len(rows[0]) == len(RHO_HEADER)
        diag = [r for r in rows if r[1] == r[2]]
        assert all(r[3] == "1.0" for r in diag)

    def test_draws_long_rows(self, fit):
        d = fit.draws
        n_sampled = len(d.sampled_indices())
        rows = list(draws_long_rows(d))
        assert len(rows) == d.n_chains * d.n_stored * n_sampled
        first = rows[0]
        assert len(first) == len(DRAWS_HEADER)
        assert first[0] == 0 and first[1] == 0
        j = d.sampled_indices()[0]
        assert first[2] == d.parameter_names()[j]
        assert float(first[3]) == d.draws[0, 0, j]

    def test_basis_rows_spline_only(self, fit, sim, cfg):
        rows = list(basis_rows(fit.draws))
        ds = fit.draws.dataset
        T = len(fit.draws.bases[0].year_grid)
        expected = sum(int(b.n_basis) * T for b in fit.draws.bases.values())
        assert len(rows) == expected
        assert len(rows[0]) == len(BASIS_HEADER)
        linear = fit_variant("linear", sim.dataset, PriorConfig(), cfg)
        assert list(basis_rows(linear.draws)) == []

    def test_convergence_dict_keys(self, fit):
        d = convergence_dict(fit.draws)
        assert set(d) == {"max_rhat", "min_ess", "n_flagged", "n_parameters"}


def tiny_report() -> ValidationReport:
    errors = [
        HeldOutError("Kenya", "oc_pills", "public", 2015.0, 0.5, 0.45),
        HeldOutError("Kenya", "oc_pills", "private_medical", 2015.0, 0.3, 0.34),
    ]
    metrics = {
        "n": 2,
        "rmse": 0.045276925690687085,
        "mean_error": 0.005,
        "median_abs_error": 0.045,
    }
    coverage = CoverageReport(
        level=0.95,
        mode="predictive",
        n=2,
        coverage_pct=50.0,
        above_pct=25.0,
        below_pct=25.0,
        median_pi_width=0.1,
    )
    return ValidationReport(
        variant="full",
        n_held_out=2,
        n_train=10,
        overall=metrics,
        by_sector={"public": metrics},
        coverage=coverage,
        errors=errors,
    )


class TestValidationExport:
    def test_rows_echo_errors(self):
        rows = list(validation_rows(tiny_report()))
        assert len(rows) == 2
        assert len(rows[0]) == len(VALIDATION_HEADER)
        assert rows[0][:4] == ["Kenya", "oc_pills", "public", "2015"]
        assert float(rows[0][6]) == pytest.approx(0.05)
        assert float(rows[1][6]) == pytest.approx(-0.04)

    def test_summary_dict_reports_percent(self):
        doc = validation_summary_dict(tiny_report())
        assert doc["overall"]["rmse_pct"] == pytest.approx(4.5276925690687085)
        assert doc["overall"]["n"] == 2
        assert doc["coverage"]["coverage_pct"] == 50.0
        assert doc["coverage"]["mode"] == "predictive"
        json.dumps(doc)
