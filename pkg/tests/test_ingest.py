"""Ingest: parsing, unit detection, validation, and SE summaries."""

from __future__ import annotations

import numpy as np
import pytest

from sectorshare.data import (
    Dataset,
    METHOD_LABELS,
    SECTOR_LABELS,
    build_dataset,
    parse_observations,
    summarize_se,
)
from sectorshare.errors import (
    InputOutputError,
    ParseError,
    ValidationError,
)

from conftest import make_csv, obs_row


class TestParsing:
    def test_single_row_fields_survive(self):
        ds = parse_observations(
            make_csv([obs_row("Zimbabwe", "", "injectables", "public", 2015, 0.42, 0.05)])
        )
        assert ds.n_obs == 1
        assert ds.countries == ("Zimbabwe",)
        assert ds.regions == ("Eastern Africa",)
        assert ds.methods[ds.method_idx[0]] == "injectables"
        assert ds.sector[0] == 1
        assert ds.year[0] == 2015.0
        assert ds.value[0] == 0.42
        assert ds.se[0] == 0.05

    def test_explicit_region_overrides_lookup(self):
        ds = parse_observations(
            make_csv([obs_row("Zimbabwe", "Custom Region", "iud", "public", 2000, 0.3, 0.02)])
        )
        assert ds.regions == ("Custom Region",)

    def test_unknown_country_without_region_errors(self):
        with pytest.raises(ParseError, match="bundled region"):
            parse_observations(
                make_csv([obs_row("Atlantis", "", "iud", "public", 2000, 0.3, 0.02)])
            )

    def test_unknown_method_label_errors(self):
        with pytest.raises(ParseError, match="unknown method"):
            parse_observations(
                make_csv([obs_row(method="condoms")])
            )

    def test_unknown_sector_label_errors(self):
        with pytest.raises(ParseError, match="unknown sector"):
            parse_observations(make_csv([obs_row(sector="ngo")]))

    def test_bad_header_errors(self):
        import io

        with pytest.raises(ValidationError, match="unexpected header"):
            parse_observations(io.StringIO("a,b,c\n1,2,3\n"))

    def test_empty_file_errors(self):
        import io

        with pytest.raises(ValidationError, match="empty"):
            parse_observations(io.StringIO(""))

    def test_short_row_names_line(self):
        import io

        text = "country,region,method,sector,year,proportion,se\nKenya,,iud,public,2000\n"
        with pytest.raises(ParseError, match="line 2"):
            parse_observations(io.StringIO(text))

    def test_non_numeric_year_names_line(self):
        with pytest.raises(ParseError, match="line 2.*year"):
            parse_observations(make_csv([obs_row(year="abc")]))

    def test_missing_file_is_io_error(self):
        with pytest.raises(InputOutputError):
            parse_observations("/nonexistent/data.csv")


class TestUnits:
    def test_percent_file_divided_by_100(self):
        rows = [
            obs_row("Kenya", "", "iud", "public", 2000, 42.0, 5.0),
            obs_row("Kenya", "", "iud", "private_medical", 2000, 33.0, 4.0),
            obs_row("Kenya", "", "iud", "private_other", 2000, 25.0, 3.0),
        ]
        ds = parse_observations(make_csv(rows))
        np.testing.assert_allclose(np.sort(ds.value), [0.25, 0.33, 0.42])
        np.testing.assert_allclose(np.sort(ds.se), [0.03, 0.04, 0.05])

    def test_stray_value_above_one_in_fraction_file_errors(self):
        rows = [
            obs_row("Kenya", "", "iud", "public", 2000, 0.4, 0.03),
            obs_row("Kenya", "", "iud", "public", 2005, 0.5, 0.03),
            obs_row("Kenya", "", "iud", "public", 2010, 1.2, 0.03),
        ]
        with pytest.raises(ParseError, match=r"outside \[0, 1\]"):
            parse_observations(make_csv(rows))

    def test_percent_value_above_100_errors(self):
        rows = [
            obs_row("Kenya", "", "iud", "public", 2000, 42.0, 5.0),
            obs_row("Kenya", "", "iud", "public", 2005, 120.0, 5.0),
        ]
        with pytest.raises(ParseError, match=r"outside \[0, 1\]"):
            parse_observations(make_csv(rows))

    def test_zero_se_errors(self):
        with pytest.raises(ParseError, match=r"outside \(0, 1\]"):
            parse_observations(make_csv([obs_row(se=0.0)]))


class TestWindow:
    def test_year_outside_window_excluded_with_reason(self):
        rows = [
            obs_row(year=1985),
            obs_row(year=2000),
        ]
        ds = parse_observations(make_csv(rows))
        assert ds.n_obs == 1
        assert len(ds.exclusions) == 1
        assert ds.exclusions[0].reason == "year_outside_window"
        assert ds.exclusions[0].line == 2

    def test_strict_window_rejects(self):
        with pytest.raises(ParseError, match="outside window"):
            parse_observations(make_csv([obs_row(year=1985)]), strict_window=True)

    def test_nothing_dropped_silently(self):
        rows = [obs_row(year=y) for y in (1980, 1995, 2005, 2030)]
        ds = parse_observations(make_csv(rows))
        assert ds.n_obs + len(ds.exclusions) == len(rows)


class TestSectorSums:
    def test_sum_far_from_one_errors(self):
        rows = [
            obs_row(sector="public", proportion=0.4),
            obs_row(sector="private_medical", proportion=0.3),
            obs_row(sector="private_other", proportion=0.2),
        ]
        with pytest.raises(ValidationError, match="sum to"):
            parse_observations(make_csv(rows))

    def test_sum_within_tolerance_accepted(self):
        rows = [
            obs_row(sector="public", proportion=0.4),
            obs_row(sector="private_medical", proportion=0.3),
            obs_row(sector="private_other", proportion=0.305),
        ]
        ds = parse_observations(make_csv(rows))
        assert ds.n_obs == 3

    def test_partial_sectors_not_checked(self):
        rows = [
            obs_row(sector="public", proportion=0.9),
            obs_row(sector="private_medical", proportion=0.9),
        ]
        ds = parse_observations(make_csv(rows))
        assert ds.n_obs == 2


class TestDataset:
    def test_roundtrip_through_csv(self, small_dataset):
        import io

        again = parse_observations(io.StringIO(small_dataset.to_csv()))
        assert again.countries == small_dataset.countries
        assert again.methods == small_dataset.methods
        np.testing.assert_array_equal(again.sector, small_dataset.sector)
        np.testing.assert_array_equal(again.year, small_dataset.year)
        np.testing.assert_array_equal(again.value, small_dataset.value)
        np.testing.assert_array_equal(again.se, small_dataset.se)

    def test_most_recent_survey_year(self, small_dataset):
        c = small_dataset.countries.index("Kenya")
        assert small_dataset.most_recent_survey_year(c) == 2015.0
        assert small_dataset.data_period(c) == (2005.0, 2015.0)

    def test_method_order_is_canonical(self, small_dataset):
        assert small_dataset.methods == ("oc_pills", "injectables")
        order = [METHOD_LABELS.index(m) for m in small_dataset.methods]
        assert order == sorted(order)

    def test_subset_preserves_labels(self, small_dataset):
        keep = small_dataset.sector == 1
        sub = small_dataset.subset(keep)
        assert sub.countries == small_dataset.countries
        assert sub.n_obs == int(keep.sum())

    def test_conflicting_region_assignment_errors(self):
        rows = [
            obs_row("Kenya", "Region A", "iud", "public", 2000, 0.4, 0.02),
            obs_row("Kenya", "Region B", "iud", "public", 2005, 0.4, 0.02),
        ]
        with pytest.raises(ValidationError, match="more than one region"):
            parse_observations(make_csv(rows))

    def test_sector_labels_cover_three_sectors(self):
        assert SECTOR_LABELS == ("public", "private_medical", "private_other")


class TestSESummary:
    def test_two_value_median_interpolates(self):
        rows = [
            obs_row(year=2000, se=0.02),
            obs_row(year=2005, se=0.04),
        ]
        summary = summarize_se(parse_observations(make_csv(rows)))
        assert summary.median == pytest.approx(0.03)
        assert summary.minimum == 0.02
        assert summary.maximum == 0.04
        assert summary.n_obs == 2

    def test_singleton_dataset(self):
        summary = summarize_se(parse_observations(make_csv([obs_row(se=0.05)])))
        assert summary.minimum == summary.maximum == summary.median == 0.05

    def test_per_method_means(self):
        rows = [
            obs_row(method="iud", year=2000, se=0.02),
            obs_row(method="iud", year=2005, se=0.04),
            obs_row(method="oc_pills", year=2000, se=0.10),
        ]
        summary = summarize_se(parse_observations(make_csv(rows)))
        assert summary.per_method_mean["iud"] == pytest.approx(0.03)
        assert summary.per_method_mean["oc_pills"] == pytest.approx(0.10)

    def test_random_files_summary_matches_numpy(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(1, 40))
            ses = rng.uniform(0.001, 0.2, size=n).round(6)
            rows = [
                obs_row(year=2000 + i % 20, method="iud", se=se)
                for i, se in enumerate(ses)
            ]
            summary = summarize_se(parse_observations(make_csv(rows)))
            assert summary.median == pytest.approx(float(np.median(ses)))
            assert summary.minimum == pytest.approx(float(ses.min()))
            assert summary.maximum == pytest.approx(float(ses.max()))
