"""Command line interface.

Subcommands:

* ``fit``: estimate a model and write a run directory.
* ``validate``: hold out each country's latest survey, refit, and score
  the predictions.
* ``export``: pull tables or figures out of a finished run.
* ``emu-adjust``: divide service statistics by fitted sector shares.
* ``summarize-se``: quick sampling-error overview of an input file.

Every numeric option can also come from a ``--config`` file of
``key = value`` lines; explicit flags win over file values.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import __version__
from .data import DEFAULT_WINDOW, parse_observations, summarize_se
from .emu import emu_adjust, parse_service_stats
from .errors import InputOutputError, SectorShareError, ValidationError
from .model import PriorConfig
from .persist import (
    BASIS_HEADER,
    DIAGNOSTICS_HEADER,
    DRAWS_HEADER,
    RHO_HEADER,
    SUMMARY_HEADER,
    VALIDATION_HEADER,
    RunWriter,
    basis_rows,
    build_manifest,
    convergence_dict,
    diagnostics_rows,
    draws_long_rows,
    load_draws,
    read_manifest,
    rho_rows,
    summaries_rows,
    validation_rows,
    validation_summary_dict,
)
from .sampler import SamplerConfig
from .svgplot import country_method_svg
from .validation import validate_variant
from .variants import VARIANTS, fit_variant

EMU_HEADER = [
    "country",
    "method",
    "sector",
    "year",
    "users",
    "wra",
    "emu_raw",
    "share_median",
    "emu_median",
    "emu_lo95",
    "emu_hi95",
    "flag_exceeds_one",
]

# name -> (converter, allowed commands); mirrors the CLI flags
_CONFIG_SPEC = {
    "model": ("choice:" + ",".join(VARIANTS), ("fit", "validate")),
    "seed": ("int", ("fit", "validate")),
    "chains": ("int", ("fit", "validate")),
    "warmup": ("int", ("fit", "validate")),
    "samples": ("int", ("fit", "validate")),
    "thin": ("int", ("fit", "validate")),
    "threads": ("int", ("fit", "validate")),
    "spacing": ("float", ("fit", "validate")),
    "window_start": ("float", ("fit", "validate")),
    "window_end": ("float", ("fit", "validate")),
    "block_delta": ("bool", ("fit", "validate")),
    "cauchy_scale": ("float", ("fit", "validate")),
    "cauchy_on": ("choice:sd,variance", ("fit", "validate")),
    "mode": ("choice:predictive,credible", ("validate",)),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert_config_value(key: str, kind: str, raw: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        choices = kind.removeprefix("choice:").split(",")
        if raw not in choices:
            raise ValueError(f"must be one of {', '.join(choices)}")
        return raw
    except ValueError as exc:
        raise ValidationError(f"config value for {key!r}: {exc}") from None


def load_config_file(path: str, command: str) -> dict:
    """Read ``key = value`` lines into defaults for one subcommand."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputOutputError(f"cannot read config file {path}: {exc}") from exc
    out: dict = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not sep or not key or not value:
            raise ValidationError(
                f"config file {path} line {ln}: expected 'key = value'"
            )
        if key not in _CONFIG_SPEC:
            raise ValidationError(f"config file {path}: unknown key {key!r}")
        kind, commands = _CONFIG_SPEC[key]
        if command not in commands:
            raise ValidationError(
                f"config file {path}: key {key!r} does not apply to '{command}'"
            )
        out[key] = _convert_config_value(key, kind, value)
    return out


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="observation CSV file")
    p.add_argument("--out", required=True, help="run directory to create")
    p.add_argument("--config", help="file of 'key = value' defaults")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (required)")
    p.add_argument("--model", choices=VARIANTS, default="full")
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--warmup", type=int, default=1000)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--spacing", type=float, default=None, help="knot spacing in years")
    p.add_argument("--window-start", type=float, default=DEFAULT_WINDOW[0])
    p.add_argument("--window-end", type=float, default=DEFAULT_WINDOW[1])
    p.add_argument("--block-delta", action="store_true", default=False)
    p.add_argument("--cauchy-scale", type=float, default=1.0)
    p.add_argument("--cauchy-on", choices=("sd", "variance"), default="sd")


def build_parser(config_defaults: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sectorshare",
        description="sector share estimation for contraceptive supply data",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    fit = sub.add_parser("fit", help="fit a model and write a run directory")
    _add_fit_options(fit)

    val = sub.add_parser("validate", help="holdout validation of one variant")
    _add_fit_options(val)
    val.add_argument("--mode", choices=("predictive", "credible"), default="predictive")

    exp = sub.add_parser("export", help="export tables or plots from a run")
    exp.add_argument("--run", required=True, help="run directory from 'fit'")
    exp.add_argument(
        "--what",
        required=True,
        choices=("summaries", "draws", "rho", "basis", "svg"),
    )
    exp.add_argument("--out", default=None, help="output file (default stdout)")
    exp.add_argument("--country", default=None, help="country for --what svg")
    exp.add_argument("--method", default=None, help="method for --what svg")

    emu = sub.add_parser("emu-adjust", help="supply-adjust service statistics")
    emu.add_argument("--run", required=True, help="run directory from 'fit'")
    emu.add_argument("--service-stats", required=True, help="service statistic CSV")
    emu.add_argument("--out", default=None, help="output file (default stdout)")

    se = sub.add_parser("summarize-se", help="sampling error overview of a data file")
    se.add_argument("--data", required=True, help="observation CSV file")

    if config_defaults:
        for p, name in ((fit, "fit"), (val, "validate")):
            if name in config_defaults:
                p.set_defaults(**config_defaults[name])
    return parser


def _sampler_config(args) -> SamplerConfig:
    if args.seed is None:
        raise ValidationError(
            "a seed is required; pass --seed or set 'seed' in the config file"
        )
    return SamplerConfig(
        seed=args.seed,
        n_chains=args.chains,
        n_warmup=args.warmup,
        n_samples=args.samples,
        thin=args.thin,
        block_delta_updates=args.block_delta,
        n_threads=args.threads,
    )


def _prior_config(args) -> PriorConfig:
    return PriorConfig(cauchy_scale=args.cauchy_scale, cauchy_on=args.cauchy_on)


def _load_dataset(args):
    return parse_observations(
        args.data, window=(args.window_start, args.window_end)
    )


def _print_convergence(conv: dict) -> None:
    print(
        f"convergence: max split-rhat {conv['max_rhat']:.3f}, "
        f"min ess {conv['min_ess']:.0f}, "
        f"{conv['n_flagged']}/{conv['n_parameters']} parameters flagged"
    )


def cmd_fit(args) -> int:
    dataset = _load_dataset(args)
    cfg = _sampler_config(args)
    prior = _prior_config(args)
    manifest = build_manifest(
        variant=args.model,
        cfg=cfg,
        prior=prior,
        dataset=dataset,
        spacing=args.spacing,
        command="fit",
    )
    with RunWriter(args.out, manifest) as w:
        w.path("data.csv").write_text(dataset.to_csv(), encoding="utf-8")
        fit = fit_variant(args.model, dataset, prior, cfg, spacing=args.spacing)
        if fit.stage1 is not None:
            w.write_draws("stage1.npz", fit.stage1, "stage1")
        w.write_draws("draws.npz", fit.draws, args.model)
        w.write_csv("rho.csv", RHO_HEADER, rho_rows(fit.rho, dataset.methods))
        w.write_csv("summaries.csv", SUMMARY_HEADER, summaries_rows(fit.draws))
        w.write_csv(
            "diagnostics.csv", DIAGNOSTICS_HEADER, diagnostics_rows(fit.draws)
        )
        conv = convergence_dict(fit.draws)
        w.write_json("convergence.json", conv)
    print(
        f"fit: {args.model} model, {dataset.n_obs} observations, "
        f"{dataset.n_countries} countries, {dataset.n_methods} methods"
    )
    print(f"draws: {cfg.n_chains} chains x {cfg.n_stored} stored")
    _print_convergence(conv)
    print(f"run directory: {w.dir}")
    return 0


def cmd_validate(args) -> int:
    dataset = _load_dataset(args)
    cfg = _sampler_config(args)
    prior = _prior_config(args)
    manifest = build_manifest(
        variant=args.model,
        cfg=cfg,
        prior=prior,
        dataset=dataset,
        spacing=args.spacing,
        command="validate",
    )
    with RunWriter(args.out, manifest) as w:
        report = validate_variant(
            dataset, args.model, prior, cfg, mode=args.mode, spacing=args.spacing
        )
        w.write_csv("validation.csv", VALIDATION_HEADER, validation_rows(report))
        summary = validation_summary_dict(report)
        w.write_json("validation.json", summary)
    print(
        f"validation: {args.model} model, {report.n_held_out} held-out "
        f"observations, {report.n_train} training observations"
    )
    print(
        f"errors: rmse {summary['overall']['rmse_pct']:.2f} pp, "
        f"median |error| {summary['overall']['median_abs_error_pct']:.2f} pp"
    )
    cov = summary["coverage"]
    print(
        f"{cov['mode']} {100 * cov['level']:.0f}% interval coverage: "
        f"{cov['coverage_pct']:.1f}% "
        f"(above {cov['above_pct']:.1f}%, below {cov['below_pct']:.1f}%)"
    )
    print(f"run directory: {w.dir}")
    return 0


def _emit_csv(out: str | None, header: list[str], rows, run_hash: str) -> None:
    if out is None:
        fh = sys.stdout
        close = False
    else:
        try:
            fh = open(out, "w", encoding="utf-8", newline="")
        except OSError as exc:
            raise InputOutputError(f"cannot write {out}: {exc}") from exc
        close = True
    try:
        fh.write(f"# manifest_hash={run_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    finally:
        if close:
            fh.close()


def cmd_export(args) -> int:
    manifest = read_manifest(args.run)
    run_hash = manifest["manifest_hash"]
    draws = load_draws(Path(args.run) / "draws.npz")
    if args.what == "svg":
        if not args.country or not args.method:
            raise ValidationError("--what svg needs --country and --method")
        text = country_method_svg(draws, args.country, args.method)
        if args.out is None:
            sys.stdout.write(text)
        else:
            Path(args.out).write_text(text, encoding="utf-8")
            print(f"wrote {args.out}")
        return 0
    table = {
        "summaries": (SUMMARY_HEADER, summaries_rows(draws)),
        "draws": (DRAWS_HEADER, draws_long_rows(draws)),
        "rho": (RHO_HEADER, rho_rows(draws.packed.rho, draws.dataset.methods)),
        "basis": (BASIS_HEADER, basis_rows(draws)),
    }
    header, rows = table[args.what]
    _emit_csv(args.out, header, rows, run_hash)
    if args.out is not None:
        print(f"wrote {args.out}")
    return 0


def cmd_emu_adjust(args) -> int:
    manifest = read_manifest(args.run)
    draws = load_draws(Path(args.run) / "draws.npz")
    stats = parse_service_stats(args.service_stats)
    rows = emu_adjust(draws, stats)
    out_rows = (
        [
            r["country"],
            r["method"],
            r["sector"],
            format(r["year"], "g"),
            repr(float(r["users"])),
            repr(float(r["wra"])),
            repr(float(r["emu_raw"])),
            repr(float(r["share_median"])),
            repr(float(r["emu_median"])),
            repr(float(r["emu_lo95"])),
            repr(float(r["emu_hi95"])),
            int(r["flag_exceeds_one"]),
        ]
        for r in rows
    )
    _emit_csv(args.out, EMU_HEADER, out_rows, manifest["manifest_hash"])
    flagged = sum(r["flag_exceeds_one"] for r in rows)
    if args.out is not None:
        print(f"wrote {args.out}")
    print(f"adjusted {len(rows)} service statistics, {flagged} flagged above 1")
    return 0


def cmd_summarize_se(args) -> int:
    dataset = parse_observations(args.data)
    s = summarize_se(dataset)
    print(f"observations: {s.n_obs}")
    print(
        "sampling errors (percentage points): "
        f"min {100 * s.minimum:.3f}, median {100 * s.median:.3f}, "
        f"max {100 * s.maximum:.3f}"
    )
    print("mean by method:")
    for method, mean in s.per_method_mean.items():
        print(f"  {method}: {100 * mean:.3f}")
    return 0


_DISPATCH = {
    "fit": cmd_fit,
    "validate": cmd_validate,
    "export": cmd_export,
    "emu-adjust": cmd_emu_adjust,
    "summarize-se": cmd_summarize_se,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None):
            defaults = load_config_file(args.config, args.cmd)
            if defaults:
                parser = build_parser({args.cmd: defaults})
                args = parser.parse_args(argv)
        return _DISPATCH[args.cmd](args)
    except SectorShareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
