"""Command-line surface: one subcommand per diagnostic, JSON for machines
and CSV tables mirroring the headline result layouts for humans.

Every emitted file embeds a run manifest (subcommand, parameters, input
content hashes, seed, toolkit version) so identical manifests yield
byte-identical outputs. Exit codes: 0 success, 2 input error, 3 detection
precondition not met (e.g. an unresolved wavelength band).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime
from pathlib import Path

import numpy as np

from . import __version__
from . import climatology, detectors, extremes, gridio, memorize, perturb, spectra, synth
from .gridio import PreconditionError


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest(args, inputs: dict[str, str]) -> dict:
    params = {
        k: v for k, v in sorted(vars(args).items())
        if k not in ("func",) and not callable(v)
    }
    return {
        "tool": "rollstab",
        "version": __version__,
        "subcommand": args.subcommand,
        "params": params,
        "inputs": {name: {"path": str(p), "sha256": _sha256(p)}
                   for name, p in inputs.items() if p},
    }


def _write_json(path, doc: dict) -> None:
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


def _csv_header(f, manifest: dict, units: str) -> None:
    f.write(f"# rollstab {__version__} {manifest['subcommand']}\n")
    f.write(f"# units: {units}\n")
    f.write(f"# manifest: {json.dumps(manifest, sort_keys=True)}\n")


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if x.is_integer():
        return str(int(x))
    return repr(x)


def _day_cell(day, horizon) -> str:
    if day is None:
        return f">{_fmt(horizon)}"
    return _fmt(day)


def _ratio_cell(ss) -> str:
    if ss is None:
        return "unresolved"
    return f"{ss.ratio_vs_reference:.2g} ({ss.ratio_vs_self:.2g})"


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    if args.regime_config:
        cfg = synth.load_config(args.regime_config)
    else:
        grid = gridio.GridSpec.regular(*map(int, args.grid.split("x")))
        cfg = synth.RegimeConfig(
            regime=args.regime,
            grid=grid,
            variables=tuple(args.variables.split(",")),
            g_large=args.g_large,
            g_medium=args.g_medium,
            g_small=args.g_small,
            seasonal_amplitude=args.amplitude,
            tau_days=args.tau_days,
            onset_day=args.onset_days,
            growth_rate=args.delta,
            blowup_band=args.blowup_band,
            seed_amplitude=args.seed_amplitude,
            noise_large=args.noise,
            noise_medium=args.noise,
            noise_small=args.noise_small if args.noise_small is not None else args.noise,
            cap=args.cap,
            init_std=args.init_std,
            year_jitter=args.year_jitter,
            seed=args.seed,
        )
    start = datetime.fromisoformat(args.start_time) if args.start_time else None
    series, labels = synth.generate(cfg, args.horizon_days,
                                    step_seconds=args.step_seconds, start_time=start)
    series.attrs["manifest"] = _manifest(args, {"regime_config": args.regime_config})
    gridio.write_rollout(series, args.output)
    if args.labels:
        doc = labels.to_dict()
        doc["config"] = synth.config_to_dict(cfg)
        doc["manifest"] = _manifest(args, {"regime_config": args.regime_config})
        _write_json(args.labels, doc)
    return 0


def cmd_spectra(args) -> int:
    r = gridio.read_rollout(args.input)
    spec = spectra.spectrum_series(r, args.variable, daily=args.daily)
    manifest = _manifest(args, {"input": args.input})
    with open(args.output, "w") as f:
        _csv_header(f, manifest, "band energies in variable units (zonal Fourier amplitude)")
        if spec.band_small is None:
            f.write("# note: small band unresolved on this grid; column left empty\n")
        f.write("timestamp,band_large,band_medium,band_small\n")
        small = spec.band_small
        for i, t in enumerate(spec.timestamps):
            s = "" if small is None else _fmt(small[i])
            f.write(f"{t},{_fmt(spec.band_large[i])},{_fmt(spec.band_medium[i])},{s}\n")
    if args.full_output:
        with open(args.full_output, "w") as f:
            _csv_header(f, manifest, "per-wavenumber zonal Fourier amplitude")
            cols = ",".join(f"k{int(k)}" for k in spec.wavenumbers)
            f.write(f"timestamp,{cols}\n")
            for i, t in enumerate(spec.timestamps):
                row = ",".join(_fmt(x) for x in spec.energy[i])
                f.write(f"{t},{row}\n")
    return 0


def _series_steps_per_day(times: np.ndarray) -> float:
    steps = np.diff(times).astype("timedelta64[s]").astype(float)
    if steps.size == 0 or np.any(steps != steps[0]) or steps[0] <= 0:
        raise ValueError("series timestamps must be uniformly spaced")
    return 86400.0 / steps[0]


def cmd_blowup(args) -> int:
    inputs = {}
    if args.input:
        r = gridio.read_rollout(args.input)
        gridio.require_finite(r, args.variable)
        ext = gridio.spatial_extremes(r, args.variable)
        mn, mx = ext.min, ext.max
        steps_per_day = 86400.0 / r.step_seconds
        inputs["input"] = args.input
    else:
        if not (args.min_csv and args.max_csv):
            raise ValueError("need either --input RGF or both --min-csv and --max-csv")
        tmin, mn = gridio.read_series_csv(args.min_csv)
        tmax, mx = gridio.read_series_csv(args.max_csv)
        if tmin.size != tmax.size or np.any(tmin != tmax):
            raise ValueError("min and max series timestamps differ")
        steps_per_day = _series_steps_per_day(tmin)
        inputs["min_csv"] = args.min_csv
        inputs["max_csv"] = args.max_csv
    res = detectors.detect_blowup(
        mn, mx, steps_per_day=steps_per_day, smoothing_days=args.smoothing_days,
        window_days=args.window_days, r2_threshold=args.r2_threshold,
        stride_days=args.stride_days,
    )
    doc = {
        "blowup_day": res.day,
        "censored": res.day is None,
        "triggered_by": res.triggered_by,
        "r2": res.r2,
        "slope_sign": res.slope_sign,
        "units": "days from rollout start",
        "manifest": _manifest(args, inputs),
    }
    _write_json(args.output, doc)
    return 0


def _band_large_daily(path, variable):
    r = gridio.read_rollout(path)
    spec = spectra.spectrum_series(r, variable, daily=True)
    return gridio.DailySeries(spec.timestamps.astype("datetime64[D]"), spec.band_large)


def cmd_seasonality(args) -> int:
    inputs = {"input": args.input}
    if args.envelope:
        env = climatology.ClimatologyEnvelope.load(args.envelope)
        inputs["envelope"] = args.envelope
    elif args.reference:
        ref = gridio.read_rollout(args.reference)
        env = climatology.build_envelope(
            ref, climatology.band_statistic(args.variable, "large"),
            name=f"band_large[{args.variable}]",
        )
        inputs["reference"] = args.reference
    else:
        raise ValueError("need --envelope or --reference to define the climatology")
    if args.save_envelope:
        env.save(args.save_envelope, extra={"manifest": _manifest(args, inputs)})
    daily = _band_large_daily(args.input, args.variable)
    res = detectors.detect_seasonality_loss(daily, env, multiplier=args.multiplier,
                                            run_days=args.run_days)
    doc = {
        "seasonality_loss_day": res.day,
        "censored": res.day is None,
        "multiplier": res.multiplier,
        "run_length": res.run_length,
        "units": "days from rollout start",
        "manifest": _manifest(args, inputs),
    }
    _write_json(args.output, doc)
    return 0


def cmd_smallscale(args) -> int:
    pred = gridio.read_rollout(args.input)
    ref = gridio.read_rollout(args.reference)
    spec = spectra.spectrum_series(pred, args.variable, daily=True)
    ref_spec = spectra.spectrum_series(ref, args.variable, daily=True)
    res = detectors.small_scale_ratios(spec, ref_spec, blowup_day=args.blowup_day,
                                       window_days=args.window_days)
    doc = {
        "ratio_vs_reference": res.ratio_vs_reference,
        "ratio_vs_self": res.ratio_vs_self,
        "window_days": res.window_days,
        "truncated": res.truncated,
        "units": "dimensionless energy ratios",
        "manifest": _manifest(args, {"input": args.input, "reference": args.reference}),
    }
    _write_json(args.output, doc)
    return 0


def cmd_cycle_rmse(args) -> int:
    a = gridio.read_rollout(args.input)
    b = gridio.read_rollout(args.reference)
    rmse = detectors.seasonal_cycle_rmse(a, b, args.variable)
    doc = {
        "seasonal_cycle_rmse": rmse,
        "units": "variable units",
        "manifest": _manifest(args, {"input": args.input, "reference": args.reference}),
    }
    _write_json(args.output, doc)
    return 0


def _load_adapter(spec_str: str, init_series):
    kind, _, path = spec_str.partition(":")
    if kind == "synth":
        cfg = synth.load_config(path)
        return perturb.SynthAdapter(cfg), path
    if kind == "external":
        if init_series is None:
            raise ValueError("external adapters need --init to define the grid")
        return perturb.ExternalProcessAdapter(path, grid=init_series.grid), path
    raise ValueError(f"unknown adapter kind {kind!r}; use synth:FILE or external:FILE")


def cmd_perturb(args) -> int:
    inputs = {}
    init_series = None
    if args.init:
        init_series = gridio.read_rollout(args.init)
        inputs["init"] = args.init
    adapter, adapter_path = _load_adapter(args.adapter, init_series)
    inputs["adapter"] = adapter_path

    if init_series is not None:
        state = init_series.data[0].astype(np.float64)
        start = init_series.start_time
        if tuple(init_series.variables) != adapter.all_variables:
            raise ValueError("init file variables do not match the adapter")
    elif isinstance(adapter, perturb.SynthAdapter):
        state = adapter.initial_state()
        start = adapter.cfg.epoch
    else:
        raise ValueError("--init is required for this adapter")
    if args.start_time:
        start = datetime.fromisoformat(args.start_time)

    spec = None
    stats = None
    if args.kind:
        spec = perturb.PerturbationSpec(
            kind=args.kind.upper(),
            k=args.k,
            correlation_length=args.correlation_length,
            target=args.target,
            time_shift_days=args.time_shift_days,
            seed=args.seed,
        )
        if not args.stats_from:
            raise ValueError("--stats-from REF.rgf is required with --kind")
        ref = gridio.read_rollout(args.stats_from)
        stats = {v: perturb.variable_stats(ref, v) for v in adapter.all_variables
                 if v in ref.variables}
        inputs["stats_from"] = args.stats_from
    elif args.time_shift_days is not None:
        spec = perturb.PerturbationSpec(kind="WHITE", k=1e-12, target="dynamic",
                                        time_shift_days=args.time_shift_days,
                                        seed=args.seed)
        stats = {v: (0.0, 0.0) for v in adapter.all_variables}

    out = perturb.run_rollout(adapter, state, start, args.steps, spec=spec,
                              stats=stats, step_seconds=args.step_seconds)
    out.attrs["manifest"] = _manifest(args, inputs)
    gridio.write_rollout(out, args.output)
    return 0


def cmd_extremes(args) -> int:
    model = gridio.read_rollout(args.input)
    reference = gridio.read_rollout(args.reference)
    if args.regions:
        regions = gridio.load_regions(args.regions)
    else:
        regions = gridio.builtin_regions()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(args, {"input": args.input, "reference": args.reference,
                                "regions": args.regions})

    mt, rt = model.timestamps, reference.timestamps
    if args.match_window:
        msel, rsel = extremes.match_windows(mt, rt)
    else:
        msel = np.ones(mt.size, dtype=bool)
        rsel = np.ones(rt.size, dtype=bool)

    hot_levels = list(np.round(np.arange(800, 1000) / 10.0, 1))  # P80..P99.9
    cold_levels = list(np.round(np.arange(1, 201) / 10.0, 1))  # P0.1..P20
    summary = {"manifest": manifest, "regions": {}}
    for name, region in sorted(regions.items()):
        thr = climatology.pooled_percentiles(
            reference, args.variable, region,
            sorted(set(hot_levels + cold_levels + [10.0, 90.0])),
        )
        model_ext = extremes.regional_extreme_series(model, args.variable, region)
        ref_ext = extremes.regional_extreme_series(reference, args.variable, region)
        ev_model = extremes.event_series(model, args.variable, region, thr)
        ev_ref = extremes.event_series(reference, args.variable, region, thr)

        qq_hot = extremes.qq_tails(model_ext.max[msel], ref_ext.max[rsel], "hot")
        qq_cold = extremes.qq_tails(model_ext.min[msel], ref_ext.min[rsel], "cold")
        with open(outdir / f"{name}_qq.csv", "w") as f:
            _csv_header(f, manifest, "tail quantiles in variable units")
            f.write("side,level,reference,model\n")
            for qq in (qq_hot, qq_cold):
                for lv, rq, mq in zip(qq.levels, qq.reference, qq.model):
                    f.write(f"{qq.side},{_fmt(lv)},{_fmt(rq)},{_fmt(mq)}\n")

        hot_thr = climatology.ThresholdSet(
            region=name, levels=tuple(hot_levels),
            values=tuple(thr.value_for(lv) for lv in hot_levels), pooling=thr.pooling)
        cold_thr = climatology.ThresholdSet(
            region=name, levels=tuple(cold_levels),
            values=tuple(thr.value_for(lv) for lv in cold_levels), pooling=thr.pooling)
        exc_hot = extremes.exceedance_curve(model_ext.max[msel], ref_ext.max[rsel],
                                            hot_thr, "hot")
        exc_cold = extremes.exceedance_curve(model_ext.min[msel], ref_ext.min[rsel],
                                             cold_thr, "cold")
        with open(outdir / f"{name}_exceedance.csv", "w") as f:
            _csv_header(f, manifest, "exceedance fractions (dimensionless)")
            f.write("side,level,threshold,model_fraction,reference_fraction,ratio\n")
            for exc in (exc_hot, exc_cold):
                for i, lv in enumerate(exc.levels):
                    ratio = _fmt(exc.ratio[i]) if exc.ratio_defined[i] else "undefined"
                    f.write(f"{exc.side},{_fmt(lv)},{_fmt(exc.thresholds[i])},"
                            f"{_fmt(exc.model_fraction[i])},"
                            f"{_fmt(exc.reference_fraction[i])},{ratio}\n")

        with open(outdir / f"{name}_events.csv", "w") as f:
            _csv_header(f, manifest, "event counts at pooled P90/P10 thresholds")
            f.write("series,hot_events,cold_events,n_timesteps\n")
            f.write(f"model,{int(ev_model.hot[msel].sum())},"
                    f"{int(ev_model.cold[msel].sum())},{int(msel.sum())}\n")
            f.write(f"reference,{int(ev_ref.hot[rsel].sum())},"
                    f"{int(ev_ref.cold[rsel].sum())},{int(rsel.sum())}\n")
        summary["regions"][name] = {
            "p90": thr.value_for(90.0), "p10": thr.value_for(10.0),
            "model_hot": int(ev_model.hot[msel].sum()),
            "model_cold": int(ev_model.cold[msel].sum()),
            "reference_hot": int(ev_ref.hot[rsel].sum()),
            "reference_cold": int(ev_ref.cold[rsel].sum()),
        }
    _write_json(outdir / "summary.json", summary)
    return 0


def cmd_memorize(args) -> int:
    rollout = gridio.read_rollout(args.rollout)
    training = gridio.read_rollout(args.index)
    variables = tuple(args.variables.split(",")) if args.variables else None
    index = memorize.build_index(training, variables)
    results = memorize.memorization_series(rollout, index, window_days=args.window_days)
    manifest = _manifest(args, {"rollout": args.rollout, "index": args.index})
    with open(args.output, "w") as f:
        _csv_header(f, manifest, "dimensionless distance ratio; d1/d2 in weighted L2")
        f.write("timestamp,ratio,d1,d2,first_neighbor,second_neighbor\n")
        for t, res in zip(rollout.timestamps, results):
            f.write(f"{t},{_fmt(res.ratio)},{_fmt(res.d1)},{_fmt(res.d2)},"
                    f"{res.first_id},{res.second_id}\n")
    return 0


def _report_csv(f, manifest, reports: list[detectors.StabilityReport]) -> None:
    _csv_header(f, manifest,
                "days from rollout start; >H means censored at horizon H; "
                "small_scale cells are ratio_vs_reference (ratio_vs_self)")
    variables = reports[0].variables
    f.write("run,metric," + ",".join(variables) + "\n")
    for rep in reports:
        cells = [_day_cell(rep.blowup[v].day, rep.horizon_days) for v in variables]
        f.write(f"{rep.name},blowup_days," + ",".join(cells) + "\n")
        cells = [_day_cell(rep.seasonality[v].day, rep.horizon_days) for v in variables]
        f.write(f"{rep.name},seasonality_days," + ",".join(cells) + "\n")
        cells = [_ratio_cell(rep.small_scale.get(v)) for v in variables]
        f.write(f"{rep.name},small_scale," + ",".join(cells) + "\n")


def cmd_report(args) -> int:
    pred = gridio.read_rollout(args.prediction)
    ref = gridio.read_rollout(args.reference)
    rep = detectors.build_report(
        pred, ref, name=args.name, multiplier=args.multiplier, run_days=args.run_days,
        window_days=args.window_days, smoothing_days=args.smoothing_days,
        r2_threshold=args.r2_threshold,
    )
    manifest = _manifest(args, {"prediction": args.prediction, "reference": args.reference})
    doc = rep.to_dict()
    doc["manifest"] = manifest
    _write_json(args.output, doc)
    if args.csv:
        with open(args.csv, "w") as f:
            _report_csv(f, manifest, [rep])
    return 0


def cmd_aggregate(args) -> int:
    reports = []
    for path in args.reports:
        with open(path) as f:
            reports.append(detectors.StabilityReport.from_dict(json.load(f)))
    agg = detectors.aggregate_runs(reports)
    manifest = _manifest(args, {f"report_{i}": p for i, p in enumerate(args.reports)})
    agg["manifest"] = manifest
    _write_json(args.output, agg)
    if args.csv:
        with open(args.csv, "w") as f:
            _csv_header(f, manifest, "mean +- sample std per metric per variable")
            variables = agg["variables"]
            f.write("metric," + ",".join(variables) + "\n")
            for metric, per_var in agg["metrics"].items():
                cells = []
                for v in variables:
                    entry = per_var[v]
                    if entry is None:
                        cells.append("unresolved")
                    else:
                        cells.append(f"{entry['mean']:.6g} +- {entry['std']:.6g}")
                f.write(f"{metric}," + ",".join(cells) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="rollstab",
        description="Stability diagnostics for long autoregressive forecast rollouts.",
    )
    parser.add_argument("--version", action="version", version=f"rollstab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sps = {}

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=func, subcommand=name)
        sp.add_argument("--config", help="JSON file of flag defaults", default=None)
        sps[name] = sp
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic rollout with a failure regime")
    sp.add_argument("--regime", choices=synth.REGIMES, default="STABLE")
    sp.add_argument("--regime-config", default=None,
                    help="JSON regime config (overrides the individual flags)")
    sp.add_argument("--horizon-days", type=float, required=True)
    sp.add_argument("--grid", default="16x240", help="NLATxNLON regular grid")
    sp.add_argument("--variables", default="T2m", help="comma-separated names")
    sp.add_argument("--g-large", type=float, default=0.95)
    sp.add_argument("--g-medium", type=float, default=0.95)
    sp.add_argument("--g-small", type=float, default=0.95)
    sp.add_argument("--amplitude", type=float, default=5.0, help="seasonal amplitude")
    sp.add_argument("--tau-days", type=float, default=None, help="DRIFT decay time")
    sp.add_argument("--onset-days", type=float, default=None, help="BLOWUP onset day")
    sp.add_argument("--delta", type=float, default=None, help="BLOWUP per-step growth")
    sp.add_argument("--blowup-band", choices=("large", "medium", "small"), default="medium")
    sp.add_argument("--seed-amplitude", type=float, default=0.05)
    sp.add_argument("--noise", type=float, default=0.02, help="per-band noise std")
    sp.add_argument("--noise-small", type=float, default=None)
    sp.add_argument("--cap", type=float, default=None, help="SHARPEN amplitude clamp")
    sp.add_argument("--init-std", type=float, default=1.0)
    sp.add_argument("--year-jitter", type=float, default=0.0)
    sp.add_argument("--start-time", default=None, help="ISO-8601 start timestamp")
    sp.add_argument("--step-seconds", type=int, default=21600)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output", required=True, help="output RGF path")
    sp.add_argument("--labels", default=None, help="ground-truth labels JSON path")

    sp = add("spectra", cmd_spectra, "band-averaged zonal energy spectra as CSV")
    sp.add_argument("--input", required=True, help="rollout RGF")
    sp.add_argument("--variable", required=True)
    sp.add_argument("--daily", action="store_true", help="average spectra per UTC day")
    sp.add_argument("-o", "--output", required=True, help="band CSV path")
    sp.add_argument("--full-output", default=None, help="optional per-wavenumber CSV")

    sp = add("blowup", cmd_blowup, "detect exponential blow-up of spatial extremes")
    sp.add_argument("--input", default=None, help="rollout RGF")
    sp.add_argument("--variable", default=None)
    sp.add_argument("--min-csv", default=None, help="1-D min series CSV")
    sp.add_argument("--max-csv", default=None, help="1-D max series CSV")
    sp.add_argument("--window-days", type=float, default=30)
    sp.add_argument("--smoothing-days", type=float, default=4)
    sp.add_argument("--r2-threshold", type=float, default=0.9)
    sp.add_argument("--stride-days", type=float, default=1)
    sp.add_argument("-o", "--output", required=True, help="result JSON path")

    sp = add("seasonality", cmd_seasonality, "detect loss of seasonality vs climatology")
    sp.add_argument("--input", required=True, help="rollout RGF")
    sp.add_argument("--variable", required=True)
    sp.add_argument("--envelope", default=None, help="envelope JSON from a previous run")
    sp.add_argument("--reference", default=None, help="multi-year reference RGF")
    sp.add_argument("--save-envelope", default=None, help="write the built envelope here")
    sp.add_argument("--multiplier", type=float, default=2.0)
    sp.add_argument("--run-days", type=int, default=45)
    sp.add_argument("-o", "--output", required=True, help="result JSON path")

    sp = add("smallscale", cmd_smallscale, "small-band energy ratios vs reference and self")
    sp.add_argument("--input", required=True, help="prediction RGF")
    sp.add_argument("--reference", required=True, help="reference RGF")
    sp.add_argument("--variable", required=True)
    sp.add_argument("--blowup-day", type=float, default=None)
    sp.add_argument("--window-days", type=float, default=30)
    sp.add_argument("-o", "--output", required=True, help="result JSON path")

    sp = add("cycle-rmse", cmd_cycle_rmse, "RMSE between monthly seasonal cycles")
    sp.add_argument("--input", required=True, help="rollout RGF")
    sp.add_argument("--reference", required=True, help="reference RGF, same span")
    sp.add_argument("--variable", required=True)
    sp.add_argument("-o", "--output", required=True, help="result JSON path")

    sp = add("perturb", cmd_perturb, "run a perturbed rollout through an adapter")
    sp.add_argument("--adapter", required=True, help="synth:CFG.json or external:MANIFEST.json")
    sp.add_argument("--init", default=None, help="initial state RGF (first timestep used)")
    sp.add_argument("--kind", choices=[k.lower() for k in perturb.KINDS], default=None)
    sp.add_argument("--k", type=float, default=1.0, help="amplitude in sigma units")
    sp.add_argument("--correlation-length", type=float, default=10.0)
    sp.add_argument("--target", choices=perturb.TARGETS, default="dynamic")
    sp.add_argument("--time-shift-days", type=float, default=None)
    sp.add_argument("--stats-from", default=None, help="reference RGF for (mu, sigma)")
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--step-seconds", type=int, default=21600)
    sp.add_argument("--start-time", default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("-o", "--output", required=True, help="output rollout RGF")

    sp = add("extremes", cmd_extremes, "regional extreme-event statistics")
    sp.add_argument("--input", required=True, help="model rollout RGF")
    sp.add_argument("--reference", required=True, help="reference RGF (thresholds pool)")
    sp.add_argument("--variable", required=True)
    sp.add_argument("--regions", default=None, help="regions JSON (default: built-ins)")
    sp.add_argument("--no-match-window", dest="match_window", action="store_false",
                    help="skip timestamp-intersection windowing")
    sp.add_argument("--outdir", required=True, help="directory for per-region CSVs")

    sp = add("memorize", cmd_memorize, "nearest-neighbor distance ratios vs training data")
    sp.add_argument("--rollout", required=True, help="rollout RGF to test")
    sp.add_argument("--index", required=True, help="training RGF to index")
    sp.add_argument("--variables", default=None, help="comma-separated subset")
    sp.add_argument("--window-days", type=int, default=10)
    sp.add_argument("-o", "--output", required=True, help="ratios CSV path")

    sp = add("report", cmd_report, "full stability report (blow-up, seasonality, small scales)")
    sp.add_argument("--prediction", required=True, help="prediction RGF")
    sp.add_argument("--reference", required=True, help="multi-year reference RGF")
    sp.add_argument("--name", default="rollout")
    sp.add_argument("--multiplier", type=float, default=2.0)
    sp.add_argument("--run-days", type=int, default=45)
    sp.add_argument("--window-days", type=float, default=30)
    sp.add_argument("--smoothing-days", type=float, default=4)
    sp.add_argument("--r2-threshold", type=float, default=0.9)
    sp.add_argument("-o", "--output", required=True, help="report JSON path")
    sp.add_argument("--csv", default=None, help="optional CSV table path")

    sp = add("aggregate", cmd_aggregate, "mean +- std across multiple report JSONs")
    sp.add_argument("reports", nargs="+", help="report JSON files")
    sp.add_argument("-o", "--output", required=True, help="aggregate JSON path")
    sp.add_argument("--csv", default=None, help="optional CSV table path")

    return parser, sps


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, sps = build_parser()

    # apply --config JSON as flag defaults before parsing
    if "--config" in argv:
        i = argv.index("--config")
        if i + 1 >= len(argv):
            parser.error("--config needs a file argument")
        try:
            with open(argv[i + 1]) as f:
                overrides = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            print(f"rollstab: cannot read config: {e}", file=sys.stderr)
            return 2
        for sp in sps.values():
            known = {a.dest for a in sp._actions}
            applied = {k.replace("-", "_"): v for k, v in overrides.items()
                       if k.replace("-", "_") in known}
            sp.set_defaults(**applied)
            for action in sp._actions:
                if action.dest in applied:
                    action.required = False

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PreconditionError as e:
        print(f"rollstab: precondition not met: {e}", file=sys.stderr)
        return 3
    except (gridio.RGFError, ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"rollstab: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
