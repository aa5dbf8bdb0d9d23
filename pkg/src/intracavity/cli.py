"""Command-line front end: ``intracavity <subcommand> [--config FILE] [--set k=v] ...``.

Every subcommand writes its artifacts to ``--out-dir``; CSV files start with
``#`` metadata lines (including the effective seed) and identical arguments
give byte-identical files.  Exit status: 0 ok, 1 invalid input, 2 run failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binom

from . import __version__
from . import io as aio
from .aod import (ToneSet, common_period, crest_factor, synthesize, write_waveform_binary,
                  write_waveform_csv)
from .assembly import (InfeasiblePatternError, NoPathError, build_sort_plan,
                       loading_histograms, sample_loading, sample_loading_counts, success_curve)
from .assembly.statistics import trial_rng
from .config import ConfigError, ScenarioConfig, load_config
from .experiments import (CALIBRATED_PHOTONS, PIXEL_SCALE, NoSpotError, fit_beam_profile,
                          fit_transmission_scan, localize_atom, scan_transmission,
                          simulate_beam_image, simulate_parametric_heating, simulate_spot_image)
from .physics import (RB87, LightShiftModel, TweezerBeam, cooperativity, coupling_at,
                      oscillator_length, potential_depth, tensor_light_shift, trap_frequencies,
                      transmission)

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2
TWO_PI = 2 * np.pi


class RunFailure(RuntimeError):
    """A run completed but did not produce a valid result."""


def _meta(args, cfg: ScenarioConfig, command: str, **extra) -> dict:
    meta = {"command": command, "seed": args.seed, "version": __version__}
    meta.update(extra)
    return meta


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


# -- subcommands -----------------------------------------------------------


def cmd_physics(args, cfg: ScenarioConfig, out: Path) -> None:
    cav = cfg.cavity()
    tw = cfg.tweezer()
    p_tw = cfg["tweezer", "power_mw"]
    heat_beam = cfg.heating_beam()
    p_heat = cfg["heat", "power_mw"]
    spec = trap_frequencies(p_heat, heat_beam)
    t0, tg = float(transmission(0.0, cav)), float(transmission(cav.g0, cav))
    k_b = RB87.k_B
    depth_geo = potential_depth(p_tw, tw) / k_b
    depth_fit = potential_depth(p_tw, TweezerBeam.circular(tw.wavelength, heat_beam.waist_x,
                                                           tw.rayleigh_range)) / k_b
    rows = [
        ("transmission_empty", t0, ""),
        ("transmission_g0", tg, ""),
        ("contrast", t0 / tg, ""),
        ("cooperativity", cooperativity(cav), ""),
        ("coupling_quarter_wave_mhz", float(coupling_at(cav.lambda_c / 4, cav)) / TWO_PI / 1e6, "MHz"),
        ("depth_tweezer_geometric_waist_mk", depth_geo * 1e3, "mK"),
        ("depth_tweezer_fitted_waist_mk", depth_fit * 1e3, "mK"),
        ("depth_heat_beam_mk", potential_depth(p_heat, heat_beam) / k_b * 1e3, "mK"),
        ("nu_perp_khz", spec.nu_perp / 1e3, "kHz"),
        ("nu_par_khz", spec.nu_par / 1e3, "kHz"),
        ("oscillator_length_perp_nm", float(oscillator_length(spec.nu_perp)) * 1e9, "nm"),
        ("oscillator_length_par_nm", float(oscillator_length(spec.nu_par)) * 1e9, "nm"),
        ("tensor_shift_mf3_1mw_cm2_khz",
         tensor_light_shift(3, 10.0, LightShiftModel()) / 1e3, "kHz"),
    ]
    meta = _meta(args, cfg, "physics eval", tweezer_power_mw=p_tw * 1e3, heat_power_mw=p_heat * 1e3)
    aio.write_csv(out / "physics.csv", ("quantity", "value", "unit"), rows, meta)
    for name, v, unit in rows:
        print(f"{name:34s} {v:.6g} {unit}")


def cmd_waveform(args, cfg: ScenarioConfig, out: Path) -> None:
    w = cfg._si["waveform"]
    n, f0, df, rate = w["n_tones"], w["start_mhz"], w["spacing_mhz"], w["sample_rate_mhz"]
    if n < 1:
        raise ConfigError("waveform.n_tones: need at least one tone")
    tones = ToneSet.comb(f0, df, n, schroeder=w["schroeder"])
    period = common_period(tones.frequencies)
    if period is None:
        raise ConfigError("waveform.start_mhz / spacing_mhz: tones are not commensurate")
    try:
        samples = synthesize(tones, rate, period)
    except ValueError as exc:
        raise ConfigError(f"waveform.sample_rate_mhz: {exc}") from None
    flat = synthesize(ToneSet.comb(f0, df, n, schroeder=False), rate, period)
    cf, cf0 = crest_factor(samples), crest_factor(flat)
    header = ["command: waveform", f"seed: {args.seed}", f"n_tones: {n}",
              f"schroeder: {w['schroeder']}", f"crest_factor: {cf!r}"]
    write_waveform_csv(out / "waveform.csv", samples, rate, header)
    write_waveform_binary(out / "waveform.bin", samples, rate)
    aio.write_csv(out / "crest.csv", ("phases", "crest_factor"),
                  [("schroeder" if w["schroeder"] else "zero", cf), ("zero", cf0)],
                  _meta(args, cfg, "waveform", period_s=repr(period), samples=samples.size))
    print(f"{n} tones, period {period:.6g} s, {samples.size} samples; crest {cf:.4f} "
          f"(zero-phase {cf0:.4f}, ratio {cf / cf0:.3f})")


def cmd_load_sim(args, cfg: ScenarioConfig, out: Path) -> None:
    grid, model = cfg.grid(), cfg.loading()
    try:
        p = model.probability(grid)
    except ValueError as exc:
        raise ConfigError(f"[loading]: {exc}") from None
    trials = args.trials or cfg["run", "trials"]
    counts = sample_loading_counts(grid, model, trials, _rng(args.seed))
    hist = np.bincount(counts, minlength=grid.n_sites + 1)
    expected = trials * binom.pmf(np.arange(grid.n_sites + 1), grid.n_sites, p)
    rows = [(k, int(hist[k]), float(expected[k])) for k in range(grid.n_sites + 1)]
    aio.write_csv(out / "loading.csv", ("n", "count", "binomial_expected"), rows,
                  _meta(args, cfg, "load-sim", trials=trials, p_fill=repr(p), mean=repr(float(counts.mean()))))
    occ = sample_loading(grid, model, _rng(args.seed))
    aio.write_json(out / "occupancy.json", aio.occupancy_to_dict(occ, grid))
    print(f"{trials} loadings, mean {counts.mean():.4f} atoms (expected {p * grid.n_sites:.4f})")


def cmd_sort_plan(args, cfg: ScenarioConfig, out: Path) -> None:
    src = args.occupancy or cfg["sort", "occupancy_file"]
    if src:
        try:
            occ, grid = aio.load_json(src)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"sort.occupancy_file: cannot load {src}: {exc}") from None
    else:
        grid = cfg.grid()
        occ = sample_loading(grid, cfg.loading(), _rng(args.seed))
    pattern = cfg.pattern(grid)
    try:
        pattern.check(grid)
    except ValueError as exc:
        raise ConfigError(f"sort.pattern_sites: {exc}") from None
    lm = cfg.loss()
    try:
        plan = build_sort_plan(occ, pattern, grid, lm.speed, lm.ramp_time,
                               cfg["sort", "exclusion_radius_um"], cfg["sort", "resolution"],
                               discards=not args.no_discards)
    except InfeasiblePatternError as exc:
        raise RunFailure(str(exc)) from None
    except NoPathError as exc:
        raise RunFailure(f"no collision-free path: {exc}") from None
    aio.write_json(out / "occupancy.json", aio.occupancy_to_dict(occ, grid))
    aio.write_json(out / "plan.json", aio.plan_to_dict(plan))
    print(f"{occ.count} atoms, {len(pattern)} targets: {len(plan.moves)} moves, "
          f"{len(plan.discards)} discards, {plan.duration * 1e3:.3f} ms")


def cmd_sort_sim(args, cfg: ScenarioConfig, out: Path) -> None:
    sc = cfg.scenario()
    trials = args.trials or cfg["run", "trials"]
    sizes = cfg.sizes()
    if max(sizes) > sc.grid.n_sites:
        raise ConfigError("sort.sizes: target size exceeds the number of sites")
    rows = success_curve(sc, sizes, trials, args.seed)
    meta = _meta(args, cfg, "sort-sim", trials=trials,
                 handoff_success=repr(sc.loss.handoff_success),
                 note="calibrated reproduction: handoff_success fitted to 2-/3-atom success")
    aio.write_csv(out / "success_curve.csv", ("n", "p_T", "ci_low", "ci_high", "p_P", "ratio"), rows, meta)
    loaded, final = loading_histograms(sc, trials, args.seed)
    aio.write_csv(out / "histograms.csv", ("n", "loaded", "sorted"),
                  [(k, int(loaded[k]), int(final[k])) for k in range(loaded.size)],
                  _meta(args, cfg, "sort-sim", trials=trials, targets=len(sc.pattern)))
    for n, p, lo, hi, pp, r in rows:
        print(f"n={n}: p_T={p:.4f} [{lo:.4f}, {hi:.4f}]  p_P={pp:.3g}  ratio={r:.3g}")


def cmd_scan(args, cfg: ScenarioConfig, out: Path) -> None:
    cav, cal = cfg.cavity(), cfg.calibration()
    s = cfg._si["scan"]
    if s["points"] < 8:
        raise ConfigError("scan.points: need at least 8 points")
    if not s["span_um"] > 0:
        raise ConfigError("scan.span_um: span must be positive (um)")
    fy = cal.origin_freq_y + np.linspace(0.0, s["span_um"], s["points"]) / cal.scale_y
    runs = args.trials or 1
    fits = []
    for i in range(runs):
        scan = scan_transmission(fy, cal, cav, cfg.jitter(), cfg.drift(), trial_rng(args.seed, i),
                                 photons=s["photons"], repeats=s["repeats"], dwell=s["dwell_s"])
        try:
            fit = fit_transmission_scan(scan, cav)
        except ValueError as exc:
            raise RunFailure(f"scan fit rejected the data: {exc}") from None
        fits.append(fit)
        if i == 0:
            scan.meta["seed"] = args.seed
            aio.write_json(out / "scan.json", scan.to_dict())
            aio.write_json(out / "fit.json", fit.to_dict())
            aio.write_csv(out / "scan.csv", ("y_aod_m", "transmission", "error"),
                          zip(scan.abscissa, scan.values, scan.errors),
                          _meta(args, cfg, "scan", alpha_deg=repr(np.degrees(cal.alpha))))
    periods = [f["period"] for f in fits]
    aio.write_csv(out / "scan_fits.csv", ("run", "period_m", "period_err_m", "g_eff_mhz", "converged"),
                  [(i, f["period"], f["period_err"], f["g_eff"] / TWO_PI / 1e6, f.converged)
                   for i, f in enumerate(fits)], _meta(args, cfg, "scan", runs=runs))
    bad = sum(not f.converged for f in fits)
    print(f"{runs} scan(s): period {np.mean(periods) * 1e9:.2f} nm"
          + (f" +- {np.std(periods, ddof=1) * 1e9:.2f} nm" if runs > 1 else
             f" +- {fits[0]['period_err'] * 1e9:.2f} nm") + f", {bad} not converged")
    if bad:
        raise RunFailure(f"{bad} of {runs} fits did not converge")


def cmd_heat_scan(args, cfg: ScenarioConfig, out: Path) -> None:
    h = cfg._si["heat"]
    spec = trap_frequencies(h["power_mw"], cfg.heating_beam())
    if not (0 < h["nu_min_khz"] < h["nu_max_khz"]) or h["points"] < 2:
        raise ConfigError("heat.nu_min_khz / nu_max_khz / points: need 0 < min < max (kHz), >= 2 points")
    if not 0 <= h["depth"] < 1:
        raise ConfigError("heat.depth: modulation depth must lie in [0, 1)")
    nu = np.geomspace(h["nu_min_khz"], h["nu_max_khz"], h["points"])
    traj = args.trials or 1000
    curve = simulate_parametric_heating(spec, nu, h["depth"], h["duration_ms"], _rng(args.seed),
                                        trajectories=traj, temperature=h["temperature_uk"],
                                        trap_depth=potential_depth(h["power_mw"], cfg.heating_beam()))
    dips = curve.dips()
    aio.write_csv(out / "heating.csv", ("nu_m_hz", "survival"), zip(curve.nu_m, curve.survival),
                  _meta(args, cfg, "heat-scan", trajectories=traj, nu_perp_hz=repr(spec.nu_perp),
                        nu_par_hz=repr(spec.nu_par), dips_hz=" ".join(repr(d) for d in dips)))
    print(f"nu_perp {spec.nu_perp / 1e3:.2f} kHz, nu_par {spec.nu_par / 1e3:.2f} kHz; dips at "
          + ", ".join(f"{d / 1e3:.2f} kHz" for d in dips))


def cmd_beam_image(args, cfg: ScenarioConfig, out: Path) -> None:
    b = cfg._si["beam"]
    beam, cav = cfg.tweezer(), cfg.cavity()
    u = np.linspace(-b["span_um"] / 2, b["span_um"] / 2, b["points"])
    alpha = cfg.calibration(probe=True).alpha
    rng = _rng(args.seed)
    for axis in ("x", "y"):
        scan = simulate_beam_image(beam, b["probe_power_nw"], u, cav, rng, axis=axis,
                                   jitter=cfg.jitter(), alpha=alpha)
        fit = fit_beam_profile(scan)
        if not fit.converged:
            raise RunFailure(f"beam profile fit along {axis} did not converge: {fit.message}")
        scan.meta["seed"] = args.seed
        aio.write_json(out / f"beam_{axis}.json", scan.to_dict())
        aio.write_json(out / f"beam_fit_{axis}.json", fit.to_dict())
        aio.write_csv(out / f"beam_{axis}.csv", (f"{axis}_aod_m", "counts", "error"),
                      zip(scan.abscissa, scan.values, scan.errors),
                      _meta(args, cfg, "beam-image", axis=axis, alpha_deg=repr(np.degrees(alpha))))
        print(f"waist {axis}_AOD = {fit['waist'] * 1e6:.3f} +- {fit.error('waist') * 1e6:.3f} um")


def cmd_localize(args, cfg: ScenarioConfig, out: Path) -> None:
    photons = cfg["localize", "photons"]
    repeats = args.trials or cfg["localize", "repeats"]
    if repeats < 2:
        raise ConfigError("localize.repeats: need at least 2 repeats")
    rng = _rng(args.seed)
    true = (7.3 * PIXEL_SCALE, 6.8 * PIXEL_SCALE)
    rows = []
    for i in range(repeats):
        img = simulate_spot_image(true, photons, rng)
        try:
            loc = localize_atom(img, PIXEL_SCALE)
        except NoSpotError as exc:
            raise RunFailure(f"repeat {i}: {exc}") from None
        rows.append((i, loc.x - true[0], loc.y - true[1], loc.sigma_x, loc.sigma_y))
    arr = np.array(rows)
    sx, sy = np.std(arr[:, 1], ddof=1), np.std(arr[:, 2], ddof=1)
    aio.write_csv(out / "localize.csv", ("repeat", "dx_m", "dy_m", "sigma_x_m", "sigma_y_m"), rows,
                  _meta(args, cfg, "localize", photons=repr(photons), repeats=repeats,
                        scatter_x_m=repr(float(sx)), scatter_y_m=repr(float(sy)),
                        note="photon budget calibrated to the measured scatter"
                        if photons == CALIBRATED_PHOTONS else "custom photon budget"))
    print(f"{repeats} spots at {photons:g} photons: scatter {sx * 1e9:.1f} nm / {sy * 1e9:.1f} nm")


COMMANDS = {
    "waveform": (cmd_waveform, "synthesize a multitone AOD drive and report its crest factor"),
    "load-sim": (cmd_load_sim, "stochastic loading histogram (--trials draws)"),
    "sort-plan": (cmd_sort_plan, "rearrangement plan for one occupancy"),
    "sort-sim": (cmd_sort_sim, "end-to-end success curve vs target size (--trials per size)"),
    "scan": (cmd_scan, "transmission vs position scan and fit (--trials independent scans)"),
    "heat-scan": (cmd_heat_scan, "parametric-heating survival spectrum (--trials trajectories)"),
    "beam-image": (cmd_beam_image, "tweezer profile mapped with a single atom, plus waist fits"),
    "localize": (cmd_localize, "centroid scatter of repeated fluorescence spots (--trials repeats)"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI or .json scenario file")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--seed", type=int, default=None, help="master seed (default: run.seed)")
    common.add_argument("--trials", type=int, default=None, help="Monte Carlo size, per subcommand")
    common.add_argument("--out-dir", default=None, help="artifact directory (default: run.out_dir)")

    parser = argparse.ArgumentParser(prog="intracavity", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    phys = sub.add_parser("physics", help="closed-form physics")
    phys_sub = phys.add_subparsers(dest="action", required=True)
    phys_sub.add_parser("eval", parents=[common], help="formula evaluation table")
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=text, description=text)
        if name == "sort-plan":
            p.add_argument("--occupancy", help="occupancy JSON (from load-sim or sort-plan)")
            p.add_argument("--no-discards", action="store_true", help="keep surplus atoms")
        if name == "waveform":
            p.epilog = ("The crest factor is evaluated over one least common period of the "
                        "tones; incommensurate tone sets are rejected.")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors exit 2; report them as invalid input
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        cfg = load_config(args.config)
        for item in args.set:
            cfg.override(item)
        if args.seed is None:
            args.seed = cfg.seed
        if args.seed < 0:
            raise ConfigError("--seed: must be a nonnegative integer")
        if args.trials is not None and args.trials < 1:
            raise ConfigError("--trials: must be >= 1")
        out = Path(args.out_dir or cfg["run", "out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        handler = cmd_physics if args.command == "physics" else COMMANDS[args.command][0]
        handler(args, cfg, out)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RunFailure, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
