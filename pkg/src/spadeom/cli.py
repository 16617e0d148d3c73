"""Command-line entry point: ``spadeom <verb> [--config PATH] [--out DIR] [--seed N] [--plot]``.

Every verb prints a ``key = value`` report on stdout, writes it to
``<out>/<verb>_report.txt`` and writes its tables as CSV in ``<out>``.
Failures exit nonzero with a single ``error[<category>]: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import calibration as cal
from . import limits as lim
from .config import ExperimentConfig
from .csvio import read_columns, write_columns
from .errors import ConfigError, FitError, ModeshapeParseError
from .hg import OpticalMode
from .misalignment import coupling_efficiency, efficiency_closed_form, efficiency_numeric, misalignment_sweep
from .overlap import coupling_scan, couplings
from .spectra import (NoiseModel, RingdownRecord, SpectrumRecord, detector_record, knife_edge_profile,
                      peak_grid, shot_scaling_series, synth_periodogram, synth_ringdown)

log = logging.getLogger("spadeom")

EXIT_CODES = {"config": 2, "input": 3, "fit": 4, "internal": 1}


class Run:
    """Output directory, report lines and written tables of one invocation."""

    def __init__(self, verb: str, out: Path, plot: bool):
        self.verb, self.out, self.plot = verb, out, plot
        self.lines: list[str] = []
        self.tables: list[Path] = []
        out.mkdir(parents=True, exist_ok=True)

    def report(self, key: str, value) -> None:
        if isinstance(value, float):
            value = repr(value)
        self.lines.append(f"{key} = {value}")

    def extend(self, lines) -> None:
        self.lines.extend(lines)

    def table(self, name: str, columns: dict, comments=()) -> Path:
        path = self.out / name
        write_columns(path, columns, comments)
        self.tables.append(path)
        return path

    def finish(self) -> None:
        text = "\n".join(self.lines) + "\n"
        (self.out / f"{self.verb}_report.txt").write_text(text)
        sys.stdout.write(text)
        if self.plot:
            from .plotting import plot_csv
            for path in self.tables:
                plot_csv(path)


def _seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


# ---------------------------------------------------------------- verbs

def cmd_limits(cfg: ExperimentConfig, run: Run) -> None:
    beam = cfg.beam()
    mode = cfg.mode()
    rep = lim.limits_report(beam, mode, cfg["budget.s_imp_rad2_per_hz"], cfg["budget.eta"], cfg.zero_point(mode))
    for k, v in rep.items():
        run.report(k, float(v))


def cmd_cool(cfg: ExperimentConfig, run: Run) -> None:
    mode = cfg.mode()
    s_zp = cfg.zero_point(mode)
    budget = lim.phonon_budget(cfg["budget.s_imp_rad2_per_hz"], s_zp, cfg["budget.eta"], mode)
    cool = lim.cooling_limit(budget)
    run.report("zero_point_choice", cfg["budget.zero_point"])
    for key, val in (("s_zp_rad2_per_hz", s_zp), ("s_imp_rad2_per_hz", cfg["budget.s_imp_rad2_per_hz"]),
                     ("eta", budget.eta), ("n_imp", budget.n_imp), ("n_ba", budget.n_ba),
                     ("n_th", budget.n_th), ("n_m", cool.n_final), ("n_m_bound", cool.lower_bound)):
        run.report(key, float(val))


def cmd_misalign(cfg: ExperimentConfig, run: Run) -> None:
    beam = cfg.beam()
    shape = cfg.misalign_shape()
    xs = np.linspace(cfg["misalign.sweep_start_m"], cfg["misalign.sweep_stop_m"], cfg["misalign.sweep_points"])
    u_in = OpticalMode(0, 0, beam.waist)
    cols = misalignment_sweep(cfg.misalign(), beam, shape, xs, cfg.grid(u_in))
    run.table("misalign.csv", cols, [f"ribbon_model={cfg['misalign.ribbon_model']}"])
    point = cfg.misalign()
    closed = efficiency_closed_form(point, beam)
    numeric = efficiency_numeric(point, beam, shape, cfg.grid(u_in))
    run.report("ribbon_model", cfg["misalign.ribbon_model"])
    run.report("x_s_m", float(point.x_s))
    run.report("eta_closed", float(closed.eta))
    run.report("s_imp_closed_rad2_per_hz", float(closed.imprecision))
    run.report("eta_numeric", float(numeric.eta))
    run.report("s_imp_numeric_rad2_per_hz", float(numeric.imprecision))
    run.report("flags", ",".join(sorted(closed.flags | numeric.flags)) or "none")


def cmd_overlap(cfg: ExperimentConfig, run: Run) -> None:
    beam = cfg.beam()
    u_in = OpticalMode(0, 0, beam.waist)
    grid = cfg.grid(u_in)
    shapes = [("configured", cfg.shape()), ("flexural", cfg.flexural_mode().shape)]
    cols = {k: [] for k in ("shape_index", "beta_parallel", "beta_perp_hg10", "beta_perp_hg01",
                            "beta_perp_orthogonal", "beta_sq", "convergence")}
    for i, (name, shape) in enumerate(shapes):
        r10 = couplings(u_in, OpticalMode(1, 0, beam.waist), shape, grid)
        r01 = couplings(u_in, OpticalMode(0, 1, beam.waist), shape, grid)
        rgs = couplings(u_in, None, shape, grid)
        for key, val in (("shape_index", i), ("beta_parallel", rgs.beta_parallel), ("beta_perp_hg10", r10.beta_perp),
                         ("beta_perp_hg01", r01.beta_perp), ("beta_perp_orthogonal", rgs.beta_perp),
                         ("beta_sq", rgs.beta_sq), ("convergence", max(r10.convergence, r01.convergence, rgs.convergence))):
            cols[key].append(val)
        run.report(f"{name}.beta_parallel", float(rgs.beta_parallel))
        run.report(f"{name}.beta_perp_hg10", float(r10.beta_perp))
        run.report(f"{name}.beta_perp_orthogonal", float(rgs.beta_perp))
        run.report(f"{name}.beta_sq", float(rgs.beta_sq))
        run.report(f"{name}.flags", ",".join(sorted(rgs.flags)) or "none")
    run.table("overlap.csv", cols, ["shape_index: " + " ".join(f"{i}={n}" for i, (n, _) in enumerate(shapes))])


def cmd_scan(cfg: ExperimentConfig, run: Run) -> None:
    beam = cfg.beam()
    geom = cfg.geometry()
    y0 = np.linspace(-geom.length / 2, geom.length / 2, cfg["scan.points"])
    u_in = OpticalMode(0, 0, beam.waist)
    phi = math.radians(cfg["scan.phi_deg"])
    for name, shape in (("torsion", cfg.shape()), ("flexural", cfg.flexural_mode().shape)):
        scan = coupling_scan(u_in, shape, y0)
        scan.to_csv(run.out / f"scan_{name}.csv")
        run.tables.append(run.out / f"scan_{name}.csv")
        area = cal.area_scan_model(phi, scan)
        run.table(f"area_{name}.csv", {"y0_m": area["y0_m"], "area_relative": area["area_relative"]})
        run.report(f"{name}.y0_peak_m", float(y0[np.argmax(np.abs(scan.beta10) + np.abs(scan.beta01))]))
        run.report(f"{name}.flags", ",".join(sorted(scan.flags)) or "none")


def cmd_synth(cfg: ExperimentConfig, run: Run) -> None:
    seed = cfg["numerics.seed"]
    s = _seeds(seed, 7)
    mode = cfg.mode()
    freq = peak_grid(mode, cfg["synth.span_hz"], cfg["synth.bins"])
    n_avg = cfg["synth.n_avg"]
    model = NoiseModel((mode,), cfg["synth.s_imp_rad2_per_hz"], cfg["synth.detector_v2_per_hz"],
                       cfg["synth.gain_v2_per_rad2"])
    synth_periodogram(model, freq, n_avg, s[0]).to_csv(run.out / "spectrum.csv")
    detector_record(cfg["synth.detector_v2_per_hz"], freq, n_avg, s[1]).to_csv(run.out / "detector.csv")
    run.tables += [run.out / "spectrum.csv", run.out / "detector.csv"]

    ring = synth_ringdown(mode, cfg["synth.ringdown_duration_s"], cfg["synth.ringdown_dt_s"], 1.0,
                          cfg["synth.ringdown_noise"], s[2])
    ring.to_csv(run.out / "ringdown.csv")
    run.tables.append(run.out / "ringdown.csv")

    w0 = cfg["beam.waist_m"]
    x = np.linspace(-4 * w0, 4 * w0, cfg["synth.knife_points"])
    run.table("knife.csv", knife_edge_profile(x, w0, 0.0, 1e-3, 0.0, cfg["synth.knife_noise"], 1, s[3]))

    mc = cfg.misalign()
    xc = np.linspace(-3 * mc.w, 3 * mc.w, cfg["synth.coupling_points"])
    e00, e10 = coupling_efficiency(mc, xc)
    rng = np.random.default_rng(s[4])
    noise = cfg["synth.coupling_noise"]
    run.table("coupling.csv", {"x_m": xc, "eta00": e00 * (1 + noise * rng.standard_normal(xc.size)),
                               "eta10": e10 * (1 + noise * rng.standard_normal(xc.size))})

    powers = np.geomspace(cfg["beam.power_w"] / 10, cfg["beam.power_w"], 8)
    # shot noise ten times the detector floor at full power
    slope = 10 * max(cfg["synth.detector_v2_per_hz"], 1e-18) / cfg["beam.power_w"]
    run.table("shot.csv", shot_scaling_series(powers, slope, cfg["synth.detector_v2_per_hz"],
                                              cfg["synth.shot_scatter"], s[5]))
    run.report("seed", seed)
    run.report("gain_v2_per_rad2", float(cfg["synth.gain_v2_per_rad2"]))
    run.report("s_imp_rad2_per_hz", float(cfg["synth.s_imp_rad2_per_hz"]))
    run.report("detector_v2_per_hz", float(cfg["synth.detector_v2_per_hz"]))
    run.report("n_avg", n_avg)
    run.report("files", ",".join(p.name for p in run.tables))


def cmd_calibrate(cfg: ExperimentConfig, run: Run, raw_path: Path, det_path: Path,
                  shot_path: Path | None = None, coupling_path: Path | None = None) -> None:
    raw = SpectrumRecord.from_csv(raw_path)
    det = SpectrumRecord.from_csv(det_path)
    res = cal.calibrate_spectrum(raw, det, cfg.mode(), cfg.beam(), cfg["numerics.wing_inner"], cfg.wing_outer,
                                 cfg["numerics.fit_linewidth"], cfg["numerics.n_boot"], cfg["numerics.seed"])
    res.write_calibrated_csv(raw, run.out / "calibrated.csv")
    run.tables.append(run.out / "calibrated.csv")
    run.extend(res.report_lines())
    if shot_path is not None:
        cols, _ = read_columns(shot_path, ("power_w", "s_v_v2_per_hz"))
        rep = cal.fit_shot_scaling(cols["power_w"], cols["s_v_v2_per_hz"], cfg["numerics.shot_criterion"])
        run.extend(rep.lines("shot."))
        run.report("shot.shot_consistent", str(rep.extra["shot_consistent"]).lower())
    if coupling_path is not None:
        cols, _ = read_columns(coupling_path, ("x_m", "eta00", "eta10"))
        rep = cal.fit_coupling_model(cols["x_m"], cols["eta00"], cols["eta10"], n_boot=cfg["numerics.n_boot"],
                                     seed=cfg["numerics.seed"])
        run.extend(rep.lines("coupling."))


def cmd_knife(cfg: ExperimentConfig, run: Run, path: Path) -> None:
    cols, _ = read_columns(path, ("position_m", "power_w"))
    rep = cal.fit_knife_edge(cols["position_m"], cols["power_w"], cfg["numerics.n_boot"], cfg["numerics.seed"])
    run.extend(rep.lines())
    run.report("direction", rep.extra["direction"])


def cmd_ringdown(cfg: ExperimentConfig, run: Run, path: Path) -> None:
    rec = RingdownRecord.from_csv(path)
    rep = cal.fit_ringdown(rec, cfg["mode.frequency_hz"], n_boot=cfg["numerics.n_boot"], seed=cfg["numerics.seed"])
    run.extend(rep.lines())


VERBS = ("limits", "misalign", "overlap", "scan", "synth", "calibrate", "knife", "ringdown", "cool")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spadeom", description="Mode-sorted optical lever simulator and calibration.")
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--config", type=Path, help="flat key = value configuration file")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory (default: current)")
    p.add_argument("--seed", type=int, help="overrides numerics.seed")
    p.add_argument("--plot", action="store_true", help="also write an SVG plot per CSV")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--raw", type=Path, help="calibrate: raw spectrum CSV (default <out>/spectrum.csv)")
    p.add_argument("--detector", type=Path, help="calibrate: detector spectrum CSV (default <out>/detector.csv)")
    p.add_argument("--shot", type=Path, help="calibrate: optional shot-scaling CSV")
    p.add_argument("--coupling", type=Path, help="calibrate: optional channel-coupling CSV")
    p.add_argument("--input", type=Path, help="knife/ringdown: input CSV (default <out>/knife.csv, <out>/ringdown.csv)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(item, "expected KEY=VALUE")
        cfg.set(key.strip(), value.strip())
    if args.seed is not None:
        cfg.set("numerics.seed", args.seed)
    cfg.validate()
    return cfg


def dispatch(args) -> None:
    cfg = _load_config(args)
    run = Run(args.verb, args.out, args.plot)
    out = args.out
    if args.verb == "calibrate":
        cmd_calibrate(cfg, run, args.raw or out / "spectrum.csv", args.detector or out / "detector.csv",
                      args.shot, args.coupling)
    elif args.verb == "knife":
        cmd_knife(cfg, run, args.input or out / "knife.csv")
    elif args.verb == "ringdown":
        cmd_ringdown(cfg, run, args.input or out / "ringdown.csv")
    else:
        globals()[f"cmd_{args.verb}"](cfg, run)
    run.finish()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        dispatch(args)
    except ConfigError as e:
        category, err = "config", e
    except (ModeshapeParseError, FileNotFoundError, IsADirectoryError) as e:
        category, err = "input", e
    except FitError as e:
        category, err = "fit", e
        if e.report is not None:
            for line in e.report.lines("best."):
                print(line, file=sys.stderr)
    except ValueError as e:
        category, err = "input", e
    else:
        return 0
    print(f"error[{category}]: {err}", file=sys.stderr)
    return EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
