"""Command-line front end.

    puffloc simulate --out run/            trace CSVs, one per measurement
    puffloc detect   --out run/            detections for every trace file
    puffloc estimate --out run/            estimates.csv, wind.csv
    puffloc evaluate --out run/            eps_c.csv, detection_times.csv
    puffloc sweep --scheme energy          sweep_energy.csv (quartile table)
    puffloc extract-noise --input t.csv    noise.csv and signal.csv
    puffloc fit --input signal.csv         fit.csv
    puffloc design-filter                  taps.txt
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, csvio
from .config import ExperimentConfig, dump_config, load_config
from .errors import ParseError, PufflocError
from .experiment import (
    DETECTION_TIME_HEADER,
    CLUSTERS,
    EPS_HEADER,
    RunReport,
    estimate_measurement,
    eps_from_estimates,
    run_sweep,
    simulate_measurement,
)
from .detection import detect_all
from .sigproc import FAMILIES, compare_families, design_fir, extract_noise, first_half_window

log = logging.getLogger("puffloc")


def parse_sweep(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected LO:HI:STEP")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number in {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("need STEP > 0 and HI >= LO")
    return lo, hi, step


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value config file")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--scheme", choices=("amplitude", "energy"), help="detection scheme")
    common.add_argument("--threshold", type=float, help="A_T in volts or lambda in joules")
    common.add_argument("--measurements", type=int, help="number of measurements")
    common.add_argument("--input", type=Path, help="input file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="puffloc", description=__doc__.splitlines()[0] if __doc__ else None)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in [
        ("simulate", "write synthetic trace CSVs"),
        ("detect", "run the detector on trace CSVs"),
        ("estimate", "localize the source from detection CSVs"),
        ("evaluate", "cluster errors and mean detection times"),
        ("extract-noise", "split traces into low-pass signal and noise"),
        ("fit", "fit the four pdf families to samples"),
        ("design-filter", "design the equiripple low-pass and write its taps"),
    ]:
        sub.add_parser(name, parents=[common], help=hlp)
    sw = sub.add_parser("sweep", parents=[common], help="threshold sweep with quartile tables")
    sw.add_argument("--sweep", type=parse_sweep, metavar="LO:HI:STEP", help="threshold grid (SI units)")
    return ap


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out is not None:
        over["out"] = str(args.out)
    if args.scheme is not None:
        over["scheme"] = args.scheme
    if args.measurements is not None:
        over["measurements"] = args.measurements
    if args.threshold is not None:
        key = "amplitude_threshold" if over.get("scheme", cfg.scheme) == "amplitude" else "energy_threshold"
        over[key] = args.threshold
    return cfg.replace(**over) if over else cfg


def _csv_files(path: Path, what: str) -> list[Path]:
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise ParseError(f"no {what} CSV files in directory", str(path))
        return files
    if not path.exists():
        raise ParseError("no such file or directory", str(path))
    return [path]


def cmd_simulate(cfg, args):
    out = Path(cfg.out)
    for m in range(cfg.measurements):
        csvio.write_traces(out / "traces" / f"m{m:03d}.csv", simulate_measurement(cfg, m))
    csvio.atomic_write(out / "config.txt", dump_config(cfg))
    log.info("wrote %d trace files to %s", cfg.measurements, out / "traces")


def cmd_detect(cfg, args):
    out = Path(cfg.out)
    src = args.input or out / "traces"
    det = cfg.detection()
    for f in _csv_files(src, "trace"):
        traces = csvio.read_traces(f, cfg.grid())
        csvio.write_detections(out / "detections" / f.name, detect_all(traces, det))
    log.info("detections written to %s", out / "detections")


def cmd_estimate(cfg, args):
    out = Path(cfg.out)
    src = args.input or out / "detections"
    meas = []
    for m, f in enumerate(_csv_files(src, "detection")):
        meas.append(estimate_measurement(m, csvio.read_detections(f), cfg))
    rep = RunReport(cfg, meas)
    csvio.write_csv(out / "estimates.csv", csvio.ESTIMATE_HEADER, rep.estimate_rows())
    csvio.write_csv(out / "wind.csv", csvio.WIND_HEADER, rep.wind_rows())
    csvio.write_csv(out / "failures.csv", ["measurement", "reason"], rep.failure_rows())
    if rep.failures:
        log.warning("%d of %d measurements failed to localize", rep.failures, len(meas))


def cmd_evaluate(cfg, args):
    out = Path(cfg.out)
    est_path = args.input or out / "estimates.csv"
    eps = eps_from_estimates(csvio.read_estimates(est_path), cfg.truth)
    csvio.write_csv(out / "eps_c.csv", EPS_HEADER, [[c, eps.get(c, float("nan"))] for c in CLUSTERS])
    det_dir = out / "detections"
    if det_dir.is_dir():
        meas = [estimate_measurement(m, csvio.read_detections(f), cfg)
                for m, f in enumerate(_csv_files(det_dir, "detection"))]
        csvio.write_csv(out / "detection_times.csv", DETECTION_TIME_HEADER,
                        RunReport(cfg, meas).detection_time_rows())
    for c, v in sorted(eps.items()):
        print(f"cluster {c}: eps_c = {v:.6g} m")


def cmd_sweep(cfg, args):
    rep = run_sweep(cfg, cfg.scheme, args.sweep)
    path = rep.write(Path(cfg.out) / f"sweep_{rep.scheme}.csv")
    print(f"{len(rep.rows)} threshold rows written to {path}")


def _noise_traces(cfg, args):
    if args.input is None:
        return simulate_measurement(cfg, 0)
    return csvio.read_traces(args.input, cfg.grid())


def cmd_extract_noise(cfg, args):
    out = Path(cfg.out)
    filt = design_fir(cfg.filter_spec())
    noise, signal = {}, {}
    for node, tr in _noise_traces(cfg, args).items():
        tr = first_half_window(tr)
        ex = extract_noise(tr, cfg.offset_samples, filt)
        noise[node] = tr.with_samples(ex.w)
        signal[node] = tr.with_samples(ex.x_f)
    csvio.write_traces(out / "noise.csv", noise)
    csvio.write_traces(out / "signal.csv", signal)
    log.info("noise.csv and signal.csv written to %s", out)


def cmd_fit(cfg, args):
    out = Path(cfg.out)
    if args.input is None:
        raise ParseError("fit needs --input (a trace-format CSV such as noise.csv)")
    traces = csvio.read_traces(args.input, cfg.grid())
    samples = np.concatenate([tr.samples for tr in traces.values()])
    fits = compare_families(samples, FAMILIES)
    csvio.write_csv(out / "fit.csv", csvio.FIT_HEADER, [[f.family, *f.params, f.mse] for f in fits])
    for f in fits:
        print(f"{f.family:>16}: params=({f.params[0]:.5g}, {f.params[1]:.5g}) mse={f.mse:.4g}")


def cmd_design_filter(cfg, args):
    filt = design_fir(cfg.filter_spec())
    path = csvio.write_taps(Path(cfg.out) / "taps.txt", filt.taps)
    print(f"order {filt.order}, ripple {filt.ripple:.6g}; taps written to {path}")


COMMANDS = {
    "simulate": cmd_simulate,
    "detect": cmd_detect,
    "estimate": cmd_estimate,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "extract-noise": cmd_extract_noise,
    "fit": cmd_fit,
    "design-filter": cmd_design_filter,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg, args)
    except PufflocError as e:
        print(f"puffloc {args.command}: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
