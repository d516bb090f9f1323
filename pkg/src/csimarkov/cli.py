"""Command-line front end.

Every subcommand reads an optional JSON config (design keys at top level,
figure keys under ``"figures"``); command-line flags override config keys.
Exit codes: 0 ok, 2 configuration error, 3 numerical or ergodicity failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import codebook as cbk
from . import compression as cmp
from . import fading, markov, planner, rates
from . import throughput as tput
from .fading import DomainError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _design(args, cfg: dict) -> planner.DesignSpec:
    d = {k: v for k, v in cfg.items() if k != "figures"}
    for flag, key in (("seed", "seed"), ("samples", "samples"), ("snr_db", "snr_db"),
                      ("workers", "workers"), ("codebook_size", "codebook_size"),
                      ("epsilon", "epsilon"), ("block_w", "block_w"), ("delta", "outage_delta")):
        v = getattr(args, flag, None)
        if v is not None:
            d[key] = v
    try:
        return planner.DesignSpec.from_dict(d)
    except (DomainError, TypeError) as e:
        raise ConfigError(str(e))


def _figure_spec(args, cfg: dict) -> planner.FigureSpec:
    d = dict(cfg.get("figures", {}))
    for flag in ("seed", "samples", "snr_db", "workers"):
        v = getattr(args, flag, None)
        if v is not None:
            d[flag] = v
    try:
        return planner.FigureSpec.from_dict(d)
    except (DomainError, TypeError) as e:
        raise ConfigError(str(e))


def _emit(report: dict, rows, args, name: str) -> None:
    """Write the report to ``--out`` (if given) and stdout in the requested format."""
    report = {"schema_version": planner.SCHEMA_VERSION, **report}
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema_version", planner.SCHEMA_VERSION])
        for r in rows:
            w.writerow(["" if x is None else x for x in r])
        text = buf.getvalue()
        ext = "csv"
    else:
        text = planner.dump_json(report)
        ext = "json"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.{ext}").write_text(text)
    sys.stdout.write(text)


def _codebook_for(args, spec: planner.DesignSpec) -> cbk.Codebook:
    if getattr(args, "codebook", None):
        return cbk.load_codebook(args.codebook)
    return planner.design_codebook(spec)


def _states_for(args, spec: planner.DesignSpec, cb: cbk.Codebook) -> np.ndarray:
    if getattr(args, "states", None):
        return np.load(args.states).astype(np.int64)
    if getattr(args, "trace", None):
        tr = fading.load_trace(args.trace, spec.sample_interval_s)
        return cbk.quantize_trace(tr, cb).states
    return cbk.quantize_chunks(planner.design_chunks(spec), cb)


def _model_for(args, spec: planner.DesignSpec) -> markov.MarkovChainModel:
    if getattr(args, "model", None):
        return markov.load_model(args.model)
    cb = _codebook_for(args, spec)
    return markov.fit_markov(_states_for(args, spec, cb), spec.codebook_size, smoothing=spec.smoothing)


def cmd_trace(args, cfg):
    spec = _design(args, cfg)
    tr = planner.design_trace(spec)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        fading.save_trace(tr, Path(args.out) / "trace.bin")
    lags = np.arange(0, 6) * max(int(0.05 / spec.doppler().normalized_doppler), 1)
    lags = lags[lags < len(tr)]
    emp = fading.empirical_autocorrelation(tr.samples[:, 0, 0], int(lags[-1]))[lags]
    ref = fading.bessel_j0(2 * np.pi * spec.doppler().normalized_doppler * lags)
    rep = {"kind": "trace", "n_rx": tr.n_rx, "n_tx": tr.n_tx, "samples": len(tr),
           "doppler_hz": tr.spec.doppler_hz, "normalized_doppler": tr.spec.normalized_doppler,
           "seed": spec.seed, "autocorrelation": [{"lag": int(l), "empirical": float(e), "clarke": float(r)}
                                                  for l, e, r in zip(lags, emp, ref)]}
    rows = [["lag", "empirical", "clarke"]] + [[int(l), e, r] for l, e, r in zip(lags, emp, ref)]
    _emit(rep, rows, args, "trace")


def cmd_codebook(args, cfg):
    spec = _design(args, cfg)
    cb = planner.design_codebook(spec)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        cbk.save_codebook(cb, Path(args.out) / "codebook.txt")
    rep = {"kind": "codebook", "n_tx": cb.n_tx, "N": cb.size, "bits": cb.bits,
           "min_chordal_distance": cb.min_chordal_distance, "degenerate": cb.degenerate}
    _emit(rep, [["n_tx", "N", "bits", "min_chordal_distance"],
                [cb.n_tx, cb.size, cb.bits, cb.min_chordal_distance]], args, "codebook")


def cmd_fit(args, cfg):
    spec = _design(args, cfg)
    cb = _codebook_for(args, spec)
    states = _states_for(args, spec, cb)
    model = markov.fit_markov(states, spec.codebook_size, smoothing=spec.smoothing)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        markov.save_model(model, Path(args.out) / "model.json")
    rep = {"kind": "fit", "N": model.size, "sample_count": model.sample_count,
           "sqrt_lambda": model.sqrt_lambda, "ergodic": model.ergodic, "diagnosis": list(model.diagnosis),
           "stationary": model.stationary.tolist()}
    rows = [["state", "stationary", "stay_probability"]] + [
        [i + 1, float(p), float(model.transition[i, i])] for i, p in enumerate(model.stationary)]
    _emit(rep, rows, args, "fit")


def cmd_rates(args, cfg):
    spec = _design(args, cfg)
    model = _model_for(args, spec)
    fb = rates.build_feedback_plan(model, spec.bits, spec.sample_interval_s, spec.outage_delta)
    rep = {"kind": "rates", **fb.to_dict()}
    rows = [list(fb.to_dict().keys()), list(fb.to_dict().values())]
    _emit(rep, rows, args, "rates")


def cmd_throughput(args, cfg):
    spec = _design(args, cfg)
    cb = _codebook_for(args, spec)
    if args.trace:
        source = fading.load_trace(args.trace, spec.sample_interval_s)
    else:
        source = planner.design_chunks(spec)
    an = tput.analyze(source, cb, spec.snr, ideal=True)
    model = markov.fit_markov(an.states, spec.codebook_size, smoothing=spec.smoothing)
    delays = args.delays or [0, 10, 100, 1000]
    rep = tput.gain_and_bound(model, an.rlm, delays)
    d = rep.to_dict()
    d.update({"kind": "throughput", "C_ideal": an.c_ideal, "quantization_loss": an.c_ideal - rep.R0,
              "max_gain": an.c_ideal - rep.R_inf})
    _emit(d, rep.csv_rows(), args, "throughput")


def cmd_compress(args, cfg):
    spec = _design(args, cfg)
    model = _model_for(args, spec)
    T = spec.sample_interval_s
    K = args.K
    if K is None:
        K = rates.build_feedback_plan(model, spec.bits, T, spec.outage_delta).K
    scheme = cmp.build_scheme(model, K, spec.epsilon, spec.block_w, spec.bits, T)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        cmp.save_scheme(scheme, Path(args.out) / "scheme.json")
    rep = {"kind": "compress", **scheme.to_dict(), "ratio": scheme.ratio,
           "R_hat_f_bps": scheme.avg_feedback_rate_bps,
           "gain_factor": cmp.compressed_throughput_gain(1.0, spec.epsilon, spec.block_w)}
    rows = [["state", "neighborhood_size", "bits"]] + [
        [m + 1, len(n), b] for m, (n, b) in enumerate(zip(scheme.neighborhoods, scheme.codeword_bits_per_state))]
    _emit(rep, rows, args, "compress")


def cmd_plan(args, cfg):
    spec = _design(args, cfg)
    report = planner.plan(spec, out_dir=args.out, reuse=not args.no_cache)
    d = report.to_dict()
    d.pop("schema_version")
    _emit(d, report.csv_rows(), args, "plan")


def cmd_figures(args, cfg):
    fs = _figure_spec(args, cfg)
    which = args.only or ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7"]
    data = planner.figure_datasets(fs, which)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, rows in data.items():
            with open(out / f"{name}.csv", "w", newline="") as fh:
                if rows:
                    w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()), lineterminator="\n")
                    w.writeheader()
                    w.writerows(rows)
    rows = []
    for name, tab in data.items():
        if tab:
            rows.append(["figure"] + list(tab[0].keys()))
            rows += [[name] + list(r.values()) for r in tab]
    _emit({"kind": "figures", "figures": data}, rows, args, "figures")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csimarkov", description="Markov-chain CSI feedback design toolkit.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory for reports and artifacts")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--snr-db", dest="snr_db", type=float)
    common.add_argument("--samples", type=int)
    common.add_argument("--codebook-size", dest="codebook_size", type=int)
    common.add_argument("--workers", type=int, help="threads for trace synthesis (output unchanged)")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    add("trace", cmd_trace, "generate a fading trace")
    add("codebook", cmd_codebook, "design a beamforming codebook")
    for name, fn, help_ in (("fit", cmd_fit, "fit the channel-state Markov chain"),
                            ("rates", cmd_rates, "source rate, feedback interval and feedback rate"),
                            ("compress", cmd_compress, "build a feedback compression scheme")):
        sp = add(name, fn, help_)
        sp.add_argument("--codebook", help="codebook file (default: design one)")
        sp.add_argument("--trace", help="trace file (default: synthesise)")
        sp.add_argument("--states", help=".npy state sequence")
        sp.add_argument("--delta", type=float)
        if name != "fit":
            sp.add_argument("--model", help="fitted model JSON")
        if name == "compress":
            sp.add_argument("--epsilon", type=float)
            sp.add_argument("--block-w", dest="block_w", type=int)
            sp.add_argument("--K", type=int, help="feedback interval (default: from the outage constraint)")
    sp = add("throughput", cmd_throughput, "delay-dependent throughput and gain bound")
    sp.add_argument("--codebook")
    sp.add_argument("--trace")
    sp.add_argument("--delays", type=int, nargs="+")
    sp = add("plan", cmd_plan, "run the full link design")
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--block-w", dest="block_w", type=int)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--no-cache", action="store_true", help="ignore cached intermediates in --out")
    sp = add("figures", cmd_figures, "figure datasets")
    sp.add_argument("--only", nargs="+", choices=("fig2", "fig3", "fig4", "fig5", "fig6", "fig7"))
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        cfg = _load_config(args.config)
        args.func(args, cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (markov.ErgodicityError, tput.StarvedCellsError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
