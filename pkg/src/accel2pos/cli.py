"""Command line entry point: ``accel2pos <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .dsp_recon import (DspPipelineConfig, load_config, optimize_filters, preprocess,
                        reconstruct_dsp, save_config)
from .metrics import position_error_3d
from .neural import load_checkpoint, save_checkpoint
from .seq2seq import AXES, FormulationConfig, predict_axis, search_hyperparams, train
from .synthgen import GeneratorConfig, build_scenario, load_dataset, write_dataset
from .timeseries import SampledSignal, read_csv, resample_linear, write_csv


def _p0(text: str) -> tuple[float, float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--p0 expects three comma-separated numbers x,y,z")
    return tuple(parts)


def _generator(path) -> GeneratorConfig:
    if path is None:
        return GeneratorConfig()
    return GeneratorConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _formulation(path, **overrides) -> FormulationConfig:
    base = {}
    if path is not None:
        base = json.loads(Path(path).read_text(encoding="utf-8"))
    base.update({k: v for k, v in overrides.items() if v is not None})
    return FormulationConfig.from_dict(base)


def _dataset(path, scenario):
    try:
        return load_dataset(path, scenario)
    except FileNotFoundError as exc:
        raise ev.ConfigurationError(f"no dataset for scenario {scenario} under {path}") from exc


def _drive(accel: SampledSignal, rate_hz: float, lp_cfg: DspPipelineConfig) -> SampledSignal:
    """Bring an acceleration recording to the model rate (raw streams are low-passed and decimated)."""
    if abs(accel.sample_rate_hz - rate_hz) < 1e-9:
        return accel
    ratio = accel.sample_rate_hz / rate_hz
    if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
        raise ev.ConfigurationError(
            f"input rate {accel.sample_rate_hz} Hz is not an integer multiple of {rate_hz} Hz")
    return preprocess(accel, replace(lp_cfg, decimation_factor=int(round(ratio))))


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    cfg = _generator(args.generator)
    for k in args.scenario:
        ds = build_scenario(k, args.train_series, args.test_series, args.seqs_per_series,
                            args.seed, cfg)
        base = write_dataset(ds, args.out)
        print(f"scenario {k}: {len(ds.train)} train / {len(ds.test)} test sequences -> {base}")


def cmd_dsp_recon(args):
    cfg = replace(load_config(args.config), p0_mm=args.p0)
    pos = reconstruct_dsp(read_csv(args.input, "m/s^2"), cfg)
    write_csv(pos, args.out)
    print(f"wrote {len(pos)} samples at {pos.sample_rate_hz:g} Hz -> {args.out}")


def cmd_dsp_optimize(args):
    ds = _dataset(args.dataset, args.scenario)
    base = DspPipelineConfig.from_generator(ds.config)
    best, hist = optimize_filters(ds.train_pairs, base, args.budget, args.seed, return_history=True)
    save_config(best, args.out)
    score = min(s for _, s in hist)
    print(f"best mean train RMSE {score:.3f} mm: hp_v {best.hp_v.cutoff_hz:.4g} Hz order "
          f"{best.hp_v.order}, hp_p {best.hp_p.cutoff_hz:.4g} Hz order {best.hp_p.order} -> {args.out}")


def cmd_train(args):
    ds = _dataset(args.dataset, args.scenario)
    cfg = _formulation(args.config, kind=args.formulation, axis=args.axis, epochs=args.epochs,
                       seed=args.seed)
    run = train(ds, cfg)
    out = Path(args.out)
    if out.is_dir() or args.out.endswith(("/", "\\")):
        out = ev.checkpoint_path(out, ds.scenario, cfg.kind, cfg.axis)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(run.model, out, {"scenario": ds.scenario, "formulation": cfg.to_dict(),
                                     "sample_rate_hz": ds.config.common_rate_hz,
                                     "loss_trace": run.loss_trace})
    print(f"{cfg.kind.value}/{cfg.axis}: final train loss {run.loss_trace[-1]:.4g} mm^2 -> {out}"
          if run.loss_trace else f"untrained model -> {out}")


def cmd_predict(args):
    accel = read_csv(args.input, "m/s^2")
    columns, rate = {}, None
    for path in args.checkpoint:
        model, meta = load_checkpoint(path)
        cfg = FormulationConfig.from_dict(meta["formulation"])
        rate = float(meta.get("sample_rate_hz", GeneratorConfig().common_rate_hz))
        drive = _drive(accel, rate, DspPipelineConfig.from_generator(GeneratorConfig()))
        columns[cfg.axis] = predict_axis(model, cfg, drive, args.p0[cfg.axis_index])
    axes = [ax for ax in AXES if ax in columns]
    n = min(len(v) for v in columns.values())
    pos = SampledSignal(tuple(axes), np.column_stack([columns[ax][:n] for ax in axes]), rate,
                        accel.t0_s, "mm")
    write_csv(pos, args.out)
    print(f"wrote axes {','.join(axes)} ({n} samples) -> {args.out}")


def cmd_tune(args):
    if args.dataset:
        ds = _dataset(args.dataset, args.scenario)
    else:
        ds = build_scenario(args.scenario, seed=args.data_seed)
    base = _formulation(args.config, epochs=args.epochs)
    best, hist = search_hyperparams(ds, args.formulation, args.budget, args.seed, args.axis, base,
                                    return_history=True)
    for i, (cand, loss) in enumerate(hist):
        print(f"candidate {i}: hidden {cand.hidden_size} lr {cand.learning_rate:.3g} "
              f"window {cand.window_len} val {loss:.4g} mm^2")
    text = json.dumps(best.to_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8", newline="\n")
    print(text)


def cmd_evaluate(args):
    pred = read_csv(args.pred, "mm")
    truth = read_csv(args.truth, "mm")
    if truth.sample_rate_hz != pred.sample_rate_hz:
        truth = resample_linear(truth, pred.sample_rate_hz)
    n = min(len(pred), len(truth))
    mae, rmse = position_error_3d(pred.head(n), truth.head(n))
    print(f"MAE {mae:.4f} mm\nRMSE {rmse:.4f} mm")


def cmd_compare(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    report = ev.compare(args.dataset, methods, args.checkpoints, args.dsp_config, args.out,
                        args.scenario or None)
    print(report.to_table(), end="")


def cmd_sweep(args):
    cfg = ev.SweepConfig(seed=args.seed, scenarios=tuple(args.scenario), workers=args.workers)
    if args.methods:
        cfg.methods = tuple(m.strip() for m in args.methods.split(","))
    report = ev.run_sweep(cfg, args.out, log=lambda msg: print(msg, flush=True))
    print(report.to_table(), end="")


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="accel2pos",
                                description="Position reconstruction from spindle acceleration.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate synthetic scenario datasets")
    s.add_argument("--scenario", type=int, nargs="+", default=[1, 2, 3, 4])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--generator", help="generator config JSON")
    s.add_argument("--train-series", type=int, default=6)
    s.add_argument("--test-series", type=int, default=2)
    s.add_argument("--seqs-per-series", type=int, default=6)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("dsp-recon", help="double-integrate one raw acceleration CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--p0", type=_p0, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_dsp_recon)

    s = sub.add_parser("dsp-optimize", help="random search over the high-pass stages")
    s.add_argument("--dataset", required=True)
    s.add_argument("--scenario", type=int)
    s.add_argument("--budget", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_dsp_optimize)

    s = sub.add_parser("train", help="train one per-axis model")
    s.add_argument("--scenario", type=int, required=True)
    s.add_argument("--formulation", choices=["m2o", "m2m", "ar"], required=True)
    s.add_argument("--axis", choices=AXES, required=True)
    s.add_argument("--dataset", required=True)
    s.add_argument("--config", help="formulation config JSON")
    s.add_argument("--epochs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True, help="checkpoint file or directory")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="run trained checkpoints on an acceleration CSV")
    s.add_argument("--checkpoint", nargs="+", required=True, help="one checkpoint per axis")
    s.add_argument("--input", required=True)
    s.add_argument("--p0", type=_p0, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("tune", help="seeded random hyperparameter search")
    s.add_argument("--scenario", type=int, required=True)
    s.add_argument("--formulation", choices=["m2o", "m2m", "ar"], required=True)
    s.add_argument("--budget", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--axis", choices=AXES, default="x")
    s.add_argument("--dataset", help="dataset root; synthesized with --data-seed if omitted")
    s.add_argument("--data-seed", type=int, default=0)
    s.add_argument("--config", help="base formulation config JSON")
    s.add_argument("--epochs", type=int)
    s.add_argument("--out", help="write the selected config JSON here")
    s.set_defaults(func=cmd_tune)

    s = sub.add_parser("evaluate", help="3D MAE/RMSE between two position CSVs")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("compare", help="methods x scenarios report from stored artifacts")
    s.add_argument("--dataset", required=True)
    s.add_argument("--methods", default="di,m2o,m2m,ar")
    s.add_argument("--checkpoints")
    s.add_argument("--dsp-config", help="JSON file, or directory of s<k>_dsp.json files")
    s.add_argument("--scenario", type=int, nargs="*")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="synthesize, fit, train and compare in one go")
    s.add_argument("--scenario", type=int, nargs="+", default=[1, 2, 3, 4])
    s.add_argument("--methods")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ev.ConfigurationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
