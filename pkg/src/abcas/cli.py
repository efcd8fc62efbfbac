"""Experiment runner: single runs, fixed-m vs adaptive sweeps, trajectory export.

    abcas train --config PATH [--seed N] [--out DIR] [--mode adaptive|fixed]
                [--m F] [--beta F]
    abcas sweep --config PATH [--out DIR] [--resume]
    abcas traj RUN_DIR

Exit codes: 0 success, 1 config error, 2 numeric abort.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, Settings, build_networks, load_settings, manifest_text
from .data import TensorFileError, write_tensor_file
from .metrics import CSV_HEADER
from .nn import ParamStore, forward
from .train import NumericAbort, TrainHooks, run_training

__all__ = ["main", "cmd_train", "cmd_sweep", "cmd_traj"]

OK, CONFIG_ERROR, NUMERIC_ABORT = 0, 1, 2


def _save_store(ckpt_dir: Path, tag: str, store: ParamStore) -> None:
    for i, name, arr in store.named():
        write_tensor_file(ckpt_dir / f"{tag}_{i:02d}_{name}.abt", arr)


def _latent_for(settings: Settings, n: int, seed_key) -> np.ndarray:
    z = np.random.default_rng(seed_key).standard_normal(
        (n, settings.train.latent_dim)).astype(np.float32)
    if settings.arch == "conv":
        z = z.reshape(n, settings.train.latent_dim, 1, 1)
    return z


def _run_one(settings: Settings, out_dir: Path) -> int:
    """Train one configuration into out_dir. Returns the process exit code."""
    out_dir.mkdir(parents=True, exist_ok=True)
    data = settings.dataset_spec().load()
    g_spec, d_spec = build_networks(settings, tuple(data.shape[1:]))
    (out_dir / "manifest.cfg").write_text(
        manifest_text(settings, f"abcas-{__version__}", out_dir.name))

    ckpt_root = out_dir / "checkpoints"
    metrics_path = out_dir / "metrics.csv"
    with open(metrics_path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")

        def on_record(rec):
            fh.write(rec.to_csv_row() + "\n")
            fh.flush()

        def on_eval(step, g_store, d_store):
            ckpt = ckpt_root / f"step_{step:06d}"
            ckpt.mkdir(parents=True, exist_ok=True)
            _save_store(ckpt, "g", g_store)
            _save_store(ckpt, "d", d_store)
            on_eval.last_g_store = g_store

        on_eval.last_g_store = None
        try:
            run_training(settings.train, data, g_spec, d_spec,
                         hooks=TrainHooks(on_record=on_record, on_eval=on_eval))
        except NumericAbort as exc:
            last = exc.last_record
            print(f"abcas: {exc}", file=sys.stderr)
            if last is not None:
                print(f"abcas: last finite record: {last.to_csv_row()}", file=sys.stderr)
            (out_dir / "status.txt").write_text(f"aborted step {exc.step}\n")
            return NUMERIC_ABORT

    if on_eval.last_g_store is not None:
        z = _latent_for(settings, settings.train.eval_samples, [settings.train.seed, 7])
        samples, _ = forward(g_spec, on_eval.last_g_store, z)
        write_tensor_file(out_dir / "samples.abt", samples)
    (out_dir / "status.txt").write_text("ok\n")
    return OK


def cmd_train(config_path: str, out: str | None, overrides: dict[str, str]) -> int:
    try:
        settings = load_settings(config_path, overrides)
    except ConfigError as exc:
        print(f"abcas: config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    out_dir = Path(out) if out else Path("runs") / Path(config_path).stem
    try:
        return _run_one(settings, out_dir)
    except (ConfigError, TensorFileError, OSError) as exc:
        print(f"abcas: config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR


def _best_mmd(metrics_path: Path) -> tuple[float, int] | None:
    """Row-wise minimum of the mmd2 column and the first step attaining it."""
    if not metrics_path.exists():
        return None
    best = None
    with open(metrics_path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            value = float(row["mmd2"])
            if best is None or value < best[0]:
                best = (value, int(row["step"]))
    return best


def cmd_sweep(config_path: str, out: str | None, resume: bool) -> int:
    try:
        base = load_settings(config_path)
    except ConfigError as exc:
        print(f"abcas: config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    out_dir = Path(out) if out else Path("runs") / (Path(config_path).stem + "_sweep")
    out_dir.mkdir(parents=True, exist_ok=True)

    points: list[tuple[str, dict[str, str]]] = []
    for m0 in base.sweep_fixed_m:
        points.append((f"fixed_m{m0:g}", {"mode": "fixed", "m": f"{m0:.17g}"}))
    for b in base.sweep_abcas_beta:
        points.append((f"abcas_beta{b:g}", {"mode": "adaptive", "beta": f"{b:.17g}"}))

    rows = []
    for label, overrides in points:
        sub_dir = out_dir / label
        status_path = sub_dir / "status.txt"
        if resume and status_path.exists():
            status = status_path.read_text().strip()
            print(f"abcas sweep: {label}: skipped (already {status})")
        else:
            try:
                settings = load_settings(config_path, overrides)
                _run_one(settings, sub_dir)
            except (ConfigError, TensorFileError, OSError) as exc:
                print(f"abcas sweep: {label}: config error: {exc}", file=sys.stderr)
                sub_dir.mkdir(parents=True, exist_ok=True)
                status_path.write_text("config error\n")
            status = status_path.read_text().strip() if status_path.exists() else "missing"
            print(f"abcas sweep: {label}: {status}")
        best = _best_mmd(sub_dir / "metrics.csv")
        mode = overrides["mode"]
        rows.append({
            "setting": label,
            "mode": mode,
            "m": overrides.get("m", ""),
            "beta": overrides.get("beta", ""),
            "status": status.replace(" ", "_"),
            "best_mmd2": f"{best[0]:.17g}" if best else "",
            "best_step": str(best[1]) if best else "",
        })

    with open(out_dir / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write("setting,mode,m,beta,status,best_mmd2,best_step\n")
        for row in rows:
            fh.write(",".join(row[k] for k in
                              ("setting", "mode", "m", "beta", "status",
                               "best_mmd2", "best_step")) + "\n")
    return OK


def cmd_traj(run_dir: str) -> int:
    metrics_path = Path(run_dir) / "metrics.csv"
    if not metrics_path.exists():
        print(f"abcas: no metrics.csv in {run_dir}", file=sys.stderr)
        return CONFIG_ERROR
    out_path = Path(run_dir) / "r_traj.csv"
    with open(metrics_path, encoding="utf-8") as src, \
            open(out_path, "w", encoding="utf-8") as dst:
        dst.write("step,r,m\n")
        for row in csv.DictReader(src):
            # copy field strings verbatim so the projection is exact
            dst.write(f"{row['step']},{row['r']},{row['m']}\n")
    return OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="abcas",
        description="Spectrally normalized GAN training with adaptive bound control.",
    )
    parser.add_argument("--version", action="version", version=f"abcas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training configuration")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--out")
    p_train.add_argument("--mode", choices=("adaptive", "fixed"))
    p_train.add_argument("--m", type=float, help="fixed-mode multiplier")
    p_train.add_argument("--beta", type=float, help="controller distance target")

    p_sweep = sub.add_parser("sweep", help="run the fixed-m / adaptive comparison grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out")
    p_sweep.add_argument("--resume", action="store_true",
                         help="skip settings whose output directory is already finished")

    p_traj = sub.add_parser("traj", help="project (step, r, m) out of a run's metrics")
    p_traj.add_argument("run_dir")

    args = parser.parse_args(argv)
    if args.command == "train":
        overrides: dict[str, str] = {}
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.mode is not None:
            overrides["mode"] = args.mode
        if args.m is not None:
            overrides["m"] = f"{args.m:.17g}"
        if args.beta is not None:
            overrides["beta"] = f"{args.beta:.17g}"
        return cmd_train(args.config, args.out, overrides)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.out, args.resume)
    return cmd_traj(args.run_dir)


if __name__ == "__main__":
    sys.exit(main())
