"""Command-line entry point: gen / train / tune / bench / inspect.

Each subcommand can read a JSON run-config file (--config); keys must match
the command's flag names and explicit flags override file values.  Exit
codes: 0 success, 2 validation error, 3 numeric failure, 4 missing artifact.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import presets
from .adam import AdamConfig
from .bench import BenchPlan, emit_report, run_bench
from .datagen import (MsoSpec, NoiseSpec, PendulumSpec, WaveSpec, add_noise,
                      gen_mso, gen_pendulum, gen_wave)
from .errors import (MissingArtifactError, NumericError, SeqtuneError,
                     ValidationError)
from .storage import (config_hash, load_dataset, load_model, read_header,
                      save_dataset, save_model, write_container)
from .training import DEFAULT_EPOCHS, TrainConfig, train_expert
from .tuning import TuningConfig, TuningStream, filter_dataset
from .lstm import GridLstm

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_MISSING = 4


def _out_dir(args) -> Path:
    path = Path(args.out_dir or os.environ.get("SEQTUNE_OUT_DIR", "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _apply_config(parser: argparse.ArgumentParser, argv: list[str],
                  command: str) -> argparse.Namespace:
    """Load --config JSON (strict keys) as defaults, then let flags override."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        cfg_path = Path(known.config)
        if not cfg_path.exists():
            raise MissingArtifactError(f"config file not found: {cfg_path}")
        try:
            loaded = json.loads(cfg_path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
        section = loaded.get(command, loaded) if isinstance(loaded, dict) else None
        if not isinstance(section, dict):
            raise ValidationError("config must be a JSON object")
        allowed = {a.dest for a in parser._actions}
        unknown = sorted(set(section) - allowed - {"config"})
        if unknown:
            raise ValidationError(f"unknown config keys for {command}: {unknown}")
        parser.set_defaults(**{k: v for k, v in section.items()})
        for action in parser._actions:
            # a value supplied via the config satisfies a required flag
            if action.required and action.dest in section:
                action.required = False
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def _gen_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqtune gen")
    p.add_argument("--config")
    p.add_argument("--experiment", choices=["mso", "pendulum", "wave"],
                   required=True)
    p.add_argument("--train", type=int, default=None,
                   help="training sample count")
    p.add_argument("--test", type=int, default=None)
    p.add_argument("--length", type=int, default=None,
                   help="training sequence length")
    p.add_argument("--test-length", type=int, default=None)
    p.add_argument("--rows", type=int, default=16)
    p.add_argument("--cols", type=int, default=16)
    p.add_argument("--noise", type=float, default=0.0,
                   help="gaussian noise ratio for the noisy channel")
    p.add_argument("--noise-kind", choices=["gaussian", "salt_and_pepper"],
                   default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    return p


def cmd_gen(argv: list[str]) -> int:
    args = _apply_config(_gen_parser(), argv, "gen")
    exp = args.experiment
    # published defaults: 10000/1000 at T=400; wave: 200 at T=80, 20 at T=400
    train = args.train if args.train is not None else (200 if exp == "wave" else 10_000)
    test = args.test if args.test is not None else (20 if exp == "wave" else 1_000)
    t_train = args.length if args.length is not None else (80 if exp == "wave" else 400)
    t_test = args.test_length if args.test_length is not None else 400
    out = _out_dir(args)
    chash = config_hash(vars(args))

    for split, count, length, seed in (("train", train, t_train, args.seed),
                                       ("test", test, t_test, args.seed + 1)):
        if exp == "mso":
            ds = gen_mso(MsoSpec(length=length, seed=seed), count)
        elif exp == "pendulum":
            ds = gen_pendulum(PendulumSpec(length=length, seed=seed), count)
        else:
            ds = gen_wave(WaveSpec(rows=args.rows, cols=args.cols,
                                   length=length, seed=seed), count)
        if args.noise > 0:
            ds = add_noise(ds, NoiseSpec(args.noise_kind, args.noise,
                                         seed=seed + 2))
        path = out / f"{exp}_{split}.stc"
        save_dataset(path, ds, extra={"config_hash": chash})
        print(f"wrote {path} ({count} samples, T={length})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _train_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqtune train")
    p.add_argument("--config")
    p.add_argument("--data", required=True, help="training dataset file")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--epochs", type=int, default=None,
                   help="default: 100 (mso/pendulum) or 200 (wave)")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--hidden", type=int, default=None,
                   help="default: 32, grid model 4")
    p.add_argument("--optimizer-rate", type=float, default=1e-3)
    p.add_argument("--optimizer-beta1", type=float, default=0.9)
    p.add_argument("--optimizer-beta2", type=float, default=0.999)
    p.add_argument("--out-dir", default=None)
    return p


def cmd_train(argv: list[str]) -> int:
    args = _apply_config(_train_parser(), argv, "train")
    dataset = load_dataset(args.data)
    exp = dataset.experiment
    kind = "grid_lstm" if exp == "wave" else "lstm"
    hidden = args.hidden if args.hidden is not None else (4 if exp == "wave" else 32)
    epochs = args.epochs if args.epochs is not None else DEFAULT_EPOCHS[exp]
    out = _out_dir(args)
    chash = config_hash(vars(args))
    opt = AdamConfig(rate=args.optimizer_rate, beta1=args.optimizer_beta1,
                     beta2=args.optimizer_beta2)
    for seed in range(args.seeds):
        cfg = TrainConfig(model_kind=kind, noise_ratio=args.noise,
                          epochs=epochs, batch_size=args.batch_size,
                          hidden_size=hidden, optimizer=opt, seed=seed,
                          grid_extents=dataset.clean.shape[2:]
                          if exp == "wave" else (16, 16))
        model, history = train_expert(cfg, dataset)
        stem = f"{exp}_n{args.noise}_s{seed}"
        save_model(out / f"{stem}.stc", model,
                   extra={"config_hash": chash, "training_noise": args.noise,
                          "model_seed": seed, "final_loss": history[-1]})
        with open(out / f"{stem}.loss.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "mse"])
            for i, loss in enumerate(history):
                w.writerow([i, f"{loss:.10g}"])
        print(f"trained {stem}: final mse {history[-1]:.6g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# tune
# ---------------------------------------------------------------------------

def _tune_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqtune tune")
    p.add_argument("--config")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="dataset file to stream (noisy channel)")
    p.add_argument("--stdin", action="store_true",
                   help="stream numeric rows from stdin instead")
    p.add_argument("--preset",
                   help="experiment:training_noise:signal_noise, e.g. mso:0.0:1.0")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--cycles", type=int, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--beta1", type=float, default=None)
    p.add_argument("--beta2", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    return p


def _tuning_config(args) -> TuningConfig:
    base = dict(horizon=8, cycles=10, rate=0.005, beta1=0.9, beta2=0.99)
    if args.preset:
        try:
            exp, tn, sn = args.preset.split(":")
            preset = presets.resolve(exp, float(tn), float(sn))
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"bad preset key {args.preset!r}") from exc
        base = dict(horizon=preset.horizon, cycles=preset.cycles,
                    rate=preset.rate, beta1=preset.beta1, beta2=preset.beta2)
    for name in ("horizon", "cycles", "rate", "beta1", "beta2"):
        if getattr(args, name) is not None:
            base[name] = getattr(args, name)
    return TuningConfig(horizon=base["horizon"], cycles=base["cycles"],
                        optimizer=AdamConfig(rate=base["rate"],
                                             beta1=base["beta1"],
                                             beta2=base["beta2"]))


def cmd_tune(argv: list[str]) -> int:
    args = _apply_config(_tune_parser(), argv, "tune")
    model = load_model(args.model)
    cfg = _tuning_config(args)
    rng = np.random.default_rng(args.seed)

    if args.stdin:
        stream = None
        for line in sys.stdin:
            line = line.strip()
            if not line:
                continue
            row = np.array([float(v) for v in line.split()])
            if stream is None:
                stream = TuningStream(model, cfg, rng)
            filtered, _ = stream.step(row)
            print(" ".join(f"{v:.8g}" for v in np.ravel(filtered)), flush=True)
        return EXIT_OK

    if not args.data:
        raise ValidationError("tune needs --data or --stdin")
    dataset = load_dataset(args.data)
    filtered = filter_dataset(model, cfg, dataset.noisy, rng)
    out = _out_dir(args)
    chash = config_hash(vars(args))
    state_norm = np.sqrt(np.mean(filtered ** 2,
                                 axis=tuple(range(2, filtered.ndim))))
    path = out / f"tuned_{dataset.experiment}.stc"
    write_container(path, {"kind": "tuned_trace",
                           "experiment": dataset.experiment,
                           "config_hash": chash,
                           "tuning": {"horizon": cfg.horizon,
                                      "cycles": cfg.cycles,
                                      "rate": cfg.optimizer.rate}},
                    {"observation": dataset.noisy, "filtered": filtered,
                     "output_norm": state_norm})
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

def _bench_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqtune bench")
    p.add_argument("--config")
    p.add_argument("--experiment", choices=["mso", "pendulum", "wave"],
                   default="mso")
    p.add_argument("--train-sequences", type=int, default=None)
    p.add_argument("--test-sequences", type=int, default=None)
    p.add_argument("--train-length", type=int, default=None)
    p.add_argument("--test-length", type=int, default=400)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--rows", type=int, default=16)
    p.add_argument("--cols", type=int, default=16)
    p.add_argument("--data-seed", type=int, default=100)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-timing", action="store_true",
                   help="zero the wall_seconds column (deterministic output)")
    p.add_argument("--out-dir", default=None)
    return p


def cmd_bench(argv: list[str]) -> int:
    args = _apply_config(_bench_parser(), argv, "bench")
    exp = args.experiment
    plan = BenchPlan(
        experiment=exp,
        train_sequences=args.train_sequences
        or (50 if exp == "wave" else 500),
        test_sequences=args.test_sequences or (5 if exp == "wave" else 50),
        train_length=args.train_length or (80 if exp == "wave" else 400),
        test_length=args.test_length,
        model_seeds=args.seeds,
        epochs=args.epochs or (400 if exp == "wave" else 20),
        batch_size=args.batch_size,
        grid_extents=(args.rows, args.cols),
        data_seed=args.data_seed,
    )
    workers = args.workers or int(os.environ.get("SEQTUNE_WORKERS", "1"))
    out = _out_dir(args)
    grid = run_bench(plan, out, workers=workers)
    csv_path = emit_report(grid, out, timing=not args.no_timing)
    meta = {"config_hash": config_hash(asdict(plan)), "plan": asdict(plan)}
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    print(f"wrote {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# inspect
# ---------------------------------------------------------------------------

def cmd_inspect(argv: list[str]) -> int:
    p = argparse.ArgumentParser(prog="seqtune inspect")
    p.add_argument("paths", nargs="+")
    args = p.parse_args(argv)
    for path in args.paths:
        header = read_header(path)
        print(f"== {path}")
        print(json.dumps(header, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "tune": cmd_tune,
    "bench": cmd_bench,
    "inspect": cmd_inspect,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: seqtune {gen,train,tune,bench,inspect} ...")
        return EXIT_OK if argv else EXIT_VALIDATION
    cmd, rest = argv[0], argv[1:]
    if cmd not in COMMANDS:
        print(f"unknown command {cmd!r}; choose from {sorted(COMMANDS)}",
              file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return COMMANDS[cmd](rest)
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, SeqtuneError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
