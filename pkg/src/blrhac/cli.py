"""Command-line front door for dataset generation, training, and experiments.

Every artifact file is written next to a ``<name>.manifest.json`` sibling
recording the command, config snapshot, seeds, and paths needed to reproduce
it. Artifacts themselves are byte-deterministic for a fixed seed; manifests
carry wall-clock duration and are excluded from determinism comparisons.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .env import EnvironmentSpec, read_dataset, write_dataset
from .flops import count_flops
from .models import Checkpoint, ModelSpec, build_model
from .online import (
    OnlineLinearLearner,
    OnlineTransformerLearner,
    curves_to_csv,
    curves_to_json,
    make_blr_hac,
    nonstationary_experiment,
    stationary_experiment,
)
from .population import (
    DemonstrationDataset,
    collect_demonstrations,
    load_population,
    sample_population,
    save_population,
)
from .profiles import PROFILES, environment, population_config
from .training import TrainConfig, TrainingDiverged, evaluate_zero_shot, full_grid, sweep, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(Exception):
    pass


def _load_profile(args) -> dict:
    profile = dict(PROFILES[args.profile])
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path) as f:
            overrides = json.load(f)
        schema = overrides.pop("schema", "blrhac-config-v1")
        if schema != "blrhac-config-v1":
            raise ConfigError(f"unsupported config schema {schema!r}")
        profile.update(overrides)
    if args.env:
        profile["env"] = args.env
    return profile


def _manifest(args, out_path: Path, profile: dict, t0: float, extra: dict | None = None) -> None:
    payload = {
        "command": args.command,
        "argv": sys.argv[1:],
        "config": profile,
        "seed": args.seed,
        "output": str(out_path),
        "tool_version": __version__,
        "duration_s": round(time.time() - t0, 3),
    }
    payload.update(extra or {})
    with open(str(out_path) + ".manifest.json", "w") as f:
        json.dump(payload, f, sort_keys=True, indent=1)
        f.write("\n")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_pop(args) -> int:
    t0 = time.time()
    profile = _load_profile(args)
    spec = environment(profile)
    cfg = population_config(profile, args.seed)
    population = sample_population(cfg, spec)
    out = _outdir(args) / "population.json"
    save_population(out, spec, cfg, population)
    _manifest(args, out, profile, t0)
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


def cmd_gen_demos(args) -> int:
    t0 = time.time()
    profile = _load_profile(args)
    outdir = _outdir(args)
    pop_path = Path(args.population) if args.population else outdir / "population.json"
    if not pop_path.exists():
        raise ConfigError(f"population file not found: {pop_path} (run gen-pop first)")
    spec, cfg, population = load_population(pop_path)
    for i, (split, prefs) in enumerate(population.items()):
        n = cfg.episodes_per_pref.get(split, 0)
        ds = collect_demonstrations(prefs, spec, n, seed=args.seed + i, split=split)
        out = outdir / f"demos_{split}.ndjson"
        write_dataset(out, ds.episodes)
        _manifest(args, out, profile, t0, {"split": split, "population": str(pop_path)})
        print(f"wrote {out} ({len(ds.episodes)} episodes)", file=sys.stderr)
    return EXIT_OK


def _dataset(path, split) -> DemonstrationDataset:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"dataset file not found: {path}")
    return DemonstrationDataset(split=split, episodes=read_dataset(path), population=[])


def _model_spec(profile: dict, spec: EnvironmentSpec, family: str, prior: bool) -> ModelSpec:
    return ModelSpec(
        family=family,
        env=spec,
        with_prior=prior,
        hidden_dim=profile["hidden_dim"],
        num_layers=profile["num_layers"],
        num_heads=profile["num_heads"],
        k=profile["history_len"],
    )


def cmd_pretrain(args) -> int:
    t0 = time.time()
    profile = _load_profile(args)
    spec = environment(profile)
    outdir = _outdir(args)
    d_train = _dataset(args.demos_train or outdir / "demos_train.ndjson", "train")
    d_eval = _dataset(args.demos_eval or outdir / "demos_eval.ndjson", "eval")
    ms = _model_spec(profile, spec, args.family, not args.no_prior)
    model = build_model(ms, seed=args.seed, dtype=torch.float32)
    cfg = TrainConfig(
        learning_rate=args.lr if args.lr is not None else profile["learning_rate"],
        batch_size=profile["batch_size"],
        max_epochs=args.epochs if args.epochs is not None else profile["max_epochs"],
        early_stop_patience=profile["early_stop_patience"],
        seed=args.seed,
    )
    ckpt = train(model, d_train, d_eval, cfg)
    suffix = "prior" if ms.with_prior else "noprior"
    out = outdir / f"checkpoint_{args.family}_{suffix}.json"
    ckpt.save(out)
    _manifest(args, out, profile, t0, {"best_eval_accuracy": ckpt.metadata["best_eval_accuracy"]})
    print(f"wrote {out} (eval acc {ckpt.metadata['best_eval_accuracy']:.3f})", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    t0 = time.time()
    profile = _load_profile(args)
    spec = environment(profile)
    outdir = _outdir(args)
    d_train = _dataset(args.demos_train or outdir / "demos_train.ndjson", "train")
    d_eval = _dataset(args.demos_eval or outdir / "demos_eval.ndjson", "eval")
    d_test = _dataset(args.demos_test, "test") if args.demos_test else None
    lrs = [float(x) for x in args.lrs.split(",")] if args.lrs else [profile["learning_rate"]]
    families = args.families.split(",") if args.families else None
    cells = full_grid(
        spec,
        families=families,
        lrs=lrs,
        hidden=profile["hidden_dim"],
        layers=profile["num_layers"],
        k=profile["history_len"],
        batch_size=profile["batch_size"],
        max_epochs=profile["max_epochs"],
        early_stop_patience=profile["early_stop_patience"],
        seed=args.seed,
    )
    best, rows = sweep(cells, d_train, d_eval, d_test)
    out = outdir / "sweep_results.csv"
    with open(out, "w") as f:
        f.write("family,prior,lr,hidden,layers,eval_acc,test_acc\n")
        for r in rows:
            f.write(
                f"{r['family']},{r['prior']},{r['lr']!r},{r['hidden']},{r['layers']},"
                f"{r['eval_acc']!r},{r['test_acc']!r}\n"
            )
    _manifest(args, out, profile, t0)
    for (family, prior), ckpt in best.items():
        suffix = "prior" if prior else "noprior"
        path = outdir / f"best_{family}_{suffix}.json"
        ckpt.save(path)
        _manifest(args, path, profile, t0)
    print(f"wrote {out} ({len(rows)} rows)", file=sys.stderr)
    return EXIT_OK


def cmd_eval_zero_shot(args) -> int:
    t0 = time.time()
    profile = _load_profile(args)
    outdir = _outdir(args)
    ckpt_path = Path(args.checkpoint)
    if not ckpt_path.exists():
        raise ConfigError(f"checkpoint not found: {ckpt_path}")
    ckpt = Checkpoint.load(ckpt_path)
    d_test = _dataset(args.demos_test or outdir / "demos_test.ndjson", "test")
    report = evaluate_zero_shot(ckpt.build(torch.float32), d_test, ckpt.model_spec.env)
    out = outdir / "zero_shot_report.json"
    with open(out, "w") as f:
        json.dump(
            {
                "accuracy": report.accuracy,
                "per_environment": report.per_environment,
                "num_predictions": report.num_predictions,
                "checkpoint": ckpt_path.name,
            },
            f,
            sort_keys=True,
        )
        f.write("\n")
    _manifest(args, out, profile, t0)
    print(f"wrote {out} (accuracy {report.accuracy:.3f})", file=sys.stderr)
    return EXIT_OK


def cmd_adapt(args) -> int:
    t0 = time.time()
    profile = _load_profile(args)
    outdir = _outdir(args)
    pop_path = Path(args.population) if args.population else outdir / "population.json"
    if not pop_path.exists():
        raise ConfigError(f"population file not found: {pop_path}")
    spec, _, population = load_population(pop_path)
    test_pop = population["test"]
    episodes = profile["episodes"]
    switch_at = profile["switch_at"]
    alpha = profile["alpha"]

    agents = args.agents.split(",")
    factories = {}
    for name in agents:
        if name == "linear":
            factories[name] = lambda: OnlineLinearLearner.from_scratch(spec, alpha=alpha)
        elif name == "blr_hac":
            ckpt = _require_checkpoint(args)
            factories[name] = lambda ckpt=ckpt: make_blr_hac(ckpt, alpha=alpha)
        elif name == "online_transformer":
            ckpt = _require_checkpoint(args)
            factories[name] = lambda ckpt=ckpt: OnlineTransformerLearner(
                ckpt, lr=profile["online_lr"]
            )
        else:
            raise ConfigError(f"unknown agent {name!r}")

    curves = []
    for name, factory in factories.items():
        if args.protocol == "stationary":
            curve = stationary_experiment(
                factory, test_pop, spec, episodes=episodes, seed=args.seed, agent_name=name
            )
        else:
            curve = nonstationary_experiment(
                factory, test_pop, spec, episodes=episodes, switch_at=switch_at,
                seed=args.seed, agent_name=name,
            )
        curves.append(curve)
    out_csv = outdir / f"adapt_{args.protocol}.csv"
    out_json = outdir / f"adapt_{args.protocol}.json"
    curves_to_csv(out_csv, curves)
    curves_to_json(out_json, curves)
    _manifest(args, out_csv, profile, t0, {"switch_episode": switch_at if args.protocol == "nonstationary" else None})
    _manifest(args, out_json, profile, t0, {"switch_episode": switch_at if args.protocol == "nonstationary" else None})
    print(f"wrote {out_csv} and {out_json}", file=sys.stderr)
    return EXIT_OK


def _require_checkpoint(args) -> Checkpoint:
    if not args.checkpoint:
        raise ConfigError("this agent needs --checkpoint")
    path = Path(args.checkpoint)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    ckpt = Checkpoint.load(path)
    if not ckpt.model_spec.with_prior:
        raise ConfigError("adaptation agents need a prior-head checkpoint")
    return ckpt


def cmd_flops(args) -> int:
    t0 = time.time()
    profile = _load_profile(args)
    spec = environment(profile)
    outdir = _outdir(args)
    if args.agent == "linear":
        report = {
            "agent": "linear",
            "env": spec.name,
            "inference": count_flops("linear", "inference", spec),
            "update": count_flops("linear", "update", spec),
        }
    else:
        ms = _model_spec(profile, spec, args.agent, True)
        report = {
            "agent": args.agent,
            "env": spec.name,
            "inference": count_flops(ms, "inference"),
            "update": count_flops(ms, "update"),
        }
    out = outdir / "flops_report.json"
    with open(out, "w") as f:
        json.dump(report, f, sort_keys=True)
        f.write("\n")
    _manifest(args, out, profile, t0)
    print(json.dumps(report), file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    profile = _load_profile(args)
    app = create_app(checkpoint_dir=args.out)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blrhac")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--env", choices=["small", "medium", "large", "custom"], default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None, help="JSON config file (schema blrhac-config-v1)")
        p.add_argument("--out", default="out", help="artifact directory")
        p.add_argument("--profile", choices=sorted(PROFILES), default="desk")
        p.add_argument("--jobs", type=int, default=1, help="worker thread cap")

    p = sub.add_parser("gen-pop", help="sample the preference population")
    common(p)
    p.set_defaults(func=cmd_gen_pop)

    p = sub.add_parser("gen-demos", help="roll expert demonstration datasets")
    common(p)
    p.add_argument("--population", default=None)
    p.set_defaults(func=cmd_gen_demos)

    p = sub.add_parser("pretrain", help="behavior-clone one model family")
    common(p)
    p.add_argument("--family", default="causal_transformer",
                   choices=["shallow_linear", "deep_linear", "mlp", "causal_transformer"])
    p.add_argument("--no-prior", action="store_true")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--demos-train", default=None)
    p.add_argument("--demos-eval", default=None)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("sweep", help="hyperparameter sweep over families and priors")
    common(p)
    p.add_argument("--families", default=None, help="comma-separated family subset")
    p.add_argument("--lrs", default=None, help="comma-separated learning rates")
    p.add_argument("--demos-train", default=None)
    p.add_argument("--demos-eval", default=None)
    p.add_argument("--demos-test", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval-zero-shot", help="replay the test set with a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--demos-test", default=None)
    p.set_defaults(func=cmd_eval_zero_shot)

    p = sub.add_parser("adapt", help="test-time adaptation experiments")
    common(p)
    p.add_argument("--protocol", choices=["stationary", "nonstationary"], required=True)
    p.add_argument("--agents", default="linear", help="comma list: linear,blr_hac,online_transformer")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--population", default=None)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("flops", help="analytic FLOP report")
    common(p)
    p.add_argument("--agent", default="linear",
                   choices=["linear", "deep_linear", "mlp", "causal_transformer"])
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("serve", help="start the collaboration service")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    torch.set_num_threads(1)  # bitwise reproducibility of artifacts
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDiverged, FloatingPointError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
