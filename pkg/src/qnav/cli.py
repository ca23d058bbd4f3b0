"""Command-line entry point: configure, run, and analyze seeded experiments.

Commands:
  train    -- train one run per seed, writing curve CSVs, checkpoints, manifest
  eval     -- greedy policy evaluation of a checkpoint over a scene set
  analyze  -- aggregate run curves (AUC table) and/or capacity reports
  scenes   -- dump a generated scene grid as JSON lines

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import platform
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__, agent, analysis, env
from .agent import AgentConfig, ActorCriticModel
from .qsim import NoiseSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


_TOP_KEYS = {"name", "seeds", "agent", "env", "scenes", "output", "smooth_window"}
_SCENE_KEYS = {"split", "scenarios", "speed", "distance"}


@dataclasses.dataclass
class RunConfig:
    name: str
    seeds: list
    agent: AgentConfig
    env: env.EnvConfig
    scene_spec: dict
    output: str
    smooth_window: int = 100

    def resolved(self) -> dict:
        noise = self.agent.noise
        return {
            "name": self.name,
            "seeds": list(self.seeds),
            "agent": {
                **{k: v for k, v in dataclasses.asdict(self.agent).items() if k != "noise"},
                "noise": None if noise is None else dataclasses.asdict(noise),
            },
            "env": dataclasses.asdict(self.env),
            "scenes": self.scene_spec,
            "output": self.output,
            "smooth_window": self.smooth_window,
        }


def _check_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def load_config(path: str, overrides: Optional[dict] = None) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys(raw, _TOP_KEYS, "config")

    agent_section = dict(raw.get("agent") or {})
    env_section = dict(raw.get("env") or {})
    scene_section = dict(raw.get("scenes") or {"split": "train"})
    config = {
        "name": raw.get("name", Path(path).stem),
        "seeds": list(raw.get("seeds", [0])),
        "output": raw.get("output", "runs/" + raw.get("name", Path(path).stem)),
        "smooth_window": int(raw.get("smooth_window", 100)),
    }
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key in ("seed",):
            config["seeds"] = [val]
        elif key in ("out",):
            config["output"] = val
        elif key in ("critic", "gradient_mode", "episodes", "lr", "noise"):
            agent_section[key] = val
        else:
            raise ConfigError(f"unknown override {key!r}")

    agent_fields = {f.name for f in dataclasses.fields(AgentConfig)}
    _check_keys(agent_section, agent_fields, "agent")
    noise_raw = agent_section.pop("noise", None)
    noise = None
    if noise_raw:
        if isinstance(noise_raw, NoiseSpec):
            noise = noise_raw
        elif isinstance(noise_raw, str):
            noise = _parse_noise_flag(noise_raw)
        else:
            _check_keys(noise_raw, {"gate_error", "depolarizing", "granularity"}, "agent.noise")
            noise = NoiseSpec(**noise_raw)
    env_fields = {f.name for f in dataclasses.fields(env.EnvConfig)}
    _check_keys(env_section, env_fields, "env")
    _check_keys(scene_section, _SCENE_KEYS, "scenes")
    try:
        agent_config = AgentConfig(noise=noise, **agent_section)
        env_config = env.EnvConfig(**env_section)
    except (TypeError, agent.UsageError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        name=config["name"],
        seeds=config["seeds"],
        agent=agent_config,
        env=env_config,
        scene_spec=scene_section,
        output=config["output"],
        smooth_window=config["smooth_window"],
    )


def _parse_noise_flag(spec: str) -> Optional[NoiseSpec]:
    """--noise "gate_error=0.01,depolarizing=0.05" (or "off")."""
    if spec in ("off", "none", ""):
        return None
    kwargs = {}
    for part in spec.split(","):
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in ("gate_error", "depolarizing", "granularity"):
            raise ConfigError(f"unknown noise field {key!r}")
        kwargs[key] = val if key == "granularity" else float(val)
    return NoiseSpec(**kwargs)


def build_scenes(scene_spec: dict, env_config: env.EnvConfig) -> list[env.Scene]:
    split = scene_spec.get("split", "train")
    if "scenarios" in scene_spec or "speed" in scene_spec or "distance" in scene_spec:
        base = env.SceneGrid.train_default() if split == "train" else env.SceneGrid.test_default()
        scenarios = tuple(scene_spec.get("scenarios", base.scenarios))
        speed = scene_spec.get("speed", [base.speed_start, base.speed_stop, base.speed_step])
        dist = scene_spec.get("distance", [base.dist_start, base.dist_stop, base.dist_step])
        grid = env.SceneGrid(scenarios, *map(float, speed), *map(float, dist))
        return env.generate_scenes(split, grid, env_config)
    return env.generate_scenes(split, config=env_config)


# ---------------------------------------------------------------------------
# artifacts


def _write_csv(path: Path, rows: list[dict], columns: list[str]):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k) for k in columns})


def _manifest(run_config: RunConfig, extra: dict) -> dict:
    return {
        "tool": "qnav",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": run_config.resolved(),
        **extra,
    }


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    run_config = load_config(args.config, {
        "seed": args.seed,
        "out": args.out,
        "critic": args.critic,
        "gradient_mode": args.gradient_mode,
        "episodes": args.episodes,
        "noise": _parse_noise_flag(args.noise) if args.noise is not None else None,
    })
    out = Path(run_config.output)
    out.mkdir(parents=True, exist_ok=True)
    scenes = build_scenes(run_config.scene_spec, run_config.env)
    started = time.time()
    artifacts = []
    param_counts = {}
    status = "complete"
    try:
        for seed in run_config.seeds:
            seed_config = dataclasses.replace(run_config.agent, seed=int(seed))
            record, model = agent.train_run(seed_config, scenes, run_config.env)
            curve = out / f"curve_seed{seed}.csv"
            _write_csv(curve, record.to_rows(run_config.smooth_window),
                       ["episode", "return", "smoothed_return", "entropy", "steps", "outcome"])
            ckpt = out / f"checkpoint_seed{seed}.json"
            agent.save_checkpoint(model, str(ckpt), extra={"seed": int(seed)})
            artifacts += [curve.name, ckpt.name]
            param_counts = {
                "critic": record.critic_params,
                "total": record.total_params,
            }
            if run_config.agent.critic == "quantum":
                param_counts["layout"] = model.critic.layout.manifest()
    except Exception:
        status = "partial"
        manifest = _manifest(run_config, {
            "status": status,
            "artifacts": artifacts,
            "param_counts": param_counts,
            "n_scenes": len(scenes),
            "wall_clock_s": time.time() - started,
        })
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2)
        raise
    manifest = _manifest(run_config, {
        "status": status,
        "artifacts": artifacts,
        "param_counts": param_counts,
        "n_scenes": len(scenes),
        "wall_clock_s": time.time() - started,
    })
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"trained {len(run_config.seeds)} seed(s) -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    model = agent.load_checkpoint(str(ckpt))
    env_config = env.EnvConfig()
    scene_spec = {"split": args.split}
    if args.scenarios:
        scene_spec["scenarios"] = [int(s) for s in args.scenarios.split(",")]
    scenes = build_scenes(scene_spec, env_config)
    metrics, per_scene = agent.evaluate_policy(model, scenes, env_config)
    out = Path(args.out or ckpt.parent)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.json", "w") as fh:
        json.dump(metrics.to_dict(), fh, indent=2)
    _write_csv(out / "outcomes.csv", per_scene,
               ["scene", "scenario", "ped_speed", "ped_distance", "outcome",
                "steps", "return", "near_miss", "time_to_goal"])
    print(json.dumps(metrics.to_dict(), indent=2))
    return EXIT_OK


def _read_curve(path: Path) -> list[float]:
    with open(path) as fh:
        return [float(row["return"]) for row in csv.DictReader(fh)]


def cmd_analyze(args) -> int:
    out = Path(args.out or (args.runs[0] if args.runs else "."))
    out.mkdir(parents=True, exist_ok=True)
    if args.runs:
        curves = []
        names = []
        for run_dir in args.runs:
            for curve in sorted(Path(run_dir).glob("curve_seed*.csv")):
                curves.append(_read_curve(curve))
                names.append(str(curve))
        if not curves:
            raise ConfigError("no curve CSVs found in the given run directories")
        if len({len(c) for c in curves}) > 1:
            print("warning: mixed-length runs, truncating to the shortest", file=sys.stderr)
        stats = analysis.aggregate_runs(curves, smooth_window=args.smooth_window)
        _write_csv(out / "curve_stats.csv",
                   [{"episode": i, "mean": stats.mean[i], "std": stats.std[i],
                     "min": stats.low[i], "max": stats.high[i]}
                    for i in range(stats.length)],
                   ["episode", "mean", "std", "min", "max"])
        _write_csv(out / "auc.csv",
                   [{"run": name, "auc": a} for name, a in zip(names, stats.aucs)]
                   + [{"run": "mean", "auc": stats.auc_mean},
                      {"run": "std", "auc": stats.auc_std}],
                   ["run", "auc"])
        print(f"AUC mean {stats.auc_mean:.2f} std {stats.auc_std:.2f} over {stats.n_runs} runs")
    if args.fim:
        model = agent.load_checkpoint(args.fim)
        report = capacity_report(model, theta_samples=args.theta_samples,
                                 n_inputs=args.inputs, seed=args.seed or 0)
        with open(out / "fim.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        top = report.eigenvalues[:50]
        _write_csv(out / "eigenspectrum.csv",
                   [{"rank": i + 1, "eigenvalue": v} for i, v in enumerate(top)],
                   ["rank", "eigenvalue"])
        print(f"effective dimension {report.effective_dim:.2f} "
              f"(normalized {report.normalized_effective_dim:.3f}) of d={report.d}")
    return EXIT_OK


def capacity_report(model: ActorCriticModel, theta_samples: int = 20,
                    n_inputs: int = 200, seed: int = 0,
                    gamma: float = 1.0, n_data: int = 3690) -> analysis.FIMReport:
    """FIM / effective-dimension report for a model's critic.

    Inputs are sampled uniformly from the critic input cube (-1, 1)^p,
    matching the tanh-bounded hidden state it sees in training.
    """
    rng = np.random.default_rng(seed)
    critic = model.critic
    p = model.config.lstm_hidden
    inputs = [rng.uniform(-1.0, 1.0, size=p) for _ in range(n_inputs)]
    thetas = [agent.sample_critic_param_vector(critic, rng) for _ in range(theta_samples)]
    saved = agent.get_critic_param_vector(critic)

    def grad_fn_at(theta_vec):
        def grad_fn(x):
            agent.set_critic_param_vector(critic, theta_vec)
            return agent.critic_grad_vector(critic, x)
        return grad_fn

    try:
        report = analysis.fim_report(grad_fn_at, thetas, inputs, gamma=gamma, n_data=n_data)
    finally:
        agent.set_critic_param_vector(critic, saved)
    return report


def cmd_scenes(args) -> int:
    env_config = env.EnvConfig()
    scene_spec = {"split": args.split}
    if args.scenarios:
        scene_spec["scenarios"] = [int(s) for s in args.scenarios.split(",")]
    scenes = build_scenes(scene_spec, env_config)
    rows = [
        {
            "scenario": s.scenario_id,
            "car_start": list(s.car_start),
            "car_goal": list(s.car_goal),
            "ped_distance": s.ped_distance,
            "ped_speed": s.ped_speed,
            "ped_spawn": list(s.ped_spawn),
            "n_obstacles": len(s.obstacles),
            "n_other_cars": len(s.other_cars),
        }
        for s in scenes
    ]
    if args.out:
        with open(args.out, "w") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
    print(f"{len(scenes)} scenes ({args.split})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qnav")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one run per seed")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None, help="override: single seed")
    p_train.add_argument("--out", default=None)
    p_train.add_argument("--critic", choices=["quantum", "classical"], default=None)
    p_train.add_argument("--gradient-mode", dest="gradient_mode",
                         choices=["backprop", "param-shift"], default=None)
    p_train.add_argument("--episodes", type=int, default=None)
    p_train.add_argument("--noise", default=None,
                         help='e.g. "gate_error=0.01,depolarizing=0.05" or "off"')
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--split", choices=["train", "test"], default="test")
    p_eval.add_argument("--scenarios", default=None, help="comma-separated scenario ids")
    p_eval.add_argument("--out", default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_an = sub.add_parser("analyze", help="curve stats / AUC table / capacity report")
    p_an.add_argument("--runs", nargs="*", default=[], help="run directories with curve CSVs")
    p_an.add_argument("--fim", default=None, help="checkpoint for a capacity report")
    p_an.add_argument("--theta-samples", type=int, default=20)
    p_an.add_argument("--inputs", type=int, default=200)
    p_an.add_argument("--seed", type=int, default=None)
    p_an.add_argument("--smooth-window", type=int, default=100)
    p_an.add_argument("--out", default=None)
    p_an.set_defaults(func=cmd_analyze)

    p_sc = sub.add_parser("scenes", help="dump a generated scene grid")
    p_sc.add_argument("--split", choices=["train", "test"], default="train")
    p_sc.add_argument("--scenarios", default=None)
    p_sc.add_argument("--out", default=None)
    p_sc.set_defaults(func=cmd_scenes)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, agent.UsageError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
