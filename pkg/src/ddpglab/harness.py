"""Experiment orchestration: seeded training runs, epoch accounting,
noise-free evaluation, multi-seed comparisons and CSV emission.

An epoch is a fixed number of environment steps (2000 by default). The
epoch return is the mean of episode returns completed inside the epoch;
episodes straddling a boundary count toward the epoch where they end.
Every stochastic choice flows from the run seed, so identical configs
produce byte-identical CSVs.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, fields, replace
from statistics import median
from typing import Callable

import numpy as np

from .agent import Agent, default_networks
from .envs import ENV_REGISTRY, make_env
from .nets import action_distance
from .noise import NOISE_KINDS, AdaptiveParamNoise, NoNoise, make_noise
from .replay import PrioritizedBuffer, Transition

# How many of an episode's visited states are kept for measuring the
# action-space drift of the perturbed policy.
PROBE_STATE_CAP = 64

CSV_COLUMNS = (
    "epoch",
    "steps",
    "epoch_return",
    "overall_reward",
    "reward_history_100",
    "eval_return",
    "critic_loss",
    "sigma",
)

RUN_CSV_NAME = "run.csv"

ALGORITHMS = ("ddpg", "pddpg")


@dataclass
class RunConfig:
    """Full experiment configuration; every key has a CLI flag twin."""

    env: str = "pendulum"
    algo: str = "ddpg"
    noise: str = "ou"
    epochs: int = 10
    seed: int = 0
    out: str | None = None
    steps_per_epoch: int = 2000
    gamma: float = 0.99
    tau: float = 0.001
    batch_size: int = 64
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    warmup: int = 1000
    hidden: tuple = (64, 64)
    buffer_size: int = 100_000
    alpha: float | None = None
    use_is_weights: bool | None = None
    beta_start: float = 0.4
    beta_end: float = 1.0
    priority_epsilon: float = 1e-6
    gaussian_sigma: float | None = None
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    param_sigma: float = 0.1
    param_sigma_min: float = 1e-4
    param_sigma_max: float = 1.0
    adapt_factor: float = 1.01
    target_distance: float = 0.1
    eval_episodes: int = 10


@dataclass
class EpochRecord:
    """One metrics row per epoch of environment interaction."""

    epoch: int
    steps: int
    epoch_return: float
    overall_reward: float
    reward_history_100: float
    eval_return: float | None
    critic_loss: float | None
    sigma: float | None


def resolve_config(config: RunConfig) -> RunConfig:
    """Validate and fill algorithm-dependent defaults.

    ``ddpg`` is exactly ``pddpg`` with alpha = 0 and importance weights
    off, so both algorithms share one code path.
    """
    if config.env not in ENV_REGISTRY:
        raise ValueError(f"unknown env {config.env!r}; known: {sorted(ENV_REGISTRY)}")
    if config.algo not in ALGORITHMS:
        raise ValueError(f"unknown algo {config.algo!r}; known: {ALGORITHMS}")
    if config.noise not in NOISE_KINDS:
        raise ValueError(f"unknown noise {config.noise!r}; known: {NOISE_KINDS}")
    if config.epochs < 0:
        raise ValueError("epochs must be >= 0")
    if config.steps_per_epoch <= 0:
        raise ValueError("steps_per_epoch must be > 0")
    alpha = config.alpha
    use_is = config.use_is_weights
    if alpha is None:
        alpha = 0.0 if config.algo == "ddpg" else 0.6
    if use_is is None:
        use_is = config.algo == "pddpg"
    return replace(config, alpha=alpha, use_is_weights=use_is)


def derive_seed(*parts: int) -> int:
    """Deterministically mix integer parts into one 64-bit seed."""
    state = np.random.SeedSequence(list(parts)).generate_state(2)
    return int(state[0]) << 32 | int(state[1])


def beta_at(config: RunConfig, steps: int) -> float:
    """Linear importance-sampling exponent schedule over the whole run."""
    total = config.epochs * config.steps_per_epoch
    frac = 1.0 if total <= 0 else min(1.0, steps / total)
    return config.beta_start + (config.beta_end - config.beta_start) * frac


def build_agent(config: RunConfig, env_spec, rng: np.random.Generator) -> Agent:
    normalize = config.noise == "adaptive-param"
    actor, critic = default_networks(
        env_spec.state_dim, env_spec.action_dim, config.hidden, rng,
        normalize=normalize,
    )
    return Agent(
        actor,
        critic,
        action_low=env_spec.action_low,
        action_high=env_spec.action_high,
        gamma=config.gamma,
        tau=config.tau,
        batch_size=config.batch_size,
        actor_lr=config.actor_lr,
        critic_lr=config.critic_lr,
        use_is_weights=config.use_is_weights,
        warmup=config.warmup,
    )


def evaluate(agent: Agent, env, episodes: int, seed: int) -> float:
    """Mean undiscounted return of the live actor run without noise."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    rng = np.random.default_rng(seed)
    quiet = NoNoise()
    total = 0.0
    for _ in range(episodes):
        s = env.reset(int(rng.integers(0, 2**63)))
        done = False
        while not done:
            a = agent.select_action(agent.actor, s, quiet, rng)
            result = env.step(a)
            total += result.reward
            s = result.next_state
            done = result.done
    return total / episodes


def run(config: RunConfig,
        early_stop: Callable[[EpochRecord], bool] | None = None
        ) -> list[EpochRecord]:
    """Train one agent per the config; returns records and writes the CSV.

    ``early_stop`` is checked after each completed epoch; a truthy result
    ends the run with the records so far (the CSV still gets written).
    """
    cfg = resolve_config(config)
    rng = np.random.default_rng(cfg.seed)
    env = make_env(cfg.env)
    eval_env = make_env(cfg.env)
    spec = env.spec
    agent = build_agent(cfg, spec, rng)
    strategy = make_noise(
        cfg.noise, spec.action_dim, spec.action_high,
        gaussian_sigma=cfg.gaussian_sigma,
        ou_theta=cfg.ou_theta, ou_sigma=cfg.ou_sigma,
        param_sigma=cfg.param_sigma, param_sigma_min=cfg.param_sigma_min,
        param_sigma_max=cfg.param_sigma_max, adapt_factor=cfg.adapt_factor,
        target_distance=cfg.target_distance,
    )
    buf = PrioritizedBuffer(
        cfg.buffer_size, spec.state_dim, spec.action_dim,
        alpha=cfg.alpha, priority_epsilon=cfg.priority_epsilon,
    )

    total_target = cfg.epochs * cfg.steps_per_epoch
    records: list[EpochRecord] = []
    epoch_returns: list[float] = []
    completed_this_epoch: list[float] = []
    losses_this_epoch: list[float] = []
    steps = 0
    stop = False

    def close_epoch():
        epoch_idx = len(records) + 1
        # empty only if steps_per_epoch is shorter than an episode
        epoch_return = (
            float(np.mean(completed_this_epoch))
            if completed_this_epoch else float("nan")
        )
        epoch_returns.append(epoch_return)
        record = EpochRecord(
            epoch=epoch_idx,
            steps=steps,
            epoch_return=epoch_return,
            overall_reward=float(np.mean(epoch_returns)),
            reward_history_100=float(np.mean(epoch_returns[-100:])),
            eval_return=(
                evaluate(agent, eval_env, cfg.eval_episodes,
                         derive_seed(cfg.seed, epoch_idx))
                if cfg.eval_episodes > 0 else None
            ),
            critic_loss=(
                float(np.mean(losses_this_epoch)) if losses_this_epoch else None
            ),
            sigma=(
                strategy.sigma if isinstance(strategy, AdaptiveParamNoise) else None
            ),
        )
        records.append(record)
        completed_this_epoch.clear()
        losses_this_epoch.clear()
        return record

    while steps < total_target and not stop:
        episode_seed = int(rng.integers(0, 2**63))
        s = env.reset(episode_seed)
        strategy.on_episode_start(agent.actor, rng)
        probes = [s]
        episode_return = 0.0
        episode_done = False
        try:
            while not episode_done and steps < total_target and not stop:
                behavior = strategy.behavior_actor(agent.actor)
                a = agent.select_action(behavior, s, strategy, rng)
                result = env.step(a)
                buf.push(Transition(s, a, result.reward, result.next_state,
                                    result.done))
                episode_return += result.reward
                s = result.next_state
                if len(probes) < PROBE_STATE_CAP:
                    probes.append(s)
                steps += 1
                if len(buf) >= cfg.warmup:
                    report = agent.train_step(buf, beta_at(cfg, steps), rng)
                    losses_this_epoch.append(report.critic_loss)
                episode_done = result.done
                if episode_done:
                    completed_this_epoch.append(episode_return)
                    if isinstance(strategy, AdaptiveParamNoise):
                        drift = action_distance(
                            agent.actor, strategy.perturbed_actor,
                            np.asarray(probes),
                        )
                        strategy.adapt(drift)
                if steps % cfg.steps_per_epoch == 0:
                    record = close_epoch()
                    if early_stop is not None and early_stop(record):
                        stop = True
        except Exception as exc:
            raise RuntimeError(
                f"run aborted during epoch {len(records) + 1} "
                f"(step {steps}): {exc}"
            ) from exc

    if cfg.out is not None:
        os.makedirs(cfg.out, exist_ok=True)
        write_records_csv(records, os.path.join(cfg.out, RUN_CSV_NAME))
    return records


# -- CSV ------------------------------------------------------------------------


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.epoch,
                r.steps,
                _fmt(r.epoch_return),
                _fmt(r.overall_reward),
                _fmt(r.reward_history_100),
                _fmt(r.eval_return),
                _fmt(r.critic_loss),
                _fmt(r.sigma),
            ])


def read_records_csv(path) -> list[EpochRecord]:
    out = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        for row in reader:
            out.append(EpochRecord(
                epoch=int(row[0]),
                steps=int(row[1]),
                epoch_return=float(row[2]),
                overall_reward=float(row[3]),
                reward_history_100=float(row[4]),
                eval_return=float(row[5]) if row[5] else None,
                critic_loss=float(row[6]) if row[6] else None,
                sigma=float(row[7]) if row[7] else None,
            ))
    return out


# -- multi-seed comparison --------------------------------------------------------


@dataclass
class RunSummary:
    label: str
    seed: int
    final_overall_reward: float
    aulc: float


@dataclass
class CompareResult:
    rows: list
    median_final: dict
    median_aulc: dict
    aulc_wins: dict
    final_wins: dict
    curves: dict  # (label, seed) -> list of epoch returns


def learning_curve_area(records) -> float:
    """Area under the learning curve: the plain sum of epoch returns."""
    return float(sum(r.epoch_return for r in records))


def compare(base: RunConfig, variant: RunConfig, seeds,
            out_dir: str | None = None,
            labels: tuple[str, str] = ("a", "b")) -> CompareResult:
    """Run both configs across seeds; summarize medians and win counts."""
    if base.env != variant.env:
        raise ValueError(
            f"configs target different envs: {base.env!r} vs {variant.env!r}"
        )
    seeds = [int(s) for s in seeds]
    if len(seeds) < 3:
        raise ValueError("compare needs at least 3 seeds")

    rows = []
    curves = {}
    for label, cfg in zip(labels, (base, variant)):
        for seed in seeds:
            sub_out = (
                os.path.join(out_dir, f"{label}_seed{seed}")
                if out_dir is not None else None
            )
            records = run(replace(cfg, seed=seed, out=sub_out))
            rows.append(RunSummary(
                label=label,
                seed=seed,
                final_overall_reward=records[-1].overall_reward,
                aulc=learning_curve_area(records),
            ))
            curves[(label, seed)] = [r.epoch_return for r in records]

    by_label = {
        label: [r for r in rows if r.label == label] for label in labels
    }
    median_final = {
        label: median(r.final_overall_reward for r in rs)
        for label, rs in by_label.items()
    }
    median_aulc = {
        label: median(r.aulc for r in rs) for label, rs in by_label.items()
    }
    a, b = labels
    aulc_wins = {a: 0, b: 0}
    final_wins = {a: 0, b: 0}
    for ra, rb in zip(by_label[a], by_label[b]):
        if ra.aulc > rb.aulc:
            aulc_wins[a] += 1
        elif rb.aulc > ra.aulc:
            aulc_wins[b] += 1
        if ra.final_overall_reward > rb.final_overall_reward:
            final_wins[a] += 1
        elif rb.final_overall_reward > ra.final_overall_reward:
            final_wins[b] += 1

    result = CompareResult(
        rows=rows,
        median_final=median_final,
        median_aulc=median_aulc,
        aulc_wins=aulc_wins,
        final_wins=final_wins,
        curves=curves,
    )
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_compare_csvs(result, out_dir, labels)
    return result


def _write_compare_csvs(result: CompareResult, out_dir: str, labels) -> None:
    with open(os.path.join(out_dir, "compare_runs.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["config", "seed", "final_overall_reward", "aulc"])
        for r in result.rows:
            writer.writerow([r.label, r.seed, _fmt(r.final_overall_reward),
                             _fmt(r.aulc)])
    with open(os.path.join(out_dir, "compare_summary.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "config", "median_final_overall_reward", "median_aulc",
            "aulc_wins", "final_wins",
        ])
        for label in labels:
            writer.writerow([
                label,
                _fmt(result.median_final[label]),
                _fmt(result.median_aulc[label]),
                result.aulc_wins[label],
                result.final_wins[label],
            ])


# -- config files -------------------------------------------------------------------


_CONFIG_FIELDS = {f.name: f for f in fields(RunConfig)}

_INT_KEYS = {"epochs", "seed", "steps_per_epoch", "batch_size", "warmup",
             "buffer_size", "eval_episodes"}
_FLOAT_KEYS = {"gamma", "tau", "actor_lr", "critic_lr", "beta_start",
               "beta_end", "priority_epsilon", "ou_theta", "ou_sigma",
               "param_sigma", "param_sigma_min", "param_sigma_max",
               "adapt_factor", "target_distance"}
_OPT_FLOAT_KEYS = {"alpha", "gaussian_sigma"}
_BOOL_KEYS = {"use_is_weights"}
_STR_KEYS = {"env", "algo", "noise", "out"}


def parse_config_value(key: str, text: str):
    """Parse one ``key = value`` right-hand side into its typed form."""
    text = text.strip()
    if key not in _CONFIG_FIELDS:
        raise ValueError(f"unknown config key {key!r}")
    if key in _INT_KEYS:
        return int(text)
    if key in _FLOAT_KEYS:
        return float(text)
    if key in _OPT_FLOAT_KEYS:
        return None if text.lower() == "none" else float(text)
    if key in _BOOL_KEYS:
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"cannot parse boolean {text!r} for {key}")
    if key == "hidden":
        return tuple(int(p) for p in text.split(",") if p.strip())
    assert key in _STR_KEYS
    return text


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    """Read a flat ``key = value`` file; '#' starts a comment."""
    cfg = base or RunConfig()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, text = (part.strip() for part in line.split("=", 1))
            try:
                value = parse_config_value(key, text)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            cfg = replace(cfg, **{key: value})
    return cfg
