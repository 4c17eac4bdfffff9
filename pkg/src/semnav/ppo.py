"""Clipped-surrogate actor-critic training with GAE and optional curriculum."""
from __future__ import annotations

import json
import logging
import pickle
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .env import Curriculum, NavEnv, TaskConstraints, Termination
from .errors import ConfigurationError, PolicyLoadError, TrainingFault
from .policy import (
    HUMAN_FEATURES,
    ROBOT_FEATURES,
    Agent,
    EncodedObs,
    NetConfig,
    PolicyNetwork,
    collate,
    encode_observation,
    squash,
)
from .rewards import RewardSystem
from .scenario import Scenario, sample_random_scenario
from .sensing import N_BEAMS
from .world import StaticMap
from .zones import ZoneModel

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "semnav-policy"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainerConfig:
    gamma: float = 0.95
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    learning_rate: float = 5e-4
    rollout_length: int = 2048  # transitions per update, summed over environments
    minibatch_size: int = 256
    epochs: int = 10
    entropy_coef: float = 0.005
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    kl_hard_cap: float = 0.05
    n_envs: int = 4
    total_steps: int = 200_000
    seed: int = 0
    mode: str = "random"  # random | staged | scenario
    n_pedestrians: int = 0  # used by mode="random"
    window: int = 100
    net: NetConfig = field(default_factory=NetConfig)

    def __post_init__(self):
        if isinstance(self.net, dict):
            net = {k: tuple(v) if isinstance(v, list) else v for k, v in self.net.items()}
            object.__setattr__(self, "net", NetConfig(**net))
        if not 0 < self.gamma < 1:
            raise ConfigurationError("gamma must lie in (0, 1)")
        if not self.clip_ratio > 0:
            raise ConfigurationError("clip ratio must be positive")
        if self.mode not in ("random", "staged", "scenario"):
            raise ConfigurationError(f"unknown training mode {self.mode!r}")
        if self.n_envs < 1 or self.rollout_length < self.n_envs:
            raise ConfigurationError("need at least one environment and one step per environment")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainerConfig":
        return cls(**d)


def ppo_losses(
    net: PolicyNetwork,
    batch,
    actions_u: torch.Tensor,
    old_log_prob: torch.Tensor,
    advantages: torch.Tensor,
    returns: torch.Tensor,
    clip_ratio: float,
) -> dict[str, torch.Tensor]:
    """Policy (clipped surrogate), value (squared error) and entropy terms.

    Log-probabilities are taken on the pre-squash Gaussian sample; the squash
    Jacobian is identical for old and new policy and cancels in the ratio.
    """
    dist, value = net.distribution(batch)
    log_prob = dist.log_prob(actions_u).sum(-1)
    log_ratio = log_prob - old_log_prob
    ratio = log_ratio.exp()
    surr = torch.min(ratio * advantages, ratio.clamp(1 - clip_ratio, 1 + clip_ratio) * advantages)
    policy_loss = -surr.mean()
    value_loss = 0.5 * ((value - returns) ** 2).mean()
    entropy = dist.entropy().sum(-1).mean()
    with torch.no_grad():
        approx_kl = ((ratio - 1) - log_ratio).mean()
        clip_frac = ((ratio - 1).abs() > clip_ratio).float().mean()
    return {
        "policy": policy_loss,
        "value": value_loss,
        "entropy": entropy,
        "approx_kl": approx_kl,
        "clip_frac": clip_frac,
    }


def total_loss(losses: dict[str, torch.Tensor], cfg: TrainerConfig) -> torch.Tensor:
    return losses["policy"] + cfg.value_coef * losses["value"] - cfg.entropy_coef * losses["entropy"]


def compute_gae(
    rewards: np.ndarray, values: np.ndarray, dones: np.ndarray, last_values: np.ndarray, gamma: float, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    """Arrays are (T, N); ``dones[t]`` marks the end of an episode at step t."""
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    gae = np.zeros(rewards.shape[1])
    for t in reversed(range(T)):
        next_v = last_values if t == T - 1 else values[t + 1]
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_v * nonterminal - values[t]
        gae = delta + gamma * lam * nonterminal * gae
        adv[t] = gae
    return adv, adv + values


@dataclass
class Rollout:
    obs: list[EncodedObs]
    actions_u: np.ndarray  # (M, 2)
    log_prob: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray

    def __len__(self) -> int:
        return len(self.obs)


def ppo_update(
    net: PolicyNetwork,
    optimizer: torch.optim.Optimizer,
    rollout: Rollout,
    cfg: TrainerConfig,
    rng: np.random.Generator,
) -> dict:
    """Run the configured epochs of minibatch updates; stop early past the KL cap."""
    net.train()
    n = len(rollout)
    stats = {"policy_loss": [], "value_loss": [], "entropy": [], "approx_kl": [], "clip_frac": []}
    early_stop = False
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start : start + cfg.minibatch_size]
            batch = collate([rollout.obs[i] for i in idx])
            adv = torch.as_tensor(rollout.advantages[idx], dtype=torch.float32)
            if len(idx) > 1:
                adv = (adv - adv.mean()) / (adv.std() + 1e-8)
            losses = ppo_losses(
                net,
                batch,
                torch.as_tensor(rollout.actions_u[idx], dtype=torch.float32),
                torch.as_tensor(rollout.log_prob[idx], dtype=torch.float32),
                adv,
                torch.as_tensor(rollout.returns[idx], dtype=torch.float32),
                cfg.clip_ratio,
            )
            if losses["approx_kl"].item() > cfg.kl_hard_cap:
                early_stop = True
                stats["approx_kl"].append(losses["approx_kl"].item())
                break
            loss = total_loss(losses, cfg)
            if not torch.isfinite(loss):
                raise TrainingFault(f"non-finite loss: { {k: v.item() for k, v in losses.items()} }")
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(net.parameters(), cfg.max_grad_norm)
            optimizer.step()
            stats["policy_loss"].append(losses["policy"].item())
            stats["value_loss"].append(losses["value"].item())
            stats["entropy"].append(losses["entropy"].item())
            stats["approx_kl"].append(losses["approx_kl"].item())
            stats["clip_frac"].append(losses["clip_frac"].item())
        if early_stop:
            log.info("KL %.4f above hard cap %.4f, update stopped early", stats["approx_kl"][-1], cfg.kl_hard_cap)
            break
    out = {k: float(np.mean(v)) if v else 0.0 for k, v in stats.items()}
    out["early_stop"] = early_stop
    return out


class ScenarioSource:
    """Yields the scenario for each new episode according to the training mode."""

    def __init__(self, cfg: TrainerConfig, scenarios: Sequence[Scenario] = (), static_map: StaticMap | None = None):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.scenarios = list(scenarios)
        self.static_map = static_map
        self.curriculum = Curriculum(window=cfg.window) if cfg.mode == "staged" else None
        self._next = 0
        if cfg.mode == "scenario" and not self.scenarios:
            raise ConfigurationError("scenario mode needs at least one scenario")

    @property
    def stage_index(self) -> int:
        return self.curriculum.stage.index if self.curriculum else 0

    def next(self) -> Scenario:
        if self.cfg.mode == "scenario":
            s = self.scenarios[self._next % len(self.scenarios)]
            self._next += 1
            return s
        seed = int(self.rng.integers(2**31 - 1))
        stage = self.curriculum.stage if self.curriculum else self.cfg.n_pedestrians
        return sample_random_scenario(seed, stage, self.static_map)

    def episode_finished(self, episode_return: float) -> None:
        if self.curriculum:
            self.curriculum.record(episode_return)


@dataclass
class TrainingResult:
    net: PolicyNetwork
    log: list[dict]
    episode_outcomes: list[str]
    episode_returns: list[float]
    episode_zone_terms: list[float]


def train(
    cfg: TrainerConfig = TrainerConfig(),
    env_factory: Callable[[], NavEnv] | None = None,
    zone_model: ZoneModel | str = ZoneModel.STATIC,
    reward_system: RewardSystem | str = RewardSystem.STATIC_ZONE,
    scenarios: Sequence[Scenario] = (),
    static_map: StaticMap | None = None,
    log_path: str | Path | None = None,
    checkpoint_path: str | Path | None = None,
    callback: Callable[[dict], None] | None = None,
) -> TrainingResult:
    """Collect rollouts from ``cfg.n_envs`` environments and update the policy.

    Environments are stepped in a fixed order in this process, so a fixed seed
    gives an identical log.
    """
    zone_model, reward_system = ZoneModel(zone_model), RewardSystem(reward_system)
    torch.manual_seed(cfg.seed)
    net = PolicyNetwork(cfg.net)
    optimizer = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)
    gen = torch.Generator().manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed + 1)
    source = ScenarioSource(cfg, scenarios, static_map)
    factory = env_factory or (lambda: NavEnv(zone_model, reward_system))
    envs = [factory() for _ in range(cfg.n_envs)]
    current = [encode_observation(env.reset(source.next())[1]) for env in envs]
    ep_return = np.zeros(cfg.n_envs)
    ep_zone = np.zeros(cfg.n_envs)

    outcomes: list[str] = []
    returns: list[float] = []
    zone_terms: list[float] = []
    recent = deque(maxlen=cfg.window)
    rows: list[dict] = []
    log_file = open(log_path, "w") if log_path else None
    steps_per_env = cfg.rollout_length // cfg.n_envs
    steps = 0
    update = 0
    try:
        while steps < cfg.total_steps:
            buf_obs: list[list[EncodedObs]] = []
            buf_u = np.zeros((steps_per_env, cfg.n_envs, 2))
            buf_logp = np.zeros((steps_per_env, cfg.n_envs))
            buf_v = np.zeros((steps_per_env, cfg.n_envs))
            buf_r = np.zeros((steps_per_env, cfg.n_envs))
            buf_d = np.zeros((steps_per_env, cfg.n_envs))
            zone_sums = {"r_sz": 0.0, "r_dz": 0.0}
            net.eval()
            for t in range(steps_per_env):
                with torch.no_grad():
                    dist, value = net.distribution(collate(current))
                    u = torch.normal(dist.mean, dist.stddev, generator=gen)
                    logp = dist.log_prob(u).sum(-1)
                buf_obs.append(current)
                buf_u[t] = u.numpy()
                buf_logp[t] = logp.numpy()
                buf_v[t] = value.numpy()
                actions = squash(u)
                nxt = []
                for i, env in enumerate(envs):
                    res = env.step(actions[i])
                    r = res.reward.total
                    ep_return[i] += r
                    ep_zone[i] += res.reward.r_sz + res.reward.r_dz
                    zone_sums["r_sz"] += res.reward.r_sz
                    zone_sums["r_dz"] += res.reward.r_dz
                    obs_enc = encode_observation(res.observation)
                    if res.done:
                        if res.cause is Termination.TIMEOUT:
                            with torch.no_grad():
                                _, _, v_end = net(collate([obs_enc]))
                            r += cfg.gamma * float(v_end[0])
                        outcomes.append(res.cause.value)
                        returns.append(float(ep_return[i]))
                        zone_terms.append(float(ep_zone[i]))
                        recent.append((res.cause.value, float(ep_return[i])))
                        source.episode_finished(float(ep_return[i]))
                        ep_return[i] = 0.0
                        ep_zone[i] = 0.0
                        obs_enc = encode_observation(env.reset(source.next())[1])
                    buf_r[t, i] = r
                    buf_d[t, i] = float(res.done)
                    nxt.append(obs_enc)
                current = nxt
            steps += steps_per_env * cfg.n_envs

            with torch.no_grad():
                _, _, last_v = net(collate(current))
            adv, ret = compute_gae(buf_r, buf_v, buf_d, last_v.numpy(), cfg.gamma, cfg.gae_lambda)
            rollout = Rollout(
                obs=[o for step_obs in buf_obs for o in step_obs],
                actions_u=buf_u.reshape(-1, 2),
                log_prob=buf_logp.reshape(-1),
                advantages=adv.reshape(-1),
                returns=ret.reshape(-1),
            )
            stats = ppo_update(net, optimizer, rollout, cfg, rng)
            update += 1
            row = {
                "update": update,
                "steps": steps,
                "episodes": len(outcomes),
                "mean_reward": float(np.mean([r for _, r in recent])) if recent else None,
                "success_rate": float(np.mean([c == "goal" for c, _ in recent])) if recent else None,
                "collision_rate": float(np.mean([c == "collision" for c, _ in recent])) if recent else None,
                "stage": source.stage_index,
                **zone_sums,
                **stats,
            }
            rows.append(row)
            if log_file:
                log_file.write(json.dumps(row) + "\n")
                log_file.flush()
            if callback:
                callback(row)
            log.info("update %d steps %d success %s stage %d", update, steps, row["success_rate"], row["stage"])
    except Exception:
        if checkpoint_path:
            save_checkpoint(net, checkpoint_path, cfg, zone_model, reward_system)
        raise
    finally:
        if log_file:
            log_file.close()
    if checkpoint_path:
        save_checkpoint(net, checkpoint_path, cfg, zone_model, reward_system)
    return TrainingResult(net, rows, outcomes, returns, zone_terms)


def save_checkpoint(
    net: PolicyNetwork,
    path: str | Path,
    cfg: TrainerConfig | None = None,
    zone_model: ZoneModel = ZoneModel.STATIC,
    reward_system: RewardSystem = RewardSystem.STATIC_ZONE,
) -> None:
    torch.save(
        {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "net_config": asdict(net.config),
            "trainer_config": cfg.to_dict() if cfg else None,
            "zone_model": ZoneModel(zone_model).value,
            "reward_system": RewardSystem(reward_system).value,
            "state_dict": net.state_dict(),
        },
        path,
    )


def load_checkpoint(path: str | Path) -> tuple[PolicyNetwork, dict]:
    """Load a checkpoint, rejecting ones whose observation layout differs from ours."""
    try:
        ckpt = torch.load(path, map_location="cpu", weights_only=False)
    except (OSError, RuntimeError, EOFError, pickle.UnpicklingError) as exc:
        raise PolicyLoadError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(ckpt, dict) or ckpt.get("format") != CHECKPOINT_FORMAT:
        raise PolicyLoadError(f"{path} is not a policy checkpoint")
    if ckpt.get("version") != CHECKPOINT_VERSION:
        raise PolicyLoadError(f"unsupported checkpoint version {ckpt.get('version')!r}")
    nc = ckpt["net_config"]
    if nc["lidar_dim"] != N_BEAMS or nc["human_dim"] != HUMAN_FEATURES + ROBOT_FEATURES:
        raise PolicyLoadError(
            f"checkpoint expects lidar_dim={nc['lidar_dim']}, human_dim={nc['human_dim']}; "
            f"observations provide {N_BEAMS} and {HUMAN_FEATURES + ROBOT_FEATURES}"
        )
    net = PolicyNetwork(NetConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in nc.items()}))
    try:
        net.load_state_dict(ckpt["state_dict"])
    except RuntimeError as exc:
        raise PolicyLoadError(f"weights do not match the stored layout: {exc}") from exc
    return net, ckpt


def load_agent(path: str | Path) -> tuple[Agent, dict]:
    net, ckpt = load_checkpoint(path)
    return Agent(net, deterministic=True), ckpt
