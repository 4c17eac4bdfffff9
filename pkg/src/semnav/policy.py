"""Actor-critic network: recurrent human encoder, lidar MLP, shared merge trunk."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .errors import TrainingFault
from .sensing import N_BEAMS, Observation
from .world import V_ANGULAR_MAX, V_LINEAR_MAX

LENGTH_SCALE = 10.0
HUMAN_FEATURES = 9  # 6 metric terms + one-hot class
ROBOT_FEATURES = 6
ACTION_LOW = np.array([0.0, -V_ANGULAR_MAX])
ACTION_HIGH = np.array([V_LINEAR_MAX, V_ANGULAR_MAX])


@dataclass(frozen=True)
class NetConfig:
    lidar_dim: int = N_BEAMS
    human_dim: int = HUMAN_FEATURES + ROBOT_FEATURES
    lstm_hidden: int = 64
    lidar_layers: tuple[int, ...] = (128, 64, 64)
    merge_layers: tuple[int, ...] = (128, 128)
    init_log_std: float = -0.5


@dataclass
class ObsBatch:
    lidar: torch.Tensor  # (B, n_beams)
    humans: torch.Tensor  # (B, T, human_dim), left-padded
    mask: torch.Tensor  # (B, T), 1 for real entries
    goal: torch.Tensor  # (B, 2)
    time: torch.Tensor  # (B, 1)

    def __len__(self) -> int:
        return self.lidar.shape[0]


@dataclass
class EncodedObs:
    """Normalised numpy view of one observation, cheap to store in a rollout."""

    lidar: np.ndarray
    humans: np.ndarray  # (n, human_dim), farthest first
    goal: np.ndarray
    time: float


def encode_observation(obs: Observation) -> EncodedObs:
    lidar = np.asarray(obs.lidar.ranges, dtype=np.float64) / obs.lidar.max_range
    r = obs.robot
    robot = [
        r.d_ag / LENGTH_SCALE,
        r.px / LENGTH_SCALE,
        r.py / LENGTH_SCALE,
        r.v_linear / V_LINEAR_MAX,
        r.v_angular / V_ANGULAR_MAX,
        r.r_a / LENGTH_SCALE,
    ]
    rows = []
    for h in obs.humans:
        onehot = [0.0, 0.0, 0.0]
        onehot[h.class_id] = 1.0
        metric = [h.px, h.py, h.r_h, h.d_ah, h.r_z, h.clearance]
        rows.append([m / LENGTH_SCALE for m in metric] + onehot + robot)
    humans = np.array(rows, dtype=np.float64).reshape(len(rows), HUMAN_FEATURES + ROBOT_FEATURES)
    goal = np.array(obs.goal_in_robot_frame, dtype=np.float64) / LENGTH_SCALE
    return EncodedObs(lidar, humans, goal, float(obs.time))


def collate(items: Sequence[EncodedObs], dtype=torch.float32) -> ObsBatch:
    b = len(items)
    t = max((len(e.humans) for e in items), default=0)
    dim = items[0].humans.shape[1] if items else HUMAN_FEATURES + ROBOT_FEATURES
    humans = np.zeros((b, t, dim))
    mask = np.zeros((b, t))
    for i, e in enumerate(items):
        n = len(e.humans)
        if n:
            humans[i, t - n :] = e.humans
            mask[i, t - n :] = 1.0
    return ObsBatch(
        lidar=torch.as_tensor(np.stack([e.lidar for e in items]), dtype=dtype),
        humans=torch.as_tensor(humans, dtype=dtype),
        mask=torch.as_tensor(mask, dtype=dtype),
        goal=torch.as_tensor(np.stack([e.goal for e in items]), dtype=dtype),
        time=torch.as_tensor([[e.time] for e in items], dtype=dtype),
    )


def _mlp(sizes: Sequence[int]) -> nn.Sequential:
    layers: list[nn.Module] = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        layers += [nn.Linear(a, b), nn.Tanh()]
    return nn.Sequential(*layers)


class PolicyNetwork(nn.Module):
    """Gaussian actor and scalar critic on a shared trunk.

    Human states run through an LSTM cell farthest-first; padded steps keep the
    state unchanged, so an empty list yields the zero initial state.
    """

    def __init__(self, config: NetConfig = NetConfig()):
        super().__init__()
        self.config = config
        self.encoder = nn.LSTMCell(config.human_dim, config.lstm_hidden)
        self.lidar_net = _mlp((config.lidar_dim, *config.lidar_layers))
        merge_in = config.lstm_hidden + config.lidar_layers[-1] + 3
        self.trunk = _mlp((merge_in, *config.merge_layers))
        self.actor_mean = nn.Linear(config.merge_layers[-1], 2)
        self.actor_log_std = nn.Parameter(torch.full((2,), float(config.init_log_std)))
        self.critic = nn.Linear(config.merge_layers[-1], 1)
        self._init_weights()

    def _init_weights(self) -> None:
        # orthogonal init; a small actor gain keeps the initial mean action near zero
        for module in (*self.lidar_net, *self.trunk):
            if isinstance(module, nn.Linear):
                nn.init.orthogonal_(module.weight, math.sqrt(2))
                nn.init.zeros_(module.bias)
        nn.init.orthogonal_(self.actor_mean.weight, 0.01)
        nn.init.zeros_(self.actor_mean.bias)
        nn.init.orthogonal_(self.critic.weight, 1.0)
        nn.init.zeros_(self.critic.bias)

    def encode_humans(self, humans: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        b = humans.shape[0]
        h = humans.new_zeros(b, self.config.lstm_hidden)
        c = humans.new_zeros(b, self.config.lstm_hidden)
        for t in range(humans.shape[1]):
            m = mask[:, t : t + 1]
            h_new, c_new = self.encoder(humans[:, t], (h, c))
            h = m * h_new + (1 - m) * h
            c = m * c_new + (1 - m) * c
        return h

    def forward(self, batch: ObsBatch) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Return (action mean, log std, value) for the pre-squash Gaussian."""
        hum = self.encode_humans(batch.humans, batch.mask)
        lid = self.lidar_net(batch.lidar)
        x = self.trunk(torch.cat([hum, lid, batch.goal, batch.time], dim=-1))
        mean = self.actor_mean(x)
        log_std = self.actor_log_std.expand_as(mean)
        value = self.critic(x).squeeze(-1)
        if not (torch.isfinite(mean).all() and torch.isfinite(value).all()):
            raise TrainingFault(
                f"non-finite network output (mean finite={bool(torch.isfinite(mean).all())}, "
                f"value finite={bool(torch.isfinite(value).all())})"
            )
        return mean, log_std, value

    def distribution(self, batch: ObsBatch) -> tuple[torch.distributions.Normal, torch.Tensor]:
        mean, log_std, value = self(batch)
        return torch.distributions.Normal(mean, log_std.exp()), value


def squash(u: np.ndarray | torch.Tensor) -> np.ndarray:
    """Map an unbounded Gaussian sample onto the action box.

    Both components go through ``tanh`` scaled by their bound; the linear
    speed is then clipped at zero, so stopping exactly (and turning on the
    spot) is reachable with finite samples.
    """
    u = u.detach().cpu().numpy() if isinstance(u, torch.Tensor) else np.asarray(u)
    a = np.tanh(u.astype(np.float64)) * ACTION_HIGH
    return np.clip(a, ACTION_LOW, ACTION_HIGH)


class Agent:
    """Callable wrapper used for evaluation: observation -> action."""

    def __init__(self, net: PolicyNetwork, deterministic: bool = True, generator: torch.Generator | None = None):
        self.net = net.eval()
        self.deterministic = deterministic
        self.generator = generator

    def reseed(self, seed: int) -> None:
        if not self.deterministic:
            self.generator = torch.Generator().manual_seed(seed)

    @torch.no_grad()
    def __call__(self, obs: Observation) -> tuple[float, float]:
        dist, _ = self.net.distribution(collate([encode_observation(obs)]))
        u = dist.mean if self.deterministic else torch.normal(dist.mean, dist.stddev, generator=self.generator)
        a = squash(u[0])
        return float(a[0]), float(a[1])


class GoalSeekingPolicy:
    """Hand-written baseline: turn toward the goal, drive when roughly aligned."""

    def __init__(self, align_tol: float = math.pi / 4):
        self.align_tol = align_tol

    def __call__(self, obs: Observation) -> tuple[float, float]:
        gx, gy = obs.goal_in_robot_frame
        bearing = math.atan2(gy, gx)
        w = float(np.clip(bearing / 0.1, -V_ANGULAR_MAX, V_ANGULAR_MAX))
        dist = math.hypot(gx, gy)
        v = V_LINEAR_MAX if abs(bearing) < self.align_tol else 0.0
        v = min(v, dist / 0.1) if dist > 0 else 0.0
        return v, w
