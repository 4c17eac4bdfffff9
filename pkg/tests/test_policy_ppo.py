import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from semnav.errors import PolicyLoadError, TrainingFault
from semnav.policy import (
    ACTION_HIGH,
    ACTION_LOW,
    Agent,
    NetConfig,
    PolicyNetwork,
    collate,
    encode_observation,
    squash,
)
from semnav.ppo import (
    Rollout,
    TrainerConfig,
    compute_gae,
    load_checkpoint,
    ppo_losses,
    ppo_update,
    save_checkpoint,
    total_loss,
    train,
)
from semnav.scenario import PedestrianSpec, Scenario
from semnav.sensing import build_observation
from semnav.world import AgentClass, PedestrianState, RobotState, StaticMap, World
from semnav.zones import ZoneModel

SMALL = NetConfig(lstm_hidden=8, lidar_layers=(8, 8, 8), merge_layers=(8, 8))


def observation(n_humans, seed=0, zone=ZoneModel.STATIC):
    rng = np.random.default_rng(seed)
    peds = []
    for i in range(n_humans):
        ang = 2 * math.pi * i / max(n_humans, 1)
        d = rng.uniform(1.0, 3.5)
        peds.append(
            PedestrianState(i, AgentClass(i % 3), (8 + d * math.cos(ang), 7 + d * math.sin(ang)), tuple(rng.uniform(-0.5, 0.5, 2)), 0.0, ((8.0, 7.0),))
        )
    w = World(StaticMap(), RobotState(8.0, 7.0, rng.uniform(-3, 3), (15.0, 3.0), 0.3, 0.1), tuple(peds), time=float(rng.uniform(0, 30)))
    return build_observation(w, zone)


def test_zero_weights_give_zero_mean_and_value():
    net = PolicyNetwork()
    with torch.no_grad():
        for p in net.parameters():
            p.zero_()
    mean, _, value = net(collate([encode_observation(observation(4))]))
    assert torch.all(mean == 0) and torch.all(value == 0)


def test_shape_contract_empty_and_full():
    net = PolicyNetwork()
    outs = [net(collate([encode_observation(observation(n))])) for n in (0, 10)]
    for a, b in zip(*outs):
        assert a.shape == b.shape
        assert torch.isfinite(a).all() and torch.isfinite(b).all()
    assert outs[0][0].shape == (1, 2) and outs[0][2].shape == (1,)


def test_batch_padding_matches_single():
    net = PolicyNetwork()
    items = [encode_observation(observation(n, seed=n)) for n in (0, 3, 10)]
    m_all, _, v_all = net(collate(items))
    for i, e in enumerate(items):
        m, _, v = net(collate([e]))
        torch.testing.assert_close(m[0], m_all[i], atol=1e-5, rtol=0)
        torch.testing.assert_close(v[0], v_all[i], atol=1e-5, rtol=0)


def test_equal_distance_permutation_is_invariant():
    net = PolicyNetwork()
    robot = RobotState(5.0, 5.0, 0.0, (15.0, 10.0))
    a = PedestrianState(0, AgentClass.ELDER, (7.0, 5.0), (0.0, 0.0), 0.0, ((7.0, 5.0),))
    b = PedestrianState(1, AgentClass.ADULT, (5.0, 7.0), (0.0, 0.0), 0.0, ((5.0, 7.0),))
    outs = []
    for peds in ((a, b), (b, a)):
        obs = build_observation(World(StaticMap(), robot, peds))
        outs.append(net(collate([encode_observation(obs)])))
    for x, y in zip(*outs):
        assert torch.equal(x, y)


def test_non_finite_output_raises():
    net = PolicyNetwork()
    with torch.no_grad():
        net.actor_mean.bias[0] = float("nan")
    with pytest.raises(TrainingFault):
        net(collate([encode_observation(observation(2))]))


def test_heads_share_only_trunk():
    net = PolicyNetwork()
    actor = {id(p) for p in net.actor_mean.parameters()} | {id(net.actor_log_std)}
    critic = {id(p) for p in net.critic.parameters()}
    assert not actor & critic


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_squash_within_bounds(u0, u1):
    a = squash(np.array([u0, u1]))
    assert np.all(a >= ACTION_LOW) and np.all(a <= ACTION_HIGH)


def test_mean_action_deterministic():
    agent = Agent(PolicyNetwork(), deterministic=True)
    obs = observation(3)
    assert agent(obs) == agent(obs)


# loss terms


def batch_setup(n=6, seed=0, dtype=torch.float64, config=SMALL):
    torch.manual_seed(seed)
    net = PolicyNetwork(config).to(dtype)
    items = [encode_observation(observation(k % 4, seed=k)) for k in range(n)]
    batch = collate(items, dtype=dtype)
    g = torch.Generator().manual_seed(seed)
    actions = torch.randn(n, 2, generator=g, dtype=dtype)
    with torch.no_grad():
        dist, _ = net.distribution(batch)
        logp = dist.log_prob(actions).sum(-1)
    adv = torch.randn(n, generator=g, dtype=dtype)
    ret = torch.randn(n, generator=g, dtype=dtype)
    return net, batch, actions, logp, adv, ret


def test_ratio_identity_matches_vanilla_policy_gradient():
    net, batch, u, logp, adv, ret = batch_setup()
    losses = ppo_losses(net, batch, u, logp, adv, ret, 0.2)
    net.zero_grad()
    losses["policy"].backward()
    clipped = [p.grad.clone() if p.grad is not None else torch.zeros_like(p) for p in net.parameters()]

    net.zero_grad()
    dist, _ = net.distribution(batch)
    vanilla = -(torch.exp(dist.log_prob(u).sum(-1) - logp) * adv).mean()
    vanilla.backward()
    for a, p in zip(clipped, net.parameters()):
        b = p.grad if p.grad is not None else torch.zeros_like(p)
        torch.testing.assert_close(a, b, atol=1e-12, rtol=1e-10)


def test_zero_advantage_leaves_value_and_entropy():
    net, batch, u, logp, _, ret = batch_setup()
    losses = ppo_losses(net, batch, u, logp, torch.zeros(len(u), dtype=torch.float64), ret, 0.2)
    assert losses["policy"].item() == 0
    net.zero_grad()
    losses["policy"].backward()
    assert all(p.grad is None or torch.all(p.grad == 0) for p in net.parameters())


def finite_difference_check(net, loss_fn, n_coords=None, eps=1e-6, seed=0):
    """Largest relative error between autograd and central differences."""
    net.zero_grad()
    loss_fn().backward()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in net.parameters():
        analytic = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        flat = p.data.view(-1)
        idx = np.arange(flat.numel()) if n_coords is None else rng.choice(flat.numel(), min(n_coords, flat.numel()), replace=False)
        numeric = torch.zeros(len(idx), dtype=p.dtype)
        with torch.no_grad():
            for k, i in enumerate(idx):
                orig = flat[i].item()
                flat[i] = orig + eps
                up = loss_fn().item()
                flat[i] = orig - eps
                down = loss_fn().item()
                flat[i] = orig
                numeric[k] = (up - down) / (2 * eps)
        a = analytic.view(-1)[torch.as_tensor(idx)]
        scale = max(a.abs().max().item(), numeric.abs().max().item(), 1e-8)
        worst = max(worst, (a - numeric).abs().max().item() / scale)
    return worst


def loss_terms(seed=0, n=6):
    net, batch, u, logp, adv, ret = batch_setup(n=n, seed=seed)
    # shift old log-probs so some ratios sit well inside and some well outside the clip band
    shift = torch.tensor([0.0, 0.5, -0.5, 0.1, -0.35, 0.8][:n], dtype=torch.float64)
    old = logp + shift

    def term(name):
        return lambda: ppo_losses(net, batch, u, old, adv, ret, 0.2)[name]

    cfg = TrainerConfig()
    fns = {name: term(name) for name in ("policy", "value", "entropy")}
    fns["total"] = lambda: total_loss(ppo_losses(net, batch, u, old, adv, ret, 0.2), cfg)
    return net, fns


@pytest.mark.parametrize("name", ["policy", "value", "entropy", "total"])
def test_gradients_match_finite_differences(name):
    net, fns = loss_terms()
    assert finite_difference_check(net, fns[name], n_coords=40) < 1e-4


def test_single_transition_gradient():
    net, fns = loss_terms(seed=4, n=1)
    assert finite_difference_check(net, fns["total"], n_coords=40) < 1e-4


def test_gae_hand_computed():
    r = np.array([[1.0], [0.0], [2.0]])
    v = np.array([[0.5], [0.4], [0.3]])
    d = np.array([[0.0], [1.0], [0.0]])
    adv, ret = compute_gae(r, v, d, np.array([0.2]), 0.9, 0.8)
    d2 = 2.0 + 0.9 * 0.2 - 0.3
    d1 = 0.0 - 0.4
    d0 = 1.0 + 0.9 * 0.4 - 0.5
    expected = [d0 + 0.9 * 0.8 * d1, d1, d2]
    np.testing.assert_allclose(adv[:, 0], expected)
    np.testing.assert_allclose(ret, adv + v)


def test_kl_cap_stops_update():
    net = PolicyNetwork(SMALL)
    items = [encode_observation(observation(k % 3, seed=k)) for k in range(64)]
    rng = np.random.default_rng(0)
    roll = Rollout(items, rng.normal(size=(64, 2)) * 3, rng.normal(size=64) - 20, rng.normal(size=64), rng.normal(size=64))
    opt = torch.optim.Adam(net.parameters(), lr=1e-3)
    stats = ppo_update(net, opt, roll, TrainerConfig(minibatch_size=16, kl_hard_cap=1e-3), rng)
    assert stats["early_stop"]


# training loop


def tiny_config(**kw):
    base = dict(n_envs=1, rollout_length=128, minibatch_size=32, epochs=2, total_steps=384, seed=3, net=SMALL)
    base.update(kw)
    return TrainerConfig(**base)


def test_training_log_is_deterministic(tmp_path):
    a = train(tiny_config(n_pedestrians=2), log_path=tmp_path / "a.jsonl")
    b = train(tiny_config(n_pedestrians=2), log_path=tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert a.episode_returns == b.episode_returns
    for p, q in zip(a.net.parameters(), b.net.parameters()):
        assert torch.equal(p, q)


def test_static_zone_rewards_fire_with_pedestrians():
    # a resting elder 1 m from the start: the first steps lie inside its 1.5 m zone
    elder = PedestrianSpec(AgentClass.ELDER, (3.0, 8.5), ((3.0, 8.5),))
    crowd = [Scenario(StaticMap(), (3.0, 7.5, 0.0), (15.0, 7.5), (elder,))]
    res = train(tiny_config(mode="scenario", total_steps=1024, rollout_length=256), zone_model="static", reward_system="sz", scenarios=crowd)
    assert any(row["r_sz"] < 0 for row in res.log)
    assert all(row["r_dz"] == 0 for row in res.log)
    raw = train(tiny_config(mode="scenario", total_steps=1024, rollout_length=256), zone_model="static", reward_system="raw", scenarios=crowd)
    assert all(row["r_sz"] == 0 and row["r_dz"] == 0 for row in raw.log)


def test_staged_mode_logs_stage():
    res = train(tiny_config(mode="staged", window=2))
    assert all("stage" in row for row in res.log)


def test_checkpoint_round_trip(tmp_path):
    net = PolicyNetwork(SMALL)
    save_checkpoint(net, tmp_path / "p.pt", tiny_config())
    loaded, meta = load_checkpoint(tmp_path / "p.pt")
    for p, q in zip(net.parameters(), loaded.parameters()):
        assert torch.equal(p, q)
    assert meta["trainer_config"]["n_envs"] == 1


def test_checkpoint_layout_mismatch(tmp_path):
    save_checkpoint(PolicyNetwork(NetConfig(lidar_dim=180)), tmp_path / "p.pt")
    with pytest.raises(PolicyLoadError):
        load_checkpoint(tmp_path / "p.pt")
    (tmp_path / "junk.pt").write_bytes(b"not a checkpoint")
    with pytest.raises(PolicyLoadError):
        load_checkpoint(tmp_path / "junk.pt")
