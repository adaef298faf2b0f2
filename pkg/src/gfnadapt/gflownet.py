"""Forward-policy training with the trajectory balance objective.

Because the construction graph is a tree, every terminal state has a unique
trajectory and the backward policy is deterministic (log P_B = 0), so the
squared residual is (log_z + log P_F(tau) - log R(x))^2. The policy is a
shared MLP trunk with one logit head per decision slot; gradients are
computed in-module (see nn.py).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .nn import Adam, Gradients, PolicyNet
from .rewards import TerminalScorer
from .space import SpaceSpec, StateKey, enumerate_terminals

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrajectoryRecord:
    key: StateKey
    step_logps: np.ndarray  # chosen-action log-probs under the pure policy
    log_reward: float
    tb_residual: float


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 1000
    batch: int = 16
    lr: float = 5e-4
    log_z_lr: float = 0.1
    hidden: tuple[int, ...] = (256, 256, 256)
    explore_eps: float = 0.05  # decayed linearly to 0 over the first half
    budget: int | None = None  # unique-simulation cap; None = unlimited
    distribution_cap: int = 100_000


def feature_dim(space: SpaceSpec) -> int:
    return sum(r + 1 for r in space.slot_radices) + space.slots


def encode_state(space: SpaceSpec, key: StateKey) -> np.ndarray:
    """One-hot of each slot's choice (with an undecided category) plus a
    one-hot of the current decision slot."""
    if len(key) >= space.slots:
        raise ValueError("terminal key has no action to choose")
    return encode_batch(space, [key])[0]


def encode_batch(space: SpaceSpec, keys: list[StateKey]) -> np.ndarray:
    radices = space.slot_radices
    offsets = np.cumsum([0] + [r + 1 for r in radices])
    slot_base = offsets[-1]
    out = np.zeros((len(keys), slot_base + space.slots))
    for i, key in enumerate(keys):
        for t in range(space.slots):
            if t < len(key):
                out[i, offsets[t] + 1 + key[t]] = 1.0
            else:
                out[i, offsets[t]] = 1.0  # undecided
        out[i, slot_base + len(key)] = 1.0
    return out


def new_policy(space: SpaceSpec, cfg: TrainConfig, rng: np.random.Generator) -> PolicyNet:
    return PolicyNet.init(
        feature_dim(space), list(space.slot_radices), hidden=cfg.hidden, rng=rng
    )


def forward_policy(net: PolicyNet, features: np.ndarray, slot: int) -> np.ndarray:
    """Action log-probabilities for one slot; accepts a vector or a batch."""
    single = features.ndim == 1
    x = features[None, :] if single else features
    logp = net.log_probs(x, slot)
    return logp[0] if single else logp


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _rollout(
    net: PolicyNet,
    space: SpaceSpec,
    n: int,
    rng: np.random.Generator,
    explore_eps: float,
    keep_caches: bool = False,
):
    """Sample n trajectories in lockstep; actions drawn from the eps-mixed
    policy, log-probs recorded under the pure policy."""
    keys: list[StateKey] = [() for _ in range(n)]
    step_logps = np.zeros((n, space.slots))
    caches = []
    for t in range(space.slots):
        feats = encode_batch(space, keys)
        acts = net.trunk_forward(feats)
        logits = net.logits(acts[-1], t)
        logp = _log_softmax(logits)
        probs = np.exp(logp)
        n_actions = probs.shape[1]
        mixed = (1.0 - explore_eps) * probs + explore_eps / n_actions
        u = rng.random((n, 1))
        chosen = (mixed.cumsum(axis=1) < u).sum(axis=1).clip(max=n_actions - 1)
        step_logps[:, t] = logp[np.arange(n), chosen]
        keys = [k + (int(a),) for k, a in zip(keys, chosen)]
        if keep_caches:
            caches.append((acts, probs, chosen))
    return keys, step_logps, caches


def sample_trajectory(
    net: PolicyNet,
    space: SpaceSpec,
    scorer: TerminalScorer,
    rng: np.random.Generator,
    explore_eps: float = 0.0,
) -> TrajectoryRecord:
    return sample_trajectories(net, space, scorer, rng, 1, explore_eps)[0]


def sample_trajectories(
    net: PolicyNet,
    space: SpaceSpec,
    scorer: TerminalScorer,
    rng: np.random.Generator,
    n: int,
    explore_eps: float = 0.0,
) -> list[TrajectoryRecord]:
    if not 0.0 <= explore_eps < 1.0:
        raise ValueError("explore_eps must be in [0, 1)")
    keys, step_logps, _ = _rollout(net, space, n, rng, explore_eps)
    records = []
    for i, key in enumerate(keys):
        log_r = float(np.log(scorer.score(key).reward))
        logps = step_logps[i].copy()
        records.append(
            TrajectoryRecord(
                key=key,
                step_logps=logps,
                log_reward=log_r,
                tb_residual=float(net.log_z + logps.sum() - log_r),
            )
        )
    return records


def tb_loss(net: PolicyNet, batch: list[TrajectoryRecord]) -> float:
    if not batch:
        raise ValueError("empty batch")
    res = np.array(
        [net.log_z + rec.step_logps.sum() - rec.log_reward for rec in batch]
    )
    if not np.all(np.isfinite(res)):
        raise ValueError("non-finite log_reward in batch")
    return float(np.mean(res**2))


def tb_loss_and_grads(
    net: PolicyNet,
    space: SpaceSpec,
    keys: list[StateKey],
    log_rewards: np.ndarray,
) -> tuple[float, Gradients]:
    """Recompute the TB objective on given terminal keys and backpropagate."""
    n = len(keys)
    sum_logp = np.zeros(n)
    slot_caches = []
    for t in range(space.slots):
        prefixes = [k[:t] for k in keys]
        feats = encode_batch(space, prefixes)
        acts = net.trunk_forward(feats)
        logits = net.logits(acts[-1], t)
        logp = _log_softmax(logits)
        chosen = np.array([k[t] for k in keys])
        sum_logp += logp[np.arange(n), chosen]
        slot_caches.append((acts, np.exp(logp), chosen))
    residual = net.log_z + sum_logp - log_rewards
    loss = float(np.mean(residual**2))
    grads = Gradients.zeros_like(net)
    dlogp = 2.0 * residual / n  # d loss / d (chosen log-prob), per trajectory
    for t, (acts, probs, chosen) in enumerate(slot_caches):
        dlogits = -probs * dlogp[:, None]
        dlogits[np.arange(n), chosen] += dlogp
        net.backward_slot(acts, t, dlogits, grads)
    grads.log_z = float(np.mean(2.0 * residual))
    return loss, grads


@dataclass
class TrainResult:
    net: PolicyNet
    log_rows: list[tuple[int, float, float, int]] = field(default_factory=list)
    evaluated: list[tuple[StateKey, float]] = field(default_factory=list)
    stopped_early: bool = False


def train(
    space: SpaceSpec,
    scorer: TerminalScorer,
    cfg: TrainConfig,
    seed: int,
) -> TrainResult:
    """Trajectory-balance training loop with an eps-mixed sampler."""
    rng = np.random.default_rng(seed)
    net = new_policy(space, cfg, rng)
    opt = Adam(lr=cfg.lr, log_z_lr=cfg.log_z_lr)
    seen: set[StateKey] = set()
    rows = []
    evaluated: list[tuple[StateKey, float]] = []
    stopped = False
    half = max(1, cfg.steps // 2)
    for step in range(1, cfg.steps + 1):
        eps = cfg.explore_eps * max(0.0, 1.0 - (step - 1) / half)
        keys, _, _ = _rollout(net, space, cfg.batch, rng, eps)
        records = [scorer.score(k) for k in keys]
        log_rewards = np.log([rec.reward for rec in records])
        evaluated.extend((k, rec.aggregate) for k, rec in zip(keys, records))
        seen.update(keys)
        loss, grads = tb_loss_and_grads(net, space, keys, log_rewards)
        if not np.isfinite(loss):
            raise RuntimeError(f"trajectory balance loss diverged at step {step}")
        opt.step(net, grads)
        rows.append((step, loss, net.log_z, len(seen)))
        if cfg.budget is not None and scorer.unique_scored >= cfg.budget:
            stopped = True
            break
    return TrainResult(net=net, log_rows=rows, evaluated=evaluated, stopped_early=stopped)


def exact_terminal_distribution(
    net: PolicyNet, space: SpaceSpec, cap: int = 100_000
) -> np.ndarray:
    """Terminal probabilities in lexicographic enumeration order."""
    count = space.terminal_count()
    if count > cap:
        raise ValueError(f"space has {count} terminals, exceeding cap {cap}")
    prefixes: list[StateKey] = [()]
    logps = np.zeros(1)
    for t in range(space.slots):
        feats = encode_batch(space, prefixes)
        logp = net.log_probs(feats, t)
        r = logp.shape[1]
        logps = (logps[:, None] + logp).ravel()
        prefixes = [p + (a,) for p in prefixes for a in range(r)]
    return np.exp(logps)


def sample_terminals(
    net: PolicyNet, space: SpaceSpec, n: int, rng: np.random.Generator
) -> list[StateKey]:
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return []
    keys, _, _ = _rollout(net, space, n, rng, explore_eps=0.0)
    return keys


# ---------------------------------------------------------------------------
# Checkpoints: length-prefixed JSON header followed by raw float64 arrays in
# a fixed order. Deterministic bytes for identical models.


def save_checkpoint(path, net: PolicyNet, rng_state: dict | None = None) -> None:
    header = {
        "version": CHECKPOINT_VERSION,
        "trunk_dims": [list(w.shape) for w in net.trunk_w],
        "head_dims": [list(w.shape) for w in net.head_w],
        "log_z": net.log_z,
        "rng_state": rng_state,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in net.params():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[PolicyNet, dict | None]:
    with open(path, "rb") as fh:
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")

        def read(shape):
            n = int(np.prod(shape))
            return np.frombuffer(fh.read(8 * n), dtype="<f8").reshape(shape).copy()

        trunk_w = [read(s) for s in header["trunk_dims"]]
        trunk_b = [read([s[1]]) for s in header["trunk_dims"]]
        head_w = [read(s) for s in header["head_dims"]]
        head_b = [read([s[1]]) for s in header["head_dims"]]
    net = PolicyNet(trunk_w, trunk_b, head_w, head_b, log_z=header["log_z"])
    return net, header.get("rng_state")
