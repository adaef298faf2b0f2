"""Contextual losses, quantile normalization, tail-risk aggregation, reward.

The scoring path for one terminal state is: decode -> simulate each context
-> normalized-residual loss per context -> quantile normalization -> blend
of mean and worst-K tail -> Boltzmann reward exp(-beta * loss). Results are
memoized in the persistent reward cache.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cache import LossRecord, RewardCache
from .simulator import ContextDataset, simulate
from .space import SpaceSpec, StateKey, decode_state, enumerate_terminals

EPS_RESIDUAL = 1e-6   # guard in the normalized-residual denominator
EPS_QUANTILE = 1e-8   # guard in the quantile-normalization denominator


@dataclass(frozen=True)
class RewardConfig:
    beta: float = 4.0
    lam: float = 0.25
    k_tail: int = 2
    lo_level: float = 0.05
    hi_level: float = 0.95
    warmup: int = 256  # quantile-fitting sample size in non-enumerable mode

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if not 0.0 < self.lo_level < self.hi_level < 1.0:
            raise ValueError("quantile levels must satisfy 0 < lo < hi < 1")


@dataclass(frozen=True)
class QuantileTable:
    q_lo: np.ndarray
    q_hi: np.ndarray
    lo_level: float
    hi_level: float
    eps: float = EPS_QUANTILE

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(
                {
                    "q_lo": self.q_lo.tolist(),
                    "q_hi": self.q_hi.tolist(),
                    "lo_level": self.lo_level,
                    "hi_level": self.hi_level,
                    "eps": self.eps,
                },
                fh,
                indent=2,
            )

    @classmethod
    def from_json(cls, path) -> "QuantileTable":
        with open(path) as fh:
            doc = json.load(fh)
        return cls(
            q_lo=np.asarray(doc["q_lo"], dtype=float),
            q_hi=np.asarray(doc["q_hi"], dtype=float),
            lo_level=doc["lo_level"],
            hi_level=doc["hi_level"],
            eps=doc["eps"],
        )


def context_loss(sim: np.ndarray, obs: np.ndarray) -> float:
    """Mean normalized absolute residual between trajectories."""
    sim = np.asarray(sim, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if sim.shape != obs.shape:
        raise ValueError(f"length mismatch: {sim.shape} vs {obs.shape}")
    if not (np.all(np.isfinite(sim)) and np.all(np.isfinite(obs))):
        raise ValueError("non-finite trajectory value")
    return float(np.mean(np.abs(sim - obs) / (np.abs(obs) + EPS_RESIDUAL)))


def fit_quantiles(
    losses_per_context: Sequence[np.ndarray],
    lo_level: float,
    hi_level: float,
) -> QuantileTable:
    """Per-context empirical quantiles by linear interpolation."""
    if not 0.0 < lo_level < hi_level < 1.0:
        raise ValueError("quantile levels must satisfy 0 < lo < hi < 1")
    q_lo, q_hi = [], []
    for sample in losses_per_context:
        sample = np.asarray(sample, dtype=float)
        if sample.size == 0:
            raise ValueError("empty loss sample")
        q_lo.append(float(np.quantile(sample, lo_level)))
        q_hi.append(float(np.quantile(sample, hi_level)))
    return QuantileTable(np.array(q_lo), np.array(q_hi), lo_level, hi_level)


def normalize(raw: np.ndarray, q: QuantileTable) -> np.ndarray:
    """Affine quantile normalization; deliberately not clamped to [0, 1]."""
    return (np.asarray(raw, dtype=float) - q.q_lo) / (q.q_hi - q.q_lo + q.eps)


def aggregate(normalized: np.ndarray, lam: float, k: int) -> float:
    """Blend of the mean loss and the mean over the K worst contexts."""
    normalized = np.asarray(normalized, dtype=float)
    c = len(normalized)
    if not 1 <= k <= c:
        raise ValueError(f"K={k} out of range [1, {c}]")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    # summing in sorted order keeps the result exactly permutation invariant
    ordered = np.sort(normalized)[::-1]
    tail = float(np.mean(ordered[:k]))
    return float((1.0 - lam) * np.mean(ordered) + lam * tail)


def reward(aggregate_loss: float, beta: float) -> float:
    if beta <= 0:
        raise ValueError("beta must be > 0")
    return float(np.exp(-beta * aggregate_loss))


class SimulatorError(RuntimeError):
    def __init__(self, context_id: int, cause: Exception):
        super().__init__(f"simulator failed on context {context_id}: {cause}")
        self.context_id = context_id


class TerminalScorer:
    """Cache-backed scoring of terminal states against all contexts.

    Quantiles must be fitted (fit_on_enumeration / fit_on_warmup, or an
    externally supplied table) before score() is called. Raw context losses
    are memoized separately so the quantile-fitting pass is not repeated.
    """

    def __init__(
        self,
        space: SpaceSpec,
        contexts: Sequence[ContextDataset],
        config: RewardConfig = RewardConfig(),
        cache: RewardCache | None = None,
        quantiles: QuantileTable | None = None,
    ):
        self.space = space
        self.contexts = list(contexts)
        self.config = config
        self.cache = cache
        self.quantiles = quantiles
        self.sim_evals = 0          # simulator invocations (one per context)
        self.unique_scored = 0      # distinct keys that required simulation
        self._raw_memo: dict[StateKey, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def n_contexts(self) -> int:
        return len(self.contexts)

    def raw_losses(self, key: StateKey) -> np.ndarray:
        with self._lock:
            hit = self._raw_memo.get(key)
        if hit is not None:
            return hit
        params = decode_state(self.space, key)
        raw = np.empty(self.n_contexts)
        for i, ctx in enumerate(self.contexts):
            try:
                sim = simulate(params, ctx)
            except Exception as exc:
                raise SimulatorError(ctx.context_id, exc) from exc
            raw[i] = context_loss(sim, ctx.obs_values)
        with self._lock:
            if key not in self._raw_memo:
                self._raw_memo[key] = raw
                self.sim_evals += self.n_contexts
                self.unique_scored += 1
        return raw

    def fit_on_enumeration(self) -> QuantileTable:
        """Fit quantiles on the raw losses of every terminal state."""
        table = np.array([self.raw_losses(k) for k in enumerate_terminals(self.space)])
        self.quantiles = fit_quantiles(
            list(table.T), self.config.lo_level, self.config.hi_level
        )
        return self.quantiles

    def fit_on_warmup(self, rng: np.random.Generator) -> QuantileTable:
        """Fit quantiles on uniformly random terminals, then freeze."""
        radices = self.space.slot_radices
        keys = {
            tuple(int(rng.integers(r)) for r in radices)
            for _ in range(self.config.warmup)
        }
        table = np.array([self.raw_losses(k) for k in sorted(keys)])
        self.quantiles = fit_quantiles(
            list(table.T), self.config.lo_level, self.config.hi_level
        )
        return self.quantiles

    def score(self, key: StateKey) -> LossRecord:
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        if self.quantiles is None:
            raise RuntimeError("quantile table not fitted")
        raw = self.raw_losses(key)
        norm = normalize(raw, self.quantiles)
        agg = aggregate(norm, self.config.lam, self.config.k_tail)
        record = LossRecord(
            key=key, raw=raw, normalized=norm, aggregate=agg,
            reward=reward(agg, self.config.beta),
        )
        if self.cache is not None:
            record = self.cache.put(record)
        return record
