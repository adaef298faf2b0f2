"""Reduced mechanistic greenhouse crop simulator and synthetic contexts.

Daily recurrence over (leaf, fruit, stem mass, temperature sum): light
interception through the canopy, CO2 and temperature limitation of
assimilation, maintenance respiration, and a temperature-sum driven shift of
partitioning toward fruit. Observations are cumulative fruit dry mass
(kg m^-2) sampled biweekly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from typing import Mapping, Sequence

import numpy as np

from .space import SpaceSpec, StateKey, load_space_file

SIM_PARAM_NAMES = (
    "LAI_max", "SLA", "n_plants",
    "P_max", "alpha_light", "co2_half",
    "T_opt", "T_width", "s_sharp",
    "TS_start", "TS_end", "dev_rate",
    "rg_fruit", "c_maint", "Q10",
)

# One non-identity action per group; the hidden ground truth used to
# synthesize observations is the baseline shifted by this key so that it is
# reachable inside the 1-cycle space.
DEFAULT_TRUTH_KEY: StateKey = (2, 1, 3, 1, 4)

# Initial crop state: leaf, stem, fruit dry mass (kg m^-2), temperature sum.
_W_LEAF0, _W_STEM0, _W_FRUIT0 = 0.05, 0.02, 0.0


def builtin_space() -> SpaceSpec:
    path = resources.files("gfnadapt").joinpath("data/greenhouse_space_v1.yaml")
    with resources.as_file(path) as p:
        return load_space_file(p)


@dataclass(frozen=True)
class ContextDataset:
    """One observational context: climate forcing plus dry-mass observations."""

    context_id: int
    days: int
    t_day: np.ndarray     # daytime temperature, degC
    t_24: np.ndarray      # 24h mean temperature, degC
    light: np.ndarray     # daily light integral, mol m^-2 d^-1
    co2: np.ndarray       # ppm
    obs_times: np.ndarray  # 1-based day indices, strictly increasing
    obs_values: np.ndarray  # cumulative fruit dry mass at obs_times

    def __post_init__(self):
        for arr in (self.t_day, self.t_24, self.light, self.co2):
            if len(arr) != self.days:
                raise ValueError("forcing length must equal days")
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite forcing value")
        if np.any(np.diff(self.obs_times) <= 0) or (
            len(self.obs_times) and self.obs_times[-1] > self.days
        ):
            raise ValueError("obs_times must be strictly increasing and <= days")
        if np.any(self.obs_values < 0) or np.any(np.diff(self.obs_values) < 0):
            raise ValueError("obs_values must be non-negative and non-decreasing")


def _inhibition(t: float, t_opt: float, t_width: float, s_sharp: float) -> float:
    lo = 1.0 / (1.0 + math.exp(-s_sharp * (t - (t_opt - t_width))))
    hi = 1.0 / (1.0 + math.exp(s_sharp * (t - (t_opt + t_width))))
    return lo * hi


def simulate(params: Mapping[str, float], context: ContextDataset) -> np.ndarray:
    """Cumulative fruit dry mass sampled at the context's obs_times."""
    missing = [n for n in SIM_PARAM_NAMES if n not in params]
    if missing:
        raise ValueError(f"missing simulator parameters: {missing}")

    lai_max = params["LAI_max"]
    sla = params["SLA"]
    n_plants = params["n_plants"]
    p_max = params["P_max"]
    alpha = params["alpha_light"]
    co2_half = params["co2_half"]
    t_opt = params["T_opt"]
    t_width = params["T_width"]
    s_sharp = params["s_sharp"]
    ts_start = params["TS_start"]
    ts_end = params["TS_end"]
    dev_rate = params["dev_rate"]
    rg_fruit = params["rg_fruit"]
    c_maint = params["c_maint"]
    q10 = params["Q10"]

    t_day = context.t_day
    t_24 = context.t_24
    light = context.light
    co2 = context.co2

    w_l, w_s, w_f = _W_LEAF0, _W_STEM0, _W_FRUIT0
    ts = 0.0
    fruit = np.empty(context.days)
    for d in range(context.days):
        lai = min(lai_max, sla * n_plants * w_l)
        f_light = 1.0 - math.exp(-0.7 * lai)
        f_co2 = co2[d] / (co2[d] + co2_half)
        h = _inhibition(t_day[d], t_opt, t_width, s_sharp) * _inhibition(
            t_24[d], t_opt, t_width, s_sharp
        )
        assim = p_max * (1.0 - math.exp(-alpha * light[d] / p_max)) * f_light * f_co2 * h
        maint = c_maint * (w_f + w_l + w_s) * q10 ** ((t_24[d] - 25.0) / 10.0)
        ts += dev_rate * max(0.0, t_24[d] - 10.0)
        if ts < ts_start:
            p_f = 0.0
        elif ts < ts_end:
            p_f = rg_fruit * (ts - ts_start) / (ts_end - ts_start)
        else:
            p_f = rg_fruit
        net = max(0.0, assim - maint)
        w_f += p_f * net
        w_l += 0.7 * (1.0 - p_f) * net
        w_s += 0.3 * (1.0 - p_f) * net
        fruit[d] = w_f
    return fruit[context.obs_times - 1]


# Regime table: (T24 mean, T24 seasonal amplitude, day/night split, light
# base, light amplitude, CO2 level). Chosen so the six compartments differ
# in mean temperature or mean CO2.
_REGIMES = (
    (19.0, 2.0, 4.0, 25.0, 10.0, 420.0),
    (21.0, 1.5, 5.0, 28.0, 8.0, 420.0),
    (23.0, 1.0, 6.0, 30.0, 6.0, 600.0),
    (20.0, 2.5, 4.5, 22.0, 12.0, 800.0),
    (22.0, 2.0, 5.5, 26.0, 9.0, 1000.0),
    (18.0, 3.0, 3.5, 32.0, 11.0, 600.0),
)


def generate_contexts(seed: int, days: int = 180) -> list[ContextDataset]:
    """Six synthetic climate regimes with biweekly observation times."""
    rng = np.random.default_rng(seed)
    obs_times = np.arange(14, days + 1, 14)
    season = np.sin(np.linspace(0.0, np.pi, days))
    contexts = []
    for cid, (t_mean, t_amp, split, i_base, i_amp, co2_level) in enumerate(
        _REGIMES, start=1
    ):
        t_24 = t_mean + t_amp * season + rng.normal(0.0, 0.6, days)
        t_day = t_24 + split + rng.normal(0.0, 0.4, days)
        light = np.clip(i_base + i_amp * season + rng.normal(0.0, 2.0, days), 1.0, None)
        co2 = np.clip(co2_level + rng.normal(0.0, 20.0, days), 250.0, None)
        contexts.append(
            ContextDataset(
                context_id=cid,
                days=days,
                t_day=t_day,
                t_24=t_24,
                light=light,
                co2=co2,
                obs_times=obs_times,
                obs_values=np.zeros(len(obs_times)),
            )
        )
    return contexts


def synthesize_observations(
    contexts: Sequence[ContextDataset],
    truth: Mapping[str, float],
    noise_rel: float,
    seed: int,
) -> list[ContextDataset]:
    """Replace obs_values with the truth trajectory under multiplicative noise."""
    if noise_rel < 0:
        raise ValueError("noise_rel must be >= 0")
    rng = np.random.default_rng(seed)
    out = []
    for ctx in contexts:
        traj = simulate(truth, ctx)
        noisy = traj * (1.0 + noise_rel * rng.standard_normal(len(traj)))
        noisy = np.maximum.accumulate(np.clip(noisy, 0.0, None))
        out.append(replace(ctx, obs_values=noisy))
    return out


# ---------------------------------------------------------------------------
# Context import/export so external simulators or real datasets can be
# substituted behind the same interface.


def contexts_to_json(contexts: Sequence[ContextDataset], path) -> None:
    records = [
        {
            "context_id": c.context_id,
            "days": c.days,
            "t_day": c.t_day.tolist(),
            "t_24": c.t_24.tolist(),
            "light": c.light.tolist(),
            "co2": c.co2.tolist(),
            "obs_times": c.obs_times.tolist(),
            "obs_values": c.obs_values.tolist(),
        }
        for c in contexts
    ]
    with open(path, "w") as fh:
        json.dump(records, fh)


def contexts_from_json(path) -> list[ContextDataset]:
    with open(path) as fh:
        records = json.load(fh)
    return [
        ContextDataset(
            context_id=r["context_id"],
            days=r["days"],
            t_day=np.asarray(r["t_day"], dtype=float),
            t_24=np.asarray(r["t_24"], dtype=float),
            light=np.asarray(r["light"], dtype=float),
            co2=np.asarray(r["co2"], dtype=float),
            obs_times=np.asarray(r["obs_times"], dtype=int),
            obs_values=np.asarray(r["obs_values"], dtype=float),
        )
        for r in records
    ]
