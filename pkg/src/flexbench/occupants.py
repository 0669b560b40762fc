"""Occupant agents: local comfort sensing, stochastic adaptive actions, gains.

Each agent senses a local temperature through a near-occupant surrogate (a
convex blend of discharge air, zone air, and surface temperatures weighted by
distance to the diffuser), scores its discomfort against a preference band,
and then fires adaptive actions stochastically.  Action draws use a substream
keyed by (run seed, agent id, step) so results are independent of agent
evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .plant import DischargeAir
from .streams import OCCUPANT_DOMAIN, substream


class ActionType(Enum):
    HEATER_TOGGLE = "heater_toggle"
    FAN_TOGGLE = "fan_toggle"
    THERMOSTAT_ADJUST = "thermostat_adjust"
    CLOTHING_ADJUST = "clothing_adjust"
    DRINK = "drink"
    WALK = "walk"


@dataclass
class EffectConfig:
    """Magnitudes and durations of action effects, shared across agents."""

    fan_offset_c: float = 0.8
    clo_step: float = 0.5
    clo_offset_c_per_clo: float = 2.0   # +0.5 clo feels 1.0 degC warmer
    clo_min: float = 0.3
    clo_max: float = 1.5
    drink_offset_c: float = 0.5
    drink_duration_s: float = 900.0
    walk_offset_c: float = 0.3
    walk_duration_s: float = 300.0
    thermostat_step_c: float = 0.5
    thermostat_band_c: float = 2.0
    base_sensible_w: float = 75.0
    base_latent_w: float = 55.0
    heater_w: float = 800.0
    walk_sensible_w: float = 40.0


@dataclass
class OccupantAgent:
    """One occupant: placement, preference, action propensities, effect state."""

    agent_id: int
    coords: tuple[float, float, float]
    clo: float = 0.7
    t_pref_c: float = 22.5
    deadband_c: float = 1.0
    action_probs: dict[ActionType, float] = field(default_factory=dict)
    presence: list[tuple[float, int]] | None = None

    heater_on: bool = False
    fan_on: bool = False
    clo_ref: float = field(init=False)
    thermostat_delta_c: float = 0.0
    drink_until_s: float = -1.0
    drink_sign: float = 0.0
    drink_started_s: float = 0.0
    walk_until_s: float = -1.0

    def __post_init__(self):
        self.clo_ref = self.clo
        for p in self.action_probs.values():
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"agent {self.agent_id}: action probability {p} outside [0, 1]")

    def present(self, t_s: float) -> bool:
        if not self.presence:
            return True
        state = 1
        for time_s, flag in self.presence:
            if t_s >= time_s:
                state = flag
            else:
                break
        return bool(state)

    def drink_offset(self, t_s: float, fx: EffectConfig) -> float:
        if t_s >= self.drink_until_s or self.drink_sign == 0.0:
            return 0.0
        remaining = (self.drink_until_s - t_s) / fx.drink_duration_s
        return self.drink_sign * fx.drink_offset_c * min(1.0, remaining)

    def walking(self, t_s: float) -> bool:
        return t_s < self.walk_until_s


@dataclass
class LocalCondition:
    t_c: float          # effective local temperature (fan offset included)
    rh_pct: float
    t_mix_c: float      # convex blend before personal effects
    coords_clamped: bool = False


class NearOccupantSurrogate:
    """Maps plant/zone records to a local condition at an occupant position.

    The discharge-air weight decays exponentially with distance to the
    diffuser; weights are renormalized to sum to one, so the blended
    temperature always lies inside the range of its inputs.
    """

    def __init__(self, w_discharge: float = 0.2, w_zone: float = 0.6,
                 w_surfaces: float = 0.2, decay_length_m: float = 3.0,
                 diffuser_xyz: tuple[float, float, float] = (0.0, 0.0, 2.5),
                 zone_bounds: tuple = ((0.0, 0.0, 0.0), (6.0, 6.0, 3.0))):
        if min(w_discharge, w_zone, w_surfaces) < 0 or (w_discharge + w_zone + w_surfaces) <= 0:
            raise ValueError("surrogate weights must be non-negative with positive sum")
        self.w_discharge = w_discharge
        self.w_zone = w_zone
        self.w_surfaces = w_surfaces
        self.decay_length = decay_length_m
        self.diffuser = diffuser_xyz
        self.lo, self.hi = zone_bounds

    def local_condition(self, agent: OccupantAgent, discharge: DischargeAir,
                        zone_t_c: float, zone_rh_pct: float,
                        surfaces: list[float], fx: EffectConfig) -> LocalCondition:
        clamped = False
        pos = []
        for c, lo, hi in zip(agent.coords, self.lo, self.hi):
            cc = min(max(c, lo), hi)
            clamped = clamped or cc != c
            pos.append(cc)
        dist = math.dist(pos, self.diffuser)
        wd = self.w_discharge * math.exp(-dist / self.decay_length)
        total = wd + self.w_zone + self.w_surfaces
        wd, wz, ws = wd / total, self.w_zone / total, self.w_surfaces / total
        surf = sum(surfaces) / len(surfaces) if surfaces else zone_t_c
        t_mix = wd * discharge.t_c + wz * zone_t_c + ws * surf
        rh = wd * discharge.rh_pct + (wz + ws) * zone_rh_pct
        t_eff = t_mix - (fx.fan_offset_c if agent.fan_on else 0.0)
        return LocalCondition(t_eff, rh, t_mix, clamped)


def comfort_eval(agent: OccupantAgent, local: LocalCondition, t_s: float,
                 fx: EffectConfig) -> float:
    """Signed discomfort: degrees beyond the preference band, 0 inside it."""
    eff = (local.t_c
           + fx.clo_offset_c_per_clo * (agent.clo - agent.clo_ref)
           + agent.drink_offset(t_s, fx)
           + (fx.walk_offset_c if agent.walking(t_s) else 0.0))
    e = eff - agent.t_pref_c
    if e > agent.deadband_c:
        return e - agent.deadband_c
    if e < -agent.deadband_c:
        return e + agent.deadband_c
    return 0.0


def _applicable(agent: OccupantAgent, action: ActionType, score: float,
                fx: EffectConfig) -> bool:
    hot = score > 0
    if action is ActionType.HEATER_TOGGLE:
        return agent.heater_on if hot else not agent.heater_on
    if action is ActionType.FAN_TOGGLE:
        return not agent.fan_on if hot else agent.fan_on
    if action is ActionType.CLOTHING_ADJUST:
        return agent.clo > fx.clo_min + 1e-12 if hot else agent.clo < fx.clo_max - 1e-12
    if action is ActionType.THERMOSTAT_ADJUST:
        band = fx.thermostat_band_c
        return agent.thermostat_delta_c > -band + 1e-12 if hot \
            else agent.thermostat_delta_c < band - 1e-12
    if action is ActionType.DRINK:
        return True
    if action is ActionType.WALK:
        return not hot
    return False


def behave(agent: OccupantAgent, score: float, seed: int, step: int, t_s: float,
           fx: EffectConfig) -> list[ActionType]:
    """Fire adaptive actions for one agent at one step.

    Zero discomfort fires nothing.  Otherwise each applicable action fires
    independently with its configured probability; draws come from the
    (seed, agent, step) substream in fixed enum order.
    """
    if score == 0.0:
        return []
    rng = substream(seed, OCCUPANT_DOMAIN, agent.agent_id, step)
    draws = rng.random(len(ActionType))
    fired = []
    hot = score > 0
    for action, u in zip(ActionType, draws):
        p = agent.action_probs.get(action, 0.0)
        if p <= 0.0 or u >= p or not _applicable(agent, action, score, fx):
            continue
        fired.append(action)
        if action is ActionType.HEATER_TOGGLE:
            agent.heater_on = not agent.heater_on
        elif action is ActionType.FAN_TOGGLE:
            agent.fan_on = not agent.fan_on
        elif action is ActionType.CLOTHING_ADJUST:
            step_clo = -fx.clo_step if hot else fx.clo_step
            agent.clo = min(max(agent.clo + step_clo, fx.clo_min), fx.clo_max)
        elif action is ActionType.THERMOSTAT_ADJUST:
            band = fx.thermostat_band_c
            delta = -fx.thermostat_step_c if hot else fx.thermostat_step_c
            agent.thermostat_delta_c = min(max(agent.thermostat_delta_c + delta,
                                               -band), band)
        elif action is ActionType.DRINK:
            agent.drink_sign = -1.0 if hot else 1.0
            agent.drink_started_s = t_s
            agent.drink_until_s = t_s + fx.drink_duration_s
        elif action is ActionType.WALK:
            agent.walk_until_s = t_s + fx.walk_duration_s
    return fired


@dataclass
class OccupantGains:
    sensible_w: float
    latent_w: float
    thermostat_delta_c: float


def aggregate_gains(agents: list[OccupantAgent], t_s: float,
                    fx: EffectConfig) -> OccupantGains:
    """Zone-level gains, summed in fixed agent-id order for reproducibility."""
    sens = lat = 0.0
    deltas = []
    for agent in sorted(agents, key=lambda a: a.agent_id):
        if not agent.present(t_s):
            continue
        sens += fx.base_sensible_w
        if agent.heater_on:
            sens += fx.heater_w
        if agent.walking(t_s):
            sens += fx.walk_sensible_w
        lat += fx.base_latent_w
        deltas.append(agent.thermostat_delta_c)
    band = fx.thermostat_band_c
    delta = sum(deltas) / len(deltas) if deltas else 0.0
    return OccupantGains(sens, lat, min(max(delta, -band), band))


@dataclass
class PopulationOutcome:
    gains: OccupantGains
    actions: tuple[tuple[int, ActionType], ...]
    mean_discomfort: float


class Population:
    """All agents of one run plus the shared surrogate and effect config."""

    def __init__(self, agents: list[OccupantAgent], surrogate: NearOccupantSurrogate,
                 effects: EffectConfig, seed: int):
        self.agents = sorted(agents, key=lambda a: a.agent_id)
        ids = [a.agent_id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate agent ids")
        self.surrogate = surrogate
        self.fx = effects
        self.seed = seed

    def step(self, step_index: int, t_s: float, discharge: DischargeAir,
             zone_t_c: float, zone_rh_pct: float,
             surfaces: list[float]) -> PopulationOutcome:
        actions = []
        scores = []
        for agent in self.agents:
            if not agent.present(t_s):
                continue
            local = self.surrogate.local_condition(agent, discharge, zone_t_c,
                                                   zone_rh_pct, surfaces, self.fx)
            score = comfort_eval(agent, local, t_s, self.fx)
            scores.append(abs(score))
            for action in behave(agent, score, self.seed, step_index, t_s, self.fx):
                actions.append((agent.agent_id, action))
        gains = aggregate_gains(self.agents, t_s, self.fx)
        mean_disc = sum(scores) / len(scores) if scores else 0.0
        return PopulationOutcome(gains, tuple(actions), mean_disc)
