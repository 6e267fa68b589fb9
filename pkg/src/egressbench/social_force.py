"""Social force engine: driving force with herding, exponential psychological
repulsion, body compression and sliding friction on contact, wall forces.

Integration is semi-implicit Euler (velocity first, then position) with the
speed clamped to the scene maximum after each velocity update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neighbors
from .scene import (
    SceneConfig,
    TrajectoryLog,
    TrajectoryRecorder,
    evacuated_mask,
    exit_directions,
    initial_positions,
    segment_nearest_points,
)

# beyond this center gap the pair force is < 3e-8 N and gets skipped
PAIR_CUTOFF_GAP = 2.0


@dataclass(frozen=True)
class ForceParams:
    """Force-law constants; defaults follow the common emergency-egress set."""

    repulsion_strength: float = 2000.0    # N
    falloff_length: float = 0.08          # m
    body_stiffness: float = 12000.0       # kg/s^2
    sliding_friction: float = 24000.0     # kg/(m s)
    relaxation_time: float = 1.0          # s
    herding_weight: float = 0.2           # fraction of desired velocity from neighbors
    neighborhood_radius: float = 2.0      # m, range of the herding average

    def __post_init__(self) -> None:
        numeric = (
            self.repulsion_strength, self.falloff_length, self.body_stiffness,
            self.sliding_friction, self.relaxation_time, self.neighborhood_radius,
        )
        if any(v <= 0 for v in numeric):
            raise ValueError("force constants must be positive")
        if not 0.0 <= self.herding_weight <= 1.0:
            raise ValueError("herding weight must lie in [0, 1]")


def contact_overlap(x: np.ndarray | float) -> np.ndarray | float:
    """eta(x): x where positive, else 0; gates the contact-only terms."""
    return np.maximum(x, 0.0)


def driving_force(
    velocity: np.ndarray,
    neighbor_velocities: np.ndarray,
    exit_direction: np.ndarray,
    mass: float,
    preferred_speed: float,
    params: ForceParams,
) -> np.ndarray:
    """Restoring force toward the desired velocity for a single agent.

    The desired velocity blends the exit-directed preferred velocity with
    the mean velocity of the given neighbors; with no neighbors the agent
    heads for the exit at full preferred speed.
    """
    if len(neighbor_velocities):
        mean_v = np.mean(neighbor_velocities, axis=0)
        p = params.herding_weight
        desired = (1.0 - p) * preferred_speed * exit_direction + p * mean_v
    else:
        desired = preferred_speed * exit_direction
    return -mass * (velocity - desired) / params.relaxation_time


def agent_repulsion(
    pos_i: np.ndarray,
    pos_j: np.ndarray,
    vel_i: np.ndarray,
    vel_j: np.ndarray,
    radius_i: float,
    radius_j: float,
    params: ForceParams,
) -> np.ndarray:
    """Pair force on agent i: psychological repulsion plus contact terms."""
    d_vec = pos_i - pos_j
    d = float(np.linalg.norm(d_vec))
    if d == 0.0:
        raise ValueError("coincident agent centers: repulsion direction undefined")
    r_sum = radius_i + radius_j
    normal = d_vec / d
    tangent = np.array([-normal[1], normal[0]])
    overlap = contact_overlap(r_sum - d)
    radial = params.repulsion_strength * np.exp((r_sum - d) / params.falloff_length)
    radial += params.body_stiffness * overlap
    dv_t = float((vel_j - vel_i) @ tangent)
    friction = params.sliding_friction * overlap * dv_t
    return radial * normal + friction * tangent


def wall_force(
    position: np.ndarray,
    velocity: np.ndarray,
    radius: float,
    wall: np.ndarray,
    params: ForceParams,
) -> np.ndarray:
    """Force from one wall segment: repulsion away from the nearest wall
    point, plus a contact term that speeds tangential sliding."""
    nearest = segment_nearest_points(position[None, :], wall[0], wall[1])[0]
    d_vec = position - nearest
    d = float(np.linalg.norm(d_vec))
    if d == 0.0:
        raise ValueError("agent center on wall: normal undefined")
    normal = d_vec / d
    tangent = np.array([-normal[1], normal[0]])
    overlap = contact_overlap(radius - d)
    radial = params.repulsion_strength * np.exp((radius - d) / params.falloff_length)
    radial += params.body_stiffness * overlap
    v_t = float(velocity @ tangent)
    return radial * normal - params.sliding_friction * overlap * v_t * tangent


class SocialForceEngine:
    """Vectorized stepping over all active agents."""

    def __init__(
        self,
        scene: SceneConfig,
        positions: np.ndarray,
        params: ForceParams | None = None,
    ):
        self.scene = scene
        self.params = params or ForceParams()
        self.positions = np.asarray(positions, dtype=float).copy()
        n = len(self.positions)
        self.velocities = np.zeros((n, 2))
        self.active = np.ones(n, dtype=bool)
        self.walls = scene.wall_segments()
        self.time = 0.0

    def _pair_forces(self, pos, vel, out):
        """Accumulate inter-agent forces and return the herding average."""
        p = self.params
        r = self.scene.agent_radius
        reach = max(PAIR_CUTOFF_GAP + 2 * r, p.neighborhood_radius)
        ii, jj = neighbors.pairs_within(pos, reach)
        n = len(pos)
        v_sum = np.zeros((n, 2))
        v_cnt = np.zeros(n)
        if len(ii) == 0:
            return v_sum, v_cnt
        d_vec = pos[ii] - pos[jj]
        d = np.linalg.norm(d_vec, axis=1)
        if np.any(d == 0.0):
            raise ValueError("coincident agent centers: repulsion direction undefined")

        herd = d <= p.neighborhood_radius
        np.add.at(v_sum, ii[herd], vel[jj[herd]])
        np.add.at(v_sum, jj[herd], vel[ii[herd]])
        np.add.at(v_cnt, ii[herd], 1.0)
        np.add.at(v_cnt, jj[herd], 1.0)

        gap_ok = d <= PAIR_CUTOFF_GAP + 2 * r
        ii, jj, d_vec, d = ii[gap_ok], jj[gap_ok], d_vec[gap_ok], d[gap_ok]
        normal = d_vec / d[:, None]
        tangent = np.column_stack([-normal[:, 1], normal[:, 0]])
        surplus = 2 * r - d
        overlap = contact_overlap(surplus)
        radial = p.repulsion_strength * np.exp(surplus / p.falloff_length)
        radial += p.body_stiffness * overlap
        dv_t = np.sum((vel[jj] - vel[ii]) * tangent, axis=1)
        friction = p.sliding_friction * overlap * dv_t
        f = radial[:, None] * normal + friction[:, None] * tangent
        np.add.at(out, ii, f)
        np.add.at(out, jj, -f)
        return v_sum, v_cnt

    def _wall_forces(self, pos, vel, out):
        p = self.params
        r = self.scene.agent_radius
        for wall in self.walls:
            nearest = segment_nearest_points(pos, wall[0], wall[1])
            d_vec = pos - nearest
            d = np.linalg.norm(d_vec, axis=1)
            if np.any(d == 0.0):
                raise ValueError("agent center on wall: normal undefined")
            near = d - r <= PAIR_CUTOFF_GAP
            if not near.any():
                continue
            normal = d_vec[near] / d[near, None]
            tangent = np.column_stack([-normal[:, 1], normal[:, 0]])
            surplus = r - d[near]
            overlap = contact_overlap(surplus)
            radial = p.repulsion_strength * np.exp(surplus / p.falloff_length)
            radial += p.body_stiffness * overlap
            v_t = np.sum(vel[near] * tangent, axis=1)
            out[near] += radial[:, None] * normal
            out[near] -= (p.sliding_friction * overlap * v_t)[:, None] * tangent

    def forces(self) -> np.ndarray:
        """Total force on each active agent, ordered as the active mask."""
        scene, p = self.scene, self.params
        pos = self.positions[self.active]
        vel = self.velocities[self.active]
        total = np.zeros_like(pos)
        v_sum, v_cnt = self._pair_forces(pos, vel, total)
        self._wall_forces(pos, vel, total)

        e_hat = exit_directions(pos, scene)
        desired = scene.preferred_speed * e_hat
        has_nb = v_cnt > 0
        w = p.herding_weight
        desired[has_nb] = (1.0 - w) * desired[has_nb] + w * (
            v_sum[has_nb] / v_cnt[has_nb, None]
        )
        total += -scene.agent_mass * (vel - desired) / p.relaxation_time
        return total

    def step(self, dt: float) -> np.ndarray:
        """Advance one step; returns indices of agents that exited."""
        scene = self.scene
        idx = np.flatnonzero(self.active)
        if len(idx) == 0:
            return idx
        f = self.forces()
        vel = self.velocities[idx] + (f / scene.agent_mass) * dt
        speed = np.linalg.norm(vel, axis=1)
        fast = speed > scene.max_speed
        vel[fast] *= (scene.max_speed / speed[fast])[:, None]
        pos = self.positions[idx] + vel * dt

        out = evacuated_mask(pos, scene)
        self._contain(pos, vel, ~out)
        self.positions[idx] = pos
        self.velocities[idx] = vel
        exited = idx[out]
        self.active[exited] = False
        self.time += dt
        return exited

    def _contain(self, pos, vel, inside):
        """Clamp non-evacuated centers into the room (anti-tunneling guard;
        contact compression is handled by forces, this only stops pass-through)."""
        scene = self.scene
        eps = 1e-3
        lo_x, hi_x = eps, scene.room_width - eps
        lo_y, hi_y = eps, scene.room_depth - eps
        span_lo, span_hi = scene.exit_span
        x, y = pos[:, 0], pos[:, 1]
        under = inside & (y < lo_y) & ((x < span_lo) | (x > span_hi))
        clamp_lo_x = inside & (x < lo_x)
        clamp_hi_x = inside & (x > hi_x)
        clamp_hi_y = inside & (y > hi_y)
        pos[under, 1] = lo_y
        vel[under, 1] = 0.0
        pos[clamp_lo_x, 0] = lo_x
        pos[clamp_hi_x, 0] = hi_x
        vel[clamp_lo_x | clamp_hi_x, 0] = 0.0
        pos[clamp_hi_y, 1] = hi_y
        vel[clamp_hi_y, 1] = 0.0


def sf_step(engine: SocialForceEngine, dt: float) -> np.ndarray:
    """Single-step entry point used by tests; delegates to the engine."""
    return engine.step(dt)


def run_social_force(
    config: SceneConfig,
    seed: int | None = None,
    run_id: int = 0,
    params: ForceParams | None = None,
) -> TrajectoryLog:
    """Simulate one evacuation; the seed fixes only the initial placement."""
    if seed is None:
        seed = config.rng_seed
    dt = config.time_step
    engine = SocialForceEngine(config, initial_positions(config, seed), params)
    recorder = TrajectoryRecorder(config, "social-force", run_id, dt)
    recorder.record_frame(engine.positions, engine.active)
    max_steps = int(np.floor(config.max_sim_time / dt))
    for step in range(1, max_steps + 1):
        if not engine.active.any():
            break
        visible = engine.active.copy()
        exited = engine.step(dt)
        recorder.mark_evacuated(exited, step * dt)
        recorder.record_frame(engine.positions, visible)
    return recorder.build()
