"""Shared experimental world: rectangular room, single exit, agents, clock.

Coordinate frame: the exit wall lies on y = 0, the room occupies
y in [0, room_depth] and x in [0, room_width]. "Toward the exit" is -y.
An agent counts as evacuated once its center crosses the y = 0 plane
inside the exit span.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

MAX_PLACEMENT_ATTEMPTS = 1_000_000


class PlacementError(RuntimeError):
    """Raised when rejection sampling cannot place all agents."""


@dataclass(frozen=True)
class SceneConfig:
    """Room geometry, agent physical constants and run parameters.

    Distances in meters, times in seconds, mass in kilograms.
    """

    room_width: float = 30.0
    room_depth: float = 25.0
    exit_width: float = 1.2
    exit_center_offset: float = 0.0   # along the exit wall, 0 = centered
    agent_radius: float = 0.15
    agent_mass: float = 60.0
    preferred_speed: float = 1.3
    max_speed: float = 2.6
    n_agents: int = 100
    time_step: float = 0.05
    max_sim_time: float = 1000.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.room_width <= 0 or self.room_depth <= 0:
            raise ValueError("room dimensions must be positive")
        if not 0 < self.exit_width < self.room_width:
            raise ValueError("exit width must be in (0, room_width)")
        if not 0 < 2 * self.agent_radius < self.exit_width:
            raise ValueError("agent diameter must be positive and below exit width")
        lo, hi = self.exit_span
        if lo < 0 or hi > self.room_width:
            raise ValueError("exit span extends beyond the exit wall")
        if self.preferred_speed > self.max_speed:
            raise ValueError("preferred speed exceeds max speed")
        if self.preferred_speed <= 0:
            raise ValueError("preferred speed must be positive")
        if self.time_step <= 0:
            raise ValueError("time step must be positive")
        if self.max_sim_time <= 0:
            raise ValueError("max sim time must be positive")
        if self.n_agents < 0:
            raise ValueError("agent count must be non-negative")
        if self.agent_mass <= 0:
            raise ValueError("agent mass must be positive")
        area = self.room_width * self.room_depth
        if self.n_agents * math.pi * self.agent_radius**2 >= area:
            raise ValueError("agents cannot fit in the room at this density")

    @property
    def exit_center(self) -> np.ndarray:
        return np.array([self.room_width / 2 + self.exit_center_offset, 0.0])

    @property
    def exit_span(self) -> tuple[float, float]:
        cx = self.room_width / 2 + self.exit_center_offset
        return cx - self.exit_width / 2, cx + self.exit_width / 2

    def wall_segments(self) -> np.ndarray:
        """The room boundary minus the exit gap, as (n, 2, 2) segments."""
        w, d = self.room_width, self.room_depth
        lo, hi = self.exit_span
        segs = [
            ((0.0, 0.0), (lo, 0.0)),     # exit wall, left of the gap
            ((hi, 0.0), (w, 0.0)),       # exit wall, right of the gap
            ((0.0, 0.0), (0.0, d)),
            ((w, 0.0), (w, d)),
            ((0.0, d), (w, d)),
        ]
        # an exit flush against a corner leaves a zero-length stub; drop it
        return np.array([s for s in segs if math.dist(*s) > 0.0])

    def with_agents(self, n_agents: int) -> "SceneConfig":
        return replace(self, n_agents=n_agents)

    def to_text(self) -> str:
        lines = [f"{f.name} = {getattr(self, f.name)!r}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SceneConfig":
        known = {f.name: f.type for f in fields(cls)}
        values: dict[str, float | int] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ValueError(f"line {lineno}: unknown scene key {key!r}")
            values[key] = int(value) if key in ("n_agents", "rng_seed") else float(value)
        return cls(**values)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


@dataclass
class AgentState:
    """One agent of the shared world; evacuated_at stays None until exit."""

    id: int
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    evacuated_at: float | None = None


def init_scene(config: SceneConfig, seed: int) -> list[AgentState]:
    """Place agents uniformly at random, pairwise non-overlapping, off walls.

    Deterministic for a fixed seed. Raises PlacementError when the
    rejection-sampling attempt budget runs out (density too high).
    """
    config.validate()
    n = config.n_agents
    if n == 0:
        return []
    r = config.agent_radius
    lo = np.array([r, r])
    hi = np.array([config.room_width - r, config.room_depth - r])
    rng = np.random.default_rng(seed)
    placed = np.empty((n, 2))
    count = 0
    attempts = 0
    while count < n:
        if attempts >= MAX_PLACEMENT_ATTEMPTS:
            raise PlacementError(
                f"placed {count}/{n} agents after {attempts} attempts; room too dense"
            )
        attempts += 1
        p = lo + rng.random(2) * (hi - lo)
        if count and (np.sum((placed[:count] - p) ** 2, axis=1) < (2 * r) ** 2).any():
            continue
        placed[count] = p
        count += 1
    return [AgentState(id=i, position=placed[i].copy()) for i in range(n)]


def initial_positions(config: SceneConfig, seed: int) -> np.ndarray:
    """Array form of init_scene, (n_agents, 2)."""
    agents = init_scene(config, seed)
    if not agents:
        return np.empty((0, 2))
    return np.stack([a.position for a in agents])


def is_evacuated(position: np.ndarray, scene: SceneConfig) -> bool:
    """True once the center has crossed the exit plane inside the exit span."""
    lo, hi = scene.exit_span
    return position[1] < 0.0 and lo <= position[0] <= hi


def evacuated_mask(positions: np.ndarray, scene: SceneConfig) -> np.ndarray:
    lo, hi = scene.exit_span
    return (positions[:, 1] < 0.0) & (positions[:, 0] >= lo) & (positions[:, 0] <= hi)


def segment_nearest_points(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Nearest point on segment a-b for each query point, (n, 2)."""
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.broadcast_to(a, points.shape).copy()
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    return a + t[:, None] * ab


def exit_directions(positions: np.ndarray, scene: SceneConfig) -> np.ndarray:
    """Unit vectors from each position to the nearest point of the exit segment.

    Exactly on the segment the direction degenerates; straight -y is used there.
    """
    lo, hi = scene.exit_span
    a = np.array([lo, 0.0])
    b = np.array([hi, 0.0])
    nearest = segment_nearest_points(positions, a, b)
    d = nearest - positions
    norms = np.linalg.norm(d, axis=1)
    out = np.zeros_like(d)
    ok = norms > 1e-12
    out[ok] = d[ok] / norms[ok, None]
    out[~ok] = (0.0, -1.0)
    return out


def exit_distances(positions: np.ndarray, scene: SceneConfig) -> np.ndarray:
    """Euclidean distance from each position to the exit segment."""
    lo, hi = scene.exit_span
    nearest = segment_nearest_points(positions, np.array([lo, 0.0]), np.array([hi, 0.0]))
    return np.linalg.norm(nearest - positions, axis=1)


@dataclass
class TrajectoryLog:
    """Recorded run: per-step positions of all agents plus exit times.

    positions has shape (n_frames, n_agents, 2), float32; frame 0 is the
    initial placement. An agent's crossing position is its last recorded
    frame; afterwards its entries are NaN and never reappear.
    evacuated_at is NaN for agents still inside at the end.
    """

    run_id: int
    model_name: str
    dt: float
    positions: np.ndarray
    evacuated_at: np.ndarray
    scene: SceneConfig

    @property
    def n_agents(self) -> int:
        return self.positions.shape[1]

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    @property
    def n_evacuated(self) -> int:
        return int(np.sum(~np.isnan(self.evacuated_at)))

    @property
    def n_remaining(self) -> int:
        return self.n_agents - self.n_evacuated

    def validate(self) -> None:
        n_frames, n_agents, _ = self.positions.shape
        if self.evacuated_at.shape != (n_agents,):
            raise ValueError("evacuated_at length mismatch")
        present = ~np.isnan(self.positions[:, :, 0])
        # once absent, absent forever
        reappear = (~present[:-1]) & present[1:]
        if reappear.any():
            raise ValueError("evacuated agent reappears in a later frame")
        final_present = present[-1] if n_frames else np.zeros(n_agents, bool)
        evac = ~np.isnan(self.evacuated_at)
        if int(evac.sum()) + int(np.sum(final_present & ~evac)) != n_agents:
            raise ValueError("evacuated + remaining does not cover all agents")
        if evac.any() and np.nanmax(self.evacuated_at) > self.scene.max_sim_time + self.dt:
            raise ValueError("evacuation time beyond max_sim_time")


class TrajectoryRecorder:
    """Builds a TrajectoryLog frame by frame.

    Engines call record_frame after each step with the full-length position
    array and the mask of agents to show (still active, or exiting on this
    very frame at their crossing position).
    """

    def __init__(self, scene: SceneConfig, model_name: str, run_id: int, dt: float):
        self.scene = scene
        self.model_name = model_name
        self.run_id = run_id
        self.dt = dt
        self.n = scene.n_agents
        self.frames: list[np.ndarray] = []
        self.evacuated_at = np.full(self.n, np.nan)

    def record_frame(self, positions: np.ndarray, visible: np.ndarray) -> None:
        frame = np.full((self.n, 2), np.nan, dtype=np.float32)
        frame[visible] = positions[visible].astype(np.float32)
        self.frames.append(frame)

    def mark_evacuated(self, indices: np.ndarray, time: float) -> None:
        self.evacuated_at[indices] = time

    def build(self) -> TrajectoryLog:
        if self.frames:
            positions = np.stack(self.frames)
        else:
            positions = np.empty((0, self.n, 2), dtype=np.float32)
        return TrajectoryLog(
            run_id=self.run_id,
            model_name=self.model_name,
            dt=self.dt,
            positions=positions,
            evacuated_at=self.evacuated_at,
            scene=self.scene,
        )
