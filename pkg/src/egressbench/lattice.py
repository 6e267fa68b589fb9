"""Biased-random-walk lattice gas engine on a square grid.

One walker per cell. Each step a walker may move toward the exit wall,
laterally, or stay; stepping away from the exit wall is never permitted.
Moves are sampled with an unbiased share spread over open directions plus
a drift share aimed at the nearest exit cell. Walkers are updated in a
random sequential order, so cell exclusion holds by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .scene import SceneConfig, TrajectoryRecorder, TrajectoryLog

LATTICE_CELL_SIZE = 0.30  # meters; one cell holds one body

TOWARD, LEFT, RIGHT, STAY = "toward", "left", "right", "stay"


@dataclass(frozen=True)
class DriftParams:
    """Strength of the exit-directed bias, in [0, 1]."""

    drift: float = 0.7

    def __post_init__(self) -> None:
        if not 0.0 <= self.drift <= 1.0:
            raise ValueError("drift must lie in [0, 1]")


@njit(cache=True)
def _move_probabilities(e_x, e_y, toward_open, lat_toward_open, lat_away_open, drift):
    """(p_toward, p_lat_toward, p_lat_away); the remainder is the stay mass.

    Each open direction gets (1 - drift)/n_open. The drift mass splits
    between toward (e_y weight) and the lateral pointing at the exit
    column (e_x weight); a share aimed at a blocked direction is lost to
    "stay" rather than renormalized.
    """
    n_open = 0
    if toward_open:
        n_open += 1
    if lat_toward_open:
        n_open += 1
    if lat_away_open:
        n_open += 1
    base = (1.0 - drift) / n_open if n_open > 0 else 0.0
    denom = e_x + e_y
    p_toward = 0.0
    p_lat_toward = 0.0
    p_lat_away = 0.0
    if toward_open:
        p_toward = base + drift * e_y / denom
    if lat_toward_open:
        p_lat_toward = base
        if e_x > 0:
            p_lat_toward += drift * e_x / denom
    if lat_away_open:
        p_lat_away = base
    return p_toward, p_lat_toward, p_lat_away


def step_probabilities(
    walker_cell: tuple[int, int],
    exit_target: tuple[int, int],
    blocked: set[str],
    drift: float = DriftParams.drift,
) -> dict[str, float]:
    """Move distribution for one walker, as {toward, left, right, stay}.

    walker_cell and exit_target are (col, row) grid coordinates; the exit
    row lies one row beyond row 0. blocked names directions occupied by a
    walker or a wall, out of {toward, left, right}.
    """
    col, row = walker_cell
    ecol, erow = exit_target
    if row <= erow:
        raise ValueError("walker must sit above the exit row")
    e_y = row - erow
    e_x = abs(col - ecol)
    lat_toward, lat_away = (LEFT, RIGHT) if ecol < col else (RIGHT, LEFT)
    if e_x == 0:
        lat_toward, lat_away = LEFT, RIGHT  # no lateral drift either way
    p_toward, p_lat_toward, p_lat_away = _move_probabilities(
        float(e_x),
        float(e_y),
        TOWARD not in blocked,
        lat_toward not in blocked,
        lat_away not in blocked,
        drift,
    )
    probs = {TOWARD: p_toward, lat_toward: p_lat_toward, lat_away: p_lat_away}
    probs[STAY] = 1.0 - (p_toward + p_lat_toward + p_lat_away)
    return probs


@njit(cache=True)
def _sweep(order, u, cols, rows, occ, exit_lo, exit_hi, drift, exited):
    """One random-sequential update pass; returns the number of exits.

    Mutates cols/rows/occ in place. Walkers that step onto an exit cell
    get row -1 and are cleared from the occupancy. u holds one uniform
    draw per walker in `order`.
    """
    n_cols = occ.shape[0]
    n_exited = 0
    for k in range(order.shape[0]):
        w = order[k]
        col = cols[w]
        row = rows[w]
        ecol = col
        if col < exit_lo:
            ecol = exit_lo
        elif col > exit_hi:
            ecol = exit_hi
        e_x = abs(col - ecol)
        e_y = row + 1  # exit row sits one row beyond row 0

        if row == 0:
            toward_open = exit_lo <= col <= exit_hi
        else:
            toward_open = occ[col, row - 1] < 0
        left_open = col > 0 and occ[col - 1, row] < 0
        right_open = col < n_cols - 1 and occ[col + 1, row] < 0

        if ecol < col:
            lat_toward_open, lat_away_open = left_open, right_open
        else:
            lat_toward_open, lat_away_open = right_open, left_open
        p_toward, p_lat_toward, p_lat_away = _move_probabilities(
            float(e_x), float(e_y), toward_open, lat_toward_open, lat_away_open, drift
        )
        if ecol < col:
            p_left, p_right = p_lat_toward, p_lat_away
        else:
            p_right, p_left = p_lat_toward, p_lat_away

        x = u[k]
        new_col, new_row = col, row
        if x < p_toward:
            new_row = row - 1
        elif x < p_toward + p_left:
            new_col = col - 1
        elif x < p_toward + p_left + p_right:
            new_col = col + 1
        else:
            continue

        occ[col, row] = -1
        if new_row < 0:
            rows[w] = -1
            exited[n_exited] = w
            n_exited += 1
        else:
            occ[new_col, new_row] = w
            cols[w] = new_col
            rows[w] = new_row
    return n_exited


class LatticeGrid:
    """Square grid with exclusion and a contiguous band of exit columns."""

    def __init__(self, scene: SceneConfig, cell_size: float = LATTICE_CELL_SIZE):
        self.scene = scene
        self.cell_size = cell_size
        self.n_cols = round(scene.room_width / cell_size)
        self.n_rows = round(scene.room_depth / cell_size)
        n_exit = max(1, round(scene.exit_width / cell_size))
        center_col = (scene.room_width / 2 + scene.exit_center_offset) / cell_size
        lo = round(center_col - n_exit / 2)
        lo = min(max(lo, 0), self.n_cols - n_exit)
        self.exit_col_lo = lo
        self.exit_col_hi = lo + n_exit - 1
        self.occupancy = np.full((self.n_cols, self.n_rows), -1, dtype=np.int64)
        self.cols = np.empty(0, np.int64)
        self.rows = np.empty(0, np.int64)

    @property
    def exit_cols(self) -> range:
        return range(self.exit_col_lo, self.exit_col_hi + 1)

    def place_walkers(self, n: int, rng: np.random.Generator) -> None:
        """Scatter n walkers over distinct cells, uniformly at random."""
        n_cells = self.n_cols * self.n_rows
        if n > n_cells:
            raise ValueError("more walkers than grid cells")
        flat = rng.choice(n_cells, size=n, replace=False)
        self.cols = (flat // self.n_rows).astype(np.int64)
        self.rows = (flat % self.n_rows).astype(np.int64)
        self.occupancy[:] = -1
        self.occupancy[self.cols, self.rows] = np.arange(n)

    def active_ids(self) -> np.ndarray:
        return np.flatnonzero(self.rows >= 0)

    def step(self, rng: np.random.Generator, drift: float = DriftParams.drift) -> np.ndarray:
        """Advance every walker once in random order; returns exited ids."""
        order = rng.permutation(self.active_ids())
        u = rng.random(order.shape[0])
        exited = np.empty(order.shape[0], np.int64)
        n_exited = _sweep(
            order, u, self.cols, self.rows, self.occupancy,
            self.exit_col_lo, self.exit_col_hi, drift, exited,
        )
        return exited[:n_exited].copy()

    def positions_m(self) -> np.ndarray:
        """Walker cell centers in meters; exited walkers sit on the exit row."""
        x = (self.cols + 0.5) * self.cell_size
        y = np.where(self.rows >= 0, (self.rows + 0.5) * self.cell_size, -0.5 * self.cell_size)
        return np.column_stack([x, y])

    def check_exclusion(self) -> None:
        active = self.active_ids()
        cells = set(zip(self.cols[active].tolist(), self.rows[active].tolist()))
        if len(cells) != len(active):
            raise AssertionError("two walkers share a cell")


def lattice_time_step(scene: SceneConfig, cell_size: float = LATTICE_CELL_SIZE) -> float:
    """Step duration making an unobstructed walker roughly match the
    common preferred speed (one cell per step)."""
    return cell_size / scene.preferred_speed


def run_lattice(
    config: SceneConfig,
    seed: int | None = None,
    run_id: int = 0,
    drift: float = DriftParams.drift,
    cell_size: float = LATTICE_CELL_SIZE,
) -> TrajectoryLog:
    """Simulate one evacuation; all randomness comes from the seed."""
    if seed is None:
        seed = config.rng_seed
    rng = np.random.default_rng(seed)
    grid = LatticeGrid(config, cell_size)
    dt = lattice_time_step(config, cell_size)
    recorder = TrajectoryRecorder(config, "lattice", run_id, dt)
    n = config.n_agents
    grid.place_walkers(n, rng)
    active = np.ones(n, dtype=bool)
    recorder.record_frame(grid.positions_m(), active)
    max_steps = int(np.floor(config.max_sim_time / dt))
    for step in range(1, max_steps + 1):
        if not active.any():
            break
        exited = grid.step(rng, drift)
        recorder.mark_evacuated(exited, step * dt)
        visible = active.copy()  # still includes walkers exiting on this frame
        active[exited] = False
        recorder.record_frame(grid.positions_m(), visible)
    return recorder.build()
