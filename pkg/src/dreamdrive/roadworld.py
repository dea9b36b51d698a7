"""Deterministic toy driving world: a scrolling road with a drifting
centerline, block obstacles, and a three-key vehicle. Doubles as the
ground-truth oracle for the learned planner.

Geometry: row 0 is the horizon. Each step the world scrolls down one row,
a fresh row enters at the top, and the vehicle (a 3x3 block pinned at
``ego_row``) shifts left/right by ``ego_step`` or holds. Lookahead steps
freeze the incoming rows (no drift, no spawns, no RNG consumption) so game
trees over futures are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from dreamdrive.errors import ConfigError, DeadStateError
from dreamdrive.rng import Prng

# frame palette
OFF_ROAD = 32
ROAD = 160
OBSTACLE = 96
EGO = 255
PALETTE = (OFF_ROAD, ROAD, OBSTACLE, EGO)

EGO_HALF = 1  # vehicle block is 3x3


class Action:
    """Key presses: Left = 0, Up = 1, Right = 2."""

    LEFT = 0
    UP = 1
    RIGHT = 2

    ALL = (LEFT, UP, RIGHT)
    NAMES = ("left", "up", "right")

    @staticmethod
    def name(a: int) -> str:
        return Action.NAMES[a]

    @staticmethod
    def from_name(name: str) -> int:
        return Action.NAMES.index(name)


@dataclass(frozen=True)
class WorldConfig:
    width: int = 64
    height: int = 64
    road_half_width: int = 10
    ego_row: int = 56
    ego_step: int = 2
    curvature_max: int = 1
    obstacle_rate: float = 0.06
    obstacle_size: int = 4
    spawn_margin: int = 6

    def __post_init__(self):
        if not (0 < self.ego_row < self.height):
            raise ConfigError(f"ego_row {self.ego_row} outside frame height {self.height}")
        if self.road_half_width < self.obstacle_size:
            raise ConfigError("road_half_width must be >= obstacle_size")
        for name in ("width", "height", "road_half_width", "ego_step", "obstacle_size"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 <= self.obstacle_rate < 1:
            raise ConfigError(f"obstacle_rate must be in [0, 1), got {self.obstacle_rate}")


@dataclass
class WorldState:
    cfg: WorldConfig
    rng: Prng
    step_index: int
    centerline: np.ndarray  # per-row road-center column, row 0 = horizon
    obstacles: list[tuple[int, int]]  # (row, col) of block top-left corners
    ego_col: int
    alive: bool

    def copy(self) -> "WorldState":
        return WorldState(self.cfg, self.rng.clone(), self.step_index,
                          self.centerline.copy(), list(self.obstacles),
                          self.ego_col, self.alive)


def _center_bounds(cfg: WorldConfig) -> tuple[int, int]:
    return cfg.road_half_width, cfg.width - 1 - cfg.road_half_width


def _drift(rng: Prng, cfg: WorldConfig) -> int:
    return rng.randint(2 * cfg.curvature_max + 1) - cfg.curvature_max


def _spawn_col(rng: Prng, cfg: WorldConfig, center: int) -> int:
    lo = center - cfg.road_half_width
    span = 2 * cfg.road_half_width + 1 - cfg.obstacle_size + 1
    return lo + rng.randint(span)


def world_init(seed: int, cfg: WorldConfig | None = None) -> WorldState:
    """Fresh world; the ego sits on the road center, obstacles respect the
    spawn margin, and everything is a pure function of the seed."""
    cfg = cfg or WorldConfig()
    rng = Prng(seed)
    lo, hi = _center_bounds(cfg)
    centerline = np.empty(cfg.height, dtype=np.int64)
    centerline[cfg.height - 1] = cfg.width // 2
    for r in range(cfg.height - 2, -1, -1):
        centerline[r] = int(np.clip(centerline[r + 1] + _drift(rng, cfg), lo, hi))
    obstacles = []
    last_spawn_row = cfg.ego_row - EGO_HALF - cfg.spawn_margin - cfg.obstacle_size
    for r in range(0, max(0, last_spawn_row) + 1):
        if rng.next_uniform() < cfg.obstacle_rate:
            obstacles.append((r, _spawn_col(rng, cfg, int(centerline[r]))))
    return WorldState(cfg, rng, 0, centerline, obstacles, int(centerline[cfg.ego_row]), True)


def unsafe_reason(state: WorldState) -> str | None:
    """None if the ego is safe; otherwise 'off_road' or 'obstacle'.

    Safe means on the road with at least one pixel of margin and clear of
    every obstacle block.
    """
    cfg = state.cfg
    center = int(state.centerline[cfg.ego_row])
    left = state.ego_col - EGO_HALF
    right = state.ego_col + EGO_HALF
    if left < center - cfg.road_half_width + 1 or right > center + cfg.road_half_width - 1:
        return "off_road"
    ego_top, ego_bot = cfg.ego_row - EGO_HALF, cfg.ego_row + EGO_HALF
    s = cfg.obstacle_size
    for (r, c) in state.obstacles:
        if r <= ego_bot and r + s - 1 >= ego_top and c <= right and c + s - 1 >= left:
            return "obstacle"
    return None


def _is_safe(state: WorldState) -> bool:
    return unsafe_reason(state) is None


def world_step(state: WorldState, action: int, frozen: bool = False) -> tuple[WorldState, bool]:
    """Apply a key press and scroll one row. Returns the new state and its
    safety. ``frozen`` disables drift and spawning (and leaves the RNG
    untouched) for deterministic lookahead."""
    if not state.alive:
        raise DeadStateError(f"cannot step a crashed world (step {state.step_index})")
    cfg = state.cfg
    new = state.copy()

    delta = (action - 1) * cfg.ego_step
    new.ego_col = int(np.clip(state.ego_col + delta, EGO_HALF, cfg.width - 1 - EGO_HALF))

    new.obstacles = [(r + 1, c) for (r, c) in state.obstacles if r + 1 < cfg.height]
    new.centerline[1:] = state.centerline[:-1]
    lo, hi = _center_bounds(cfg)
    if frozen:
        new.centerline[0] = state.centerline[0]
    else:
        new.centerline[0] = int(np.clip(state.centerline[0] + _drift(new.rng, cfg), lo, hi))
        if new.rng.next_uniform() < cfg.obstacle_rate:
            new.obstacles.append((0, _spawn_col(new.rng, cfg, int(new.centerline[0]))))

    new.step_index = state.step_index + 1
    safe = _is_safe(new)
    new.alive = safe
    return new, safe


def render(state: WorldState) -> np.ndarray:
    """Palette frame of the current state; pure function of the state."""
    cfg = state.cfg
    frame = np.full((cfg.height, cfg.width), OFF_ROAD, dtype=np.uint8)
    cols = np.arange(cfg.width)
    lo = state.centerline[:, None] - cfg.road_half_width
    hi = state.centerline[:, None] + cfg.road_half_width
    frame[(cols >= lo) & (cols <= hi)] = ROAD
    s = cfg.obstacle_size
    for (r, c) in state.obstacles:
        frame[max(r, 0) : min(r + s, cfg.height), max(c, 0) : min(c + s, cfg.width)] = OBSTACLE
    if state.alive:
        r0, c0 = cfg.ego_row - EGO_HALF, state.ego_col - EGO_HALF
        frame[r0 : r0 + 2 * EGO_HALF + 1, c0 : c0 + 2 * EGO_HALF + 1] = EGO
    return frame


def oracle_safe_depth(state: WorldState, action: int, depth: int) -> int:
    """Longest all-safe action chain that begins with ``action``, capped at
    ``depth``; futures use frozen dynamics so the tree is deterministic."""
    child, safe = world_step(state, action, frozen=True)
    if not safe:
        return 0
    if depth <= 1:
        return 1
    best = 0
    for a in Action.ALL:
        best = max(best, oracle_safe_depth(child, a, depth - 1))
        if best == depth - 1:
            break
    return 1 + best
