"""Labeled transition capture and storage.

A transition is one (frame, key press, next frame, safe) record. Files are
a fixed 12-byte header followed by fixed-size little-endian records, so
round-trips are byte-exact and records can be streamed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from dreamdrive.errors import DataStarvationError, FormatError
from dreamdrive.rng import Prng, derive_seed
from dreamdrive.roadworld import (
    EGO_HALF,
    Action,
    WorldConfig,
    WorldState,
    render,
    world_init,
    world_step,
)

MAGIC = b"SADG"
VERSION = 1
_HEADER = struct.Struct("<4sHHHBB")  # magic, version, width, height, channels, action_count
_TRAILER = struct.Struct("<II")  # session_id, step

TEACHER_LOOKAHEAD = 8  # rows of warning before the teacher dodges


@dataclass
class Transition:
    frame_t: np.ndarray
    action: int
    frame_t1: np.ndarray
    safe: bool
    session_id: int
    step: int

    def __eq__(self, other):
        return (
            isinstance(other, Transition)
            and np.array_equal(self.frame_t, other.frame_t)
            and self.action == other.action
            and np.array_equal(self.frame_t1, other.frame_t1)
            and self.safe == other.safe
            and self.session_id == other.session_id
            and self.step == other.step
        )


@dataclass(frozen=True)
class DatasetHeader:
    width: int = 64
    height: int = 64
    channels: int = 1
    action_count: int = 3

    @property
    def record_size(self) -> int:
        return 2 * self.width * self.height * self.channels + 10


def teacher_action(state: WorldState) -> int:
    """Scripted driver: dodge the nearest obstacle that will reach the ego
    lane within a few steps, otherwise hold the road center."""
    cfg = state.cfg
    center = int(state.centerline[cfg.ego_row])
    lane_left, lane_right = state.ego_col - EGO_HALF, state.ego_col + EGO_HALF
    s = cfg.obstacle_size
    threat = None  # (steps_to_reach, col)
    for (r, c) in state.obstacles:
        if c > lane_right or c + s - 1 < lane_left:
            continue
        steps = (cfg.ego_row - EGO_HALF) - (r + s - 1)
        if 1 <= steps <= TEACHER_LOOKAHEAD:
            key = (steps, c)
            if threat is None or key < threat:
                threat = key
    if threat is not None:
        steps, c = threat
        # road center at the row that will sit under the ego when they meet
        row_center = int(state.centerline[max(cfg.ego_row - steps, 0)])
        left_gap = c - (row_center - cfg.road_half_width)
        right_gap = (row_center + cfg.road_half_width) - (c + s - 1)
        return Action.LEFT if left_gap >= right_gap else Action.RIGHT
    off = state.ego_col - center
    if off > 1:
        return Action.LEFT
    if off < -1:
        return Action.RIGHT
    return Action.UP


def write_dataset(path, transitions: Iterable[Transition], header: DatasetHeader | None = None) -> int:
    header = header or DatasetHeader()
    count = 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, header.width, header.height,
                              header.channels, header.action_count))
        for t in transitions:
            fh.write(t.frame_t.tobytes())
            fh.write(bytes([t.action]))
            fh.write(t.frame_t1.tobytes())
            fh.write(bytes([1 if t.safe else 0]))
            fh.write(_TRAILER.pack(t.session_id, t.step))
            count += 1
    return count


def read_header(path) -> DatasetHeader:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise FormatError("file too short for dataset header", offset=len(raw))
    magic, version, width, height, channels, action_count = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    return DatasetHeader(width, height, channels, action_count)


def read_dataset(path) -> Iterator[Transition]:
    """Stream transitions; raises FormatError with the byte offset of the
    first malformed record."""
    header = read_header(path)
    return _record_iter(path, header)


def _record_iter(path, header: DatasetHeader) -> Iterator[Transition]:
    frame_bytes = header.width * header.height * header.channels
    shape = (header.height, header.width)
    record_size = header.record_size
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        offset = _HEADER.size
        while True:
            raw = fh.read(record_size)
            if not raw:
                return
            if len(raw) < record_size:
                raise FormatError(
                    f"truncated record: expected {record_size} bytes, found {len(raw)}",
                    offset=offset)
            frame_t = np.frombuffer(raw, dtype=np.uint8, count=frame_bytes).reshape(shape)
            action = raw[frame_bytes]
            frame_t1 = np.frombuffer(raw, dtype=np.uint8, count=frame_bytes,
                                     offset=frame_bytes + 1).reshape(shape)
            safe = raw[2 * frame_bytes + 1] != 0
            session_id, step = _TRAILER.unpack_from(raw, 2 * frame_bytes + 2)
            if action >= header.action_count:
                raise FormatError(f"action {action} out of range", offset=offset)
            yield Transition(frame_t.copy(), int(action), frame_t1.copy(), safe, session_id, step)
            offset += record_size


@dataclass
class CollectReport:
    path: str
    records: int
    class_counts: list[int]  # indexed by action
    crashes: int
    sessions: int


def collect(seed: int, n_steps: int, out_path,
            policy: str | Callable[[WorldState], int] = "teacher",
            cfg: WorldConfig | None = None) -> CollectReport:
    """Roll the simulator for n_steps, logging one transition per step.
    A crash is recorded (safe=False) and the world restarts on the next seed."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    cfg = cfg or WorldConfig()
    act = teacher_action if policy == "teacher" else policy
    if not callable(act):
        raise ValueError(f"unknown policy {policy!r}")

    counts = [0, 0, 0]
    crashes = 0
    session = 0
    step_in_session = 0
    world = world_init(seed, cfg)

    def generate():
        nonlocal world, session, step_in_session, crashes
        for _ in range(n_steps):
            frame_t = render(world)
            action = act(world)
            nxt, safe = world_step(world, action)
            counts[action] += 1
            yield Transition(frame_t, action, render(nxt), safe, session, step_in_session)
            if safe:
                world = nxt
                step_in_session += 1
            else:
                crashes += 1
                session += 1
                step_in_session = 0
                world = world_init(seed + session, cfg)

    records = write_dataset(out_path, generate(),
                            DatasetHeader(width=cfg.width, height=cfg.height))
    return CollectReport(str(out_path), records, counts, crashes, session + 1)


def balance_split(transitions: list[Transition], per_class: int, test_fraction: float,
                  seed: int) -> tuple[list[Transition], list[Transition]]:
    """Deterministic class-balanced split: train gets exactly per_class
    records per action, test gets the held-out fraction, disjoint."""
    if not 0 <= test_fraction < 1:
        raise ValueError(f"test_fraction must be in [0, 1), got {test_fraction}")
    rng = Prng(derive_seed(seed, 0x5917))
    train: list[Transition] = []
    test: list[Transition] = []
    for action in Action.ALL:
        members = [t for t in transitions if t.action == action]
        order = rng.shuffled_indices(len(members)) if members else []
        n_test = int(len(members) * test_fraction)
        remaining = len(members) - n_test
        if remaining < per_class:
            raise DataStarvationError(
                f"class '{Action.name(action)}' has {len(members)} records; "
                f"{per_class} train + {n_test} test needed", action=action)
        test.extend(members[i] for i in order[:n_test])
        train.extend(members[i] for i in order[n_test : n_test + per_class])
    train_order = rng.shuffled_indices(len(train))
    test_order = rng.shuffled_indices(len(test))
    return [train[i] for i in train_order], [test[i] for i in test_order]


def filter_safe(transitions: Iterable[Transition]) -> list[Transition]:
    """Drop crash records; both keep/drop modes are supported downstream."""
    return [t for t in transitions if t.safe]
