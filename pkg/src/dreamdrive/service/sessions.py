"""Live driver sessions: one simulated world per connection, key presses in,
frames and planner advice out, everything logged as a standard dataset."""

from __future__ import annotations

import base64
from dataclasses import dataclass
from pathlib import Path

from dreamdrive.datalog import Transition, write_dataset
from dreamdrive.planner import LearnedModel, choose_action
from dreamdrive.roadworld import Action, WorldConfig, render, world_init, world_step


@dataclass
class PlannerAttachment:
    model: LearnedModel
    depth: int


class Session:
    """State machine for one driver. Messages are dicts matching the wire
    protocol; ordering within a session is the caller's responsibility."""

    def __init__(self, seed: int, record: bool, log_path: Path,
                 planner: PlannerAttachment | None = None,
                 cfg: WorldConfig | None = None):
        self.seed = seed
        self.record = record
        self.log_path = log_path
        self.planner = planner
        self.world = world_init(seed, cfg)
        self.step = 0
        self.buffer: list[Transition] = []
        self.flushed_path: str = ""

    @property
    def alive(self) -> bool:
        return self.world.alive

    def _advice(self):
        if self.planner is None or not self.world.alive:
            return None, None
        node = self.planner.model.node_from_world(self.world)
        result = choose_action(self.planner.model, node, self.planner.depth)
        scores = {Action.name(a): result.scores[a] for a in Action.ALL}
        return Action.name(result.chosen), scores

    def frame_message(self, safe: bool = True) -> dict:
        frame = render(self.world)
        recommended, scores = self._advice()
        return {
            "type": "frame",
            "step": self.step,
            "w": self.world.cfg.width,
            "h": self.world.cfg.height,
            "pixels": base64.b64encode(frame.tobytes()).decode("ascii"),
            "safe": safe,
            "recommended": recommended,
            "scores": scores,
        }

    def apply_action(self, action: int) -> tuple[dict, bool]:
        """Advance one step; returns (frame message, session_over flag)."""
        before = render(self.world)
        self.world, safe = world_step(self.world, action)
        if self.record:
            self.buffer.append(Transition(before, action, render(self.world), safe,
                                          session_id=self.seed & 0xFFFFFFFF, step=self.step))
        self.step += 1
        return self.frame_message(safe=safe), not safe

    def flush(self) -> str:
        """Write the pending log once; later calls return the same path."""
        if self.record and not self.flushed_path:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            write_dataset(self.log_path, self.buffer)
            self.flushed_path = str(self.log_path)
        return self.flushed_path

    def over_message(self) -> dict:
        return {"type": "session_over", "survived": self.step, "log_path": self.flush()}


def parse_client_message(raw: dict) -> tuple[str, dict]:
    """Validate a client message; raises ValueError with a reason."""
    if not isinstance(raw, dict) or "type" not in raw:
        raise ValueError("message must be an object with a 'type' field")
    kind = raw["type"]
    if kind == "start":
        seed = raw.get("seed")
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ValueError("start.seed must be an unsigned 64-bit integer")
        if not isinstance(raw.get("record"), bool):
            raise ValueError("start.record must be a boolean")
        return kind, {"seed": seed, "record": raw["record"]}
    if kind == "action":
        name = raw.get("action")
        if name not in Action.NAMES:
            raise ValueError("action.action must be one of 'left', 'up', 'right'")
        step = raw.get("step")
        if not isinstance(step, int) or step < 0:
            raise ValueError("action.step must be a nonnegative integer")
        return kind, {"action": Action.from_name(name), "step": step}
    if kind == "stop":
        return kind, {}
    raise ValueError(f"unknown message type {kind!r}")
