"""The driving decision procedure: imagine the three next frames, label
each safe or unsafe by classifier agreement, expand safe branches into a
depth-limited game tree, and take the action with the greatest safe depth.

Unsafe branches are pruned outright; that is score-preserving here because
an unsafe node can never extend an all-safe chain (this is a single-agent
max tree, so no adversarial bound-keeping is needed). An oracle model that
substitutes true simulator dynamics for the networks verifies the search
independently of model quality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dreamdrive.errors import ModelUnavailableError
from dreamdrive.models import Classifier, Generator, frames_to_unit
from dreamdrive.roadworld import (
    Action,
    WorldConfig,
    WorldState,
    render,
    unsafe_reason,
    world_init,
    world_step,
)

TIE_BREAK = (Action.UP, Action.LEFT, Action.RIGHT)  # forward progress first


@dataclass
class PlanNode:
    """One expanded node: the imagined frame, the key press that produced
    it, its safety label, and its level below the current frame."""

    frame: np.ndarray
    action_taken: int
    safe: bool
    depth: int
    children: list["PlanNode"] = field(default_factory=list)


@dataclass
class ActionScores:
    scores: list[int]  # indexed by action
    chosen: int
    no_safe_option: bool


def pick_action(scores: list[int]) -> tuple[int, bool]:
    """Argmax with the fixed tie-break order Up, Left, Right. All-zero
    scores still pick Up, flagged as having no safe option."""
    best = max(scores)
    for a in TIE_BREAK:
        if scores[a] == best:
            return a, best == 0
    raise AssertionError("unreachable")


class LearnedModel:
    """Game-tree model backed by the trained networks: nodes are imagined
    frames, safety is classifier agreement with the generating key press."""

    def __init__(self, gen: Generator | None, cls: Classifier | None):
        if gen is None or cls is None:
            missing = "generator" if gen is None else "classifier"
            raise ModelUnavailableError(f"learned planning needs a {missing} checkpoint")
        self.gen = gen
        self.cls = cls

    def node_from_world(self, state: WorldState):
        return frames_to_unit(render(state))

    def step(self, node, action: int):
        child = self.gen.forward(node, [action], training=False)
        safe = label_safe(node, child, action, self.cls)
        return child, child, safe


class OracleModel:
    """Ground-truth stand-in: nodes are world states stepped with frozen
    dynamics, safety is the simulator's own verdict."""

    def node_from_world(self, state: WorldState):
        return state

    def step(self, node: WorldState, action: int):
        child, safe = world_step(node, action, frozen=True)
        return child, frames_to_unit(render(child)), safe


def expand(model, node) -> list[np.ndarray]:
    """The three candidate next frames, in key order Left, Up, Right."""
    return [model.step(node, a)[1] for a in Action.ALL]


def label_safe(frame_parent: np.ndarray, frame_child: np.ndarray, action_generating: int,
               cls: Classifier | None) -> bool:
    """Safe iff the classifier, shown (parent, child), predicts the key
    press that generated the child."""
    if cls is None:
        raise ModelUnavailableError("safety labeling needs a classifier checkpoint")
    logits = cls.forward(frame_parent, frame_child, training=False)
    return int(logits[0].argmax()) == action_generating


def _descend(model, node, action: int, levels_left: int, depth: int,
             counter: list[int]) -> tuple[int, PlanNode]:
    child_node, child_frame, safe = model.step(node, action)
    counter[0] += 1
    plan_node = PlanNode(child_frame, action, safe, depth=depth)
    if not safe or levels_left == 1:
        return (1 if safe else 0), plan_node
    best = 0
    for a in Action.ALL:
        score, sub = _descend(model, child_node, a, levels_left - 1, depth + 1, counter)
        plan_node.children.append(sub)
        if score > best:
            best = score
            if best == levels_left - 1:  # cannot beat a full chain; still exact
                break
    return 1 + best, plan_node


def safe_depth(model, node, action: int, max_depth: int) -> int:
    """Longest all-safe chain beginning with ``action``, in [0, max_depth].

    Depth-first with unsafe-branch pruning; visits at most
    (3**max_depth - 1) / 2 expanded nodes for the root action.
    """
    if max_depth < 1:
        raise ValueError(f"max_depth must be >= 1, got {max_depth}")
    score, _ = _descend(model, node, action, max_depth, 1, [0])
    return score


def plan(model, node, max_depth: int) -> tuple[ActionScores, list[PlanNode]]:
    """safe_depth for all three root actions plus the expanded subtrees."""
    subtrees = []
    scores = []
    for action in Action.ALL:
        score, sub = _descend(model, node, action, max_depth, 1, [0])
        scores.append(score)
        subtrees.append(sub)
    chosen, no_safe = pick_action(scores)
    return ActionScores(scores, chosen, no_safe), subtrees


def choose_action(model, node, max_depth: int) -> ActionScores:
    result, _ = plan(model, node, max_depth)
    return result


@dataclass
class StepRow:
    step: int
    scores: list[int]
    chosen: int
    safe: bool


@dataclass
class EpisodeReport:
    seed: int
    survived: int
    steps_requested: int
    crashed: bool
    crash_cause: str | None
    no_safe_steps: int
    rows: list[StepRow] = field(default_factory=list)

    def to_csv(self, path) -> None:
        lines = ["step,score_left,score_up,score_right,chosen,safe"]
        for r in self.rows:
            lines.append(f"{r.step},{r.scores[0]},{r.scores[1]},{r.scores[2]},"
                         f"{Action.name(r.chosen)},{int(r.safe)}")
        Path(path).write_text("\n".join(lines) + "\n")


def drive(seed: int, n_steps: int, max_depth: int, gen: Generator | None = None,
          cls: Classifier | None = None, oracle: bool = False,
          cfg: WorldConfig | None = None) -> EpisodeReport:
    """Closed loop: render, choose the deepest-safe action, step the real
    world; stops at the first crash."""
    model = OracleModel() if oracle else LearnedModel(gen, cls)
    world = world_init(seed, cfg)
    rows: list[StepRow] = []
    survived = 0
    crash = None
    no_safe = 0
    for step in range(1, n_steps + 1):
        scores = choose_action(model, model.node_from_world(world), max_depth)
        no_safe += int(scores.no_safe_option)
        world, safe = world_step(world, scores.chosen)
        rows.append(StepRow(step, scores.scores, scores.chosen, safe))
        if not safe:
            crash = unsafe_reason(world)
            break
        survived = step
    return EpisodeReport(seed, survived, n_steps, crash is not None, crash, no_safe, rows)


def policy_survival(seed: int, n_steps: int, policy, cfg: WorldConfig | None = None) -> int:
    """Steps survived by an arbitrary state->action policy, same counting
    as drive(); used for paired comparisons against the planner."""
    world = world_init(seed, cfg)
    survived = 0
    for step in range(1, n_steps + 1):
        world, safe = world_step(world, policy(world))
        if not safe:
            break
        survived = step
    return survived
