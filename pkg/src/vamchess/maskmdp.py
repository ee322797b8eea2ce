"""Action-masking MDP semantics.

A state is a (position, mask) pair with the mask a subset of the legal
moves. Choosing outside the mask (or producing unparsable/illegal output)
is a constraint violation: fixed negative penalty and termination. Valid
in-mask actions earn the verifier score and transition normally, with the
mask refreshed by an update kernel and re-intersected with the successor
position's legal set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from vamchess import board
from vamchess.prompts import VALID, ParsedOutput
from vamchess.verifier import ValueMap


@dataclass(frozen=True)
class AugmentedState:
    position: board.Position
    mask: tuple[str, ...]

    def __post_init__(self):
        extra = set(self.mask) - set(board.legal_moves(self.position))
        if extra:
            raise ValueError(f"mask moves not legal here: {sorted(extra)}")


@dataclass(frozen=True)
class MaskMdpConfig:
    penalty: float = 1.0
    # Discount kept for fidelity to the MDP definition; every implemented
    # algorithm is single-decision per prompt and never applies it.
    gamma: float = 0.99

    def __post_init__(self):
        if self.penalty <= 0:
            raise ValueError("penalty must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")


@dataclass(frozen=True)
class StepResult:
    reward: float
    done: bool
    next: Optional[AugmentedState] = None


MaskUpdate = Callable[[tuple[str, ...], str, board.Position], tuple[str, ...]]


def full_legal_reset(mask, action, next_position) -> tuple[str, ...]:
    """Default update kernel: the successor's full legal set."""
    return board.legal_moves(next_position)


def masked_reward(vm: ValueMap, mask, action: ParsedOutput, penalty: float) -> float:
    """Verifier score for valid in-mask actions, -penalty for any violation."""
    if action.verdict == VALID and action.move in set(mask):
        return vm.scores[action.move]
    return -penalty


def done(action: ParsedOutput, mask) -> bool:
    """True unless the action is a valid move inside the mask."""
    return not (action.verdict == VALID and action.move in set(mask))


def step(state: AugmentedState, action: ParsedOutput,
         update: MaskUpdate = full_legal_reset,
         cfg: MaskMdpConfig = MaskMdpConfig(),
         vm: ValueMap | None = None) -> StepResult:
    """One transition of the masking MDP.

    Violations terminate with -penalty and no successor. Valid in-mask
    actions transition the board, rebuild the mask through `update`, and
    earn the verifier score when a value map is supplied (0 otherwise).
    The step is also terminal when the successor position ends the game.
    """
    if done(action, state.mask):
        return StepResult(reward=-cfg.penalty, done=True, next=None)
    reward = vm.scores[action.move] if vm is not None else 0.0
    next_position = board.apply_move(state.position, action.move)
    legal_after = set(board.legal_moves(next_position))
    new_mask = tuple(m for m in update(state.mask, action.move, next_position)
                     if m in legal_after)
    next_state = AugmentedState(position=next_position, mask=new_mask)
    game_over = board.game_outcome(next_position).is_terminal
    return StepResult(reward=reward, done=game_over, next=next_state)
