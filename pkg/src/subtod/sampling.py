"""Per-turn candidate sampling.

For one dialog context, draw a greedy belief state plus ``k`` sampled ones,
then for every distinct surviving state draw a greedy act/response completion
plus ``k`` sampled ones. Duplicates are removed early (keeping the first
occurrence, so the greedy variant survives any tie) because identical
fragments can only produce identical downstream dialogs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .backends import GeneratorBackend, stable_seed
from .errors import IncompleteSamples
from .model import BeliefState, DialogAct, DialogContext
from .verbalize import (
    parse_act_response,
    parse_state,
    serialize_act_prompt,
    serialize_state_prompt,
)


@dataclass(frozen=True)
class SamplingConfig:
    k: int = 2
    temperature: float = 1.0
    seed: int = 0
    include_greedy: bool = True
    max_tokens: int = 256

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")


@dataclass(frozen=True)
class TurnCompletion:
    acts: tuple[DialogAct, ...]
    response: str


@dataclass
class SampledTurnSet:
    """Deduplicated generations for one turn, greedy variant first when present."""

    states: list[BeliefState]
    completions: dict[int, list[TurnCompletion]]
    has_greedy: bool
    diagnostics: list[str] = field(default_factory=list)


def sample_turn(
    backend: GeneratorBackend, context: DialogContext, cfg: SamplingConfig
) -> SampledTurnSet:
    prompt = serialize_state_prompt(context)
    diagnostics: list[str] = []
    raw_states: list[str] = []
    if cfg.include_greedy:
        raw_states += backend.generate(
            prompt.text,
            1,
            greedy=True,
            temperature=cfg.temperature,
            seed=stable_seed(cfg.seed, prompt.text, "greedy-state"),
            max_tokens=cfg.max_tokens,
        )
    raw_states += backend.generate(
        prompt.text,
        cfg.k,
        greedy=False,
        temperature=cfg.temperature,
        seed=stable_seed(cfg.seed, prompt.text, "state"),
        max_tokens=cfg.max_tokens,
    )
    states: list[BeliefState] = []
    for pos, raw in enumerate(raw_states):
        parsed = parse_state(raw)
        for note in parsed.diagnostics:
            diagnostics.append(f"state sample {pos}: {note}")
        if parsed.state not in states:
            states.append(parsed.state)
    if not states:
        raise IncompleteSamples(f"no usable states for goal {context.goal_id} turn {context.turn_index}")

    completions: dict[int, list[TurnCompletion]] = {}
    for idx, state in enumerate(states):
        act_prompt = serialize_act_prompt(context, state)
        raw_turns: list[str] = []
        if cfg.include_greedy:
            raw_turns += backend.generate(
                act_prompt.text,
                1,
                greedy=True,
                temperature=cfg.temperature,
                seed=stable_seed(cfg.seed, act_prompt.text, "greedy-turn"),
                max_tokens=cfg.max_tokens,
            )
        raw_turns += backend.generate(
            act_prompt.text,
            cfg.k,
            greedy=False,
            temperature=cfg.temperature,
            seed=stable_seed(cfg.seed, act_prompt.text, "turn"),
            max_tokens=cfg.max_tokens,
        )
        spots: list[TurnCompletion] = []
        for pos, raw in enumerate(raw_turns):
            parsed = parse_act_response(raw)
            for note in parsed.diagnostics:
                diagnostics.append(f"turn sample {pos} (state {idx}): {note}")
            completion = TurnCompletion(acts=parsed.acts, response=parsed.response)
            if completion not in spots:
                spots.append(completion)
        completions[idx] = spots
    return SampledTurnSet(
        states=states,
        completions=completions,
        has_greedy=cfg.include_greedy,
        diagnostics=diagnostics,
    )
