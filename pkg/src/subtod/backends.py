"""Generation backends: a scripted, corpus-driven stand-in and an HTTP client.

The scripted backend answers the exact prompts built from its corpus's dialog
contexts. Greedy requests return the ground-truth state or act/response pair
verbatim; sampled requests return deterministic variations that are textually
distinct but evaluation-neutral (value casing for states, a politeness tail
for responses), unless an error injection turns a specific site into a
genuinely wrong generation. Everything is derived from the construction seed,
so outputs are bit-identical across runs and worker counts; the per-request
``seed`` argument is accepted for interface parity and ignored.
"""

from __future__ import annotations

import dataclasses
import hashlib
import random
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

import requests

from .corpus import Corpus
from .errors import BackendError
from .model import (
    BeliefState,
    Dialog,
    SubgoalKind,
    UserGoal,
    contexts_of,
    normalize_value,
    placeholder,
)
from .verbalize import TOKEN_STATE, serialize_state_prompt, state_text, turn_text

DEFAULT_MAX_TOKENS = 256


def stable_seed(*parts) -> int:
    """Deterministic 64-bit seed from arbitrary parts; hash() is salted, this isn't."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class GeneratorBackend(Protocol):
    """Text-completion interface shared by all backends.

    Implementations must be deterministic for a fixed (prompt, seed, params)
    tuple, or document themselves as best-effort.
    """

    def generate(
        self,
        prompt: str,
        n: int,
        *,
        greedy: bool,
        temperature: float = 1.0,
        seed: int = 0,
        max_tokens: int = DEFAULT_MAX_TOKENS,
    ) -> list[str]: ...


class ErrorKind(Enum):
    DROP_SLOT = "drop_slot"
    WRONG_VALUE = "wrong_value"
    SWAP_DEPARTURE_DESTINATION = "swap_departure_destination"
    OMIT_REQUESTED_SLOT_IN_RESPONSE = "omit_requested_slot_in_response"


STATE_ERRORS = (
    ErrorKind.DROP_SLOT,
    ErrorKind.WRONG_VALUE,
    ErrorKind.SWAP_DEPARTURE_DESTINATION,
)


@dataclass(frozen=True)
class Injection:
    """One planted error at a (dialog, turn, kind) site.

    ``sample`` is the 1-based sampled-generation index that receives the
    error; greedy generations are never corrupted.
    """

    dialog_id: str
    turn: int
    kind: SubgoalKind
    error: ErrorKind
    sample: int = 1
    slot: str | None = None


@dataclass(frozen=True)
class ErrorInjectionConfig:
    injections: tuple[Injection, ...] = ()
    # Probability that a site (dialog, turn, kind) gets one random injection.
    rate: float = 0.0

    def lookup(self, dialog_id: str, turn: int, kind: SubgoalKind) -> Injection | None:
        for injection in self.injections:
            if (
                injection.dialog_id == dialog_id
                and injection.turn == turn
                and injection.kind == kind
            ):
                return injection
        return None


def _case_variant_value(value: str, i: int) -> str:
    """Uppercase the first ``i`` letters; distinct per i, equal under matching."""
    out = []
    seen = 0
    for ch in value:
        if ch.isalpha():
            seen += 1
            out.append(ch.upper() if seen <= i else ch.lower())
        else:
            out.append(ch)
    return "".join(out)


def _copy_state(state: BeliefState) -> BeliefState:
    return {domain: dict(slots) for domain, slots in state.items()}


_RESPONSE_TAILS = (
    "is there anything else i can help you with?",
    "can i help you with anything else?",
    "anything else i can do for you?",
    "let me know if you need anything else.",
)


def _response_variant(response: str, i: int) -> str:
    tail = _RESPONSE_TAILS[(i - 1) % len(_RESPONSE_TAILS)]
    reps = 1 + (i - 1) // len(_RESPONSE_TAILS)
    return f"{response} " + " ".join([tail] * reps)


def _strip_placeholder(response: str, token: str) -> str:
    return " ".join(response.replace(token, " ").split())


class ScriptedBackend:
    """Deterministic stand-in for a dialog LM, driven by a corpus world."""

    def __init__(self, world: Corpus, noise: ErrorInjectionConfig | None = None, seed: int = 0):
        self.world = world
        self.noise = noise or ErrorInjectionConfig()
        self.seed = seed
        self._sites: dict[str, tuple[Dialog, int]] = {}
        for dialog in list(world.dialogs) + list(world.dev_dialogs):
            for t, context in enumerate(contexts_of(dialog)):
                self._sites.setdefault(serialize_state_prompt(context).text, (dialog, t))
        self._value_pool: dict[tuple[str, str], list[str]] = {}
        for domain, entities in world.database.tables.items():
            for entity in entities:
                for slot, value in entity.items():
                    pool = self._value_pool.setdefault((domain, slot), [])
                    if value not in pool:
                        pool.append(value)

    # -- generation ------------------------------------------------------

    def generate(
        self,
        prompt: str,
        n: int,
        *,
        greedy: bool,
        temperature: float = 1.0,
        seed: int = 0,
        max_tokens: int = DEFAULT_MAX_TOKENS,
    ) -> list[str]:
        marker = f" {TOKEN_STATE}"
        if marker in prompt:
            state_key = prompt.split(marker, 1)[0]
            stage = SubgoalKind.ACT_RESPONSE
        else:
            state_key = prompt
            stage = SubgoalKind.STATE
        site = self._sites.get(state_key)
        if site is None:
            raise BackendError("prompt does not match any known dialog context", prompt=prompt)
        dialog, turn = site
        if greedy:
            return [self._greedy(dialog, turn, stage)] * n
        injection = self._site_injection(dialog, turn, stage, n)
        return [self._sampled(dialog, turn, stage, i, injection) for i in range(1, n + 1)]

    def _greedy(self, dialog: Dialog, turn: int, stage: SubgoalKind) -> str:
        system = dialog.turns[turn].system
        if stage is SubgoalKind.STATE:
            return state_text(system.state)
        return turn_text(system.acts, system.response)

    def _sampled(
        self,
        dialog: Dialog,
        turn: int,
        stage: SubgoalKind,
        i: int,
        injection: Injection | None,
    ) -> str:
        system = dialog.turns[turn].system
        if stage is SubgoalKind.STATE:
            if injection is not None and injection.sample == i:
                state = self._apply_state_error(dialog, system.state, injection)
            else:
                state = self._neutral_state(system.state, i)
            return state_text(state)
        if injection is not None and injection.sample == i:
            acts, response = self._apply_response_error(dialog, turn, injection)
        else:
            acts, response = system.acts, _response_variant(system.response, i)
        return turn_text(acts, response)

    # -- noise -----------------------------------------------------------

    def _goal_of(self, dialog: Dialog) -> UserGoal | None:
        return self.world.goals.get(dialog.goal_id) or self.world.dev_goals.get(dialog.goal_id)

    def _site_injection(
        self, dialog: Dialog, turn: int, stage: SubgoalKind, n: int
    ) -> Injection | None:
        planted = self.noise.lookup(dialog.id, turn, stage)
        if planted is not None:
            return planted
        if self.noise.rate <= 0.0:
            return None
        rng = random.Random(stable_seed(self.seed, dialog.id, turn, stage.value))
        if rng.random() >= self.noise.rate:
            return None
        if stage is SubgoalKind.STATE:
            if not dialog.turns[turn].system.state:
                return None
            error = STATE_ERRORS[rng.randrange(len(STATE_ERRORS))]
        else:
            goal = self._goal_of(dialog)
            if goal is None:
                return None
            if not self._requested_tokens(goal, dialog.turns[turn].system.response):
                return None
            error = ErrorKind.OMIT_REQUESTED_SLOT_IN_RESPONSE
        return Injection(
            dialog_id=dialog.id,
            turn=turn,
            kind=stage,
            error=error,
            sample=rng.randrange(1, n + 1),
        )

    def _requested_tokens(self, goal: UserGoal, response: str) -> list[str]:
        tokens = []
        for domain in goal.domain_names():
            for slot in sorted(goal.domains[domain].requests):
                token = placeholder(domain, slot)
                if token in response:
                    tokens.append(token)
        return tokens

    def _neutral_state(self, state: BeliefState, i: int) -> BeliefState:
        out = _copy_state(state)
        for domain in sorted(out):
            for slot in sorted(out[domain]):
                value = out[domain][slot]
                if any(ch.isalpha() for ch in value):
                    out[domain][slot] = _case_variant_value(value, i)
                    return out
        return out

    def _apply_state_error(
        self, dialog: Dialog, state: BeliefState, injection: Injection
    ) -> BeliefState:
        out = _copy_state(state)
        if not out:
            return out
        rng = random.Random(
            stable_seed(self.seed, dialog.id, injection.turn, "err", injection.sample)
        )
        domains = sorted(out)
        if injection.error is ErrorKind.SWAP_DEPARTURE_DESTINATION:
            for domain in domains:
                slots = out[domain]
                if "departure" in slots and "destination" in slots:
                    slots["departure"], slots["destination"] = (
                        slots["destination"],
                        slots["departure"],
                    )
                    return out
            # No route to swap anywhere; degrade to a wrong value.
            injection = dataclasses.replace(injection, error=ErrorKind.WRONG_VALUE)
        if injection.slot is not None:
            domain = next((d for d in domains if injection.slot in out[d]), None)
            slot = injection.slot if domain is not None else None
        else:
            domain = slot = None
        if domain is None:
            domain = domains[rng.randrange(len(domains))]
            ordered = sorted(out[domain])
            slot = ordered[rng.randrange(len(ordered))]
        slots = out[domain]
        if injection.error is ErrorKind.DROP_SLOT:
            del slots[slot]
            if not slots:
                del out[domain]
            return out
        current = normalize_value(slots[slot])
        pool = [
            v
            for v in self._value_pool.get((domain, slot), ())
            if normalize_value(v) not in (current, "dontcare")
        ]
        slots[slot] = pool[rng.randrange(len(pool))] if pool else f"not {slots[slot]}"
        return out

    def _apply_response_error(self, dialog: Dialog, turn: int, injection: Injection):
        system = dialog.turns[turn].system
        goal = self._goal_of(dialog)
        if injection.slot is not None:
            domains = goal.domain_names() if goal else tuple(self.world.ontology.domain_names())
            tokens = [
                placeholder(d, injection.slot)
                for d in domains
                if placeholder(d, injection.slot) in system.response
            ]
        else:
            tokens = self._requested_tokens(goal, system.response) if goal else []
        if not tokens:
            # Nothing requested to omit here; fall back to a distinct variant.
            return system.acts, _response_variant(system.response, injection.sample)
        rng = random.Random(stable_seed(self.seed, dialog.id, turn, "omit"))
        token = tokens[rng.randrange(len(tokens))]
        response = _strip_placeholder(system.response, token)
        domain, _, slot = token[1:-1].partition("_")
        acts = tuple(a for a in system.acts if not (a.domain == domain and a.slot == slot))
        return acts, response


class HttpBackend:
    """Client for a remote completion service.

    POSTs ``{"prompt", "n", "greedy", "temperature", "seed", "max_tokens"}``
    and expects ``{"completions": [...]}`` back. Transient failures (network
    errors, 429, 5xx) are retried with exponential backoff up to
    ``max_retries``; schema problems fail fast. Determinism is best-effort and
    entirely up to the service.
    """

    def __init__(
        self,
        url: str,
        *,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.25,
        max_in_flight: int = 8,
        session: requests.Session | None = None,
    ):
        self.url = url
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self._semaphore = threading.BoundedSemaphore(max_in_flight)
        self._session = session or requests.Session()

    def generate(
        self,
        prompt: str,
        n: int,
        *,
        greedy: bool,
        temperature: float = 1.0,
        seed: int = 0,
        max_tokens: int = DEFAULT_MAX_TOKENS,
    ) -> list[str]:
        payload = {
            "prompt": prompt,
            "n": n,
            "greedy": greedy,
            "temperature": temperature,
            "seed": seed,
            "max_tokens": max_tokens,
        }
        attempts = 0
        delay = self.backoff
        while True:
            attempts += 1
            try:
                with self._semaphore:
                    resp = self._session.post(self.url, json=payload, timeout=self.timeout)
                if resp.status_code == 429 or resp.status_code >= 500:
                    raise requests.HTTPError(f"http {resp.status_code}")
                if resp.status_code != 200:
                    raise BackendError(
                        f"http {resp.status_code} from backend",
                        prompt=prompt,
                        attempts=attempts,
                    )
                try:
                    data = resp.json()
                except ValueError as exc:
                    raise BackendError(
                        f"backend returned malformed JSON: {exc}",
                        prompt=prompt,
                        attempts=attempts,
                    ) from exc
                completions = data.get("completions")
                if (
                    not isinstance(completions, list)
                    or len(completions) != n
                    or not all(isinstance(c, str) for c in completions)
                ):
                    raise BackendError(
                        f"backend reply missing {n} string completions",
                        prompt=prompt,
                        attempts=attempts,
                    )
                return completions
            except (requests.ConnectionError, requests.Timeout, requests.HTTPError) as exc:
                if attempts > self.max_retries:
                    raise BackendError(
                        f"backend unreachable after {attempts} attempts: {exc}",
                        prompt=prompt,
                        attempts=attempts,
                    ) from exc
                time.sleep(delay)
                delay *= 2
