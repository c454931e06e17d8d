"""Brute-force reference implementations the tests compare the package against.

The functions in the first half are written from the metric definitions using
plain dicts, lists, and explicit loops: a character-walking tokenizer instead
of a regex, greedy multiset matching instead of Counter arithmetic, exhaustive
replacement enumeration instead of the package's traversal. Two independent
implementations rarely share a bug, so agreement is evidence of correctness.

The adapters at the bottom only convert package objects into the plain data
the oracles consume; they contain no evaluation logic of their own.
"""

from __future__ import annotations

import math

# --------------------------------------------------------------- plain text


def norm_text(value):
    out = []
    pending_space = False
    for ch in value.strip().lower():
        if ch.isspace():
            pending_space = True
            continue
        if pending_space and out:
            out.append(" ")
        pending_space = False
        out.append(ch)
    return "".join(out)


def tokenize(text):
    tokens = []
    word = []
    for ch in text.lower():
        if ch.isalnum() or ch == "_":
            word.append(ch)
            continue
        if word:
            tokens.append("".join(word))
            word = []
        if not ch.isspace():
            tokens.append(ch)
    if word:
        tokens.append("".join(word))
    return tokens


def bleu(hypotheses, references):
    """Corpus BLEU-4, 0..100, epsilon-smoothed numerators, standard brevity."""
    if len(hypotheses) != len(references):
        raise ValueError("corpus size mismatch")
    hyp_len = 0
    ref_len = 0
    matched = {1: 0, 2: 0, 3: 0, 4: 0}
    total = {1: 0, 2: 0, 3: 0, 4: 0}
    for hyp, ref in zip(hypotheses, references):
        hyp_tokens = tokenize(hyp)
        ref_tokens = tokenize(ref)
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in (1, 2, 3, 4):
            grams = [tuple(hyp_tokens[i : i + n]) for i in range(len(hyp_tokens) - n + 1)]
            available = [tuple(ref_tokens[i : i + n]) for i in range(len(ref_tokens) - n + 1)]
            total[n] += len(grams)
            for gram in grams:
                if gram in available:
                    available.remove(gram)
                    matched[n] += 1
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n in (1, 2, 3, 4):
        numerator = matched[n] if matched[n] > 0 else 1e-9
        denominator = total[n] if total[n] > 0 else 1
        log_sum += 0.25 * math.log(numerator / denominator)
    brevity = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_sum)


# ------------------------------------------------------------ goal metrics


def query(table, constraints):
    rows = []
    for row in table:
        keep = True
        for slot, want in constraints.items():
            if norm_text(want) == "dontcare":
                continue
            if slot not in row or norm_text(row[slot]) != norm_text(want):
                keep = False
                break
        if keep:
            rows.append(row)
    return rows


def inform_success(goal, turns, schemas, tables):
    """(inform, success) for one dialog, each a conjunction over goal domains.

    ``goal`` is {domain: {"constraints": {...}, "requests": [...]}}, ``turns``
    a list of {"state": {...}, "response": str, ...} dicts in dialog order.
    """
    inform_all = True
    success_all = True
    for domain in goal:
        constraints = goal[domain].get("constraints", {})
        requests = goal[domain].get("requests", [])
        schema = schemas[domain]
        if not schema.get("entity_bearing", True):
            inform = True
        else:
            name_slot = schema.get("name_slot", "name")
            tag = "[" + domain + "_" + name_slot + "]"
            offer_turn = -1
            for t in range(len(turns)):
                if tag in turns[t]["response"]:
                    offer_turn = t
            if offer_turn < 0:
                inform = len(constraints) == 0
            else:
                belief = {}
                for slot, value in turns[offer_turn].get("state", {}).get(domain, {}).items():
                    if slot in schema.get("informable", []):
                        belief[slot] = value
                offered = query(tables.get(domain, []), belief)
                wanted = query(tables.get(domain, []), constraints)
                wanted_names = [row.get(name_slot, "") for row in wanted]
                inform = False
                for row in offered:
                    if row.get(name_slot, "") in wanted_names:
                        inform = True
                        break
        success = inform
        if success:
            for slot in requests:
                tag = "[" + domain + "_" + slot + "]"
                hit = False
                for turn in turns:
                    if tag in turn["response"]:
                        hit = True
                        break
                if not hit:
                    success = False
                    break
        inform_all = inform_all and inform
        success_all = success_all and success
    return inform_all, success_all


def detect(dialogs, labels, goal, schemas, tables):
    """Every (winner_id, turn, kind, loser_id) whose splice breaks the winner.

    Exhaustive enumeration: each successful dialog x turn x fragment kind x
    unsuccessful dialog, skipping fragments the winner already has and turns
    the loser does not reach.
    """
    winners = [d for d, ok in zip(dialogs, labels) if ok]
    losers = [d for d, ok in zip(dialogs, labels) if not ok]
    flips = set()
    for winner in winners:
        for t in range(len(winner["turns"])):
            mine = winner["turns"][t]
            for kind in ("state", "act_response"):
                for loser in losers:
                    if t >= len(loser["turns"]):
                        continue
                    theirs = loser["turns"][t]
                    if kind == "state":
                        if mine["state"] == theirs["state"]:
                            continue
                        patched = dict(mine, state=theirs["state"])
                    else:
                        if (
                            mine["acts"] == theirs["acts"]
                            and mine["response"] == theirs["response"]
                        ):
                            continue
                        patched = dict(mine, acts=theirs["acts"], response=theirs["response"])
                    spliced = winner["turns"][:t] + [patched] + winner["turns"][t + 1 :]
                    if not inform_success(goal, spliced, schemas, tables)[1]:
                        flips.add((winner["id"], t, kind, loser["id"]))
    return flips


# ----------------------------------------------- package-object adapters

from subtod.corpus import dialog_to_dict, goal_to_dict  # noqa: E402


def plain_dialog(dialog):
    data = dialog_to_dict(dialog)
    return {"id": data["id"], "turns": data["turns"]}


def plain_goal(goal):
    return goal_to_dict(goal)


def plain_schemas(db):
    return {
        domain: {
            "informable": list(schema.informable),
            "entity_bearing": schema.entity_bearing,
            "name_slot": schema.name_slot,
        }
        for domain, schema in db.ontology.domains.items()
    }


def plain_tables(db):
    return {domain: [dict(e) for e in rows] for domain, rows in db.tables.items()}


def detect_flip_set(samples):
    """Library detection output as the oracle's quadruple set."""
    flips = set()
    for sample in samples:
        for loser_id in sample.negative_ids:
            flips.add((sample.dialog_id, sample.turn, sample.kind.value, loser_id))
    return flips
