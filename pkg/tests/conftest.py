import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from subtod.model import (
    Database,
    Dialog,
    DialogAct,
    DomainSchema,
    GoalEntry,
    Ontology,
    SystemTurn,
    Turn,
    UserGoal,
)
from subtod.subgoals import CandidateGroup, label_success
from subtod.synthetic import build_world

HOTELS3 = (
    {
        "name": "alpha hotel",
        "area": "north",
        "pricerange": "moderate",
        "internet": "yes",
        "address": "12 chesterton road",
        "phone": "01223 111111",
    },
    {
        "name": "beta hotel",
        "area": "north",
        "pricerange": "cheap",
        "internet": "no",
        "address": "5 mill lane",
        "phone": "01223 222222",
    },
    {
        "name": "gamma hotel",
        "area": "south",
        "pricerange": "moderate",
        "internet": "yes",
        "address": "82 regent street",
        "phone": "01223 333333",
    },
)


@pytest.fixture(scope="session")
def db3():
    ontology = Ontology(
        domains={
            "hotel": DomainSchema(
                informable=("area", "pricerange", "internet"),
                requestable=("address", "phone"),
                acts=("inform", "request", "recommend"),
            ),
            "taxi": DomainSchema(
                informable=("departure", "destination"),
                requestable=("phone", "type"),
                acts=("inform", "request"),
                entity_bearing=False,
            ),
        }
    )
    return Database(ontology=ontology, tables={"hotel": HOTELS3})


@pytest.fixture
def hotel_goal():
    return UserGoal(
        domains={
            "hotel": GoalEntry(
                constraints={"area": "north", "pricerange": "moderate", "internet": "yes"},
                requests=frozenset({"address"}),
            )
        }
    )


@pytest.fixture
def hotel_dialog():
    state = {"hotel": {"area": "north", "pricerange": "moderate", "internet": "yes"}}
    return Dialog(
        id="h-1",
        goal_id="h-1",
        turns=(
            Turn(
                user="i need a hotel in the north, moderate price, with wifi.",
                system=SystemTurn(
                    state={d: dict(s) for d, s in state.items()},
                    acts=(DialogAct("hotel", "recommend", "name"),),
                    response="how about [hotel_name]? it is in the north.",
                ),
            ),
            Turn(
                user="what is the address?",
                system=SystemTurn(
                    state={d: dict(s) for d, s in state.items()},
                    acts=(DialogAct("hotel", "inform", "address"),),
                    response="the address is [hotel_address]. anything else?",
                ),
            ),
        ),
    )


def _turn(user, state, acts, response):
    return Turn(
        user=user,
        system=SystemTurn(
            state={d: dict(s) for d, s in state.items()}, acts=acts, response=response
        ),
    )


@pytest.fixture
def mixed_group(db3):
    """One successful dialog and three that each break it at a different site.

    cand-o carries a wrong area in its turn-1 state, cand-j never mentions the
    address, cand-u never mentions the phone; everything else is shared, so
    exactly three replacement sites can flip the winner.
    """
    goal = UserGoal(
        domains={
            "hotel": GoalEntry(
                constraints={"area": "north", "pricerange": "moderate", "internet": "yes"},
                requests=frozenset({"address", "phone"}),
            )
        }
    )
    s0 = {"hotel": {"area": "north"}}
    s1 = {"hotel": {"area": "north", "pricerange": "moderate", "internet": "yes"}}
    s1_bad = {"hotel": {"area": "south", "pricerange": "moderate", "internet": "yes"}}
    users = (
        "i need a hotel in the north.",
        "moderate please, and it should have wifi.",
        "what is the address?",
        "and the phone number?",
    )
    t0 = _turn(users[0], s0, (DialogAct("hotel", "request", "pricerange"),),
               "what price range would you like?")
    t1 = _turn(users[1], s1, (DialogAct("hotel", "recommend", "name"),),
               "i recommend [hotel_name].")
    t1_bad = _turn(users[1], s1_bad, (DialogAct("hotel", "recommend", "name"),),
                   "i recommend [hotel_name].")
    t2 = _turn(users[2], s1, (DialogAct("hotel", "inform", "address"),),
               "the address is [hotel_address].")
    t2_bad = _turn(users[2], s1, (DialogAct("hotel", "inform", "area"),),
                   "it is in the north of town.")
    t3 = _turn(users[3], s1, (DialogAct("hotel", "inform", "phone"),),
               "the phone is [hotel_phone]. goodbye!")
    t3_bad = _turn(users[3], s1, (), "you are welcome, goodbye!")

    winner = Dialog(id="cand-w", goal_id="g-1", turns=(t0, t1, t2, t3))
    loser_state = Dialog(id="cand-o", goal_id="g-1", turns=(t0, t1_bad, t2, t3))
    loser_addr = Dialog(id="cand-j", goal_id="g-1", turns=(t0, t1, t2_bad, t3))
    loser_phone = Dialog(id="cand-u", goal_id="g-1", turns=(t0, t1, t2, t3_bad))
    group = CandidateGroup(
        goal_id="g-1",
        goal=goal,
        source=winner,
        candidates=(winner, loser_state, loser_addr, loser_phone),
    )
    return label_success(group, db3)


@pytest.fixture(scope="session")
def small_world():
    return build_world(12, seed=7, dev_goals=3)


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("content-length") or 0)
        payload = json.loads(self.rfile.read(length) or b"{}")
        with self.server.lock:
            self.server.payloads.append(payload)
        status, body = self.server.responder(payload)
        self.send_response(status)
        self.send_header("content-type", "application/json")
        self.end_headers()
        if not isinstance(body, bytes):
            body = json.dumps(body).encode("utf-8")
        self.wfile.write(body)

    def log_message(self, *args):
        pass


class CompletionServer:
    def __init__(self):
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        self._httpd.lock = threading.Lock()
        self._httpd.payloads = []
        self._httpd.responder = lambda payload: (
            200,
            {"completions": ["stub"] * payload.get("n", 1)},
        )
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        host, port = self._httpd.server_address
        self.url = f"http://{host}:{port}/v1/completions"

    @property
    def payloads(self):
        with self._httpd.lock:
            return list(self._httpd.payloads)

    def respond_with(self, responder):
        self._httpd.responder = responder

    def serve_backend(self, backend):
        def responder(payload):
            completions = backend.generate(
                payload["prompt"],
                payload["n"],
                greedy=payload["greedy"],
                temperature=payload.get("temperature", 1.0),
                seed=payload.get("seed", 0),
                max_tokens=payload.get("max_tokens", 256),
            )
            return 200, {"completions": completions}

        self._httpd.responder = responder

    def close(self):
        self._httpd.shutdown()
        self._httpd.server_close()


@pytest.fixture
def completion_server():
    server = CompletionServer()
    yield server
    server.close()
