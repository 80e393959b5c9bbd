"""The four-step reference scenario (sequence with a crowdsourced third step).

One neutral script, two drivers: in-process engine and HTTP gateway. Both
must produce the same event log bytes, which is also what the checked-in
golden log pins down.
"""

from __future__ import annotations

REFERENCE_DEF_ID = "crowd-proposals"


def run_reference_scenario(driver):
    """start -> A -> B -> open C, 3 claims (t=20/40/60), 2 submissions,
    deadline at t=100 force-terminates the third worker -> D -> COMPLETED."""
    driver.start(REFERENCE_DEF_ID)
    driver.begin("A")
    driver.advance(5)
    driver.complete("A", {"brief": "draft v1"})
    driver.begin("B")
    driver.advance(10)
    driver.complete("B", {"approved": True})
    driver.begin("C")

    driver.advance(20)
    w1 = driver.register("Worker One", "w1@crowd.example")
    e1 = driver.claim(w1)
    driver.advance(40)
    w2 = driver.register("Worker Two", "w2@crowd.example")
    e2 = driver.claim(w2)
    driver.advance(60)
    w3 = driver.register("Worker Three", "w3@crowd.example")
    e3 = driver.claim(w3)

    driver.advance(70)
    driver.submit(w1, e1, {"proposal": "alpha"})
    driver.advance(80)
    driver.submit(w2, e2, {"proposal": "bravo"})

    driver.advance(120)  # deadline 100 fires on the way

    driver.begin("D")
    driver.advance(125)
    driver.complete("D", {"published": True})
    return {"workers": [w1, w2, w3], "executions": [e1, e2, e3]}


class EngineDriver:
    """Runs the script against an Engine directly."""

    def __init__(self, engine, actor: str = "alice"):
        self.engine = engine
        self.actor = actor
        self.instance_id = None

    @property
    def item_id(self) -> str:
        return f"{self.instance_id}:C"

    def start(self, definition_id):
        snap = self.engine.start_instance(definition_id, initiator=self.actor)
        self.instance_id = snap["instance"]["id"]

    def begin(self, activity_id):
        self.engine.begin_activity(self.instance_id, activity_id, self.actor)

    def complete(self, activity_id, result):
        self.engine.complete_activity(self.instance_id, activity_id, result=result)

    def advance(self, to):
        self.engine.advance_clock(to=to)

    def register(self, name, contact):
        return self.engine.register_external(name, contact)["user_id"]

    def claim(self, worker_id):
        return self.engine.claim_public(self.item_id, worker_id)["execution_id"]

    def submit(self, worker_id, execution_id, payload):
        self.engine.submit_public(self.item_id, execution_id, payload, worker_id)

    def abandon(self, worker_id, execution_id):
        self.engine.abandon_public(self.item_id, execution_id, worker_id)


class HttpDriver:
    """Runs the script through the gateway using an httpx-compatible client.
    ``self.actor`` must be an internal user whose token is ``<actor>-token``."""

    def __init__(self, client, actor: str = "alice"):
        self.client = client
        self.actor = actor
        self.instance_id = None
        self._tokens: dict[str, str] = {}

    @property
    def item_id(self) -> str:
        return f"{self.instance_id}:C"

    def _auth(self, token):
        return {"Authorization": f"Bearer {token}"}

    def _internal(self):
        return self._auth(f"{self.actor}-token")

    def _ok(self, response):
        assert response.status_code < 400, f"{response.status_code}: {response.text}"
        return response.json()

    def start(self, definition_id):
        doc = self._ok(self.client.post("/instances", json={"definition_id": definition_id},
                                        headers=self._internal()))
        self.instance_id = doc["instance"]["id"]

    def begin(self, activity_id):
        self._ok(self.client.post(
            f"/instances/{self.instance_id}/activities/{activity_id}/begin",
            json={}, headers=self._internal()))

    def complete(self, activity_id, result):
        self._ok(self.client.post(
            f"/instances/{self.instance_id}/activities/{activity_id}/complete",
            json={"result": result}, headers=self._internal()))

    def advance(self, to):
        self._ok(self.client.post("/clock/advance", json={"to": to}, headers=self._internal()))

    def register(self, name, contact):
        doc = self._ok(self.client.post("/users/register",
                                        json={"display_name": name, "contact": contact}))
        self._tokens[doc["user_id"]] = doc["token"]
        return doc["user_id"]

    def claim(self, worker_id):
        doc = self._ok(self.client.post(f"/public/tasks/{self.item_id}/claim",
                                        headers=self._auth(self._tokens[worker_id])))
        return doc["execution_id"]

    def submit(self, worker_id, execution_id, payload):
        self._ok(self.client.post(
            f"/public/tasks/{self.item_id}/submissions/{execution_id}",
            json={"payload": payload}, headers=self._auth(self._tokens[worker_id])))

    def abandon(self, worker_id, execution_id):
        self._ok(self.client.post(
            f"/public/tasks/{self.item_id}/abandon/{execution_id}",
            headers=self._auth(self._tokens[worker_id])))
