import json
import threading
import time
from pathlib import Path

import numpy as np
import pytest

from pegrl.sim import default_config, render_frame, reset
from pegrl.telemetry import (
    PROTOCOL_SCHEMA_VERSION,
    ProtocolViolation,
    TelemetryService,
    WsClient,
    decode_client,
    encode,
)


def client_msg(**kw):
    kw.setdefault("schema_version", PROTOCOL_SCHEMA_VERSION)
    return json.dumps(kw)


class TestProtocol:
    def test_round_trip(self):
        raw = encode({"type": "metrics", "alpha": 0.1})
        parsed = json.loads(raw)
        assert parsed["schema_version"] == PROTOCOL_SCHEMA_VERSION
        assert parsed["type"] == "metrics"

    def test_rejects_unknown_type(self):
        with pytest.raises(ProtocolViolation):
            decode_client(client_msg(type="reboot"))

    def test_rejects_wrong_schema(self):
        with pytest.raises(ProtocolViolation):
            decode_client(json.dumps({"type": "twist", "schema_version": 99, "twist": [0, 0, 0]}))

    def test_rejects_bad_twist(self):
        with pytest.raises(ProtocolViolation):
            decode_client(client_msg(type="twist", twist=[1.0, 2.0]))
        with pytest.raises(ProtocolViolation):
            decode_client(client_msg(type="twist", twist="up"))

    def test_rejects_bad_label(self):
        with pytest.raises(ProtocolViolation):
            decode_client(client_msg(type="label", outcome="maybe"))

    def test_accepts_valid_messages(self):
        for m in (
            client_msg(type="takeover_on"),
            client_msg(type="takeover_off"),
            client_msg(type="twist", twist=[0.1, -0.2, 0.0]),
            client_msg(type="label", outcome="success"),
        ):
            decode_client(m)


class TestServiceLoop:
    def setup_method(self):
        self.service = TelemetryService(port=0)

    def teardown_method(self):
        self.service.close()

    def _connect(self):
        return WsClient("127.0.0.1", self.service.port)

    def test_frame_broadcast_reaches_client(self):
        client = self._connect()
        time.sleep(0.05)
        state = reset(default_config("square", 0.25), seed=0)
        self.service.publish_frame(render_frame(state), extra={"transition": 7})
        msg = json.loads(client.recv_text(timeout=3))
        assert msg["type"] == "frame"
        assert msg["schema_version"] == PROTOCOL_SCHEMA_VERSION
        assert msg["transition"] == 7
        assert msg["walls"] and msg["peg"]
        client.close()

    def test_takeover_and_twist_flow(self):
        client = self._connect()
        time.sleep(0.05)
        client.send_text(client_msg(type="takeover_on"))
        client.send_text(client_msg(type="twist", twist=[0.5, -0.5, 0.01]))
        deadline = time.time() + 3
        cmds = []
        while time.time() < deadline and len(cmds) < 2:
            cmds += self.service.poll_commands()
            time.sleep(0.01)
        kinds = [c["type"] for c in cmds]
        assert kinds == ["takeover_on", "twist"]
        assert self.service.has_takeover()
        np.testing.assert_allclose(self.service.latest_twist(), [0.5, -0.5, 0.01])
        client.send_text(client_msg(type="takeover_off"))
        deadline = time.time() + 3
        while time.time() < deadline and self.service.has_takeover():
            self.service.poll_commands()
            time.sleep(0.01)
        assert not self.service.has_takeover()
        np.testing.assert_array_equal(self.service.latest_twist(), [0.0, 0.0, 0.0])
        client.close()

    def test_malformed_message_gets_error_frame_session_intact(self):
        client = self._connect()
        time.sleep(0.05)
        client.send_text("this is not json")
        msg = json.loads(client.recv_text(timeout=3))
        assert msg["type"] == "error"
        # session still works afterwards
        client.send_text(client_msg(type="takeover_on"))
        deadline = time.time() + 3
        while time.time() < deadline and not self.service.has_takeover():
            self.service.poll_commands()
            time.sleep(0.01)
        assert self.service.has_takeover()
        client.close()

    def test_twist_without_takeover_rejected(self):
        client = self._connect()
        time.sleep(0.05)
        client.send_text(client_msg(type="twist", twist=[1, 0, 0]))
        msg = json.loads(client.recv_text(timeout=3))
        assert msg["type"] == "error"
        client.close()

    def test_disconnect_reverts_takeover(self):
        client = self._connect()
        time.sleep(0.05)
        client.send_text(client_msg(type="takeover_on"))
        deadline = time.time() + 3
        while time.time() < deadline and not self.service.has_takeover():
            self.service.poll_commands()
            time.sleep(0.01)
        client.close()
        deadline = time.time() + 3
        cmds = []
        while time.time() < deadline and self.service.has_takeover():
            cmds += self.service.poll_commands()
            time.sleep(0.01)
        assert not self.service.has_takeover()

    def test_second_client_cannot_steal_takeover(self):
        c1 = self._connect()
        c2 = self._connect()
        time.sleep(0.05)
        c1.send_text(client_msg(type="takeover_on"))
        deadline = time.time() + 3
        while time.time() < deadline and not self.service.has_takeover():
            self.service.poll_commands()
            time.sleep(0.01)
        c2.send_text(client_msg(type="takeover_on"))
        msg = json.loads(c2.recv_text(timeout=3))
        assert msg["type"] == "error"
        c1.close()
        c2.close()


class TestTrainingIntegration:
    def _run(self, tmp_path, shared_reach, shared_insert_demos, telemetry, name):
        from pegrl.harness import ExperimentConfig, run_training

        config = ExperimentConfig(
            geometry="square", clearance=1.5, method="il_rl_tactile_full", seed=0,
            outdir=str(tmp_path / name),
            reach_demo_count=12, reach_epochs=8, insert_demo_count=5,
            budget_transitions=40, warmup_steps=20, sac_hidden=(32, 32),
            max_attempt_steps=30,
        )
        run_training(
            config, reach_policy=shared_reach[0], reach_endpoints=shared_reach[1],
            insert_demo_data=shared_insert_demos, telemetry=telemetry,
        )
        return config.outdir

    def test_idle_service_does_not_change_results(self, tmp_path, shared_reach, shared_insert_demos):
        out_a = self._run(tmp_path, shared_reach, shared_insert_demos, None, "plain")
        service = TelemetryService(port=0)
        try:
            out_b = self._run(tmp_path, shared_reach, shared_insert_demos, service, "served")
        finally:
            service.close()

        def load(outdir, name):
            recs = [json.loads(l) for l in open(Path(outdir) / name)]
            for r in recs:
                r.pop("wall_clock", None)
            return recs

        for name in ("episodes.jsonl", "transitions.jsonl", "metrics.jsonl"):
            assert load(out_a, name) == load(out_b, name), name

    def test_human_takeover_lands_in_demo_buffer(self, tmp_path, shared_reach, shared_insert_demos):
        from pegrl.replay import DualBuffer

        service = TelemetryService(port=0)
        stop = threading.Event()

        def operator():
            client = WsClient("127.0.0.1", service.port)
            try:
                client.recv_text(timeout=30)  # wait for the first frame
                client.send_text(client_msg(type="takeover_on"))
                client.send_text(client_msg(type="twist", twist=[0.0, 1.0, 0.0]))
                t0 = time.time()
                while not stop.is_set() and time.time() - t0 < 30:
                    try:
                        client.recv_text(timeout=1)
                    except Exception:
                        pass
            finally:
                client.close()

        thread = threading.Thread(target=operator, daemon=True)
        thread.start()
        try:
            outdir = self._run(tmp_path, shared_reach, shared_insert_demos, service, "human")
        finally:
            stop.set()
            service.close()
            thread.join(timeout=5)

        transitions = [json.loads(l) for l in open(Path(outdir) / "transitions.jsonl")]
        assert any(t["intervened"] for t in transitions)
        buf = DualBuffer.load(Path(outdir) / "buffer.jsonl")
        lifted = [
            t for t in buf.demo.items
            if t.intervened and t.action[1] == pytest.approx(1.0)
        ]
        assert lifted, "takeover twists must be stored as demo transitions"
