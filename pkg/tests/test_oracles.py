import json
import subprocess
import sys
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardlabel import oracles as orc
from hardlabel.mock_server import MockOracleServer


def halfspace_spec(dim=4, w=None, b=1.0, domain=(-5.0, 5.0)):
    w = [1.0] + [0.0] * (dim - 1) if w is None else w
    return orc.OracleSpec(
        kind="halfspace", input_dimension=dim, params={"w": w, "b": b}, input_domain=domain
    )


class TestSyntheticKinds:
    def test_halfspace_sign(self):
        oracle = orc.make_oracle(halfspace_spec())
        assert oracle.classify(np.array([2.0, 0.0, 0.0, 0.0])) == 1
        assert oracle.classify(np.zeros(4)) == 0
        assert oracle.classify(np.array([1.0, 0.0, 0.0, 0.0])) == 1  # boundary inclusive

    def test_ball_inside_outside(self):
        spec = orc.OracleSpec(
            kind="ball", input_dimension=2, params={"center": [0.0, 0.0], "rho": 1.0},
            input_domain=(-5.0, 5.0),
        )
        oracle = orc.make_oracle(spec)
        assert oracle.classify(np.array([0.5, 0.0])) == 0
        assert oracle.classify(np.array([2.0, 0.0])) == 1

    def test_polytope_all_constraints(self):
        spec = orc.OracleSpec(
            kind="polytope", input_dimension=2,
            params={"normals": [[1.0, 0.0], [0.0, 1.0]], "offsets": [1.0, 1.0]},
            input_domain=(-5.0, 5.0),
        )
        oracle = orc.make_oracle(spec)
        assert oracle.classify(np.array([0.5, 0.5])) == 0
        assert oracle.classify(np.array([2.0, 0.5])) == 1
        assert oracle.classify(np.array([0.5, 2.0])) == 1

    def test_quadric_sign(self):
        spec = orc.OracleSpec(
            kind="quadric", input_dimension=2,
            params={"A": [[1.0, 0.0], [0.0, 1.0]], "b": [0.0, 0.0], "c": -1.0},
            input_domain=(-5.0, 5.0),
        )
        oracle = orc.make_oracle(spec)
        assert oracle.classify(np.array([2.0, 0.0])) == 1  # |p|^2 >= 1
        assert oracle.classify(np.array([0.5, 0.0])) == 0

    def test_mlp_constant_network(self):
        weights = {
            "w1": np.zeros((3, 2)).tolist(), "b1": [0.0, 0.0, 0.0],
            "w2": np.zeros((2, 3)).tolist(), "b2": [0.1, 0.9],
        }
        spec = orc.OracleSpec(
            kind="mlp", input_dimension=2, params={"weights": weights}, num_classes=2
        )
        oracle = orc.make_oracle(spec)
        for p in ([0.1, 0.9], [0.5, 0.5], [0.0, 0.0]):
            assert oracle.classify(np.asarray(p)) == 1

    def test_mlp_weight_file_roundtrip(self, tmp_path):
        weights = orc.make_mlp_weights(dim=4, hidden=8, num_classes=3, seed=5)
        path = tmp_path / "weights.json"
        orc.save_mlp_weights(path, weights)
        spec_inline = orc.OracleSpec(kind="mlp", input_dimension=4, params={"weights": weights}, num_classes=3)
        spec_file = orc.OracleSpec(kind="mlp", input_dimension=4, params={"weights_path": str(path)}, num_classes=3)
        a, b = orc.make_oracle(spec_inline), orc.make_oracle(spec_file)
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = rng.uniform(0, 1, size=4)
            assert a.classify(p) == b.classify(p)

    def test_domain_validation(self):
        oracle = orc.make_oracle(halfspace_spec(domain=(0.0, 1.0)))
        with pytest.raises(ValueError):
            oracle.classify(np.array([2.0, 0.0, 0.0, 0.0]))
        with pytest.raises(ValueError):
            oracle.classify(np.array([0.5, 0.5, 0.5]))  # dimension mismatch

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_determinism(self, seed):
        rng = np.random.default_rng(seed)
        spec = halfspace_spec(w=rng.normal(size=4).tolist(), b=float(rng.normal()))
        oracle = orc.make_oracle(spec)
        p = rng.uniform(-5, 5, size=4)
        assert oracle.classify(p) == oracle.classify(p)

    def test_halfspace_analytic_optimum(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            w = rng.normal(size=5)
            b = float(rng.normal())
            spec = halfspace_spec(dim=5, w=w.tolist(), b=b, domain=(-100.0, 100.0))
            oracle = orc.make_oracle(spec)
            x = rng.normal(size=5)
            best = oracle.optimal_adversarial(x)
            assert oracle.classify(best + 1e-9 * w / np.linalg.norm(w)) == 1
            assert np.linalg.norm(best - x) == pytest.approx(oracle.optimal_distortion(x), abs=1e-12)


class TestPhi:
    def test_targeted_hit(self):
        goal = orc.AttackGoal("targeted", true_label=3, target_label=7)
        assert orc.phi(7, goal) == 1
        assert orc.phi(3, goal) == 0
        assert orc.phi(5, goal) == 0

    def test_untargeted(self):
        goal = orc.AttackGoal("untargeted", true_label=3)
        assert orc.phi(3, goal) == 0
        assert orc.phi(5, goal) == 1

    def test_goal_validation(self):
        with pytest.raises(ValueError):
            orc.AttackGoal("targeted", true_label=3)
        with pytest.raises(ValueError):
            orc.AttackGoal("targeted", true_label=3, target_label=3)

    def test_phi_never_touches_the_ledger(self):
        ledger = orc.QueryLedger()
        oracle = orc.make_oracle(halfspace_spec(), ledger)
        label = oracle.classify(np.zeros(4))
        before = ledger.count
        for _ in range(10):
            orc.phi(label, orc.AttackGoal("untargeted", true_label=0))
        assert ledger.count == before


class TestQueryLedger:
    def test_exact_counting(self):
        ledger = orc.QueryLedger()
        oracle = orc.make_oracle(halfspace_spec(), ledger)
        for i in range(25):
            oracle.classify(np.zeros(4))
        assert ledger.count == 25

    def test_budget_raises_instead_of_truncating(self):
        ledger = orc.QueryLedger(budget=3)
        oracle = orc.make_oracle(halfspace_spec(), ledger)
        for _ in range(3):
            oracle.classify(np.zeros(4))
        with pytest.raises(orc.BudgetExhaustedError):
            oracle.classify(np.zeros(4))
        assert ledger.count == 3

    def test_trace_hashes_points(self):
        ledger = orc.QueryLedger(keep_trace=True)
        oracle = orc.make_oracle(halfspace_spec(), ledger)
        oracle.classify(np.zeros(4))
        oracle.classify(np.ones(4))
        oracle.classify(np.zeros(4))
        assert [i for i, _ in ledger.trace] == [1, 2, 3]
        digests = [d for _, d in ledger.trace]
        assert digests[0] == digests[2] != digests[1]

    def test_concurrent_charges_are_exact(self):
        ledger = orc.QueryLedger()
        oracle = orc.make_oracle(halfspace_spec(), ledger)

        def hammer():
            for _ in range(200):
                oracle.classify(np.zeros(4))

        threads = [threading.Thread(target=hammer) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert ledger.count == 1600


class TestHttpOracle:
    def http_spec(self, endpoint="http://unused.invalid", **params):
        return orc.OracleSpec(
            kind="http", input_dimension=2,
            params={"endpoint": endpoint, "backoff": 0.0, **params},
            input_domain=(-5.0, 5.0),
        )

    def test_scripted_retries_count_once(self):
        responses = [(503, b""), (503, b""), (503, b""), (200, b'{"label": 1}')]
        calls = []

        def transport(url, payload, timeout):
            calls.append(json.loads(payload))
            return responses[len(calls) - 1]

        ledger = orc.QueryLedger()
        oracle = orc.make_oracle(self.http_spec(), ledger, transport=transport)
        assert oracle.classify(np.array([2.0, 0.0])) == 1
        assert len(calls) == 4
        assert ledger.count == 1

    def test_retry_cap_exhausted(self):
        def transport(url, payload, timeout):
            return 503, b""

        ledger = orc.QueryLedger()
        oracle = orc.make_oracle(self.http_spec(max_retries=2), ledger, transport=transport)
        with pytest.raises(orc.TransportError):
            oracle.classify(np.array([0.0, 0.0]))
        assert ledger.count == 0  # failed classification is not billed

    def test_malformed_response(self):
        def transport(url, payload, timeout):
            return 200, b'{"nope": true}'

        oracle = orc.make_oracle(self.http_spec(), orc.QueryLedger(), transport=transport)
        with pytest.raises(orc.MalformedResponseError):
            oracle.classify(np.array([0.0, 0.0]))

    def test_against_real_mock_server(self):
        spec = halfspace_spec(dim=2, w=[1.0, 0.0], b=1.0)
        with MockOracleServer(spec) as server:
            ledger = orc.QueryLedger()
            client = orc.make_oracle(self.http_spec(endpoint=server.endpoint), ledger)
            assert client.classify(np.array([2.0, 0.0])) == 1
            assert client.classify(np.array([0.0, 0.0])) == 0
            assert ledger.count == 2

    def test_constant_zero_server(self):
        weights = {"w1": [[0.0, 0.0]] * 2, "b1": [0.0, 0.0], "w2": [[0.0, 0.0]] * 2, "b2": [0.9, 0.1]}
        spec = orc.OracleSpec(kind="mlp", input_dimension=2, params={"weights": weights})
        with MockOracleServer(spec) as server:
            client = orc.make_oracle(self.http_spec(endpoint=server.endpoint), orc.QueryLedger())
            assert client.classify(np.array([3.0, -3.0])) == 0

    def test_endpoint_env_override(self, monkeypatch):
        monkeypatch.setenv(orc.ENDPOINT_ENV_VAR, "http://from-env:1")
        oracle = orc.make_oracle(self.http_spec(endpoint="http://from-spec:2"))
        assert oracle.endpoint == "http://from-env:1"


class TestSubprocessOracle:
    def test_line_protocol_roundtrip(self, tmp_path):
        inner = halfspace_spec(dim=2, w=[1.0, 0.0], b=1.0)
        spec_path = tmp_path / "oracle.json"
        spec_path.write_text(json.dumps(inner.to_dict()))
        spec = orc.OracleSpec(
            kind="subprocess", input_dimension=2,
            params={"command": [sys.executable, "-m", "hardlabel.stdio_oracle", str(spec_path)]},
            input_domain=(-5.0, 5.0),
        )
        ledger = orc.QueryLedger()
        oracle = orc.make_oracle(spec, ledger)
        try:
            assert oracle.classify(np.array([2.0, 0.0])) == 1
            assert oracle.classify(np.array([0.0, 0.0])) == 0
            assert ledger.count == 2
        finally:
            oracle.close()

    def test_dead_child_raises_transport_error(self):
        spec = orc.OracleSpec(
            kind="subprocess", input_dimension=2,
            params={"command": [sys.executable, "-c", "pass"]},
            input_domain=(-5.0, 5.0),
        )
        oracle = orc.make_oracle(spec, orc.QueryLedger())
        with pytest.raises(orc.TransportError):
            oracle.classify(np.array([0.0, 0.0]))
