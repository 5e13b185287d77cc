"""Hard-label oracles: top-1 labels only, with exact query accounting.

A classification oracle exposes a single ``classify(point) -> int`` call.
Synthetic kinds (halfspace, ball, polytope, quadric, mlp) are analytic and
deterministic; the http and subprocess kinds delegate to an external
process speaking a one-JSON-object-per-request protocol. Every call runs
through a :class:`QueryLedger` so attacks can be billed per query and
stopped at a hard budget.

Oracles validate that queries stay inside the declared input domain; they
never repair out-of-domain points, clipping is the caller's job.
"""
from __future__ import annotations

import hashlib
import json
import subprocess
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field

import numpy as np

DOMAIN_TOL = 1e-9
ENDPOINT_ENV_VAR = "HARDLABEL_ORACLE_ENDPOINT"


class OracleError(Exception):
    pass


class BudgetExhaustedError(OracleError):
    """Raised instead of answering once the query budget would be exceeded."""


class TransportError(OracleError):
    pass


class MalformedResponseError(TransportError):
    pass


def phi(label: int, goal: "AttackGoal") -> int:
    """Success indicator: 1 iff the label satisfies the attack goal.

    Targeted goals succeed when the label equals the target; untargeted
    goals succeed when the label differs from the true label. Pure; never
    touches a ledger.
    """
    if goal.kind == "targeted":
        return 1 if label == goal.target_label else 0
    return 1 if label != goal.true_label else 0


@dataclass(frozen=True)
class AttackGoal:
    kind: str  # "targeted" | "untargeted"
    true_label: int
    target_label: int | None = None

    def __post_init__(self):
        if self.kind not in ("targeted", "untargeted"):
            raise ValueError(f"unknown goal kind {self.kind!r}")
        if self.kind == "targeted":
            if self.target_label is None:
                raise ValueError("targeted goal needs a target_label")
            if self.target_label == self.true_label:
                raise ValueError("target_label must differ from true_label")


class QueryLedger:
    """Monotone query counter with an optional hard budget.

    ``charge`` is atomic; when a budget is set, exceeding it raises
    :class:`BudgetExhaustedError` before the count moves. With
    ``keep_trace`` enabled every charge also appends ``(index, digest)``
    where the digest hashes the queried point.
    """

    def __init__(self, budget: int | None = None, keep_trace: bool = False):
        if budget is not None and budget <= 0:
            raise ValueError("budget must be positive")
        self.budget = budget
        self.count = 0
        self.keep_trace = keep_trace
        self.trace: list[tuple[int, str]] = []
        self._lock = threading.Lock()

    def check_available(self) -> None:
        if self.budget is not None and self.count + 1 > self.budget:
            raise BudgetExhaustedError(f"budget of {self.budget} queries exhausted")

    def charge(self, point=None) -> int:
        with self._lock:
            if self.budget is not None and self.count + 1 > self.budget:
                raise BudgetExhaustedError(f"budget of {self.budget} queries exhausted")
            self.count += 1
            if self.keep_trace:
                digest = ""
                if point is not None:
                    digest = hashlib.blake2b(
                        np.ascontiguousarray(point, dtype=float).tobytes(), digest_size=8
                    ).hexdigest()
                self.trace.append((self.count, digest))
            return self.count


@dataclass
class OracleSpec:
    """Declarative description of an oracle, JSON-serializable.

    ``params`` is kind-specific: halfspace takes ``w`` and ``b``; ball takes
    ``center`` and ``rho``; polytope takes ``normals`` and ``offsets`` (label
    0 iff every ``<a_i, p> <= c_i`` holds); quadric takes ``A``, ``b`` and
    ``c``; mlp takes ``weights`` inline or ``weights_path``; http takes
    ``endpoint`` (overridable via the HARDLABEL_ORACLE_ENDPOINT env var)
    plus retry settings; subprocess takes ``command`` (an argv list).

    ``input_domain`` is a per-coordinate ``[lo, hi]`` box, given either as a
    single pair or one pair per coordinate. The default box is the unit
    cube.
    """

    kind: str
    input_dimension: int
    params: dict = field(default_factory=dict)
    num_classes: int = 2
    input_domain: tuple = (0.0, 1.0)
    name: str = ""

    def __post_init__(self):
        if self.input_dimension < 2:
            raise ValueError("input_dimension must be at least 2")
        if not self.name:
            self.name = self.kind

    def domain_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        dom = np.asarray(self.input_domain, dtype=float)
        if dom.shape == (2,):
            lo = np.full(self.input_dimension, dom[0])
            hi = np.full(self.input_dimension, dom[1])
        elif dom.shape == (self.input_dimension, 2):
            lo, hi = dom[:, 0], dom[:, 1]
        else:
            raise ValueError(f"bad input_domain shape {dom.shape}")
        if np.any(lo >= hi):
            raise ValueError("input_domain must satisfy lo < hi")
        return lo, hi

    def to_dict(self) -> dict:
        dom = self.input_domain
        if isinstance(dom, np.ndarray):
            dom = dom.tolist()
        elif isinstance(dom, tuple):
            dom = list(dom)
        return {
            "kind": self.kind,
            "input_dimension": self.input_dimension,
            "params": _jsonify(self.params),
            "num_classes": self.num_classes,
            "input_domain": dom,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OracleSpec":
        dom = d.get("input_domain", (0.0, 1.0))
        if isinstance(dom, list):
            dom = tuple(tuple(p) for p in dom) if dom and isinstance(dom[0], list) else tuple(dom)
        return cls(
            kind=d["kind"],
            input_dimension=d["input_dimension"],
            params=d.get("params", {}),
            num_classes=d.get("num_classes", 2),
            input_domain=dom,
            name=d.get("name", ""),
        )


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


class Oracle:
    """Base class wiring domain validation and ledger billing."""

    def __init__(self, spec: OracleSpec, ledger: QueryLedger | None = None):
        self.spec = spec
        self.ledger = ledger
        self._lo, self._hi = spec.domain_bounds()

    @property
    def dimension(self) -> int:
        return self.spec.input_dimension

    def clip(self, p) -> np.ndarray:
        return np.clip(np.asarray(p, dtype=float), self._lo, self._hi)

    def _validate(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dimension,):
            raise ValueError(f"expected a vector of dimension {self.dimension}, got shape {p.shape}")
        if np.any(p < self._lo - DOMAIN_TOL) or np.any(p > self._hi + DOMAIN_TOL):
            raise ValueError("query point lies outside the oracle input domain (clip before querying)")
        return p

    def classify(self, p) -> int:
        p = self._validate(p)
        if self.ledger is not None:
            self.ledger.charge(p)
        return self._label(p)

    def _label(self, p: np.ndarray) -> int:
        raise NotImplementedError


class HalfspaceOracle(Oracle):
    """Label 1 iff ``<w, p> >= b``; the one oracle with a known optimum.

    For a benign point the closest adversarial point and its distance have
    closed forms, which makes this the measuring stick for convergence
    tests.
    """

    def __init__(self, spec, ledger=None):
        super().__init__(spec, ledger)
        self.w = np.asarray(spec.params["w"], dtype=float)
        self.b = float(spec.params["b"])
        if self.w.shape != (self.dimension,):
            raise ValueError("halfspace normal has wrong dimension")

    def _label(self, p):
        return 1 if float(self.w @ p) >= self.b else 0

    def optimal_adversarial(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        gap = max(0.0, self.b - float(self.w @ x))
        return x + gap * self.w / float(self.w @ self.w)

    def optimal_distortion(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return max(0.0, self.b - float(self.w @ x)) / float(np.linalg.norm(self.w))


class BallOracle(Oracle):
    """Label 1 iff the point lies at distance >= rho from the center."""

    def __init__(self, spec, ledger=None):
        super().__init__(spec, ledger)
        self.center = np.asarray(spec.params["center"], dtype=float)
        self.rho = float(spec.params["rho"])

    def _label(self, p):
        return 1 if float(np.linalg.norm(p - self.center)) >= self.rho else 0


class PolytopeOracle(Oracle):
    """Label 0 iff every halfspace constraint ``<a_i, p> <= c_i`` holds."""

    def __init__(self, spec, ledger=None):
        super().__init__(spec, ledger)
        self.normals = np.asarray(spec.params["normals"], dtype=float)
        self.offsets = np.asarray(spec.params["offsets"], dtype=float)
        if self.normals.ndim != 2 or self.normals.shape[1] != self.dimension:
            raise ValueError("polytope normals must be an (m, n) matrix")

    def _label(self, p):
        return 0 if bool(np.all(self.normals @ p <= self.offsets)) else 1


class QuadricOracle(Oracle):
    """Label 1 iff ``p' A p + b' p + c >= 0``."""

    def __init__(self, spec, ledger=None):
        super().__init__(spec, ledger)
        self.A = np.asarray(spec.params["A"], dtype=float)
        self.b = np.asarray(spec.params["b"], dtype=float)
        self.c = float(spec.params["c"])

    def _label(self, p):
        return 1 if float(p @ self.A @ p + self.b @ p + self.c) >= 0.0 else 0


def make_mlp_weights(dim: int, hidden: int, num_classes: int, seed: int) -> dict:
    """Random two-layer ReLU weights with declared shapes, JSON-ready."""
    rng = np.random.default_rng(seed)
    return {
        "w1": (rng.standard_normal((hidden, dim)) / np.sqrt(dim)).tolist(),
        "b1": rng.standard_normal(hidden).tolist(),
        "w2": (rng.standard_normal((num_classes, hidden)) / np.sqrt(hidden)).tolist(),
        "b2": rng.standard_normal(num_classes).tolist(),
    }


def save_mlp_weights(path, weights: dict) -> None:
    with open(path, "w") as f:
        json.dump(weights, f)


def load_mlp_weights(path) -> dict:
    with open(path) as f:
        return json.load(f)


class MlpOracle(Oracle):
    """Fixed two-layer ReLU network; label is the argmax logit."""

    def __init__(self, spec, ledger=None):
        super().__init__(spec, ledger)
        weights = spec.params.get("weights")
        if weights is None:
            weights = load_mlp_weights(spec.params["weights_path"])
        self.w1 = np.asarray(weights["w1"], dtype=float)
        self.b1 = np.asarray(weights["b1"], dtype=float)
        self.w2 = np.asarray(weights["w2"], dtype=float)
        self.b2 = np.asarray(weights["b2"], dtype=float)
        if self.w1.shape[1] != self.dimension:
            raise ValueError("mlp first layer does not match the input dimension")
        if self.w2.shape[0] != spec.num_classes:
            raise ValueError("mlp output layer does not match num_classes")

    def _label(self, p):
        hidden = np.maximum(self.w1 @ p + self.b1, 0.0)
        return int(np.argmax(self.w2 @ hidden + self.b2))


def _default_http_transport(url: str, payload: bytes, timeout: float):
    req = urllib.request.Request(
        url, data=payload, headers={"Content-Type": "application/json"}, method="POST"
    )
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as e:
        return e.code, e.read()
    except (urllib.error.URLError, OSError) as e:
        raise TransportError(f"request to {url} failed: {e}") from e


class HttpOracle(Oracle):
    """Remote oracle behind ``POST /classify`` with JSON bodies.

    Request ``{"input": [...]}``, response ``{"label": int}``. Transient
    failures are retried with exponential backoff up to ``max_retries``;
    one logical classification is billed once however many retries it took.
    The endpoint can be overridden with the HARDLABEL_ORACLE_ENDPOINT
    environment variable. Domain validation is left to the server.
    """

    def __init__(self, spec, ledger=None, transport=None):
        super().__init__(spec, ledger)
        import os

        self.endpoint = os.environ.get(ENDPOINT_ENV_VAR) or spec.params["endpoint"]
        self.max_retries = int(spec.params.get("max_retries", 5))
        self.backoff = float(spec.params.get("backoff", 0.05))
        self.timeout = float(spec.params.get("timeout", 10.0))
        self._transport = transport or _default_http_transport
        self._lock = threading.Lock()

    def classify(self, p) -> int:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dimension,):
            raise ValueError(f"expected a vector of dimension {self.dimension}, got shape {p.shape}")
        if self.ledger is not None:
            self.ledger.check_available()
        with self._lock:
            label = self._request(p)
        if self.ledger is not None:
            self.ledger.charge(p)
        return label

    def _request(self, p: np.ndarray) -> int:
        url = self.endpoint.rstrip("/") + "/classify"
        payload = json.dumps({"input": p.tolist()}).encode()
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                status, body = self._transport(url, payload, self.timeout)
            except TransportError as e:
                last_error = e
                status, body = None, None
            if status == 200:
                try:
                    data = json.loads(body)
                    return int(data["label"])
                except (ValueError, KeyError, TypeError) as e:
                    raise MalformedResponseError(f"bad response body {body!r}") from e
            if status is not None:
                last_error = TransportError(f"server answered status {status}")
            if attempt < self.max_retries:
                time.sleep(self.backoff * (2**attempt))
        raise TransportError(f"giving up after {self.max_retries} retries: {last_error}")


class SubprocessOracle(Oracle):
    """Oracle behind a line protocol: one JSON object per line, stdin/stdout.

    The child process receives ``{"input": [...]}`` per line and must
    answer ``{"label": int}`` per line, same schema as the HTTP oracle.
    Requests are serialized; the child is spawned lazily and kept alive.
    """

    def __init__(self, spec, ledger=None):
        super().__init__(spec, ledger)
        self.command = list(spec.params["command"])
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def classify(self, p) -> int:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dimension,):
            raise ValueError(f"expected a vector of dimension {self.dimension}, got shape {p.shape}")
        if self.ledger is not None:
            self.ledger.check_available()
        with self._lock:
            proc = self._ensure_proc()
            try:
                proc.stdin.write(json.dumps({"input": p.tolist()}) + "\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (BrokenPipeError, OSError) as e:
                raise TransportError(f"subprocess oracle died: {e}") from e
        if not line:
            raise TransportError("subprocess oracle closed its stdout")
        try:
            label = int(json.loads(line)["label"])
        except (ValueError, KeyError, TypeError) as e:
            raise MalformedResponseError(f"bad response line {line!r}") from e
        if self.ledger is not None:
            self.ledger.charge(p)
        return label

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.terminate()
            self._proc.wait(timeout=5)
        self._proc = None


_ORACLE_KINDS = {
    "halfspace": HalfspaceOracle,
    "ball": BallOracle,
    "polytope": PolytopeOracle,
    "quadric": QuadricOracle,
    "mlp": MlpOracle,
    "http": HttpOracle,
    "subprocess": SubprocessOracle,
}


def make_oracle(spec: OracleSpec, ledger: QueryLedger | None = None, **kwargs) -> Oracle:
    try:
        cls = _ORACLE_KINDS[spec.kind]
    except KeyError:
        raise ValueError(f"unknown oracle kind {spec.kind!r}") from None
    return cls(spec, ledger, **kwargs)


def diagonal_halfspace_spec(dim: int, margin_at_center: float = 0.5, domain=(0.0, 1.0),
                            name: str = "") -> OracleSpec:
    """Halfspace oracle whose boundary sits ``margin_at_center`` above the domain center.

    The normal is the normalized all-ones direction, so the center of the
    domain box is a benign point at exactly that margin and its closest
    adversarial point stays inside the box for moderate margins.
    """
    w = np.full(dim, 1.0 / np.sqrt(dim))
    lo, hi = float(domain[0]), float(domain[1])
    center = np.full(dim, 0.5 * (lo + hi))
    b = float(w @ center) + margin_at_center
    return OracleSpec(
        kind="halfspace",
        input_dimension=dim,
        params={"w": w.tolist(), "b": b},
        input_domain=(lo, hi),
        name=name or f"halfspace-d{dim}",
    )
