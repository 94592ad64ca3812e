"""Hybrid training for cardinality estimation and cardinality correction.

Everything is learned in natural-log space. In ``Estimation`` mode the head
output ``v`` is the predicted log-cardinality. In ``Correction`` mode the
prediction is ``log f(q) + v`` where ``f`` is the classical estimate, i.e.
the corrected cardinality is ``f(q) * exp(v)`` and ``v = 0`` leaves the
classical estimate untouched.

The per-query loss is the squared log error; the reported metric is the
mean absolute log error.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import improvement_factor
from .errors import ConfigurationError, NumericError, UsageError, WorkloadError
from .postproc import PostLayer
from .vqc import AnsatzSpec, CircuitEngine, EncodingSpec, init_params
from .workload import QueryFeature, Workload

MODES = ("Estimation", "Correction")
CHECKPOINT_FORMAT = "qcard-checkpoint"
CHECKPOINT_VERSION = 1
DEFAULT_EPISODES = 8000
DEFAULT_LR = 0.05
# lr reaches a tenth of its initial value after DEFAULT_EPISODES steps
DEFAULT_LR_DECAY = 0.1 ** (1 / DEFAULT_EPISODES)


@dataclass
class ModelConfig:
    mode: str
    encoding: EncodingSpec
    ansatz: AnsatzSpec
    layer: PostLayer
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.encoding.n_qubits != self.ansatz.n_qubits:
            raise ConfigurationError(
                f"encoding width {self.encoding.n_qubits} != ansatz width {self.ansatz.n_qubits}"
            )
        if self.layer.width > 1 << self.ansatz.n_qubits:
            raise ConfigurationError(
                f"{self.layer.label} reads {self.layer.width} probabilities; "
                f"{self.ansatz.n_qubits} qubits only give {1 << self.ansatz.n_qubits}"
            )


@dataclass
class TrainConfig:
    episodes: int = DEFAULT_EPISODES
    lr_initial: float = DEFAULT_LR
    lr_decay: float = DEFAULT_LR_DECAY
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    split: str | float = "full"
    workers: int = 1

    def __post_init__(self):
        if self.episodes < 0:
            raise ConfigurationError(f"episodes must be >= 0, got {self.episodes}")
        if not 0 < self.lr_decay <= 1:
            raise ConfigurationError(f"lr_decay must lie in (0, 1], got {self.lr_decay}")
        if not self.lr_initial > 0:
            raise ConfigurationError(f"lr_initial must be positive, got {self.lr_initial}")
        if self.split != "full":
            frac = float(self.split)
            if not 0 < frac < 1:
                raise ConfigurationError(f"split must be 'full' or a fraction in (0, 1), got {self.split!r}")
            self.split = frac

    def to_dict(self) -> dict:
        d = asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        # worker count does not affect results, so it stays out of checkpoints
        del d["workers"]
        return d


@dataclass
class Model:
    config: ModelConfig
    theta: np.ndarray
    rng: np.random.Generator
    episodes_trained: int = 0

    @property
    def layer(self) -> PostLayer:
        return self.config.layer

    def engine(self, workers: int = 1) -> CircuitEngine:
        return CircuitEngine(self.config.encoding, self.config.ansatz, workers)


def init_model(config: ModelConfig) -> Model:
    """Fresh model: angles uniform in [-pi, pi) drawn from the config seed."""
    rng = np.random.default_rng(config.seed)
    theta = init_params(config.ansatz, rng)
    return Model(copy.deepcopy(config), theta, rng)


class Adam:
    def __init__(self, size: int, betas=(0.9, 0.999), eps: float = 1e-8):
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad**2
        m_hat = self.m / (1 - self.b1**self.t)
        v_hat = self.v / (1 - self.b2**self.t)
        return params - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def loss(predicted_log, true_log):
    """Squared log error and its derivative with respect to the prediction."""
    predicted_log = np.asarray(predicted_log, dtype=np.float64)
    true_log = np.asarray(true_log, dtype=np.float64)
    if not (np.all(np.isfinite(predicted_log)) and np.all(np.isfinite(true_log))):
        raise NumericError(f"non-finite loss input: predicted={predicted_log}, true={true_log}")
    diff = predicted_log - true_log
    return diff**2, 2 * diff


def _offsets(model: Model, queries: list[QueryFeature]) -> np.ndarray:
    if model.config.mode == "Estimation":
        return np.zeros(len(queries))
    missing = [q.query_id for q in queries if q.classical_estimate is None]
    if missing:
        raise WorkloadError(f"correction mode needs classical estimates; missing for {', '.join(missing[:5])}")
    return np.array([q.classical_log for q in queries])


def _head_inputs(model: Model, engine: CircuitEngine, queries: list[QueryFeature]) -> np.ndarray:
    angles = engine.encode_batch([q.slots for q in queries])
    return engine.probs(angles, model.theta)[:, : model.layer.width]


def predict_batch(model: Model, queries: list[QueryFeature], workers: int = 1) -> np.ndarray:
    if not queries:
        return np.zeros(0)
    offsets = _offsets(model, queries)
    x = _head_inputs(model, model.engine(workers), queries)
    return offsets + model.layer(x)


def predict(model: Model, query: QueryFeature) -> float:
    return float(predict_batch(model, [query])[0])


def loss_and_grad(model: Model, queries: list[QueryFeature], engine: CircuitEngine | None = None,
                  angles: np.ndarray | None = None):
    """Summed squared log error over ``queries`` and its gradient.

    Returns ``(loss, d loss / d theta, d loss / d scalars)``. The angle
    gradient chains the head's analytic input gradient through the
    parameter-shift probability Jacobian.
    """
    engine = engine or model.engine()
    if angles is None:
        angles = engine.encode_batch([q.slots for q in queries])
    w = model.layer.width
    probs, jac = engine.probs_and_jacobian(angles, model.theta)
    x = probs[:, :w]
    pred = _offsets(model, queries) + model.layer(x)
    per_query, dl_dpred = loss(pred, [q.true_log for q in queries])
    dv_dx, dv_ds = model.layer.grad(x)
    g_theta = np.einsum("q,qw,qkw->k", dl_dpred, dv_dx, jac[:, :, :w])
    g_scalars = dl_dpred @ dv_ds
    return float(per_query.sum()), g_theta, g_scalars


def split_workload(queries: list[QueryFeature], split, seed: int):
    """Return (train, eval). ``"full"`` trains and evaluates on everything."""
    if split == "full":
        return list(queries), list(queries)
    order = np.random.default_rng([seed, 0x5EED]).permutation(len(queries))
    cut = max(1, min(len(queries) - 1, int(round(float(split) * len(queries)))))
    train = [queries[i] for i in sorted(order[:cut])]
    held = [queries[i] for i in sorted(order[cut:])]
    return train, held


def _fix_linear_scale(model: Model, queries: list[QueryFeature]) -> None:
    # Linear's scale is pinned to the largest training target, not learned
    layer = model.layer
    if layer.kind != "Linear":
        return
    targets = np.array([q.true_log for q in queries]) - _offsets(model, queries)
    layer.scalars[0] = float(targets.max())
    layer.train_scalars = False


@dataclass
class QueryResult:
    query_id: str
    predicted_log_card: float
    true_log_card: float
    abs_log_error: float
    baseline_log_card: float | None = None

    @property
    def baseline_abs_log_error(self) -> float | None:
        if self.baseline_log_card is None:
            return None
        return abs(self.baseline_log_card - self.true_log_card)


@dataclass
class RunReport:
    rows: list[QueryResult]
    mean_abs_log_error: float
    baseline_mean_abs_log_error: float | None = None
    improvement_factor: float | None = None
    loss_curve: list[float] = field(default_factory=list)

    @property
    def has_baseline(self) -> bool:
        return self.baseline_mean_abs_log_error is not None

    @property
    def abs_log_errors(self) -> np.ndarray:
        return np.array([r.abs_log_error for r in self.rows])


def evaluate(model: Model, workload, baseline_log_cards=None, workers: int = 1) -> RunReport:
    """Per-query absolute log errors and their mean.

    ``baseline_log_cards`` (log-space predictions of some other estimator,
    aligned with the queries) adds the baseline error and the improvement
    factor; pass ``"classical"`` to use the queries' own classical estimates.
    """
    queries = workload.queries if isinstance(workload, Workload) else list(workload)
    if not queries:
        raise UsageError("cannot evaluate on an empty workload")
    if isinstance(baseline_log_cards, str) and baseline_log_cards == "classical":
        baseline_log_cards = [q.classical_log for q in queries]
    if baseline_log_cards is not None:
        baseline_log_cards = [float(b) for b in baseline_log_cards]
        if len(baseline_log_cards) != len(queries):
            raise UsageError(f"{len(baseline_log_cards)} baseline values for {len(queries)} queries")
    preds = predict_batch(model, queries, workers)
    rows = []
    for i, (q, p) in enumerate(zip(queries, preds)):
        base = None if baseline_log_cards is None else baseline_log_cards[i]
        rows.append(QueryResult(q.query_id, float(p), q.true_log, abs(float(p) - q.true_log), base))
    report = RunReport(rows, float(np.mean([r.abs_log_error for r in rows])))
    if baseline_log_cards is not None:
        base_err = [r.baseline_abs_log_error for r in rows]
        report.baseline_mean_abs_log_error = float(np.mean(base_err))
        report.improvement_factor = improvement_factor(report, base_err)
    return report


def train(model: Model, workload, train_cfg: TrainConfig, progress=None):
    """Full-batch Adam on the summed squared log error.

    Returns ``(trained_model, report)``; the input model is not modified.
    The report covers the evaluation split and carries the per-episode loss
    curve (loss before each update). ``progress`` is called as
    ``progress(episode, loss)`` once per episode if given.
    """
    queries = workload.queries if isinstance(workload, Workload) else list(workload)
    if not queries:
        raise UsageError("cannot train on an empty workload")
    model = copy.deepcopy(model)
    train_q, eval_q = split_workload(queries, train_cfg.split, model.config.seed)
    _offsets(model, train_q)
    _fix_linear_scale(model, train_q)
    layer = model.layer
    engine = model.engine(train_cfg.workers)
    angles = engine.encode_batch([q.slots for q in train_q])
    n_theta = model.theta.size
    train_scalars = layer.train_scalars and layer.scalars.size > 0
    opt = Adam(n_theta + (layer.scalars.size if train_scalars else 0), train_cfg.adam_betas, train_cfg.adam_eps)
    curve = []
    for episode in range(train_cfg.episodes):
        try:
            total, g_theta, g_scalars = loss_and_grad(model, train_q, engine, angles)
        except NumericError as exc:
            raise NumericError(f"training diverged at episode {episode}: {exc}", episode=episode) from exc
        if not (math.isfinite(total) and np.all(np.isfinite(g_theta)) and np.all(np.isfinite(g_scalars))):
            raise NumericError(f"training diverged at episode {episode}: loss={total}", episode=episode)
        curve.append(total)
        lr = train_cfg.lr_initial * train_cfg.lr_decay**episode
        if train_scalars:
            updated = opt.step(np.concatenate([model.theta, layer.scalars]),
                               np.concatenate([g_theta, g_scalars]), lr)
            model.theta = updated[:n_theta]
            layer.scalars = updated[n_theta:]
            layer.project()
        else:
            model.theta = opt.step(model.theta, g_theta, lr)
        if progress is not None:
            progress(episode, total)
    model.episodes_trained += train_cfg.episodes
    baseline = "classical" if all(q.classical_estimate is not None for q in eval_q) else None
    report = evaluate(model, eval_q, baseline, train_cfg.workers)
    report.loss_curve = curve
    return model, report


# Checkpoints: a single JSON document, see docs in README.

def checkpoint_dict(model: Model, train_cfg: TrainConfig | None = None) -> dict:
    cfg = model.config
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "package_version": __version__,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "encoding": {"n_qubits": cfg.encoding.n_qubits, "max_table_id": cfg.encoding.max_table_id},
        "ansatz": {"n_qubits": cfg.ansatz.n_qubits, "n_layers": cfg.ansatz.n_layers},
        "layer": cfg.layer.to_dict(),
        "theta": [float(t) for t in model.theta],
        "episodes_trained": model.episodes_trained,
        "train_config": None if train_cfg is None else train_cfg.to_dict(),
        "rng_state": model.rng.bit_generator.state,
    }


def save_checkpoint(path: str | Path, model: Model, train_cfg: TrainConfig | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(checkpoint_dict(model, train_cfg), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def load_checkpoint(path: str | Path) -> Model:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read checkpoint {path}: {exc}") from exc
    if data.get("format") != CHECKPOINT_FORMAT:
        raise UsageError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if data.get("version") != CHECKPOINT_VERSION:
        raise UsageError(f"{path}: unsupported checkpoint version {data.get('version')}")
    config = ModelConfig(
        mode=data["mode"],
        encoding=EncodingSpec(**data["encoding"]),
        ansatz=AnsatzSpec(**data["ansatz"]),
        layer=PostLayer.from_dict(data["layer"]),
        seed=data["seed"],
    )
    theta = np.array(data["theta"], dtype=np.float64)
    if theta.size != config.ansatz.n_params:
        raise UsageError(f"{path}: {theta.size} angles for an ansatz with {config.ansatz.n_params}")
    rng = np.random.default_rng()
    rng.bit_generator.state = data["rng_state"]
    return Model(config, theta, rng, data["episodes_trained"])
