"""From-scratch SVM classifiers.

Two solvers share one prediction interface:

* a linear model trained by Pegasos-style SGD on the hinge loss, fast
  enough to retrain inside the labeling loop every ten labels;
* an RBF-kernel model trained by SMO with maximal-violating-pair working
  set selection, used for the baseline evaluations.

Labels are +1/-1 throughout. ``predict`` maps a zero decision value to the
negative class by convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, PatentscapeError, TrainingError
from .features.sparse import SparseVector

Example = tuple[SparseVector, int]

MODEL_FORMAT = "patentscape-model"
MODEL_VERSION = 1

DEFAULT_LAMBDA = 1e-4
DEFAULT_EPOCHS = 20
DEFAULT_C = 1.0
DEFAULT_TOLERANCE = 1e-3


def _check_data(data: Sequence[Example]) -> int:
    if not data:
        raise TrainingError("no training data")
    dim = data[0][0].dimension
    labels = set()
    for vec, y in data:
        if vec.dimension != dim:
            raise TrainingError(
                f"inconsistent feature dimensions: {vec.dimension} vs {dim}"
            )
        if y not in (-1, 1):
            raise TrainingError(f"labels must be +1/-1, got {y!r}")
        labels.add(y)
    if labels != {-1, 1}:
        raise TrainingError("training data must contain both classes")
    return dim


# ---------------------------------------------------------------------------
# Linear SVM (Pegasos SGD)
# ---------------------------------------------------------------------------


@dataclass
class LinearSvmModel:
    """Primal linear SVM: decision(x) = <w, x> + b."""

    weight: np.ndarray
    bias: float
    lam: float
    epochs: int
    rng_seed: int
    _weight_norm: float | None = field(default=None, repr=False, compare=False)

    @property
    def dimension(self) -> int:
        return int(self.weight.shape[0])

    @property
    def weight_norm(self) -> float:
        if self._weight_norm is None:
            self._weight_norm = float(np.linalg.norm(self.weight))
        return self._weight_norm


def train_linear(
    data: Sequence[Example],
    lam: float = DEFAULT_LAMBDA,
    epochs: int = DEFAULT_EPOCHS,
    rng_seed: int = 0,
    average: bool = True,
) -> LinearSvmModel:
    """Minimize lam/2 ||(w, b)||^2 + mean hinge by SGD with step 1/(lam*t).

    The bias is treated as the weight of an implicit constant feature, so
    the regularized iterate (w, b) has the usual averaged-SGD convergence;
    an unregularized intercept random-walks under this step schedule and
    never settles. With ``average`` the returned weights are the tail
    average over the last half of the updates, which is much closer to the
    optimum than the final iterate. Deterministic for a fixed rng_seed and
    data order.
    """
    if lam <= 0:
        raise TrainingError(f"lambda must be positive, got {lam}")
    dim = _check_data(data)
    rng = np.random.default_rng(rng_seed)
    w = np.zeros(dim)
    b = 0.0
    total_steps = epochs * len(data)
    burn_in = total_steps // 2
    w_acc = np.zeros(dim)
    b_acc = 0.0
    tail = 0
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(len(data)):
            t += 1
            vec, y = data[i]
            eta = 1.0 / (lam * t)
            margin = y * (vec.dot_dense(w) + b)
            shrink = 1.0 - eta * lam
            w *= shrink
            b *= shrink
            if margin < 1.0:
                vec.add_to(w, scale=eta * y)
                b += eta * y
            if average and t > burn_in:
                w_acc += w
                b_acc += b
                tail += 1
    if average and tail:
        w, b = w_acc / tail, b_acc / tail
    return LinearSvmModel(weight=w, bias=float(b), lam=lam, epochs=epochs, rng_seed=rng_seed)


def objective(model: LinearSvmModel, data: Sequence[Example]) -> float:
    """Regularized primal objective: lam/2 ||w||^2 + mean hinge loss."""
    reg = 0.5 * model.lam * float(model.weight @ model.weight)
    hinge = 0.0
    for vec, y in data:
        hinge += max(0.0, 1.0 - y * (vec.dot_dense(model.weight) + model.bias))
    return reg + hinge / len(data)


# ---------------------------------------------------------------------------
# RBF-kernel SVM (SMO, maximal violating pair)
# ---------------------------------------------------------------------------


@dataclass
class KernelSvmModel:
    """Kernel SVM: decision(x) = sum_i coef_i K(sv_i, x) + b, coef_i = alpha_i y_i."""

    support_vectors: tuple[SparseVector, ...]
    coefficients: np.ndarray
    bias: float
    gamma: float
    C: float
    tolerance: float = DEFAULT_TOLERANCE
    dual_objective: float = 0.0
    iterations: int = 0
    # full alpha over the training set, kept for KKT audits; not serialized
    alphas: np.ndarray | None = field(default=None, repr=False, compare=False)
    _sv_dense: np.ndarray | None = field(default=None, repr=False, compare=False)
    _sv_sq: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def dimension(self) -> int:
        if not self.support_vectors:
            return 0
        return self.support_vectors[0].dimension

    def _dense_cache(self) -> tuple[np.ndarray, np.ndarray]:
        if self._sv_dense is None:
            self._sv_dense = np.stack([sv.to_dense() for sv in self.support_vectors])
            self._sv_sq = (self._sv_dense**2).sum(axis=1)
        return self._sv_dense, self._sv_sq


def _kernel_matrix(X: np.ndarray, gamma: float) -> np.ndarray:
    sq = (X**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


def train_smo_rbf(
    data: Sequence[Example],
    C: float = DEFAULT_C,
    gamma: float | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
) -> KernelSvmModel:
    """SMO on the dual with maximal-violating-pair selection.

    Stops when the violating-pair gap m - M drops to ``tolerance``; the bias
    is the midpoint of the feasible interval, so every training point then
    satisfies its KKT condition within the tolerance. gamma defaults to
    1/dimension. Raises ConvergenceError (carrying the iteration count and
    the residual violation) if the gap is still open after 10n^2 updates.
    """
    if C <= 0:
        raise TrainingError(f"C must be positive, got {C}")
    dim = _check_data(data)
    if gamma is None:
        gamma = 1.0 / dim
    n = len(data)
    y = np.array([label for _, label in data], dtype=np.float64)
    X = np.stack([vec.to_dense() for vec, _ in data])
    K = _kernel_matrix(X, gamma)

    alpha = np.zeros(n)
    f = np.zeros(n)  # f_i = sum_j alpha_j y_j K_ij, the decision sans bias
    max_updates = 10 * n * n
    updates = 0
    gap = np.inf
    while True:
        bound = y - f  # candidate bias that would make point i sit on its margin
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < C)) | ((y > 0) & (alpha > 0))
        i = int(np.flatnonzero(up)[np.argmax(bound[up])])
        j = int(np.flatnonzero(low)[np.argmin(bound[low])])
        gap = float(bound[i] - bound[j])
        if gap <= tolerance:
            break
        if updates >= max_updates:
            raise ConvergenceError(
                f"SMO did not converge after {updates} updates "
                f"(violation {gap:.3e} > tolerance {tolerance:.0e})",
                iterations=updates,
                max_violation=gap,
            )
        quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-12)
        step = gap / quad
        # box limits along the direction alpha_i += y_i t, alpha_j -= y_j t
        limit_i = C - alpha[i] if y[i] > 0 else alpha[i]
        limit_j = alpha[j] if y[j] > 0 else C - alpha[j]
        step = min(step, limit_i, limit_j)
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        f += step * (K[i] - K[j])
        updates += 1

    # feasible bias interval: [max of lower bounds, min of upper bounds]
    b = float((bound[up].max() + bound[low].min()) / 2.0)

    dual = float(alpha.sum() - 0.5 * ((alpha * y) @ K @ (alpha * y)))
    sv_mask = alpha > 1e-12
    return KernelSvmModel(
        support_vectors=tuple(data[i][0] for i in np.flatnonzero(sv_mask)),
        coefficients=(alpha * y)[sv_mask],
        bias=b,
        gamma=gamma,
        C=C,
        tolerance=tolerance,
        dual_objective=dual,
        iterations=updates,
        alphas=alpha,
    )


def kkt_violations(model: KernelSvmModel, data: Sequence[Example]) -> np.ndarray:
    """Per-point KKT violation magnitudes for the training set.

    Requires the model to still carry its full alpha vector (training-time
    metadata, dropped by checkpointing).
    """
    if model.alphas is None:
        raise PatentscapeError("model has no training alphas (loaded from checkpoint?)")
    out = np.zeros(len(data))
    for idx, (vec, y) in enumerate(data):
        yf = y * decision_value(model, vec)
        a = model.alphas[idx]
        if a <= 1e-12:
            out[idx] = max(0.0, 1.0 - yf)
        elif a >= model.C - 1e-12:
            out[idx] = max(0.0, yf - 1.0)
        else:
            out[idx] = abs(1.0 - yf)
    return out


# ---------------------------------------------------------------------------
# Shared prediction interface
# ---------------------------------------------------------------------------


def decision_value(model, x: SparseVector) -> float:
    if isinstance(model, LinearSvmModel):
        if x.dimension != model.dimension:
            raise PatentscapeError(
                f"dimension mismatch: input {x.dimension}, model {model.dimension}"
            )
        return x.dot_dense(model.weight) + model.bias
    if isinstance(model, KernelSvmModel):
        if model.support_vectors and x.dimension != model.dimension:
            raise PatentscapeError(
                f"dimension mismatch: input {x.dimension}, model {model.dimension}"
            )
        total = model.bias
        for sv, coef in zip(model.support_vectors, model.coefficients):
            total += coef * np.exp(-model.gamma * sv.squared_distance(x))
        return float(total)
    raise PatentscapeError(f"not an SVM model: {type(model).__name__}")


def decision_values(model, xs: Sequence[SparseVector]) -> np.ndarray:
    """Vectorized decision values; exact match with decision_value per point."""
    if isinstance(model, LinearSvmModel):
        return np.array([decision_value(model, x) for x in xs])
    dense_svs, sv_sq = model._dense_cache()
    X = np.stack([x.to_dense() for x in xs]) if xs else np.zeros((0, model.dimension))
    d2 = (X**2).sum(axis=1)[:, None] + sv_sq[None, :] - 2.0 * (X @ dense_svs.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-model.gamma * d2) @ model.coefficients + model.bias


def predict(model, x: SparseVector) -> int:
    """Sign of the decision value; exact zero goes to the negative class."""
    return 1 if decision_value(model, x) > 0 else -1


def margin_distance(model, x: SparseVector) -> float:
    """Geometric distance to the separating surface, the uncertainty score.

    |decision| / ||w|| for the linear model (plain |decision| if w = 0) and
    |decision| for the kernel model.
    """
    dec = abs(decision_value(model, x))
    if isinstance(model, LinearSvmModel) and model.weight_norm > 0.0:
        return dec / model.weight_norm
    return dec


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def _sparse_to_obj(vec: SparseVector) -> dict:
    return {"indices": vec.indices.tolist(), "values": vec.values.tolist()}


def model_to_json(model) -> str:
    if isinstance(model, LinearSvmModel):
        body = {
            "kind": "linear-svm",
            "dimension": model.dimension,
            "parameters": {"weight": model.weight.tolist(), "bias": model.bias},
            "hyperparameters": {"lambda": model.lam, "epochs": model.epochs},
            "metadata": {"rng_seed": model.rng_seed},
        }
    elif isinstance(model, KernelSvmModel):
        body = {
            "kind": "rbf-svm",
            "dimension": model.dimension,
            "parameters": {
                "support_vectors": [_sparse_to_obj(sv) for sv in model.support_vectors],
                "coefficients": model.coefficients.tolist(),
                "bias": model.bias,
            },
            "hyperparameters": {
                "C": model.C,
                "gamma": model.gamma,
                "tolerance": model.tolerance,
            },
            "metadata": {
                "iterations": model.iterations,
                "dual_objective": model.dual_objective,
            },
        }
    else:
        raise PatentscapeError(f"not an SVM model: {type(model).__name__}")
    return json.dumps({"format": MODEL_FORMAT, "version": MODEL_VERSION, **body})


def model_from_json(text: str):
    obj = json.loads(text)
    if obj.get("format") != MODEL_FORMAT or obj.get("version") != MODEL_VERSION:
        raise PatentscapeError("not a version-1 model checkpoint")
    params = obj["parameters"]
    hyper = obj["hyperparameters"]
    if obj["kind"] == "linear-svm":
        return LinearSvmModel(
            weight=np.array(params["weight"], dtype=np.float64),
            bias=float(params["bias"]),
            lam=hyper["lambda"],
            epochs=hyper["epochs"],
            rng_seed=obj["metadata"]["rng_seed"],
        )
    if obj["kind"] == "rbf-svm":
        dim = obj["dimension"]
        svs = tuple(
            SparseVector(dim, s["indices"], s["values"]) for s in params["support_vectors"]
        )
        return KernelSvmModel(
            support_vectors=svs,
            coefficients=np.array(params["coefficients"], dtype=np.float64),
            bias=float(params["bias"]),
            gamma=hyper["gamma"],
            C=hyper["C"],
            tolerance=hyper["tolerance"],
            dual_objective=obj["metadata"]["dual_objective"],
            iterations=obj["metadata"]["iterations"],
        )
    raise PatentscapeError(f"unknown model kind {obj['kind']!r}")


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path: str | Path):
    return model_from_json(Path(path).read_text(encoding="utf-8"))
