"""Learned free-motion map from actuation to normalized sensor readings.

A small two-hidden-layer network (5 and 3 units, tanh) with a linear output
layer. Fitting runs seeded full-batch gradient descent with momentum to find
the feature geometry, then a Levenberg-Marquardt refinement over all
parameters; if the residual target is missed, deterministic restarts with
derived seeds follow. Inputs and targets are standardized during training and
the standardization is folded back into the first and last layers, so the
stored model maps raw actuation to raw (normalized-sensor-space) readings.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import FitDidNotConverge

HIDDEN = (5, 3)

MODEL_FILE_VERSION = 1


@dataclass
class FitConfig:
    target_rmse: float = 1e-2
    max_iters: int = 5000          # gradient-descent budget per attempt
    refine_iters: int = 300        # Levenberg-Marquardt budget per attempt
    learning_rate: float = 0.2
    momentum: float = 0.9
    seed: int = 0
    restarts: int = 3
    min_samples: int = 25


class FreeMotionModel:
    """Deterministic smooth map a -> s for one actuator group.

    Layers: input m -> tanh(5) -> tanh(3) -> linear n.
    """

    def __init__(self, weights, biases, fit_residual_rmse: float,
                 input_labels=(), output_labels=()):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise ValueError("model expects exactly three layers")
        self.fit_residual_rmse = float(fit_residual_rmse)
        self.input_labels = tuple(input_labels)
        self.output_labels = tuple(output_labels)

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_outputs(self) -> int:
        return self.weights[2].shape[0]

    def predict(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        squeeze = a.ndim == 1
        x = np.atleast_2d(a)
        h1 = np.tanh(x @ self.weights[0].T + self.biases[0])
        h2 = np.tanh(h1 @ self.weights[1].T + self.biases[1])
        out = h2 @ self.weights[2].T + self.biases[2]
        return out[0] if squeeze else out

    def input_jacobian(self, a: np.ndarray) -> np.ndarray:
        """Closed-form derivative d s / d a, shape (n_outputs, n_inputs)."""
        a = np.asarray(a, dtype=np.float64)
        z1 = self.weights[0] @ a + self.biases[0]
        h1 = np.tanh(z1)
        z2 = self.weights[1] @ h1 + self.biases[1]
        h2 = np.tanh(z2)
        d1 = (1.0 - h1 ** 2)[:, None] * self.weights[0]         # (5, m)
        d2 = (1.0 - h2 ** 2)[:, None] * (self.weights[1] @ d1)  # (3, m)
        return self.weights[2] @ d2                              # (n, m)

    def lipschitz_bound(self) -> float:
        """Global bound on the operator norm of the input Jacobian."""
        bound = 1.0
        for w in self.weights:
            bound *= np.linalg.norm(w, 2)
        return float(bound)

    def to_dict(self) -> dict:
        return {
            "version": MODEL_FILE_VERSION,
            "layer_sizes": [self.n_inputs, HIDDEN[0], HIDDEN[1], self.n_outputs],
            "input_labels": list(self.input_labels),
            "output_labels": list(self.output_labels),
            "fit_residual_rmse": self.fit_residual_rmse,
            # weights stored row-major, one flat list per layer
            "weights": [w.flatten().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FreeMotionModel":
        if d.get("version") != MODEL_FILE_VERSION:
            raise ValueError(f"unsupported model file version {d.get('version')!r}")
        sizes = d["layer_sizes"]
        shapes = [(sizes[1], sizes[0]), (sizes[2], sizes[1]), (sizes[3], sizes[2])]
        weights = [np.array(w, dtype=np.float64).reshape(sh)
                   for w, sh in zip(d["weights"], shapes)]
        biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
        return cls(weights, biases, d["fit_residual_rmse"],
                   d.get("input_labels", ()), d.get("output_labels", ()))

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False),
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FreeMotionModel":
        return cls.from_dict(yaml.safe_load(Path(path).read_text(encoding="utf-8")))


# -- fitting --------------------------------------------------------------------


def _init_params(m: int, n: int, rng: np.random.Generator):
    sizes = [m, HIDDEN[0], HIDDEN[1], n]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-scale, scale, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(ws, bs, x):
    h1 = np.tanh(x @ ws[0].T + bs[0])
    h2 = np.tanh(h1 @ ws[1].T + bs[1])
    return h1, h2, h2 @ ws[2].T + bs[2]


def _pack(ws, bs) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(ws, bs)])


def _unpack(theta: np.ndarray, m: int, n: int):
    i = 0
    ws, bs = [], []
    for a, b in zip([m, HIDDEN[0], HIDDEN[1]], [HIDDEN[0], HIDDEN[1], n]):
        ws.append(theta[i:i + a * b].reshape(b, a))
        i += a * b
        bs.append(theta[i:i + b])
        i += b
    return ws, bs


def _residual_jacobian(theta: np.ndarray, x: np.ndarray, y: np.ndarray,
                       m: int, n: int):
    """Residual vector (sample-major) and its Jacobian w.r.t. all parameters."""
    ws, bs = _unpack(theta, m, n)
    big_n = x.shape[0]
    h1, h2, p = _forward(ws, bs, x)
    r = (p - y).ravel()
    jac = np.zeros((big_n * n, theta.size))
    d2 = 1.0 - h2 ** 2
    d1 = 1.0 - h1 ** 2
    o_w0 = 0
    o_b0 = m * HIDDEN[0]
    o_w1 = o_b0 + HIDDEN[0]
    o_b1 = o_w1 + HIDDEN[0] * HIDDEN[1]
    o_w2 = o_b1 + HIDDEN[1]
    o_b2 = o_w2 + HIDDEN[1] * n
    rows_base = np.arange(big_n) * n
    for k in range(n):
        rows = rows_base + k
        jac[rows, o_w2 + k * HIDDEN[1]: o_w2 + (k + 1) * HIDDEN[1]] = h2
        jac[rows, o_b2 + k] = 1.0
        gz2 = ws[2][k][None, :] * d2                      # (N, 3)
        for j in range(HIDDEN[1]):
            jac[rows, o_w1 + j * HIDDEN[0]: o_w1 + (j + 1) * HIDDEN[0]] = \
                gz2[:, j:j + 1] * h1
            jac[rows, o_b1 + j] = gz2[:, j]
        gz1 = (gz2 @ ws[1]) * d1                          # (N, 5)
        for j in range(HIDDEN[0]):
            jac[rows, o_w0 + j * m: o_w0 + (j + 1) * m] = gz1[:, j:j + 1] * x
            jac[rows, o_b0 + j] = gz1[:, j]
    return r, jac


def _lm_refine(theta, x, y, m, n, iters, sd_y, target):
    lam = 1e-3
    r, jac = _residual_jacobian(theta, x, y, m, n)
    sq = float(r @ r)
    for _ in range(iters):
        a = jac.T @ jac
        g = jac.T @ r
        try:
            step = np.linalg.solve(
                a + lam * np.diag(np.maximum(np.diag(a), 1e-12)), -g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            if lam > 1e12:
                break
            continue
        theta_new = theta + step
        r_new, jac_new = _residual_jacobian(theta_new, x, y, m, n)
        sq_new = float(r_new @ r_new)
        if sq_new < sq:
            theta, r, jac, sq = theta_new, r_new, jac_new, sq_new
            lam = max(lam / 3.0, 1e-12)
            if _raw_rmse(r, sd_y, n) <= target:
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                break
    return theta


def _raw_rmse(residual_flat: np.ndarray, sd_y: np.ndarray, n: int) -> float:
    return float(np.sqrt(np.mean((residual_flat.reshape(-1, n) * sd_y) ** 2)))


def fit_free_motion_model(actuations: np.ndarray, sensors: np.ndarray,
                          config: FitConfig | None = None,
                          input_labels=(), output_labels=()) -> FreeMotionModel:
    """Fit the free-motion map on contact-free samples.

    `actuations` is (N, m), `sensors` is (N, n) in normalized units. Training
    is deterministic given the seed; raises FitDidNotConverge when the best
    residual over all restarts stays above target_rmse.
    """
    cfg = config or FitConfig()
    x = np.asarray(actuations, dtype=np.float64)
    y = np.asarray(sensors, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] != y.shape[0]:
        raise ValueError("actuation and sensor sample counts differ")
    if x.shape[0] < cfg.min_samples:
        raise ValueError(
            f"free-motion fit needs at least {cfg.min_samples} samples, got {x.shape[0]}"
        )
    m = x.shape[1]
    n = y.shape[1]

    mu_x, sd_x = x.mean(axis=0), x.std(axis=0)
    mu_y, sd_y = y.mean(axis=0), y.std(axis=0)
    sd_x = np.where(sd_x > 1e-12, sd_x, 1.0)
    sd_y = np.where(sd_y > 1e-12, sd_y, 1.0)
    xs = (x - mu_x) / sd_x
    ys = (y - mu_y) / sd_y

    best_theta = None
    best_rmse = np.inf
    for attempt in range(max(1, cfg.restarts + 1)):
        rng = np.random.default_rng(cfg.seed + attempt)
        ws, bs = _init_params(m, n, rng)
        vw = [np.zeros_like(w) for w in ws]
        vb = [np.zeros_like(b) for b in bs]
        for _ in range(cfg.max_iters):
            h1, h2, p = _forward(ws, bs, xs)
            err = p - ys
            g_out = err * (2.0 / err.size)
            gw2 = g_out.T @ h2
            gb2 = g_out.sum(axis=0)
            back2 = (g_out @ ws[2]) * (1.0 - h2 ** 2)
            gw1 = back2.T @ h1
            gb1 = back2.sum(axis=0)
            back1 = (back2 @ ws[1]) * (1.0 - h1 ** 2)
            gw0 = back1.T @ xs
            gb0 = back1.sum(axis=0)
            for i, (gw, gb) in enumerate([(gw0, gb0), (gw1, gb1), (gw2, gb2)]):
                vw[i] = cfg.momentum * vw[i] - cfg.learning_rate * gw
                vb[i] = cfg.momentum * vb[i] - cfg.learning_rate * gb
                ws[i] = ws[i] + vw[i]
                bs[i] = bs[i] + vb[i]
        theta = _pack(ws, bs)
        theta = _lm_refine(theta, xs, ys, m, n, cfg.refine_iters, sd_y,
                           cfg.target_rmse)
        r, _ = _residual_jacobian(theta, xs, ys, m, n)
        rmse = _raw_rmse(r, sd_y, n)
        if rmse < best_rmse:
            best_rmse, best_theta = rmse, theta
        if best_rmse <= cfg.target_rmse:
            break

    if best_rmse > cfg.target_rmse:
        raise FitDidNotConverge(
            f"fit RMSE {best_rmse:.3e} above target {cfg.target_rmse:.3e} "
            f"after {cfg.restarts + 1} attempts"
        )
    bw, bb = _unpack(best_theta, m, n)
    # fold input standardization into layer 0 and output de-standardization
    # into layer 2 so the stored model maps raw actuation to raw sensors
    w0 = bw[0] / sd_x[None, :]
    b0 = bb[0] - bw[0] @ (mu_x / sd_x)
    w2 = bw[2] * sd_y[:, None]
    b2 = bb[2] * sd_y + mu_y
    return FreeMotionModel([w0, bw[1], w2], [b0, bb[1], b2], best_rmse,
                           input_labels, output_labels)


def save_model_bundle(path, models: dict, table, residual_report: dict | None = None) -> None:
    """Write a versioned bundle of per-group models plus the normalization table."""
    doc = {
        "version": MODEL_FILE_VERSION,
        "normalization": {
            "labels": list(table.labels),
            "lo": table.lo.tolist(),
            "hi": table.hi.tolist(),
        },
        "models": {name: m.to_dict() for name, m in models.items()},
    }
    if residual_report:
        doc["residuals"] = residual_report
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")


def load_model_bundle(path):
    """Read a model bundle; returns (models dict, NormalizationTable)."""
    from .sensing import NormalizationTable

    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != MODEL_FILE_VERSION:
        raise ValueError(f"unsupported bundle version {doc.get('version')!r}")
    norm = doc["normalization"]
    table = NormalizationTable(
        np.array(norm["lo"]), np.array(norm["hi"]), tuple(norm["labels"])
    )
    models = {name: FreeMotionModel.from_dict(d) for name, d in doc["models"].items()}
    return models, table
