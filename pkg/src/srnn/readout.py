"""Linear (ridge) readout from excitatory firing rates to the next input rate."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np


class SingularReadoutError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class ReadoutModel:
    weights: np.ndarray
    bias: float
    lam: float
    residual: float = 0.0


def fit_readout(X, y, lam: float = 0.0) -> ReadoutModel:
    """Minimise ``||X w + b - y||^2 + lam ||w||^2``; the bias is not penalised.

    Centering removes the bias from the normal equations.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    A = Xc.T @ Xc
    if lam == 0 and np.linalg.matrix_rank(A) < X.shape[1]:
        raise SingularReadoutError(
            "features are rank deficient; use a positive ridge parameter (lam > 0)")
    A[np.diag_indices_from(A)] += lam
    w = np.linalg.solve(A, Xc.T @ (y - y_mean))
    b = float(y_mean - x_mean @ w)
    resid = float(np.sum((X @ w + b - y) ** 2))
    return ReadoutModel(weights=w, bias=b, lam=float(lam), residual=resid)


def relative_lambda(X, lam_rel: float) -> float:
    """Scale a dimensionless ridge parameter by the mean squared feature size."""
    X = np.asarray(X, dtype=float)
    scale = float(np.mean((X - X.mean(axis=0)) ** 2)) * X.shape[0]
    return lam_rel * scale if scale > 0 else lam_rel


def predict(model: ReadoutModel, rates) -> float:
    rates = np.asarray(rates, dtype=float)
    if rates.shape != model.weights.shape:
        raise ValueError(f"expected {model.weights.shape[0]} rates, got {rates.shape}")
    return max(float(model.weights @ rates + model.bias), 0.0)


def dumps(model: ReadoutModel) -> str:
    out = io.StringIO()
    out.write(f"# srnn-readout lam={model.lam!r} dim={len(model.weights)} "
              f"residual={model.residual!r}\n")
    out.write(f"{model.bias!r}\n")
    for w in model.weights.tolist():
        out.write(f"{w!r}\n")
    return out.getvalue()


def loads(text: str) -> ReadoutModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# srnn-readout"):
        raise ValueError("missing '# srnn-readout' header")
    meta = dict(item.split("=", 1) for item in lines[0].split()[2:])
    dim = int(meta["dim"])
    values = [float(v) for v in lines[1:]]
    if len(values) != dim + 1:
        raise ValueError(f"expected bias plus {dim} weights, found {len(values)} values")
    return ReadoutModel(weights=np.array(values[1:]), bias=values[0], lam=float(meta["lam"]),
                        residual=float(meta.get("residual", 0.0)))
