"""
Noise-free Gaussian-process regression with a squared-exponential kernel.

Inputs and outputs are standardized to zero mean and unit variance before
fitting, so the prior standard deviation is exactly one everywhere and a
posterior std of, say, 0.01 means "one percent of the output spread".

The model keeps the Cholesky factor ``L`` of ``K + jitter * I`` together with
the weights ``w = (K + jitter * I)^-1 y``:

    mean(x*) = k*^T w
    var(x*)  = 1 - || L^-1 k* ||^2        (clamped below at 0)
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import InconsistentDataError, InputError, SingularKernelError

DEFAULT_JITTER = 1e-8
MAX_JITTER = 1e-4
ML_LENGTHSCALES = (0.3, 0.5, 1.0, 2.0, 4.0)
_VAR_CEILING = 1.0 + 1e-6


class ConstantFeatureWarning(UserWarning):
    """A dimension has zero spread; its scale was clamped to one."""


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, values, name="values"):
        """Per-column mean and population std; zero spread clamps the scale to 1."""
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        mean = arr.mean(axis=0)
        scale = arr.std(axis=0)
        flat = ~(scale > 0)
        if flat.any():
            warnings.warn(f"{name}: constant column(s) {np.flatnonzero(flat).tolist()}, scale clamped to 1",
                          ConstantFeatureWarning, stacklevel=2)
            scale = np.where(flat, 1.0, scale)
        return cls(mean, scale)

    def transform(self, values):
        return (np.asarray(values, dtype=float) - self.mean) / self.scale

    def inverse(self, values):
        return np.asarray(values, dtype=float) * self.scale + self.mean


def standardize(values, stats: Standardizer | None = None):
    """Standardize ``values``; fits the statistics when none are given.

    Returns the transformed values and the statistics used.
    """
    if stats is None:
        stats = Standardizer.fit(values)
    if np.any(~(np.asarray(stats.scale) > 0)):
        raise InputError("standardizer scale must be > 0")
    return stats.transform(values), stats


def destandardize(values, stats: Standardizer):
    return stats.inverse(values)


@dataclass(frozen=True)
class RbfKernel:
    lengthscale: np.ndarray

    def __post_init__(self):
        ell = np.atleast_1d(np.asarray(self.lengthscale, dtype=float))
        if np.any(~(ell > 0)):
            raise InputError(f"lengthscale must be > 0, got {ell}")
        object.__setattr__(self, "lengthscale", ell)

    def __call__(self, a, b):
        a = np.asarray(a, dtype=float) / self.lengthscale
        b = np.asarray(b, dtype=float) / self.lengthscale
        sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * a @ b.T
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-0.5 * sq)


@dataclass(frozen=True)
class Prediction:
    """Predictive mean (output units unless ``standardized``) and std (standardized)."""

    mean: np.ndarray
    std: np.ndarray
    standardized: bool = False


@dataclass(frozen=True)
class GpModel:
    x: np.ndarray  # standardized inputs, (n, d)
    y: np.ndarray  # standardized outputs, (n,)
    kernel: RbfKernel
    jitter: float
    chol: np.ndarray  # lower factor of K + jitter I
    weights: np.ndarray
    x_stats: Standardizer
    y_stats: Standardizer
    raw_y: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def log_marginal_likelihood(self) -> float:
        alpha = self.weights
        return float(-0.5 * self.y @ alpha - np.log(np.diag(self.chol)).sum()
                     - 0.5 * self.n * np.log(2.0 * np.pi))

    def predict(self, queries, destandardize: bool = True) -> Prediction:
        q = _as_2d(queries)
        if q.shape[1] != self.dim:
            raise InputError(f"query dimension {q.shape[1]} does not match training dimension {self.dim}")
        qs = self.x_stats.transform(q)
        kstar = self.kernel(self.x, qs)
        mean = kstar.T @ self.weights
        v = solve_triangular(self.chol, kstar, lower=True, check_finite=False)
        var = 1.0 - np.einsum("ij,ij->j", v, v)
        if np.any(var > _VAR_CEILING):
            raise ArithmeticError("posterior variance exceeded the prior variance")
        std = np.sqrt(np.maximum(var, 0.0))
        if destandardize:
            mean = self.y_stats.inverse(mean)
        return Prediction(np.asarray(mean).ravel(), std, standardized=not destandardize)


def _as_2d(x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError(f"inputs must be 1-D or 2-D, got shape {arr.shape}")
    return arr


def _dedupe(x, y):
    """Collapse repeated rows; conflicting outputs are an error."""
    _, first, inverse = np.unique(x, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    if len(first) == len(x):
        return x, y
    for group in range(len(first)):
        ys = y[inverse == group]
        if np.ptp(ys) != 0.0:
            raise InconsistentDataError(
                f"duplicate input {x[first[group]].tolist()} has conflicting outputs {ys.tolist()}")
    keep = np.sort(first)
    return x[keep], y[keep]


def cholesky_with_jitter(k, jitter=DEFAULT_JITTER, max_jitter=MAX_JITTER):
    """Factor ``k + jitter * I``, multiplying jitter by 10 on failure.

    Returns the factor and the jitter actually used.
    """
    eye = np.eye(k.shape[0])
    j = jitter
    while True:
        try:
            return np.linalg.cholesky(k + j * eye), j
        except np.linalg.LinAlgError:
            if j >= max_jitter:
                raise SingularKernelError(
                    f"kernel matrix not positive definite with jitter up to {max_jitter:g}") from None
            j = min(j * 10.0, max_jitter)


def _fit_fixed(xs, ys, ell, jitter, x_stats, y_stats, raw_y):
    kernel = RbfKernel(np.broadcast_to(np.asarray(ell, dtype=float), (xs.shape[1],)).copy())
    chol, used = cholesky_with_jitter(kernel(xs, xs), jitter)
    weights = cho_solve((chol, True), ys, check_finite=False)
    return GpModel(xs, ys, kernel, used, chol, weights, x_stats, y_stats, raw_y)


def fit(x, y, lengthscale=1.0, jitter: float = DEFAULT_JITTER,
        x_stats: Standardizer | None = None) -> GpModel:
    """Fit a noise-free GP.

    Parameters
    ----------
    x : array_like, shape (n, d) or (n,)
        Raw training inputs.
    y : array_like, shape (n,)
        Raw training outputs.
    lengthscale : float, array_like or "ml"
        Kernel lengthscale in standardized input units. ``"ml"`` picks the
        candidate in ``ML_LENGTHSCALES`` with the highest log marginal
        likelihood.
    jitter : float
        Diagonal regularisation; escalated by 10x up to 1e-4 on failure.
    x_stats : Standardizer, optional
        Input statistics. Defaults to statistics of ``x`` itself; the active
        learner passes statistics of the whole candidate grid instead.
    """
    xa = _as_2d(x)
    ya = np.asarray(y, dtype=float).ravel()
    if xa.shape[0] != ya.shape[0]:
        raise InputError(f"{xa.shape[0]} inputs but {ya.shape[0]} outputs")
    if xa.shape[0] < 1:
        raise InputError("need at least one training point")
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(ya))):
        raise InputError("training data must be finite")
    xa, ya = _dedupe(xa, ya)
    if x_stats is None:
        x_stats = Standardizer.fit(xa, "inputs")
    y_stats = Standardizer.fit(ya, "outputs")
    xs = x_stats.transform(xa)
    ys = y_stats.transform(ya).ravel()

    if isinstance(lengthscale, str):
        if lengthscale != "ml":
            raise InputError(f"unknown lengthscale policy {lengthscale!r}")
        best = None
        for ell in ML_LENGTHSCALES:
            try:
                model = _fit_fixed(xs, ys, ell, jitter, x_stats, y_stats, ya)
            except SingularKernelError:
                continue
            if best is None or model.log_marginal_likelihood() > best.log_marginal_likelihood():
                best = model
        if best is None:
            raise SingularKernelError("no candidate lengthscale gave a factorizable kernel")
        return best
    return _fit_fixed(xs, ys, lengthscale, jitter, x_stats, y_stats, ya)


def predict(model: GpModel, queries, destandardize: bool = True) -> Prediction:
    return model.predict(queries, destandardize)
