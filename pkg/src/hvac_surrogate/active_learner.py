"""
Grid-based active learning of a surrogate for an expensive simulator.

The loop starts from an initial design, fits a GP, predicts every grid point,
and keeps simulating the grid point with the largest predictive std until the
grid-wide maximum std drops to the threshold. The result is a dense table of
predicted outputs over the whole grid.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import gp_core
from .errors import InputError, ParseError, SimulationError, SingularKernelError

log = logging.getLogger(__name__)

TABLE_FORMAT = "hvac-surrogate-table"
TABLE_VERSION = 1


@dataclass(frozen=True)
class InputGrid:
    """Cartesian grid of candidate inputs, enumerated in lexicographic order
    (first dimension varies slowest)."""

    values: tuple
    names: tuple = ()

    def __post_init__(self):
        vals = tuple(np.asarray(v, dtype=float).ravel() for v in self.values)
        for i, v in enumerate(vals):
            if len(np.unique(v)) < 2:
                raise InputError(f"grid dimension {i} needs at least 2 distinct values")
            if np.any(np.diff(v) <= 0):
                raise InputError(f"grid dimension {i} must be strictly increasing")
        object.__setattr__(self, "values", vals)
        names = tuple(self.names) or tuple(f"x{i}" for i in range(len(vals)))
        if len(names) != len(vals):
            raise InputError("one name per grid dimension is required")
        object.__setattr__(self, "names", names)
        if self.size < 4:
            raise InputError(f"grid must hold at least 4 points, has {self.size}")

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def shape(self) -> tuple:
        return tuple(len(v) for v in self.values)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.values, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def index_of(self, points) -> np.ndarray:
        """Flat indices of grid points; raises if any point is off-grid."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise InputError(f"points have dimension {pts.shape[1]}, grid has {self.dim}")
        sub = []
        for d, v in enumerate(self.values):
            pos = np.searchsorted(v, pts[:, d])
            pos = np.clip(pos, 0, len(v) - 1)
            if np.any(v[pos] != pts[:, d]):
                raise InputError(f"point off grid in dimension {d}")
            sub.append(pos)
        return np.ravel_multi_index(tuple(sub), self.shape)

    def index_axis(self, axis: int, values) -> np.ndarray:
        """Positions of ``values`` along one axis; raises if any is off-grid."""
        v = self.values[axis]
        x = np.asarray(values, dtype=float)
        pos = np.clip(np.searchsorted(v, x), 0, len(v) - 1)
        if np.any(v[pos] != x):
            raise InputError(f"value off grid in dimension {axis}")
        return pos

    def to_dict(self):
        return {"names": list(self.names), "values": [v.tolist() for v in self.values]}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data["values"]), tuple(data["names"]))


@dataclass(frozen=True)
class LearnerConfig:
    """Settings of the acquisition loop.

    ``init_strategy`` is ``"corners"`` (all min/max combinations),
    ``"random"`` (``init_size`` points drawn with ``seed``) or ``"spread"``
    (``init_size`` evenly spaced flat grid indices, both ends included).
    ``max_iterations=None`` means the grid size.
    """

    std_threshold: float = 0.01
    init_strategy: str = "corners"
    init_size: int | None = None
    seed: int = 0
    max_iterations: int | None = None
    lengthscale: float | str = 1.0
    jitter: float = gp_core.DEFAULT_JITTER

    def __post_init__(self):
        if not self.std_threshold > 0:
            raise InputError(f"std_threshold must be > 0, got {self.std_threshold}")
        if self.init_strategy not in ("corners", "random", "spread"):
            raise InputError(f"unknown init_strategy {self.init_strategy!r}")
        if self.init_strategy != "corners" and (self.init_size is None or self.init_size < 1):
            raise InputError(f"init_strategy {self.init_strategy!r} needs init_size >= 1")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise InputError("max_iterations must be >= 0")
        if isinstance(self.lengthscale, str):
            if self.lengthscale != "ml":
                raise InputError(f"unknown lengthscale policy {self.lengthscale!r}")
        elif not self.lengthscale > 0:
            raise InputError("lengthscale must be > 0")


# ---------------------------------------------------------------------------
# Initial designs
# ---------------------------------------------------------------------------

def corner_design(grid: InputGrid) -> np.ndarray:
    """All 2**d combinations of per-dimension min and max, lexicographic."""
    extremes = [(v[0], v[-1]) for v in grid.values]
    return np.array(list(itertools.product(*extremes)), dtype=float)


def random_design(grid: InputGrid, k: int, seed: int) -> np.ndarray:
    if k > grid.size:
        raise InputError(f"cannot draw {k} distinct points from a grid of {grid.size}")
    if k < 0:
        raise InputError("k must be >= 0")
    rng = np.random.default_rng(seed)
    idx = rng.choice(grid.size, size=k, replace=False)
    return grid.points[idx]


def spread_design(grid: InputGrid, k: int) -> np.ndarray:
    if not 1 <= k <= grid.size:
        raise InputError(f"spread design size must be in [1, {grid.size}]")
    idx = np.unique(np.round(np.linspace(0, grid.size - 1, k)).astype(int))
    return grid.points[idx]


def initial_design(grid: InputGrid, config: LearnerConfig) -> np.ndarray:
    if config.init_strategy == "corners":
        return corner_design(grid)
    if config.init_strategy == "random":
        return random_design(grid, config.init_size, config.seed)
    return spread_design(grid, config.init_size)


def acquire_next(model: gp_core.GpModel, grid: InputGrid, already_sampled) -> np.ndarray | None:
    """Unsampled grid point with the largest predictive std.

    Ties go to the lowest flat grid index. Returns ``None`` when every grid
    point has been sampled.
    """
    std = model.predict(grid.points, destandardize=False).std
    sampled = np.zeros(grid.size, dtype=bool)
    pts = np.asarray(already_sampled, dtype=float)
    if pts.size:
        sampled[grid.index_of(pts)] = True
    if sampled.all():
        return None
    std = np.where(sampled, -np.inf, std)
    return grid.points[int(np.argmax(std))]


# ---------------------------------------------------------------------------
# Surrogate table
# ---------------------------------------------------------------------------

@dataclass
class SurrogateTable:
    grid: InputGrid
    predicted: np.ndarray
    final_max_std: float
    train_inputs: np.ndarray
    train_outputs: np.ndarray
    iteration_count: int
    simulation_count: int
    converged: bool
    config: LearnerConfig
    lengthscale: float = float("nan")
    std_history: list = field(default_factory=list)

    def index_of(self, point) -> int:
        return int(self.grid.index_of(point)[0])

    def value_at(self, point) -> float:
        return float(self.predicted[self.index_of(point)])

    def _meta(self):
        return {
            "format": TABLE_FORMAT,
            "version": TABLE_VERSION,
            "grid": self.grid.to_dict(),
            "config": asdict(self.config),
            "final_max_std": self.final_max_std,
            "iteration_count": self.iteration_count,
            "simulation_count": self.simulation_count,
            "converged": self.converged,
            "lengthscale": self.lengthscale,
            "std_history": [float(s) for s in self.std_history],
            "train_inputs": self.train_inputs.tolist(),
            "train_outputs": self.train_outputs.tolist(),
        }

    def save(self, path) -> None:
        """Write the versioned flat file: two ``#`` header lines, then CSV rows."""
        lines = [f"# {TABLE_FORMAT} v{TABLE_VERSION}",
                 "# " + json.dumps(self._meta(), sort_keys=True),
                 ",".join(["grid_index", *self.grid.names, "predicted_output"])]
        pts = self.grid.points
        for i in range(self.grid.size):
            row = [str(i), *(repr(float(v)) for v in pts[i]), repr(float(self.predicted[i]))]
            lines.append(",".join(row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "SurrogateTable":
        with open(path) as fh:
            text = fh.read().splitlines()
        if len(text) < 3 or not text[0].startswith(f"# {TABLE_FORMAT} v"):
            raise ParseError("not a surrogate table file", path, 1)
        version = int(text[0].rsplit("v", 1)[1])
        if version != TABLE_VERSION:
            raise ParseError(f"unsupported table version {version}", path, 1)
        try:
            meta = json.loads(text[1][2:])
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad header: {exc}", path, 2) from None
        grid = InputGrid.from_dict(meta["grid"])
        predicted = np.empty(grid.size)
        rows = text[3:]
        if len(rows) != grid.size:
            raise ParseError(f"expected {grid.size} rows, found {len(rows)}", path, 4)
        for lineno, row in enumerate(rows, start=4):
            parts = row.split(",")
            try:
                idx = int(parts[0])
                predicted[idx] = float(parts[-1])
            except (ValueError, IndexError):
                raise ParseError("malformed table row", path, lineno) from None
        cfg = dict(meta["config"])
        config = LearnerConfig(**cfg)
        d = grid.dim
        return cls(
            grid=grid,
            predicted=predicted,
            final_max_std=meta["final_max_std"],
            train_inputs=np.asarray(meta["train_inputs"], dtype=float).reshape(-1, d),
            train_outputs=np.asarray(meta["train_outputs"], dtype=float),
            iteration_count=meta["iteration_count"],
            simulation_count=meta["simulation_count"],
            converged=meta["converged"],
            config=config,
            lengthscale=meta["lengthscale"],
            std_history=list(meta["std_history"]),
        )


# ---------------------------------------------------------------------------
# Acquisition loop
# ---------------------------------------------------------------------------

class _GridPosterior:
    """Posterior std over a fixed grid, updated by rank-one Cholesky appends.

    Holds ``V = L^-1 K(X, G)`` so that appending one training point costs
    O(n * N) instead of a refactorization. Valid only for a fixed lengthscale
    and fixed input statistics (those of the grid).
    """

    def __init__(self, grid_std, kernel, jitter):
        self.g = grid_std
        self.kernel = kernel
        self.jitter = jitter
        self.idx: list[int] = []
        self.chol = np.zeros((0, 0))
        self.v = np.zeros((0, len(grid_std)))
        self.var = np.ones(len(grid_std))

    def reset(self, idx, jitter):
        x = self.g[idx]
        chol, used = gp_core.cholesky_with_jitter(self.kernel(x, x), jitter)
        self.jitter = used
        self.idx = list(idx)
        self.chol = chol
        self.v = solve_triangular(chol, self.kernel(x, self.g), lower=True, check_finite=False)
        self.var = 1.0 - np.einsum("ij,ij->j", self.v, self.v)

    def append(self, j):
        col = self.v[:, j]
        diag = 1.0 + self.jitter - col @ col
        if not diag > self.jitter * 1e-3:
            # numerically dependent on existing points: refactor with more jitter
            if self.jitter >= gp_core.MAX_JITTER:
                raise SingularKernelError("kernel matrix singular at maximum jitter")
            self.reset(self.idx + [j], min(self.jitter * 10.0, gp_core.MAX_JITTER))
            return
        lnn = math.sqrt(diag)
        row = (self.kernel(self.g[j:j + 1], self.g)[0] - col @ self.v) / lnn
        n = len(self.idx)
        chol = np.zeros((n + 1, n + 1))
        chol[:n, :n] = self.chol
        chol[n, :n] = col
        chol[n, n] = lnn
        self.chol = chol
        self.v = np.vstack([self.v, row])
        self.var = self.var - row * row
        self.idx.append(j)

    @property
    def std(self):
        return np.sqrt(np.maximum(self.var, 0.0))

    def mean(self, y_std):
        alpha = solve_triangular(self.chol, y_std, lower=True, check_finite=False)
        return self.v.T @ alpha


SimulatorFn = Callable[[np.ndarray], float]


def _run_simulator(simulator, points, simulate_many=None):
    if simulate_many is not None and len(points) > 1:
        out = np.asarray(simulate_many(points), dtype=float).ravel()
    else:
        out = np.array([float(simulator(p)) for p in points])
    if out.shape[0] != len(points) or not np.all(np.isfinite(out)):
        raise ValueError("simulator returned non-finite or wrongly-sized output")
    return out


def build_surrogate(grid: InputGrid, config: LearnerConfig, simulator: SimulatorFn,
                    simulate_many: Callable | None = None) -> SurrogateTable:
    """Run the acquisition loop and return the dense prediction table.

    Parameters
    ----------
    grid : InputGrid
    config : LearnerConfig
    simulator : callable
        Maps one grid point (1-D array) to a scalar output.
    simulate_many : callable, optional
        Vectorized variant used for the initial design only; must agree with
        ``simulator`` point by point.

    Returns
    -------
    SurrogateTable
        ``converged`` is False when the iteration cap was hit before the
        threshold; the achieved max std is still recorded.

    Raises
    ------
    SimulationError
        Wrapping any simulator failure; ``partial`` holds the data so far.
    """
    init_pts = initial_design(grid, config)
    init_idx = list(dict.fromkeys(grid.index_of(init_pts).tolist()))
    pts = grid.points
    try:
        outputs = list(_run_simulator(simulator, pts[init_idx], simulate_many))
    except Exception as exc:
        raise SimulationError(f"simulator failed on the initial design: {exc}",
                              partial={"inputs": np.empty((0, grid.dim)), "outputs": np.empty(0)}) from exc
    sampled = list(init_idx)
    cap = grid.size if config.max_iterations is None else config.max_iterations
    x_stats = gp_core.Standardizer.fit(pts, "grid")
    history = []
    iterations = 0

    if isinstance(config.lengthscale, str):
        model = None

        def current_std():
            nonlocal model
            model = gp_core.fit(pts[sampled], outputs, config.lengthscale, config.jitter, x_stats)
            return model.predict(pts, destandardize=False).std
    else:
        ell = float(config.lengthscale)
        post = _GridPosterior(x_stats.transform(pts), gp_core.RbfKernel(np.full(grid.dim, ell)),
                              config.jitter)
        post.reset(sampled, config.jitter)

        def current_std():
            return post.std

    while True:
        std = current_std()
        max_std = float(std.max())
        history.append(max_std)
        if max_std <= config.std_threshold:
            break
        if iterations >= cap or len(sampled) >= grid.size:
            break
        masked = std.copy()
        masked[sampled] = -np.inf
        j = int(np.argmax(masked))
        try:
            y_new = float(simulator(pts[j]))
            if not math.isfinite(y_new):
                raise ValueError(f"non-finite output {y_new}")
        except Exception as exc:
            raise SimulationError(
                f"simulator failed at grid index {j} after {iterations} iterations: {exc}",
                partial={"inputs": pts[sampled], "outputs": np.asarray(outputs)}) from exc
        sampled.append(j)
        outputs.append(y_new)
        iterations += 1
        if not isinstance(config.lengthscale, str):
            post.append(j)
        log.debug("iteration %d: max std %.4g -> sampled index %d", iterations, max_std, j)

    y = np.asarray(outputs, dtype=float)
    y_stats = gp_core.Standardizer.fit(y, "outputs")
    if isinstance(config.lengthscale, str):
        predicted = model.predict(pts).mean
        used_ell = float(model.kernel.lengthscale[0])
    else:
        predicted = y_stats.inverse(post.mean(y_stats.transform(y).ravel())).ravel()
        used_ell = float(config.lengthscale)
    return SurrogateTable(
        grid=grid,
        predicted=predicted,
        final_max_std=history[-1],
        train_inputs=pts[sampled].copy(),
        train_outputs=y,
        iteration_count=iterations,
        simulation_count=len(sampled),
        converged=history[-1] <= config.std_threshold,
        config=config,
        lengthscale=used_ell,
        std_history=history,
    )


@dataclass
class InitComparison:
    corner: SurrogateTable
    random: list

    @property
    def corner_iterations(self) -> int:
        return self.corner.iteration_count

    @property
    def random_iterations(self) -> list:
        return [t.iteration_count for t in self.random]

    @property
    def random_median(self) -> float:
        return float(np.median(self.random_iterations))


def compare_init_strategies(grid: InputGrid, config: LearnerConfig, simulator: SimulatorFn,
                            seeds: Sequence[int], simulate_many: Callable | None = None) -> InitComparison:
    """Build once from the corner design and once per seed from a random
    design of the same size (2**d points)."""
    seeds = list(seeds)
    if not seeds:
        raise InputError("need at least one seed for the random arm")
    base = {k: v for k, v in asdict(config).items() if k not in ("init_strategy", "init_size", "seed")}
    corner = build_surrogate(grid, LearnerConfig(init_strategy="corners", **base), simulator, simulate_many)
    k = min(2 ** grid.dim, grid.size)
    randoms = [build_surrogate(grid, LearnerConfig(init_strategy="random", init_size=k, seed=s, **base),
                               simulator, simulate_many) for s in seeds]
    return InitComparison(corner, randoms)
