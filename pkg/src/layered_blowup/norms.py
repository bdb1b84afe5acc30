"""Grid lower-bound estimators for sup, Hölder and Lipschitz seminorms.

All estimates are suprema over finite sample sets, hence lower bounds of the
true norms.  Pair sets are

* axis pairs at dyadic separations ``round((n-1)/2^k)`` grid steps, and
* ``random_pairs`` uniformly drawn grid-point pairs together with the two
  axis-aligned legs through their corner ``(x1 of q, x2 of p)``.

Including the corner legs in both the joint and the marginal sets makes
``marginal_i <= c_alpha <= marginal_1 + marginal_2`` hold on every report.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import _accel


@dataclass(frozen=True)
class HolderStrategy:
    random_pairs: int = 50_000
    seed: int = 0
    dyadic: bool = True


@dataclass(frozen=True)
class NormReport:
    field: str
    t: float
    alpha: float
    sup: float
    c_alpha: float
    c1: float
    c1_alpha: float
    marginal_1: float
    marginal_2: float
    grid: tuple[int, int]
    box: tuple[float, float, float, float]
    pairs: int
    dyadic_levels: tuple[int, ...]
    meta: dict = field(default_factory=dict)

    @property
    def c_alpha_norm(self) -> float:
        """Inhomogeneous C^alpha norm: sup + seminorm."""
        return self.sup + self.c_alpha

    @property
    def c1_alpha_norm(self) -> float:
        """Inhomogeneous C^{1,alpha} norm: sup + C^1 + C^{1,alpha} seminorm."""
        return self.sup + self.c1 + self.c1_alpha

    def row(self) -> dict:
        return {
            "field": self.field, "t": self.t, "alpha": self.alpha, "sup": self.sup,
            "c_alpha": self.c_alpha, "c1": self.c1, "c1_alpha": self.c1_alpha,
            "marg1": self.marginal_1, "marg2": self.marginal_2, "pairs": self.pairs,
        }


def _dyadic_shifts(n: int) -> list[int]:
    shifts, k = [], 0
    while True:
        s = int(round((n - 1) / 2**k))
        if s < 1:
            break
        if not shifts or s != shifts[-1]:
            shifts.append(s)
        k += 1
    return shifts


@dataclass
class _PairSet:
    """Index pairs on an (nx, ny) grid with their Euclidean distances."""

    ia: np.ndarray
    ib: np.ndarray
    dist: np.ndarray
    axis1: np.ndarray  # mask of pairs separated along x1 only
    axis2: np.ndarray


def _random_pairs(nx, ny, hx, hy, count, seed) -> _PairSet:
    rng = np.random.default_rng(seed)
    # one (count, 4) draw: a larger count extends a smaller one by a suffix
    idx = rng.integers(0, [nx, ny, nx, ny], size=(count, 4))
    i1, j1, i2, j2 = idx.T
    corner_i, corner_j = i2, j1
    ia = np.concatenate([i1 * ny + j1, i1 * ny + j1, corner_i * ny + corner_j])
    ib = np.concatenate([i2 * ny + j2, corner_i * ny + corner_j, i2 * ny + j2])
    d1 = (i1 - i2) * hx
    d2 = (j1 - j2) * hy
    dist = np.concatenate([np.hypot(d1, d2), np.abs(d1), np.abs(d2)])
    axis1 = np.concatenate([(j1 == j2) & (i1 != i2), i1 != i2, np.zeros(count, bool)])
    axis2 = np.concatenate([(i1 == i2) & (j1 != j2), np.zeros(count, bool), j1 != j2])
    keep = dist > 0
    return _PairSet(ia[keep], ib[keep], dist[keep], axis1[keep], axis2[keep])


class _Seminorms:
    """Hölder quotients of one sampled array over a fixed pair set."""

    def __init__(self, shape, hx, hy, alpha, pairs: _PairSet | None, dyadic: bool):
        self.shape = shape
        self.hx, self.hy, self.alpha = hx, hy, alpha
        self.pairs = pairs
        self.shifts = (_dyadic_shifts(shape[0]), _dyadic_shifts(shape[1])) if dyadic else ([], [])
        if pairs is not None:
            self.denom = pairs.dist**alpha

    def evaluate(self, F: np.ndarray) -> tuple[float, float, float]:
        a = self.alpha
        marg = [0.0, 0.0]
        for axis, (shifts, h) in enumerate(zip(self.shifts, (self.hx, self.hy))):
            for s in shifts:
                q = _accel.shift_absdiff_max(F, s, axis) / (s * h) ** a
                marg[axis] = max(marg[axis], q)
        joint = max(marg)
        if self.pairs is not None and self.pairs.ia.size:
            flat = F.ravel()
            p = self.pairs
            joint = max(joint, _accel.pair_quotient_max(flat, p.ia, p.ib, self.denom))
            for axis, mask in enumerate((p.axis1, p.axis2)):
                if np.any(mask):
                    marg[axis] = max(marg[axis], _accel.pair_quotient_max(flat, p.ia[mask], p.ib[mask], self.denom[mask]))
        return joint, marg[0], marg[1]


def grid_points(box, grid):
    x1lo, x1hi, x2lo, x2hi = box
    nx, ny = grid
    return np.linspace(x1lo, x1hi, nx), np.linspace(x2lo, x2hi, ny)


def holder_estimate(sampler: Callable[[np.ndarray, np.ndarray], np.ndarray], box, grid, alpha: float,
                    strategy: HolderStrategy | None = None, field_name: str = "f", t: float = float("nan"),
                    values: np.ndarray | None = None) -> NormReport:
    """Estimate sup, C^alpha, C^1 and C^{1,alpha} seminorms of a sampled field.

    ``sampler(X1, X2)`` receives meshgrid arrays (indexing "ij").  C^1 is the
    largest central-difference gradient norm at interior nodes; C^{1,alpha} is
    the largest C^alpha seminorm of the two difference-gradient components.
    """
    strategy = strategy or HolderStrategy()
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    x1lo, x1hi, x2lo, x2hi = map(float, box)
    if not (x1hi > x1lo and x2hi > x2lo):
        raise ValueError(f"degenerate box {box}")
    nx, ny = map(int, grid)
    if nx < 8 or ny < 8:
        raise ValueError("grid must be at least 8 x 8")
    hx = (x1hi - x1lo) / (nx - 1)
    hy = (x2hi - x2lo) / (ny - 1)
    if values is None:
        g1, g2 = grid_points((x1lo, x1hi, x2lo, x2hi), (nx, ny))
        X1, X2 = np.meshgrid(g1, g2, indexing="ij")
        F = np.asarray(sampler(X1, X2), dtype=np.float64)
    else:
        F = np.asarray(values, dtype=np.float64)
    if F.shape != (nx, ny):
        raise ValueError(f"sampled field has shape {F.shape}, expected {(nx, ny)}")

    pairs = _random_pairs(nx, ny, hx, hy, strategy.random_pairs, strategy.seed) if strategy.random_pairs else None
    semi = _Seminorms((nx, ny), hx, hy, alpha, pairs, strategy.dyadic)
    c_alpha, m1, m2 = semi.evaluate(F)

    gx = (F[2:, 1:-1] - F[:-2, 1:-1]) / (2.0 * hx)
    gy = (F[1:-1, 2:] - F[1:-1, :-2]) / (2.0 * hy)
    c1 = float(np.max(np.hypot(gx, gy)))
    # gradient lives on the interior grid; reuse the same pair construction there
    ipairs = _random_pairs(nx - 2, ny - 2, hx, hy, strategy.random_pairs, strategy.seed) if strategy.random_pairs else None
    isemi = _Seminorms((nx - 2, ny - 2), hx, hy, alpha, ipairs, strategy.dyadic)
    c1_alpha = max(isemi.evaluate(np.ascontiguousarray(gx))[0], isemi.evaluate(np.ascontiguousarray(gy))[0])

    n_pairs = (pairs.ia.size if pairs is not None else 0) + sum(
        (nx - s) * ny for s in semi.shifts[0]) + sum((ny - s) * nx for s in semi.shifts[1])
    return NormReport(
        field=field_name,
        t=float(t),
        alpha=float(alpha),
        sup=float(np.max(np.abs(F))),
        c_alpha=float(c_alpha),
        c1=c1,
        c1_alpha=float(c1_alpha),
        marginal_1=float(m1),
        marginal_2=float(m2),
        grid=(nx, ny),
        box=(x1lo, x1hi, x2lo, x2hi),
        pairs=int(n_pairs),
        dyadic_levels=tuple(semi.shifts[0]) + tuple(semi.shifts[1]),
        meta={"strategy": asdict(strategy), "backend": _accel.BACKEND},
    )
