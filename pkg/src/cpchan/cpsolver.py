"""Rank-K CP decomposition of third-order complex tensors.

Alternating least squares with random restarts. The first restart starts from
truncated SVDs of the three unfoldings (HOSVD-style); the remaining restarts
use independent complex-Gaussian factor draws. Every mode update solves the
unfolded normal equations through a pseudoinverse whose singular values are
floored at 1e-12 times the largest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensors import cp_compose, frobenius, khatri_rao, unfold

__all__ = ["CpFactors", "CpSolveConfig", "DegenerateComponentError", "cp_als", "normalize_factors"]

_PINV_FLOOR = 1e-12
_FIT_FLOOR = 1e-14
_ATTEMPTS_PER_RESTART = 3


class DegenerateComponentError(ValueError):
    """A CP component collapsed to a zero column where scale must be carried."""


@dataclass
class CpFactors:
    """Factor-matrix triple of a rank-K CP model.

    After :func:`normalize_factors`, the columns of ``a1`` and ``a3`` have
    unit norm and a real nonnegative leading entry; all component scale and
    phase is carried by ``a2``.
    """

    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray

    def __post_init__(self):
        shapes = {m.shape[1] for m in (self.a1, self.a2, self.a3)}
        if len(shapes) != 1:
            raise ValueError(f"factor matrices disagree on rank: {sorted(shapes)}")

    @property
    def rank(self) -> int:
        return self.a1.shape[1]

    @property
    def factors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.a1, self.a2, self.a3

    def component(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectors of the k-th rank-1 term."""
        return self.a1[:, k], self.a2[:, k], self.a3[:, k]

    def compose(self) -> np.ndarray:
        return cp_compose(self.factors)


@dataclass(frozen=True)
class CpSolveConfig:
    """ALS solver knobs."""

    rank: int
    max_iters: int = 500
    rel_tol: float = 1e-8
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


def _floored_pinv(g: np.ndarray) -> np.ndarray:
    u, s, vh = np.linalg.svd(g)
    if s[0] == 0:
        raise np.linalg.LinAlgError("zero Gram matrix")
    s = np.maximum(s, _PINV_FLOOR * s[0])
    return (vh.conj().T * (1.0 / s)) @ u.conj().T


def _svd_init(unfoldings: list[np.ndarray], rank: int, rng: np.random.Generator) -> list[np.ndarray]:
    factors = []
    for m in unfoldings:
        u = np.linalg.svd(m, full_matrices=False)[0]
        take = min(rank, u.shape[1])
        f = u[:, :take]
        if take < rank:
            pad = rng.standard_normal((m.shape[0], rank - take)) + 1j * rng.standard_normal((m.shape[0], rank - take))
            f = np.concatenate([f, pad / np.sqrt(2.0)], axis=1)
        factors.append(f.astype(complex))
    return factors


def _random_init(dims: tuple[int, ...], rank: int, rng: np.random.Generator) -> list[np.ndarray]:
    return [
        (rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))) / np.sqrt(2.0)
        for d in dims
    ]


def _als_run(
    unfoldings: list[np.ndarray],
    t_norm: float,
    init: list[np.ndarray],
    cfg: CpSolveConfig,
) -> tuple[list[np.ndarray], list[float]]:
    factors = [f.copy() for f in init]
    history: list[float] = []
    prev_fit = np.inf
    for _ in range(cfg.max_iters):
        for mode in range(3):
            others = [k for k in range(3) if k != mode]
            lo, hi = others[0], others[1]
            kr = khatri_rao(factors[hi], factors[lo])
            gram = (factors[hi].conj().T @ factors[hi]) * (factors[lo].conj().T @ factors[lo])
            factors[mode] = unfoldings[mode] @ kr.conj() @ _floored_pinv(gram.conj())
        fit = frobenius(unfoldings[0] - factors[0] @ khatri_rao(factors[2], factors[1]).T) / t_norm
        if not np.isfinite(fit):
            raise np.linalg.LinAlgError("non-finite fit")
        history.append(fit)
        if fit < _FIT_FLOOR or abs(prev_fit - fit) <= cfg.rel_tol:
            break
        prev_fit = fit
    return factors, history


def cp_als(t: np.ndarray, cfg: CpSolveConfig) -> tuple[CpFactors, list[float]]:
    """Best-of-restarts rank-``cfg.rank`` CP decomposition of ``t``.

    Returns the normalized factors of the restart with the smallest relative
    residual together with that restart's per-iteration residual-ratio
    history. Deterministic for a given ``cfg.seed``. A restart whose
    least-squares subproblem degenerates is abandoned and redrawn; only if
    every restart fails is an error raised.
    """
    t = np.asarray(t, dtype=complex)
    if t.ndim != 3:
        raise ValueError("expected a third-order tensor")
    if not np.all(np.isfinite(t)):
        raise ValueError("non-finite input tensor")
    dims = t.shape
    pair_bound = min(dims[0] * dims[1], dims[0] * dims[2], dims[1] * dims[2])
    if cfg.rank > pair_bound:
        raise ValueError(f"rank {cfg.rank} infeasible for dims {dims} (bound {pair_bound})")
    t_norm = frobenius(t)
    if t_norm == 0:
        raise ValueError("zero tensor has no CP decomposition")

    unfoldings = [unfold(t, mode) for mode in range(3)]
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts * _ATTEMPTS_PER_RESTART)

    best: tuple[float, list[np.ndarray], list[float]] | None = None
    for restart in range(cfg.restarts):
        for attempt in range(_ATTEMPTS_PER_RESTART):
            rng = np.random.default_rng(seeds[restart * _ATTEMPTS_PER_RESTART + attempt])
            if restart == 0 and attempt == 0:
                init = _svd_init(unfoldings, cfg.rank, rng)
            else:
                init = _random_init(dims, cfg.rank, rng)
            try:
                factors, history = _als_run(unfoldings, t_norm, init, cfg)
            except np.linalg.LinAlgError:
                continue
            if best is None or history[-1] < best[0]:
                best = (history[-1], factors, history)
            break
    if best is None:
        raise RuntimeError(f"all {cfg.restarts} ALS restarts failed")
    _, factors, history = best
    return normalize_factors(CpFactors(*factors)), history


def normalize_factors(f: CpFactors) -> CpFactors:
    """Push all component scale and phase into ``a2``.

    Columns of ``a1`` and ``a3`` come out unit-norm with a real nonnegative
    leading entry; the composed tensor is unchanged.
    """
    a1, a2, a3 = (m.astype(complex).copy() for m in f.factors)
    for k in range(f.rank):
        for side in (a1, a3):
            nrm = np.linalg.norm(side[:, k])
            if nrm == 0:
                raise DegenerateComponentError(f"component {k} has a zero column")
            side[:, k] /= nrm
            a2[:, k] *= nrm
            phase = np.exp(-1j * np.angle(side[0, k]))
            side[:, k] *= phase
            a2[:, k] /= phase
    return CpFactors(a1, a2, a3)
