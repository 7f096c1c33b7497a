"""Harmonic retrieval primitives.

Single-tone frequency estimation via the shift-invariance (ESPRIT) method,
Vandermonde steering vectors, exact maximization of trigonometric-polynomial
ratios on the unit circle by companion-matrix rooting of the derivative, and
a 2-D alternating coordinate descent built on that exact 1-D step.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = [
    "TrigPolyRatio",
    "AcdConfig",
    "AcdResult",
    "vandermonde",
    "esprit_tone",
    "eval_ratio",
    "max_unit_circle",
    "acd_2d",
]

# Grid used to validate denominator positivity and as a rooting fallback.
# Half-step offset keeps the samples away from rational zeros of DFT-built
# denominators (which sit exactly at multiples of 2*pi/N).
_FALLBACK_GRID = 4096


def _wrap(omega):
    """Wrap angles to (-pi, pi]."""
    return np.angle(np.exp(1j * np.asarray(omega, dtype=float)))


def _full_laurent(half: np.ndarray) -> tuple[np.ndarray, int]:
    """Expand Hermitian half coefficients d_0..d_M into the full Laurent
    coefficient vector for degrees -M..M, returned with its offset M."""
    d = np.asarray(half, dtype=complex)
    if d.size == 0:
        return np.array([1.0 + 0.0j]), 0
    return np.concatenate([np.conj(d[1:])[::-1], d]), d.size - 1


def _laurent_values(coeffs: np.ndarray, offset: int, omega: np.ndarray) -> np.ndarray:
    z = np.exp(1j * np.asarray(omega, dtype=float))
    vals = npoly.polyval(z, coeffs)
    if offset:
        vals = vals * z ** (-offset)
    return vals


@dataclass(frozen=True)
class TrigPolyRatio:
    """Ratio objective J(w) = |f(e^{jw})|^2 / g(w) on the unit circle.

    ``num`` holds the complex coefficients c_k of f(z) = sum_k c_k z^k.
    ``den`` holds the Hermitian half coefficients d_0..d_M of the real-valued
    trigonometric polynomial g(w) = d_0 + 2*Re(sum_{m>=1} d_m e^{jmw});
    an empty ``den`` means g == 1. g must be strictly positive, which is
    checked on a dense offset grid at construction.
    """

    num: np.ndarray
    den: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=complex))
        den = np.atleast_1d(np.asarray(self.den, dtype=complex)) if np.size(self.den) else np.empty(0, dtype=complex)
        if num.ndim != 1 or den.ndim != 1:
            raise ValueError("num and den must be coefficient vectors")
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise ValueError("non-finite coefficients")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if den.size:
            if abs(den[0].imag) > 1e-9 * max(1.0, abs(den[0].real)):
                raise ValueError("leading denominator coefficient must be real")
            if den.size == 1:
                gmin = den[0].real
            else:
                gmin = float(np.min(_den_grid(den, _FALLBACK_GRID)))
            if gmin <= 0:
                raise ValueError(f"denominator is not strictly positive (min {gmin:g} on check grid)")

    def _den_values(self, omega: np.ndarray) -> np.ndarray:
        if self.den.size == 0:
            return np.ones(np.shape(omega))
        full, off = _full_laurent(self.den)
        return np.real(_laurent_values(full, off, omega))


@dataclass(frozen=True)
class AcdConfig:
    """Knobs for the 2-D alternating coordinate descent."""

    max_sweeps: int = 50
    rel_tol: float = 1e-10
    starts: int = 1
    grid_oversample: int = 8
    seed: int = 0

    def __post_init__(self):
        if min(self.max_sweeps, self.starts, self.grid_oversample) < 1 or self.rel_tol <= 0:
            raise ValueError("AcdConfig fields must be positive")


@dataclass
class AcdResult:
    """Outcome of a 2-D alternating coordinate descent."""

    omega_a: float
    omega_b: float
    objective: float
    history: list[float]


def vandermonde(omega: float, n: int) -> np.ndarray:
    """Steering vector [1, e^{jw}, ..., e^{j(n-1)w}]."""
    if n < 1:
        raise ValueError("length must be >= 1")
    return np.exp(1j * float(omega) * np.arange(n))


def esprit_tone(v: np.ndarray) -> float:
    """Estimate the frequency of a single complex exponential in (-pi, pi].

    Builds the M x (N-M+1) Hankel matrix with M = ceil(N/2), takes the
    dominant left singular vector u and returns the argument of the
    least-squares solution of u[:-1] * rho ~= u[1:].
    """
    v = np.asarray(v, dtype=complex).ravel()
    n = v.size
    if n < 3:
        raise ValueError("need at least 3 samples")
    if not np.any(v):
        raise ValueError("zero input vector")
    m = (n + 1) // 2
    cols = n - m + 1
    idx = np.arange(m)[:, None] + np.arange(cols)[None, :]
    hankel = v[idx]
    u = np.linalg.svd(hankel, full_matrices=False)[0][:, 0]
    rho = np.vdot(u[:-1], u[1:]) / np.vdot(u[:-1], u[:-1])
    return float(np.angle(rho))


def eval_ratio(r: TrigPolyRatio, omega) -> np.ndarray:
    """Evaluate J(w) = |f|^2 / g at scalar or vector ``omega``."""
    omega = np.asarray(omega, dtype=float)
    z = np.exp(1j * omega)
    num = np.abs(npoly.polyval(z, r.num)) ** 2
    if r.den.size == 0:
        return num
    g = r._den_values(omega)
    out = np.zeros_like(num)
    np.divide(num, g, out=out, where=g > 0)
    return out


@lru_cache(maxsize=32)
def _offset_grid(n: int) -> np.ndarray:
    w = _wrap(2.0 * np.pi * (np.arange(n) + 0.5) / n)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=32)
def _offset_grid_raw(n: int) -> np.ndarray:
    w = 2.0 * np.pi * (np.arange(n) + 0.5) / n
    w.setflags(write=False)
    return w


def _den_grid(den: np.ndarray, n: int) -> np.ndarray:
    """Denominator values on the n-point half-offset uniform grid (FFT)."""
    full, off = _full_laurent(den)
    if n < full.size:
        raise ValueError("grid too small for the coefficient length")
    cden = np.zeros(n, dtype=complex)
    cden[: full.size] = full * np.exp(1j * np.pi * np.arange(full.size) / n)
    return np.real(np.fft.ifft(cden) * n * np.exp(-1j * off * _offset_grid_raw(n)))


def _grid_values(r: TrigPolyRatio, n: int) -> tuple[np.ndarray, np.ndarray]:
    """J on the n-point half-offset uniform grid, via zero-padded FFTs."""
    if n < max(r.num.size, 2 * r.den.size):
        raise ValueError("grid too small for the coefficient length")
    k = np.arange(r.num.size)
    cnum = np.zeros(n, dtype=complex)
    cnum[: r.num.size] = r.num * np.exp(1j * np.pi * k / n)
    fvals = np.fft.ifft(cnum) * n
    num = np.abs(fvals) ** 2
    omegas = _offset_grid(n)
    if r.den.size == 0:
        return omegas, num
    if r.den.size == 1:
        return omegas, num / r.den[0].real
    g = _den_grid(r.den, n)
    vals = np.zeros_like(num)
    np.divide(num, g, out=vals, where=g > 0)
    return omegas, vals


def _stationary_candidates(r: TrigPolyRatio) -> np.ndarray:
    """Angles of the unit-circle roots of d/dw J(w), via companion rooting."""
    c = np.trim_zeros(r.num, "b")
    if c.size == 0:
        return np.empty(0)
    # |f|^2 as a Laurent polynomial: autocorrelation of the coefficients.
    full_n = np.convolve(c, np.conj(c)[::-1])
    off_n = c.size - 1
    full_d, off_d = _full_laurent(r.den)
    ndot = full_n * (1j * (np.arange(full_n.size) - off_n))
    ddot = full_d * (1j * (np.arange(full_d.size) - off_d))
    h = np.convolve(ndot, full_d) - np.convolve(full_n, ddot)
    scale = np.max(np.abs(h))
    if scale == 0:
        return np.empty(0)
    # negligible extreme coefficients (numerically-zero autocorrelation lags)
    # produce huge spurious roots and wreck the companion conditioning
    keep = np.abs(h) > 1e-12 * scale
    lo = int(np.argmax(keep))
    hi = h.size - int(np.argmax(keep[::-1]))
    h = h[lo:hi] / scale
    roots = np.roots(h[::-1])
    if roots.size == 0:
        return np.empty(0)
    on_circle = roots[np.abs(np.abs(roots) - 1.0) < 1e-6]
    if on_circle.size == 0:
        return np.empty(0)
    omegas = np.angle(on_circle)
    return _polish_stationary(h, omegas)


def _polish_stationary(h: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """A couple of Newton steps on the (real) derivative numerator, in the
    angle domain, to tighten companion roots before evaluation."""
    off = (h.size - 1) // 2
    hdot = h * (1j * (np.arange(h.size) - off))
    out = omegas.copy()
    for _ in range(2):
        fv = np.real(_laurent_values(h, off, out))
        fd = np.real(_laurent_values(hdot, off, out))
        step = np.where(np.abs(fd) > 0, fv / np.where(np.abs(fd) > 0, fd, 1.0), 0.0)
        cand = out - step
        better = np.abs(np.real(_laurent_values(h, off, cand))) < np.abs(fv)
        out = np.where(better, cand, out)
    return _wrap(out)


def max_unit_circle(r: TrigPolyRatio) -> tuple[float, float]:
    """Global maximizer of J(w) over (-pi, pi].

    The derivative of J is cleared to a single polynomial whose roots are
    found as companion-matrix eigenvalues; roots within 1e-6 of the unit
    circle are projected onto it and evaluated together with the best point
    of a dense uniform fallback grid. Ties break toward the smallest |w|.
    """
    if not np.any(r.num):
        warnings.warn("objective numerator is identically zero", RuntimeWarning, stacklevel=2)
        return 0.0, 0.0
    cands = _stationary_candidates(r)
    grid_w, grid_v = _grid_values(r, _FALLBACK_GRID)
    best_grid = grid_w[int(np.argmax(grid_v))]
    omegas = np.concatenate([cands, [best_grid]])
    vals = eval_ratio(r, omegas)
    vmax = float(np.max(vals))
    if vmax <= 0.0:
        return 0.0, 0.0
    ties = omegas[vals >= vmax * (1.0 - 1e-12)]
    best = float(ties[int(np.argmin(np.abs(ties)))])
    return best, float(eval_ratio(r, np.array([best]))[0])


def _pow2_at_least(n: int) -> int:
    return 1 << max(5, int(np.ceil(np.log2(max(2, n)))))


def _grid_peaks(values: np.ndarray) -> list[tuple[int, int]]:
    """Indices of local maxima of a 2-D array on a torus, best first."""
    peak = np.ones_like(values, dtype=bool)
    for da in (-1, 0, 1):
        for db in (-1, 0, 1):
            if da == 0 and db == 0:
                continue
            peak &= values >= np.roll(np.roll(values, da, axis=0), db, axis=1)
    idx = np.argwhere(peak)
    order = np.argsort(values[peak])[::-1]
    return [tuple(idx[i]) for i in order]


def acd_2d(build_slice, cfg: AcdConfig) -> AcdResult:
    """Maximize a 2-D unit-circle ratio objective by alternating exact 1-D steps.

    ``build_slice(coord, fixed)`` must return the exact 1-D restriction of the
    objective as a :class:`TrigPolyRatio`: ``coord`` 0 frees the first
    coordinate with the second fixed at ``fixed`` and vice versa.

    Starts from the best point of an FFT-oversampled 2-D grid; with
    ``cfg.starts > 1`` additional starts are taken from the top grid peaks.
    A coordinate update is only accepted when it strictly improves the
    objective, so the recorded history is non-decreasing.
    """
    probe_a = build_slice(0, 0.0)
    probe_b = build_slice(1, 0.0)
    n_a = _pow2_at_least(cfg.grid_oversample * max(probe_a.num.size, 2 * probe_a.den.size))
    n_b = _pow2_at_least(cfg.grid_oversample * max(probe_b.num.size, 2 * probe_b.den.size))
    grid_b = _offset_grid(n_b)
    values = np.empty((n_b, n_a))
    for i, wb in enumerate(grid_b):
        grid_a, values[i] = _grid_values(build_slice(0, float(wb)), n_a)

    peaks = _grid_peaks(values)
    starts: list[tuple[float, float]] = []
    for ib, ia in peaks[: cfg.starts]:
        starts.append((float(grid_a[ia]), float(grid_b[ib])))
    if len(starts) < cfg.starts:
        rng = np.random.default_rng(cfg.seed)
        while len(starts) < cfg.starts:
            starts.append((float(rng.uniform(-np.pi, np.pi)), float(rng.uniform(-np.pi, np.pi))))

    best: AcdResult | None = None
    for wa0, wb0 in starts:
        j0 = float(eval_ratio(build_slice(0, wb0), wa0))
        wa, wb, jcur = wa0, wb0, j0
        history = [j0]
        for _ in range(cfg.max_sweeps):
            j_sweep = jcur
            for coord in (0, 1):
                fixed = wb if coord == 0 else wa
                w_new, j_new = max_unit_circle(build_slice(coord, float(fixed)))
                if j_new > jcur:
                    jcur = j_new
                    if coord == 0:
                        wa = w_new
                    else:
                        wb = w_new
                history.append(jcur)
            if jcur - j_sweep <= cfg.rel_tol * max(abs(j_sweep), 1e-300):
                break
        if best is None or jcur > best.objective:
            best = AcdResult(float(_wrap(wa)), float(_wrap(wb)), jcur, history)
    assert best is not None
    return best
