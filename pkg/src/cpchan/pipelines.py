"""Parametric channel estimation pipelines.

Both receiver architectures follow the same sequence: model-order detection,
CP decomposition, per-component estimation of the directly identifiable
frequencies, least-squares refinement of the remaining factor, and a 2-D
alternating-coordinate-descent fit of the last two frequencies with a
closed-form gain. The per-component stages are independent of each other.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .cpsolver import CpFactors, CpSolveConfig, cp_als
from .harmonic import AcdConfig, TrigPolyRatio, acd_2d, esprit_tone, max_unit_circle, vandermonde
from .modelorder import estimate_model_order
from .simchannel import (
    ChannelParamSet,
    PathParams,
    PilotDigital,
    PilotHybrid,
    SystemDims,
    channel_tensor,
    combiner_response,
    pilot_waveform,
    wrap_angle,
)

__all__ = [
    "EstimationResult",
    "EstimatorConfig",
    "PilotDesignError",
    "EstimationError",
    "refine_a2",
    "jade_digital",
    "jade_objective_digital",
    "estimate_digital",
    "estimate_psi_hybrid",
    "refine_a1",
    "jade_hybrid",
    "jade_objective_hybrid",
    "estimate_hybrid",
]


class PilotDesignError(ValueError):
    """The pilot cannot excite the parameter being estimated."""


class EstimationError(RuntimeError):
    """A per-path stage failed; the message carries the path index."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator knobs shared by both pipelines.

    ``cp.rank`` is a placeholder; the solver is re-run with the detected
    model order. ``refine`` toggles the least-squares factor refinement
    (when off, the raw CP factor is rescaled from leading entries only).
    """

    cp: CpSolveConfig = field(default_factory=lambda: CpSolveConfig(rank=1))
    acd: AcdConfig = field(default_factory=AcdConfig)
    refine: bool = True


@dataclass
class EstimationResult:
    """Detected order, estimated paths, reconstruction and stage timings."""

    l_hat: int
    params: ChannelParamSet
    h_hat: np.ndarray
    timings: dict[str, float]
    diagnostics: dict

    @property
    def gains(self) -> np.ndarray:
        return self.params.gains()


def _unit_norm_sq(v: np.ndarray) -> float:
    n = float(np.vdot(v, v).real)
    if n == 0:
        raise ValueError("zero steering vector")
    return n


def refine_a2(component: np.ndarray, a1_hat: np.ndarray, a3_hat: np.ndarray) -> np.ndarray:
    """Least-squares refit of the symbol-mode vector of a rank-1 component
    against fixed first/third-mode steering vectors.

    Closed form of the pseudoinverse solution: project the component onto the
    steering pair and divide by their squared norms.
    """
    denom = _unit_norm_sq(a1_hat) * _unit_norm_sq(a3_hat)
    return np.einsum("n,u,ntu->t", np.conj(a1_hat), np.conj(a3_hat), component) / denom


def refine_a1(component: np.ndarray, a2_hat: np.ndarray, a3_hat: np.ndarray) -> np.ndarray:
    """Least-squares refit of the subcarrier-mode vector of a rank-1 component
    against fixed symbol/chain-mode steering vectors."""
    denom = _unit_norm_sq(a2_hat) * _unit_norm_sq(a3_hat)
    return np.einsum("t,m,ntm->n", np.conj(a2_hat), np.conj(a3_hat), component) / denom


# ---------------------------------------------------------------------------
# digital (single-stream) pipeline
# ---------------------------------------------------------------------------


def _row_autocorr_half(rows: np.ndarray) -> np.ndarray:
    """Half coefficients of sum_rows |poly_row(e^{jw})|^2."""
    n = rows.shape[1]
    acc = np.zeros(2 * n - 1, dtype=complex)
    for row in rows:
        acc += np.convolve(row, np.conj(row)[::-1])
    return acc[n - 1 :]


def _digital_slices(a2_hat: np.ndarray, pilot: PilotDigital):
    """Exact 1-D restrictions of the Doppler/departure ratio objective.

    Coordinate 0 is the Doppler frequency, coordinate 1 the departure
    frequency. The restricted objective equals |f(e^{jw})|^2 / g(w) with the
    numerator built so its modulus matches the matched-filter inner product.
    """
    p = pilot.precoder
    n_s, n_t = p.shape
    t_idx = np.arange(n_s)
    v_idx = np.arange(n_t)
    den_vs = _row_autocorr_half(p)

    def build(coord: int, fixed: float) -> TrigPolyRatio:
        if coord == 0:
            q = p @ np.exp(1j * fixed * v_idx)
            num = np.conj(a2_hat) * q
            return TrigPolyRatio(num, np.array([np.vdot(q, q)]))
        w = np.conj(a2_hat) * np.exp(1j * fixed * t_idx)
        return TrigPolyRatio(p.T @ w, den_vs)

    return build


def _digital_steering(pilot: PilotDigital, omega2: float, varsigma: float) -> np.ndarray:
    q = pilot.precoder @ np.exp(1j * varsigma * np.arange(pilot.n_t))
    return np.exp(1j * omega2 * np.arange(pilot.n_s)) * q


def jade_objective_digital(a2_hat: np.ndarray, pilot: PilotDigital, omega2: float, varsigma: float) -> float:
    """Matched-filter ratio |<alpha, a2>|^2 / ||alpha||^2 at one point."""
    alpha = _digital_steering(pilot, omega2, varsigma)
    denom = float(np.vdot(alpha, alpha).real)
    if denom == 0:
        return 0.0
    return float(np.abs(np.vdot(alpha, a2_hat)) ** 2 / denom)


def jade_digital(
    a2_hat: np.ndarray, pilot: PilotDigital, cfg: AcdConfig | None = None
) -> tuple[float, float, complex]:
    """Joint Doppler/departure estimation from the symbol-mode vector.

    Maximizes the matched-filter ratio over both frequencies by alternating
    exact line searches, then returns the closed-form gain.
    """
    a2_hat = np.asarray(a2_hat, dtype=complex).ravel()
    if a2_hat.size != pilot.n_s:
        raise ValueError("symbol-mode vector length must match the pilot")
    if not np.any(pilot.precoder):
        raise PilotDesignError("precoder is identically zero")
    res = acd_2d(_digital_slices(a2_hat, pilot), cfg or AcdConfig())
    omega2, varsigma = res.omega_a, res.omega_b
    alpha = _digital_steering(pilot, omega2, varsigma)
    b = complex(np.vdot(alpha, a2_hat) / np.vdot(alpha, alpha).real)
    return omega2, varsigma, b


def _order_bound(shape: tuple[int, int, int]) -> int:
    return min(shape[0] * shape[1], shape[0] * shape[2], shape[1] * shape[2])


def _empty_result(dims: SystemDims, timings: dict[str, float], diagnostics: dict) -> EstimationResult:
    h_hat = np.zeros((dims.n_c, dims.n_s, dims.n_r, dims.n_t), dtype=complex)
    return EstimationResult(0, ChannelParamSet([]), h_hat, timings, diagnostics)


def _assemble(
    dims: SystemDims,
    estimates: list[tuple[PathParams, float]],
    timings: dict[str, float],
    diagnostics: dict,
) -> EstimationResult:
    order = sorted(range(len(estimates)), key=lambda k: -abs(estimates[k][0].b))
    params = ChannelParamSet([estimates[k][0] for k in order])
    diagnostics["acd_objectives"] = [estimates[k][1] for k in order]
    h_hat = channel_tensor(params, dims)
    return EstimationResult(params.l, params, h_hat, timings, diagnostics)


def _digital_path_estimates(
    factors: CpFactors, pilot: PilotDigital, cfg: EstimatorConfig
) -> list[tuple[PathParams, float]]:
    """Independent per-component stage of the digital pipeline."""
    n_c, n_r = factors.a1.shape[0], factors.a3.shape[0]
    out = []
    for k in range(factors.rank):
        try:
            c1, c2, c3 = factors.component(k)
            omega1 = esprit_tone(c1)
            psi = esprit_tone(c3)
            v1 = vandermonde(omega1, n_c)
            v3 = vandermonde(psi, n_r)
            component = np.einsum("n,t,u->ntu", c1, c2, c3)
            if cfg.refine:
                a2_hat = refine_a2(component, v1, v3)
            else:
                a2_hat = c1[0] * c3[0] * c2
            omega2, varsigma, b = jade_digital(a2_hat, pilot, cfg.acd)
            objective = jade_objective_digital(a2_hat, pilot, omega2, varsigma)
        except Exception as exc:
            raise EstimationError(f"path {k}: {exc}") from exc
        out.append(
            (
                PathParams(
                    b,
                    float(wrap_angle(omega1)),
                    float(wrap_angle(omega2)),
                    float(wrap_angle(psi)),
                    float(wrap_angle(varsigma)),
                ),
                objective,
            )
        )
    return out


def estimate_digital(a: np.ndarray, pilot: PilotDigital, cfg: EstimatorConfig | None = None) -> EstimationResult:
    """Single-stream pipeline on the observation tensor ``a`` (n_c, n_s, n_r)."""
    cfg = cfg or EstimatorConfig()
    a = np.asarray(a, dtype=complex)
    if a.ndim != 3 or a.shape[1] != pilot.n_s:
        raise ValueError("observation shape is inconsistent with the pilot")
    dims = SystemDims(a.shape[0], a.shape[1], a.shape[2], pilot.n_t)
    timings: dict[str, float] = {}
    diagnostics: dict = {}

    t0 = time.perf_counter()
    report = estimate_model_order(a)
    timings["model_order"] = time.perf_counter() - t0
    l_hat = report.l_hat
    bound = _order_bound(a.shape)
    if l_hat > bound:
        diagnostics["order_clamped"] = {"detected": l_hat, "bound": bound}
        l_hat = bound
    diagnostics["model_order"] = report.per_mode_estimates
    if l_hat == 0:
        timings["cp"] = 0.0
        timings["per_path_total"] = 0.0
        return _empty_result(dims, timings, diagnostics)

    t0 = time.perf_counter()
    factors, fit_history = cp_als(a, replace(cfg.cp, rank=l_hat))
    timings["cp"] = time.perf_counter() - t0
    diagnostics["cp_fit"] = fit_history[-1]

    t0 = time.perf_counter()
    estimates = _digital_path_estimates(factors, pilot, cfg)
    timings["per_path_total"] = time.perf_counter() - t0
    return _assemble(dims, estimates, timings, diagnostics)


# ---------------------------------------------------------------------------
# hybrid (multi-stream) pipeline
# ---------------------------------------------------------------------------


def estimate_psi_hybrid(a3_hat: np.ndarray, combiner: np.ndarray) -> float:
    """Arrival frequency from the chain-mode vector of a component.

    Maximizes |<r(psi), a3>|^2 / ||r(psi)||^2, which profiles out the
    component's arbitrary complex scale.
    """
    a3_hat = np.asarray(a3_hat, dtype=complex).ravel()
    combiner = np.asarray(combiner, dtype=complex)
    if combiner.shape[0] != a3_hat.size:
        raise ValueError("chain-mode vector length must match the combiner")
    if not np.any(combiner):
        raise PilotDesignError("combiner collects no energy at any arrival angle")
    num = combiner.T @ np.conj(a3_hat)
    den = _row_autocorr_half(combiner)
    psi, _ = max_unit_circle(TrigPolyRatio(num, den))
    return psi


def _hybrid_slices(a1_hat: np.ndarray, x: np.ndarray):
    """Exact 1-D restrictions of the delay/departure ratio objective.

    Coordinate 0 is the delay frequency, coordinate 1 the departure frequency.
    """
    n_c, n_t = x.shape
    n_idx = np.arange(n_c)
    v_idx = np.arange(n_t)
    den_vs = _row_autocorr_half(x)

    def build(coord: int, fixed: float) -> TrigPolyRatio:
        if coord == 0:
            xs = x @ np.exp(1j * fixed * v_idx)
            num = np.conj(a1_hat) * xs
            return TrigPolyRatio(num, np.array([np.vdot(xs, xs)]))
        w = np.conj(a1_hat) * np.exp(1j * fixed * n_idx)
        return TrigPolyRatio(x.T @ w, den_vs)

    return build


def _hybrid_steering(x: np.ndarray, omega1: float, varsigma: float) -> np.ndarray:
    xs = x @ np.exp(1j * varsigma * np.arange(x.shape[1]))
    return np.exp(1j * omega1 * np.arange(x.shape[0])) * xs


def jade_objective_hybrid(a1_hat: np.ndarray, pilot: PilotHybrid, omega1: float, varsigma: float) -> float:
    beta = _hybrid_steering(pilot_waveform(pilot), omega1, varsigma)
    denom = float(np.vdot(beta, beta).real)
    if denom == 0:
        return 0.0
    return float(np.abs(np.vdot(beta, a1_hat)) ** 2 / denom)


def jade_hybrid(
    a1_hat: np.ndarray, pilot: PilotHybrid, cfg: AcdConfig | None = None
) -> tuple[float, float, complex]:
    """Joint delay/departure estimation from the subcarrier-mode vector."""
    a1_hat = np.asarray(a1_hat, dtype=complex).ravel()
    x = pilot_waveform(pilot)
    if a1_hat.size != x.shape[0]:
        raise ValueError("subcarrier-mode vector length must match the pilot")
    if not np.any(x):
        raise PilotDesignError("pilot waveform is identically zero")
    res = acd_2d(_hybrid_slices(a1_hat, x), cfg or AcdConfig())
    omega1, varsigma = res.omega_a, res.omega_b
    beta = _hybrid_steering(x, omega1, varsigma)
    b = complex(np.vdot(beta, a1_hat) / np.vdot(beta, beta).real)
    return omega1, varsigma, b


def _hybrid_path_estimates(
    factors: CpFactors, pilot: PilotHybrid, cfg: EstimatorConfig
) -> list[tuple[PathParams, float]]:
    """Independent per-component stage of the hybrid pipeline."""
    n_s = factors.a2.shape[0]
    out = []
    for k in range(factors.rank):
        try:
            c1, c2, c3 = factors.component(k)
            omega2 = esprit_tone(c2)
            psi = estimate_psi_hybrid(c3, pilot.combiner)
            v2 = vandermonde(omega2, n_s)
            r_psi = combiner_response(pilot.combiner, psi)
            component = np.einsum("n,t,m->ntm", c1, c2, c3)
            if cfg.refine:
                a1_hat = refine_a1(component, v2, r_psi)
            else:
                m_star = int(np.argmax(np.abs(r_psi)))
                if r_psi[m_star] == 0:
                    raise PilotDesignError("combiner response vanishes at the estimated arrival angle")
                a1_hat = c2[0] * (c3[m_star] / r_psi[m_star]) * c1
            omega1, varsigma, b = jade_hybrid(a1_hat, pilot, cfg.acd)
            objective = jade_objective_hybrid(a1_hat, pilot, omega1, varsigma)
        except Exception as exc:
            raise EstimationError(f"path {k}: {exc}") from exc
        out.append(
            (
                PathParams(
                    b,
                    float(wrap_angle(omega1)),
                    float(wrap_angle(omega2)),
                    float(wrap_angle(psi)),
                    float(wrap_angle(varsigma)),
                ),
                objective,
            )
        )
    return out


def estimate_hybrid(y: np.ndarray, pilot: PilotHybrid, cfg: EstimatorConfig | None = None) -> EstimationResult:
    """Multi-stream pipeline on the received tensor ``y`` (n_c, n_s, d_r)."""
    cfg = cfg or EstimatorConfig()
    y = np.asarray(y, dtype=complex)
    if y.ndim != 3 or y.shape[2] != pilot.d_r:
        raise ValueError("observation shape is inconsistent with the combiner")
    d_r = pilot.d_r
    dims = SystemDims(
        y.shape[0], y.shape[1], pilot.n_r, pilot.n_t, d_t=pilot.d_t, d_r=d_r,
        n_a_t=pilot.n_t // pilot.d_t, n_a_r=pilot.n_r // d_r,
    )
    timings: dict[str, float] = {}
    diagnostics: dict = {}

    t0 = time.perf_counter()
    report = estimate_model_order(y)
    timings["model_order"] = time.perf_counter() - t0
    l_hat = report.l_hat
    bound = _order_bound(y.shape)
    if l_hat > bound:
        diagnostics["order_clamped"] = {"detected": l_hat, "bound": bound}
        l_hat = bound
    diagnostics["model_order"] = report.per_mode_estimates
    if l_hat == 0:
        timings["cp"] = 0.0
        timings["per_path_total"] = 0.0
        return _empty_result(dims, timings, diagnostics)

    t0 = time.perf_counter()
    factors, fit_history = cp_als(y, replace(cfg.cp, rank=l_hat))
    timings["cp"] = time.perf_counter() - t0
    diagnostics["cp_fit"] = fit_history[-1]

    t0 = time.perf_counter()
    estimates = _hybrid_path_estimates(factors, pilot, cfg)
    timings["per_path_total"] = time.perf_counter() - t0
    return _assemble(dims, estimates, timings, diagnostics)
