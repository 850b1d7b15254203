"""Gridless trajectory estimators.

TL-SFW is the greedy (lambda = 0) sliding Frank-Wolfe solver for the
Beurling-LASSO form of the observation model: per outer iteration it adds the
best new trajectory (coarse grid scan + continuous local ascent), solves the
amplitudes exactly, then jointly refines all trajectories found so far. The
residual it carries forward is the plain fit residual.

TL-NOMP adds one source per iteration with a single safeguarded Newton
refinement, then cyclically re-refines every source found so far until the
residual energy stops changing; its carried residual is the orthogonal
projection of the data away from all selected steering vectors. The
asymmetry between the two residual definitions is deliberate and follows the
respective pseudo-codes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .gridalgos import Spectrum, _check_blocks, find_peaks, grid_beam_power
from .grids import ParamGrid, grid_point
from .model import (
    ArrayConfig,
    SourceEstimate,
    TrajectoryParams,
    block_wavelengths,
    trajectory_steering_matrix,
)
from .optim import (
    Bounds,
    amplitudes_ls,
    batched_snapshot_ls,
    joint_refine,
    maximize_local,
    model_residuals,
    newton_step,
)


@dataclass
class RunTrace:
    """Diagnostics accumulated by one estimator invocation."""

    residual_norms: list[float] = field(default_factory=list)
    fit_history: list[tuple[str, float]] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    refinements: int = 0
    flags: list[str] = field(default_factory=list)
    final_residuals: list[np.ndarray] = field(default_factory=list)

    def add_time(self, phase: str, seconds: float):
        self.timings[phase] = self.timings.get(phase, 0.0) + seconds


def _frob_sq(residuals) -> float:
    return float(sum(np.sum(R.real**2 + R.imag**2) for R in residuals))


def _matched_amplitudes(omega, residuals, array, wavelengths):
    """Per-snapshot matched-filter amplitudes diag(A~(omega)^H R) / N, one
    length-L vector per frequency (the single-source least-squares solution)."""
    out = []
    for R, lam in zip(residuals, wavelengths):
        A = trajectory_steering_matrix(omega, array, R.shape[1], lam)
        out.append((np.conj(A) * R).sum(axis=0) / R.shape[0])
    return out


def _fit_residuals(Y, trajectories, amplitudes, array, wavelengths):
    """Y_f minus the model of all sources; amplitudes is per source a list of
    per-frequency vectors."""
    out = []
    for fi, (Yf, lam) in enumerate(zip(Y, wavelengths)):
        L = Yf.shape[1]
        model_f = np.zeros_like(Yf)
        for omega, amps in zip(trajectories, amplitudes):
            model_f += trajectory_steering_matrix(omega, array, L, lam) * amps[fi][None, :]
        out.append(Yf - model_f)
    return out


def _coarse_starts(residuals, grid, array, wavelengths, n_starts, trace):
    values = grid_beam_power(residuals, grid, array, wavelengths)
    if n_starts <= 1:
        return [grid_point(grid, int(np.argmax(values)))]
    peaks = find_peaks(Spectrum(grid, values), n_starts)
    if peaks.shortfall:
        trace.flags.append("coarse-peak-shortfall")
    return peaks.params


def tl_sfw(
    blocks,
    grid: ParamGrid,
    array: ArrayConfig,
    K: int,
    bounds: Bounds | None = None,
    n_starts: int = 1,
):
    """Sliding Frank-Wolfe trajectory localization.

    Per source: (i) coarse grid argmax of the beam power against the current
    residual followed by box-constrained local ascent over the continuum;
    (ii) exact least-squares amplitudes for all sources found so far,
    starting from the matched-filter initialization; (iii) joint
    variable-projection refinement of every trajectory. The residual is
    recomputed from the raw blocks after each iteration.

    Returns (list of K SourceEstimate, RunTrace).
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    _check_blocks(blocks)
    wavelengths = block_wavelengths(array, blocks)
    bounds = Bounds.from_grid(grid) if bounds is None else bounds
    Y = [b.data for b in blocks]
    trace = RunTrace()
    if K == 0:
        trace.final_residuals = [y.copy() for y in Y]
        return [], trace

    residuals = [y.copy() for y in Y]
    W: list[TrajectoryParams] = []
    X = []  # per-frequency (k, L) arrays
    for k in range(1, K + 1):
        t0 = time.perf_counter()
        starts = _coarse_starts(residuals, grid, array, wavelengths, n_starts, trace)
        t1 = time.perf_counter()
        trace.add_time("coarse", t1 - t0)

        best, best_val = None, -np.inf
        for start in starts:
            cand, report = maximize_local(start, residuals, array, wavelengths, bounds)
            trace.refinements += report.iterations
            if report.final_objective > best_val:
                best, best_val = cand, report.final_objective
        W.append(best)
        t2 = time.perf_counter()
        trace.add_time("local", t2 - t1)

        # matched-filter initialization against the raw data, then the exact
        # amplitude solve (problem (b))
        init_amps = [_matched_amplitudes(w, Y, array, wavelengths) for w in W]
        trace.fit_history.append(
            (f"add[{k}]", 0.5 * _frob_sq(_fit_residuals(Y, W, init_amps, array, wavelengths)))
        )
        X = amplitudes_ls(W, blocks, array)
        per_source = [[Xf[i] for Xf in X] for i in range(len(W))]
        trace.fit_history.append(
            (f"amp[{k}]", 0.5 * _frob_sq(_fit_residuals(Y, W, per_source, array, wavelengths)))
        )
        t3 = time.perf_counter()
        trace.add_time("amplitude", t3 - t2)

        W, X, report = joint_refine(W, blocks, array, bounds)
        trace.refinements += report.iterations
        trace.fit_history.append((f"joint[{k}]", report.final_objective))
        t4 = time.perf_counter()
        trace.add_time("joint", t4 - t3)

        residuals, _ = model_residuals(W, X, blocks, array, wavelengths)
        trace.residual_norms.append(float(np.sqrt(_frob_sq(residuals))))

    trace.final_residuals = residuals
    estimates = [
        SourceEstimate(w, tuple(Xf[i] for Xf in X)) for i, w in enumerate(W)
    ]
    return estimates, trace


def tl_nomp(
    blocks,
    grid: ParamGrid,
    array: ArrayConfig,
    K: int,
    bounds: Bounds | None = None,
    cyclic_tol: float = 1e-6,
    max_cycles: int = 50,
):
    """Newtonized OMP trajectory localization.

    Per source: (i) coarse grid argmax against the orthogonal residual plus
    matched-filter amplitudes; (ii) one safeguarded Newton step and amplitude
    re-estimate; (iii) global cyclic refinement sweeping all sources found so
    far (add a source back into the residual, re-estimate, Newton-refine,
    subtract) until the residual energy changes by less than ``cyclic_tol``
    over a sweep, capped at ``max_cycles``; (iv) residual re-projection of
    the data orthogonally to all selected steering vectors.

    Returns (list of K SourceEstimate, RunTrace).
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    _check_blocks(blocks)
    wavelengths = block_wavelengths(array, blocks)
    bounds = Bounds.from_grid(grid) if bounds is None else bounds
    Y = [b.data for b in blocks]
    trace = RunTrace()
    if K == 0:
        trace.final_residuals = [y.copy() for y in Y]
        return [], trace

    residuals = [y.copy() for y in Y]  # orthogonal residual R^{[k-1]}
    W: list[TrajectoryParams] = []
    amps: list[list[np.ndarray]] = []  # per source, per frequency (L,)
    L = Y[0].shape[1]
    for k in range(1, K + 1):
        t0 = time.perf_counter()
        values = grid_beam_power(residuals, grid, array, wavelengths)
        omega = grid_point(grid, int(np.argmax(values)))
        x_new = _matched_amplitudes(omega, residuals, array, wavelengths)
        t1 = time.perf_counter()
        trace.add_time("coarse", t1 - t0)

        omega, _ = newton_step(omega, residuals, array, wavelengths, bounds)
        trace.refinements += 1
        x_new = _matched_amplitudes(omega, residuals, array, wavelengths)
        W.append(omega)
        amps.append(x_new)
        t2 = time.perf_counter()
        trace.add_time("newton", t2 - t1)

        R_star = _fit_residuals(Y, W, amps, array, wavelengths)
        before = _frob_sq(R_star)
        cycles = 0
        converged = False
        while cycles < max_cycles:
            for i in range(len(W)):
                contrib = [
                    trajectory_steering_matrix(W[i], array, L, lam) * amps[i][fi][None, :]
                    for fi, lam in enumerate(wavelengths)
                ]
                R_hat = [Rs + c for Rs, c in zip(R_star, contrib)]
                amps[i] = _matched_amplitudes(W[i], R_hat, array, wavelengths)
                W[i], _ = newton_step(W[i], R_hat, array, wavelengths, bounds)
                amps[i] = _matched_amplitudes(W[i], R_hat, array, wavelengths)
                trace.refinements += 1
                R_star = [
                    Rh - trajectory_steering_matrix(W[i], array, L, lam) * amps[i][fi][None, :]
                    for fi, (Rh, lam) in enumerate(zip(R_hat, wavelengths))
                ]
            cycles += 1
            after = _frob_sq(R_star)
            trace.fit_history.append((f"cycle[{k}.{cycles}]", after))
            if abs(before - after) < cyclic_tol:
                converged = True
                break
            before = after
        if not converged:
            trace.flags.append(f"cyclic-cap[{k}]")
        t3 = time.perf_counter()
        trace.add_time("cyclic", t3 - t2)

        # orthogonal residual: project the data away from all selected
        # steering vectors, snapshot by snapshot
        for fi, lam in enumerate(wavelengths):
            A = np.stack([trajectory_steering_matrix(w, array, L, lam) for w in W])
            coeffs, _ = batched_snapshot_ls(A, Y[fi])
            residuals[fi] = Y[fi] - np.einsum("inl,li->nl", A, coeffs)
        trace.residual_norms.append(float(np.sqrt(_frob_sq(residuals))))
        trace.add_time("project", time.perf_counter() - t3)

    trace.final_residuals = residuals
    estimates = [SourceEstimate(w, tuple(amps[i])) for i, w in enumerate(W)]
    return estimates, trace
