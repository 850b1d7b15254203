"""Grid-based trajectory localization: TL-CBF spectra, peak extraction,
TL-OMP greedy pursuit, and the TL-SBL hyperparameter iteration.

All scans share one vectorized kernel that evaluates the beam power of every
grid trajectory against a set of residual matrices; wideband inputs are
handled non-coherently by summing that power over frequencies, so a single
narrowband block is just the F=1 special case of the same code path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grids import ParamGrid, grid_point, phase_table
from .model import (
    ArrayConfig,
    SourceEstimate,
    TrajectoryParams,
    block_wavelengths,
    trajectory_steering_matrix,
)
from .optim import NumericsWarning, amplitudes_ls, batched_snapshot_ls, _phase_scale


@dataclass(frozen=True)
class Spectrum:
    """Real non-negative power (or variance) value at every grid point."""

    grid: ParamGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got {values.shape}")
        if np.any(values < 0):
            raise ValueError("spectrum values must be non-negative")


@dataclass(frozen=True)
class PeakSet:
    """Local spectrum maxima sorted by value, best first.

    ``shortfall`` is set when fewer local maxima exist than were requested.
    """

    entries: tuple[tuple[TrajectoryParams, float], ...]
    shortfall: bool = False

    @property
    def params(self) -> list[TrajectoryParams]:
        return [p for p, _ in self.entries]


def _check_blocks(blocks) -> tuple[int, int]:
    if not blocks:
        raise ValueError("need at least one observation block")
    N, L = blocks[0].data.shape
    for b in blocks:
        if b.data.shape != (N, L):
            raise ValueError("all blocks must share sensor count and snapshot count")
    return N, L


def grid_beam_power(residuals, grid: ParamGrid, array: ArrayConfig, wavelengths) -> np.ndarray:
    """Beam power (1/L) sum_f sum_l |a_lf^H r_lf|^2 at every grid point.

    Horner recursion over the sensor index against the cached per-grid phasor
    table, so a scan costs N complex multiplies of an (M, L) array per
    frequency.
    """
    L = residuals[0].shape[1]
    M = grid.size
    values = np.zeros(M)
    for R, lam in zip(residuals, wavelengths):
        E = np.conj(phase_table(grid, L, _phase_scale(array, lam)))  # (M, L)
        N = R.shape[0]
        acc = np.broadcast_to(R[N - 1], (M, L)).copy()
        for n in range(N - 2, -1, -1):
            np.multiply(acc, E, out=acc)
            acc += R[n]
        values += (acc.real**2 + acc.imag**2).sum(axis=1)
    return values / L


def tl_cbf_spectrum(blocks, grid: ParamGrid, array: ArrayConfig) -> Spectrum:
    """Conventional-beamforming power spectrum over the trajectory grid.

    Single-frequency input gives the narrowband spectrum; wideband block sets
    sum the spectrum across frequencies.
    """
    _check_blocks(blocks)
    wavelengths = block_wavelengths(array, blocks)
    values = grid_beam_power([b.data for b in blocks], grid, array, wavelengths)
    return Spectrum(grid, values)


def find_peaks(spectrum: Spectrum, count: int) -> PeakSet:
    """Up to ``count`` local spectrum maxima, strongest first.

    A grid point is a local maximum when its value is >= every neighbor
    within Chebyshev distance 1 in the multi-index lattice (neighborhoods are
    truncated at the grid boundary). Ties are broken by lowest linear index;
    a shortfall of local maxima is flagged, not fatal.
    """
    if count < 1:
        raise ValueError("peak count must be >= 1")
    field = spectrum.values.reshape(spectrum.grid.shape)
    local_max = ndimage.maximum_filter(field, size=3, mode="constant", cval=-np.inf)
    idx = np.flatnonzero((field == local_max).reshape(-1))
    order = np.lexsort((idx, -spectrum.values[idx]))
    chosen = idx[order][:count]
    entries = tuple(
        (grid_point(spectrum.grid, int(i)), float(spectrum.values[i])) for i in chosen
    )
    return PeakSet(entries, shortfall=len(idx) < count)


def tl_omp(blocks, grid: ParamGrid, array: ArrayConfig, K: int):
    """Greedy on-grid pursuit of K trajectories.

    Each iteration selects the grid point with maximum beam power against the
    current residual, then re-projects every snapshot of the residual onto
    the orthogonal complement of all selected steering vectors at that
    snapshot. Reported amplitudes are the final least-squares fit of the
    selected trajectories to the raw blocks.

    Returns (list of SourceEstimate, residual Frobenius norm after each
    iteration).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    _, L = _check_blocks(blocks)
    wavelengths = block_wavelengths(array, blocks)
    residuals = [b.data.copy() for b in blocks]
    selected: list[TrajectoryParams] = []
    norms: list[float] = []
    deficient = False
    for _ in range(K):
        values = grid_beam_power(residuals, grid, array, wavelengths)
        selected.append(grid_point(grid, int(np.argmax(values))))
        for fi, lam in enumerate(wavelengths):
            A = np.stack(
                [trajectory_steering_matrix(t, array, L, lam) for t in selected]
            )
            coeffs, bad = batched_snapshot_ls(A, residuals[fi])
            deficient |= bad
            residuals[fi] -= np.einsum("inl,li->nl", A, coeffs)
        norms.append(float(np.sqrt(sum(np.sum(np.abs(R) ** 2) for R in residuals))))
    if deficient:
        warnings.warn(
            "selected trajectories coincide at some snapshots; projection used "
            "a thresholded pseudo-inverse",
            NumericsWarning,
            stacklevel=2,
        )
    amps = amplitudes_ls(selected, blocks, array)
    estimates = [
        SourceEstimate(t, tuple(X[i] for X in amps)) for i, t in enumerate(selected)
    ]
    return estimates, norms


def tl_sbl(
    blocks,
    grid: ParamGrid,
    array: ArrayConfig,
    K: int,
    noise_variance: float,
    peak_excess: int = 2,
    tol: float = 1e-3,
    max_iters: int = 500,
):
    """Sparse-Bayesian-learning spectrum over the trajectory grid (narrowband).

    Iterates the multiplicative variance update

        gamma_m <- gamma_m * sum_l |a_lm^H S_l^{-1} y_l|^2
                             / sum_l a_lm^H S_l^{-1} a_lm

    with per-snapshot covariances S_l = sigma_n^2 I + sum_m gamma_m a_lm
    a_lm^H, starting from gamma = 1, until the largest gamma change relative
    to the largest gamma drops below ``tol`` or ``max_iters`` is reached
    (non-convergence warns, never raises). Returns the final gamma vector as
    a Spectrum together with its K + peak_excess strongest peaks.
    """
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive (assumed known)")
    if len(blocks) != 1:
        raise ValueError("TL-SBL is narrowband: pass exactly one block")
    N, L = _check_blocks(blocks)
    lam = block_wavelengths(array, blocks)[0]
    M = grid.size

    E = phase_table(grid, L, _phase_scale(array, lam))  # (M, L)
    A = np.empty((L, N, M), dtype=complex)  # A[l, n, m] = E[m, l]**n
    A[:, 0, :] = 1.0
    for n in range(1, N):
        A[:, n, :] = A[:, n - 1, :] * E.T
    Ac = np.conj(A)
    Yl = blocks[0].data.T  # (L, N)

    gamma = np.ones(M)
    eye = np.eye(N)[None]
    converged = False
    for _ in range(max_iters):
        Sigma = noise_variance * eye + np.einsum("lnm,lkm->lnk", A * gamma[None, None, :], Ac)
        Cinv = np.linalg.inv(Sigma)
        Cy = np.einsum("lnk,lk->ln", Cinv, Yl)
        b = np.einsum("lnm,ln->lm", Ac, Cy)
        CA = np.einsum("lnk,lkm->lnm", Cinv, A)
        q = np.einsum("lnm,lnm->lm", Ac, CA).real
        num = (b.real**2 + b.imag**2).sum(axis=0)
        den = q.sum(axis=0)
        gamma_new = gamma * num / den
        rel = float(np.max(np.abs(gamma_new - gamma)) / max(np.max(gamma), 1e-300))
        gamma = gamma_new
        if rel < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"TL-SBL did not converge within {max_iters} iterations",
            NumericsWarning,
            stacklevel=2,
        )
    spectrum = Spectrum(grid, gamma)
    return spectrum, find_peaks(spectrum, K + peak_excess)
