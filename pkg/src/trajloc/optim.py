"""Continuous-parameter kernels shared by the gridless estimators.

The central quantity is the beamforming objective

    J(omega) = (1/L) * sum_f sum_l |a_lf(omega)^H r_lf|^2

evaluated against residual matrices ``r``. Trajectory DOAs are linear in the
parameters (phi plus coefficients times fixed basis functions of the snapshot
index), which keeps the chain rule short: all derivatives reduce to weighted
sensor-index moments of ``conj(a) * r``.

Everything here works in degrees at the interface and is purely functional;
callers pass one residual matrix and one wavelength per frequency.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grids import ParamGrid
from .model import (
    DEG,
    ArrayConfig,
    TrajectoryParams,
    block_wavelengths,
    doas,
    trajectory_basis,
    trajectory_steering_matrix,
)

ARMIJO = 1e-4
BACKTRACK = 0.5
MAX_HALVINGS = 60


class NumericsWarning(RuntimeWarning):
    """Non-fatal numerical condition (rank deficiency, non-convergence)."""


@dataclass(frozen=True)
class Bounds:
    """Per-parameter box for the continuous trajectory space, degrees."""

    lows: tuple[float, ...]
    highs: tuple[float, ...]

    def __post_init__(self):
        if len(self.lows) != len(self.highs):
            raise ValueError("lows/highs length mismatch")
        for lo, hi in zip(self.lows, self.highs):
            if not lo < hi:
                raise ValueError(f"empty bound interval [{lo}, {hi}]")

    @classmethod
    def from_grid(cls, grid: ParamGrid, phi_limit: float = 89.0) -> "Bounds":
        """Each grid axis extended by one step; phi clamped inside the
        steering model's valid range."""
        lows, highs = [], []
        for i, ax in enumerate(grid.axes):
            lo = ax.start - ax.step
            hi = ax.stop + ax.step
            if i == 0:
                lo, hi = max(lo, -phi_limit), min(hi, phi_limit)
            lows.append(lo)
            highs.append(hi)
        return cls(tuple(lows), tuple(highs))

    def clip(self, vec: np.ndarray) -> np.ndarray:
        return np.clip(vec, self.lows, self.highs)

    def contains(self, vec) -> bool:
        vec = np.asarray(vec, dtype=float)
        return bool(np.all(vec >= self.lows) and np.all(vec <= self.highs))


@dataclass(frozen=True)
class OptimReport:
    iterations: int
    converged: bool
    final_objective: float
    step_norms: tuple[float, ...]
    objectives: tuple[float, ...] = ()  # value after each iteration


def _phase_scale(array: ArrayConfig, wavelength: float) -> float:
    # 2*pi*d/lambda, the per-sensor phase increment at sin(theta) = 1
    return 2.0 * np.pi * array.spacing / wavelength


def _moments(theta_deg: np.ndarray, residual: np.ndarray, cf: float, orders: int):
    """Sensor-index moments m_k[l] = sum_n n^k conj(a_n(theta_l)) r_nl
    for k = 0..orders. Returns a list of length-L complex vectors."""
    n = np.arange(residual.shape[0], dtype=float)
    phase = cf * np.sin(theta_deg * DEG)
    # conj(a) entries without forming a separately
    B = np.exp(-1j * np.outer(n, phase)) * residual
    out = [B.sum(axis=0)]
    for k in range(1, orders + 1):
        out.append((n[:, None] ** k * B).sum(axis=0))
    return out


def objective(params: TrajectoryParams, residuals, array: ArrayConfig, wavelengths) -> float:
    """Beam power of one trajectory against per-frequency residual matrices."""
    L = residuals[0].shape[1]
    theta = doas(params, L)
    total = 0.0
    for R, lam in zip(residuals, wavelengths):
        (z0,) = _moments(theta, R, _phase_scale(array, lam), 0)
        total += float(np.sum(np.abs(z0) ** 2))
    return total / L


def objective_grad_hess(params: TrajectoryParams, residuals, array: ArrayConfig, wavelengths):
    """Analytic gradient and Hessian of `objective` in the trajectory
    parameters (degrees).

    Uses d a_n / d theta = j*cf*n*cos(theta)*a_n (theta in radians) composed
    with the linear snapshot basis; the Hessian keeps both the |dz|^2 and the
    Re(conj(z) * d2z) terms.
    """
    L = residuals[0].shape[1]
    theta = doas(params, L)
    basis = trajectory_basis(params.model, L)
    T = np.vstack([np.ones(L), basis])  # rows: d theta_l / d parameter
    cos_t = np.cos(theta * DEG)
    sin_t = np.sin(theta * DEG)
    D = T.shape[0]
    g = np.zeros(D)
    H = np.zeros((D, D))
    for R, lam in zip(residuals, wavelengths):
        cf = _phase_scale(array, lam)
        z0, z1, z2 = _moments(theta, R, cf, 2)
        dz = -1j * cf * DEG * cos_t * z1
        d2z = 1j * cf * DEG**2 * sin_t * z1 - (cf * DEG * cos_t) ** 2 * z2
        dF = 2.0 * np.real(np.conj(z0) * dz)
        d2F = 2.0 * (np.abs(dz) ** 2 + np.real(np.conj(z0) * d2z))
        g += T @ dF
        H += (T * d2F) @ T.T
    return g / L, H / L


def _objective_vec(model, vec, residuals, array, wavelengths) -> float:
    return objective(TrajectoryParams.from_vector(model, vec), residuals, array, wavelengths)


def batched_snapshot_ls(A: np.ndarray, Y: np.ndarray):
    """Least-squares coefficients of every snapshot of Y in its steering set.

    ``A`` is a (k, N, L) stack of trajectory steering matrices and ``Y`` is
    (N, L); solves the N x k system at each snapshot via the normal
    equations, falling back to a tolerance-thresholded pseudo-inverse where
    the steering set is rank deficient. Returns ((L, k) coefficients,
    deficient flag).
    """
    k, _, L = A.shape
    if k == 1:
        # a^H a = N for unit-modulus steering entries
        x = (np.conj(A[0]) * Y).sum(axis=0) / A.shape[1]
        return x[:, None], False
    G = np.einsum("inl,jnl->lij", np.conj(A), A)  # (L, k, k) Gram matrices
    b = np.einsum("inl,nl->li", np.conj(A), Y)  # (L, k)
    w = np.linalg.eigvalsh(G)
    bad = w[:, 0] < 1e-10 * np.maximum(w[:, -1], 1.0)
    X = np.empty((L, k), dtype=complex)
    good = ~bad
    if good.any():
        X[good] = np.linalg.solve(G[good], b[good][..., None])[..., 0]
    for l in np.nonzero(bad)[0]:
        X[l] = np.linalg.pinv(A[:, :, l].T, rcond=1e-10) @ Y[:, l]
    return X, bool(bad.any())


def amplitudes_ls(trajectories, blocks, array: ArrayConfig):
    """Exact per-snapshot least-squares amplitudes for k trajectories.

    For every frequency and snapshot l, stacks the k steering vectors into an
    N x k matrix and solves the linear system; this is the closed-form
    minimizer of the fit error over amplitudes. Snapshots where trajectories
    coincide (rank-deficient steering set) fall back to the minimum-norm
    pseudo-inverse solution and raise a `NumericsWarning`.

    Returns one (k, L) complex array per frequency.
    """
    trajectories = list(trajectories)
    if len(trajectories) < 1:
        raise ValueError("need at least one trajectory")
    wavelengths = block_wavelengths(array, blocks)
    out = []
    deficient = False
    for block, lam in zip(blocks, wavelengths):
        L = block.data.shape[1]
        A = np.stack(
            [trajectory_steering_matrix(t, array, L, lam) for t in trajectories]
        )  # (k, N, L)
        X, bad = batched_snapshot_ls(A, block.data)
        deficient |= bad
        out.append(X.T.copy())
    if deficient:
        warnings.warn(
            "steering vectors nearly coincide at some snapshots; "
            "used minimum-norm amplitudes",
            NumericsWarning,
            stacklevel=2,
        )
    return out


def _backtrack(value, u, d, g, base, bounds, maximize):
    """Projected Armijo backtracking along direction d. Returns (point, value)
    with the guarantee value(point) is no worse than base."""
    t = 1.0
    sign = 1.0 if maximize else -1.0
    for _ in range(MAX_HALVINGS):
        cand = bounds.clip(u + t * d)
        step = cand - u
        if not np.any(step):
            break
        vc = value(cand)
        gain = float(g @ step)
        ok = vc >= base + ARMIJO * max(gain, 0.0) if maximize else vc <= base + ARMIJO * min(gain, 0.0)
        if ok and (sign * (vc - base) >= 0.0):
            return cand, vc
        t *= BACKTRACK
    return u, base


def maximize_local(
    omega0: TrajectoryParams,
    residuals,
    array: ArrayConfig,
    wavelengths,
    bounds: Bounds,
    step_tol: float = 1e-10,
    max_iters: int = 100,
):
    """Box-constrained local ascent of the beam objective from ``omega0``.

    Takes safeguarded Newton steps whenever the Hessian is negative definite
    (so the quadratic model has a maximum), gradient-ascent steps otherwise,
    with projected Armijo backtracking either way. Stops when the parameter
    step drops below ``step_tol`` or after ``max_iters`` iterations; the
    returned objective is never below the starting one.
    """
    model = omega0.model
    u = bounds.clip(omega0.vector())
    value = lambda v: _objective_vec(model, v, residuals, array, wavelengths)
    J = value(u)
    step_norms = []
    objectives = []
    converged = False
    for _ in range(max_iters):
        g, H = objective_grad_hess(
            TrajectoryParams.from_vector(model, u), residuals, array, wavelengths
        )
        try:
            np.linalg.cholesky(-H)
            d = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            d = g
        u_new, J_new = _backtrack(value, u, d, g, J, bounds, maximize=True)
        step = float(np.linalg.norm(u_new - u))
        step_norms.append(step)
        u, J = u_new, J_new
        objectives.append(J)
        if step < step_tol:
            converged = True
            break
    report = OptimReport(len(step_norms), converged, J, tuple(step_norms), tuple(objectives))
    return TrajectoryParams.from_vector(model, u), report


def newton_step(
    omega: TrajectoryParams,
    residuals,
    array: ArrayConfig,
    wavelengths,
    bounds: Bounds,
):
    """One safeguarded Newton step on the beam objective.

    The candidate ``omega - H^{-1} g`` (projected onto the bounds) is kept
    only if the objective does not decrease; otherwise one backtracking
    gradient-ascent step is taken instead. Returns the new parameters and
    whether the Newton candidate was used.
    """
    model = omega.model
    u = bounds.clip(omega.vector())
    value = lambda v: _objective_vec(model, v, residuals, array, wavelengths)
    J0 = value(u)
    g, H = objective_grad_hess(
        TrajectoryParams.from_vector(model, u), residuals, array, wavelengths
    )
    try:
        cand = bounds.clip(u - np.linalg.solve(H, g))
        if value(cand) >= J0:
            return TrajectoryParams.from_vector(model, cand), True
    except np.linalg.LinAlgError:
        warnings.warn("singular Hessian; falling back to gradient step",
                      NumericsWarning, stacklevel=2)
    u_new, _ = _backtrack(value, u, g, g, J0, bounds, maximize=True)
    return TrajectoryParams.from_vector(model, u_new), False


def model_residuals(trajectories, amplitudes, blocks, array, wavelengths):
    """Residual matrices Y_f - sum_i A_i diag(x_i) plus the stacked steering
    tensors used for derivative assembly."""
    residuals, steering = [], []
    for fi, (block, lam) in enumerate(zip(blocks, wavelengths)):
        L = block.snapshots
        A = np.stack(
            [trajectory_steering_matrix(t, array, L, lam) for t in trajectories]
        )  # (k, N, L)
        model_f = np.einsum("inl,il->nl", A, amplitudes[fi])
        residuals.append(block.data - model_f)
        steering.append(A)
    return residuals, steering


def _fit_error(residuals) -> float:
    return 0.5 * sum(float(np.sum(np.abs(R) ** 2)) for R in residuals)


def joint_refine(
    trajectories,
    blocks,
    array: ArrayConfig,
    bounds: Bounds,
    step_tol: float = 1e-10,
    max_iters: int = 100,
):
    """Jointly refine k trajectories against the raw blocks, amplitudes
    eliminated by variable projection.

    At every evaluation the amplitudes are set to their closed-form optimum
    (`amplitudes_ls`), so the search runs over trajectory parameters only.
    Descent directions come from a damped Gauss-Newton model built on the
    Kaufman variable-projection Jacobian (amplitudes held at their optimum,
    which by the envelope theorem also yields the exact reduced gradient),
    safeguarded by projected Armijo backtracking. The returned fit error
    never exceeds the starting one.

    Returns (trajectories, per-frequency amplitude arrays, OptimReport).
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("need at least one trajectory")
    model = trajectories[0].model
    if any(t.model != model for t in trajectories):
        raise ValueError("joint refinement requires a single trajectory model")
    k = len(trajectories)
    D = model.n_params
    L = blocks[0].snapshots
    wavelengths = block_wavelengths(array, blocks)
    basis = trajectory_basis(model, L)
    T = np.vstack([np.ones(L), basis])  # (D, L)
    lows = np.tile(bounds.lows, k)
    highs = np.tile(bounds.highs, k)
    box = Bounds(tuple(lows), tuple(highs))

    def split(u):
        return [TrajectoryParams.from_vector(model, u[i * D : (i + 1) * D]) for i in range(k)]

    def evaluate(u):
        trajs = split(u)
        X = amplitudes_ls(trajs, blocks, array)
        R, A = model_residuals(trajs, X, blocks, array, wavelengths)
        return _fit_error(R), trajs, X, R, A

    u = box.clip(np.concatenate([t.vector() for t in trajectories]))
    E, trajs, X, R, A = evaluate(u)
    step_norms = []
    objectives = []
    converged = False
    for _ in range(max_iters):
        g = np.zeros(k * D)
        H = np.zeros((k * D, k * D))
        theta = np.stack([doas(t, L) for t in trajs])  # (k, L)
        dcoef = 1j * DEG * np.cos(theta * DEG)  # d a / d theta_deg factor, per (k, L)
        n = np.arange(array.n_sensors, dtype=float)
        for fi, (R_f, A_f, lam) in enumerate(zip(R, A, wavelengths)):
            cf = _phase_scale(array, lam)
            # W[i, n, l] = x_il * d a_n(theta_il) / d theta, so the Jacobian
            # column for parameter (i, c) is -W[i] * T[c]
            W = (X[fi][:, None, :] * (cf * dcoef)[:, None, :]) * (n[None, :, None] * A_f)
            p = np.einsum("nl,inl->il", np.conj(R_f), W)
            g += -np.real(p @ T.T).reshape(-1)
            q = np.einsum("inl,jnl->ijl", np.conj(W), W)
            Hblk = np.real(np.einsum("ijl,cl,dl->icjd", q, T, T))
            H += Hblk.reshape(k * D, k * D)
        mu = 1e-10 * max(float(np.trace(H)) / (k * D), 1.0)
        try:
            d = np.linalg.solve(H + mu * np.eye(k * D), -g)
        except np.linalg.LinAlgError:
            d = -g
        u_new, E_new = _backtrack(lambda v: evaluate(v)[0], u, d, g, E, box, maximize=False)
        step = float(np.linalg.norm(u_new - u))
        step_norms.append(step)
        if step < step_tol:
            # returned state stays at u; u_new is within step_tol of it
            objectives.append(E)
            converged = True
            break
        u = u_new
        E, trajs, X, R, A = evaluate(u)
        objectives.append(E)
    report = OptimReport(len(step_norms), converged, E, tuple(step_norms), tuple(objectives))
    return trajs, X, report
