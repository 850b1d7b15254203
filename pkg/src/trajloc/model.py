"""Array geometry, DOA trajectory models, and synthetic observation blocks.

Angles are degrees everywhere at the interface; radians appear only inside
phase computations. A block is a complex N x L matrix of L consecutive
snapshots from an N-sensor uniform linear array, and a source's DOA may move
across the block along a polynomial or bandlimited trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEG = np.pi / 180.0

POLYNOMIAL = "polynomial"
BANDLIMITED = "bandlimited"


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array.

    ``spacing`` is the inter-sensor distance in meters. Narrowband processing
    never needs an absolute wavelength: the array is taken to operate at
    half-wavelength spacing, i.e. the narrowband wavelength is ``2 * spacing``.
    Wideband runs derive per-frequency wavelengths from ``propagation_speed``.
    """

    n_sensors: int
    spacing: float = 0.5
    propagation_speed: float = 343.0

    def __post_init__(self):
        if self.n_sensors < 2:
            raise ValueError("ULA needs at least 2 sensors")
        if self.spacing <= 0:
            raise ValueError("sensor spacing must be positive")
        if self.propagation_speed <= 0:
            raise ValueError("propagation speed must be positive")

    @classmethod
    def for_frequencies(cls, n_sensors: int, frequencies, propagation_speed: float = 343.0):
        """Spacing set to half the wavelength of the highest frequency.

        The highest band then sits exactly at the spatial Nyquist limit and
        every lower one is oversampled, so no band aliases.
        """
        fmax = max(frequencies)
        if fmax <= 0:
            raise ValueError("frequencies must be positive")
        return cls(n_sensors, propagation_speed / fmax / 2.0, propagation_speed)


def wavelength_for(array: ArrayConfig, frequency: float | None) -> float:
    """Wavelength used when processing a block: c/f, or 2d for narrowband."""
    if frequency is None:
        return 2.0 * array.spacing
    if frequency <= 0:
        raise ValueError("frequency must be positive")
    return array.propagation_speed / frequency


def block_wavelengths(array: ArrayConfig, blocks) -> tuple[float, ...]:
    """Processing wavelength of each block in a (possibly wideband) set."""
    return tuple(wavelength_for(array, b.frequency) for b in blocks)


@dataclass(frozen=True)
class TrajectoryModel:
    """Family of DOA-vs-snapshot curves: ``polynomial`` order P or
    ``bandlimited`` order Q with fundamental ``nu`` in rad/snapshot."""

    kind: str
    order: int
    nu: float | None = None

    def __post_init__(self):
        if self.kind == POLYNOMIAL:
            if self.order < 0:
                raise ValueError("polynomial order must be >= 0")
            if self.nu is not None:
                raise ValueError("nu applies to bandlimited models only")
        elif self.kind == BANDLIMITED:
            if self.order < 1:
                raise ValueError("bandlimited order must be >= 1")
            if self.nu is None or self.nu <= 0:
                raise ValueError("bandlimited model needs nu > 0")
        else:
            raise ValueError(f"unknown trajectory model kind: {self.kind!r}")

    @classmethod
    def polynomial(cls, order: int) -> "TrajectoryModel":
        return cls(POLYNOMIAL, order)

    @classmethod
    def bandlimited(cls, order: int, nu: float) -> "TrajectoryModel":
        return cls(BANDLIMITED, order, nu)

    @property
    def n_params(self) -> int:
        """Dimension of the parameter vector (phi, coefficients)."""
        if self.kind == POLYNOMIAL:
            return 1 + self.order
        return 1 + 2 * self.order


def trajectory_basis(model: TrajectoryModel, L: int) -> np.ndarray:
    """Coefficient basis functions over snapshots l = 0..L-1.

    Returns an array of shape ``(model.n_params - 1, L)`` whose rows multiply
    the trajectory coefficients: ``(l/(L-1))**p`` for the polynomial model,
    ``sin(q*nu*l)`` for q = 1..Q followed by ``cos(q*nu*l)`` for the
    bandlimited one. The DOA sequence is ``phi + coeffs @ basis``, which also
    makes the rows the exact parameter derivatives of the DOA.
    """
    if L < 1:
        raise ValueError("block length must be >= 1")
    if model.kind == POLYNOMIAL:
        if model.order == 0:
            return np.zeros((0, L))
        if L < 2:
            raise ValueError("polynomial trajectory of order >= 1 needs L >= 2")
        t = np.arange(L) / (L - 1)
        return np.vstack([t**p for p in range(1, model.order + 1)])
    l = np.arange(L)
    sines = [np.sin(q * model.nu * l) for q in range(1, model.order + 1)]
    cosines = [np.cos(q * model.nu * l) for q in range(1, model.order + 1)]
    return np.vstack(sines + cosines)


@dataclass(frozen=True)
class TrajectoryParams:
    """One source's trajectory: broadside angle ``phi`` plus model coefficients,
    all in degrees."""

    model: TrajectoryModel
    phi: float
    coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        want = self.model.n_params - 1
        if len(self.coeffs) != want:
            raise ValueError(
                f"{self.model.kind} model of order {self.model.order} takes "
                f"{want} coefficients, got {len(self.coeffs)}"
            )

    def vector(self) -> np.ndarray:
        """Parameters as a flat (phi, *coeffs) float vector."""
        return np.array((self.phi,) + self.coeffs)

    @classmethod
    def from_vector(cls, model: TrajectoryModel, vec) -> "TrajectoryParams":
        vec = np.asarray(vec, dtype=float)
        return cls(model, vec[0], tuple(vec[1:]))


def doas(params: TrajectoryParams, L: int) -> np.ndarray:
    """DOA in degrees at every snapshot of an L-length block."""
    basis = trajectory_basis(params.model, L)
    theta = params.phi + np.asarray(params.coeffs) @ basis if params.coeffs else np.full(L, params.phi)
    return np.asarray(theta, dtype=float)


def doa_at_snapshot(params: TrajectoryParams, l: int, L: int) -> float:
    """DOA in degrees at snapshot ``l`` (0-based) of an L-length block."""
    if not 0 <= l <= L - 1:
        raise ValueError(f"snapshot index {l} outside block of length {L}")
    return float(doas(params, L)[l])


def trajectory_in_bounds(params: TrajectoryParams, L: int, limit: float = 90.0) -> bool:
    """True if every snapshot DOA stays strictly inside (-limit, +limit)."""
    theta = doas(params, L)
    return bool(np.all(np.abs(theta) < limit))


def steering_vector(theta: float, array: ArrayConfig, wavelength: float) -> np.ndarray:
    """Far-field ULA steering vector at DOA ``theta`` degrees.

    Element n is ``exp(j*2*pi*n*(d/lambda)*sin(theta))``; element 0 is
    exactly 1.
    """
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    phase = 2.0 * np.pi * (array.spacing / wavelength) * np.sin(theta * DEG)
    return np.exp(1j * phase * np.arange(array.n_sensors))


def trajectory_steering_matrix(
    params: TrajectoryParams, array: ArrayConfig, L: int, wavelength: float
) -> np.ndarray:
    """N x L matrix whose column l is the steering vector at the snapshot-l DOA."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    theta = doas(params, L)
    phase = 2.0 * np.pi * (array.spacing / wavelength) * np.sin(theta * DEG)
    return np.exp(1j * np.arange(array.n_sensors)[:, None] * phase[None, :])


@dataclass(frozen=True)
class ObservationBlock:
    """Complex N x L snapshot matrix for one frequency (None = narrowband)."""

    data: np.ndarray
    frequency: float | None
    snapshots: int

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise ValueError("observation data must be a 2-D matrix")
        if data.shape[1] != self.snapshots:
            raise ValueError(
                f"data has {data.shape[1]} columns but snapshots={self.snapshots}"
            )

    @property
    def n_sensors(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class GroundTruth:
    """What the synthesizer actually injected into a block set."""

    sources: tuple[TrajectoryParams, ...]
    amplitudes: np.ndarray  # (n_sources, n_frequencies, L) complex
    noise_variance: float
    signal_variance: float


@dataclass(frozen=True)
class SourceEstimate:
    """A recovered trajectory plus its per-frequency snapshot amplitudes."""

    params: TrajectoryParams
    amplitudes: tuple[np.ndarray, ...]


def synthesize_block(
    sources,
    array: ArrayConfig,
    L: int,
    snr_db: float | None,
    frequencies=None,
    seed: int = 0,
    *,
    unit_amplitudes: bool = False,
) -> tuple[list[ObservationBlock], GroundTruth]:
    """Generate one observation block per frequency for the given sources.

    Source amplitudes are i.i.d. circular complex Gaussian with variance 1,
    drawn independently per snapshot, source, and frequency; noise is i.i.d.
    circular complex Gaussian with variance ``10**(-snr_db/10)`` so that
    ``SNR = 10*log10(signal_variance / noise_variance)``. ``snr_db=None``
    produces noiseless data, and ``unit_amplitudes=True`` replaces the random
    amplitudes by ones (handy for analytic checks). Output is deterministic
    for a given seed.

    Parameters
    ----------
    sources : sequence of TrajectoryParams
        May be empty (pure-noise block).
    frequencies : sequence of float or None
        ``None`` means a single narrowband block (frequency tag None).
    """
    freqs = [None] if frequencies is None else list(frequencies)
    if not freqs:
        raise ValueError("frequencies list must not be empty")
    for f in freqs:
        if f is None:
            continue
        half_wave = array.propagation_speed / f / 2.0
        if array.spacing > half_wave * (1.0 + 1e-12):
            raise ValueError(
                f"spacing {array.spacing} m aliases at {f} Hz "
                f"(limit {half_wave:.6g} m)"
            )
    sources = tuple(sources)
    for src in sources:
        if not trajectory_in_bounds(src, L):
            raise ValueError(f"trajectory {src.vector()} leaves (-90, 90) within the block")

    signal_variance = 1.0
    noise_variance = 0.0 if snr_db is None else signal_variance * 10.0 ** (-snr_db / 10.0)

    rng = np.random.default_rng(seed)
    K, F = len(sources), len(freqs)
    if unit_amplitudes:
        amps = np.ones((K, F, L), dtype=complex)
    else:
        scale = np.sqrt(signal_variance / 2.0)
        amps = scale * (
            rng.standard_normal((K, F, L)) + 1j * rng.standard_normal((K, F, L))
        )

    blocks = []
    for fi, f in enumerate(freqs):
        lam = wavelength_for(array, f)
        Y = np.zeros((array.n_sensors, L), dtype=complex)
        for ki, src in enumerate(sources):
            Y += trajectory_steering_matrix(src, array, L, lam) * amps[ki, fi][None, :]
        if noise_variance > 0.0:
            nscale = np.sqrt(noise_variance / 2.0)
            Y += nscale * (
                rng.standard_normal((array.n_sensors, L))
                + 1j * rng.standard_normal((array.n_sensors, L))
            )
        blocks.append(ObservationBlock(Y, f, L))
    truth = GroundTruth(sources, amps, noise_variance, signal_variance)
    return blocks, truth
