"""Phase-space (Glauber P-function) description of the heralded cooling protocol.

The oscillator starts in a thermal state, whose P-function is a Gaussian.
Every successful round multiplies it by a filter that depends on the kick
``b_k`` delivered by that round's pulse block. Two kernels are available:

``exact``
    The exact image of ``rho -> V rho V^dag`` (dephasing and readout folded
    in) on a sampled P-function. Direct terms shift P by +-b_k. The cross
    terms shift it by an imaginary amount and multiply it by a plane wave.
    Both operations are diagonal in Fourier space. Damping is the exact
    thermal channel, applied as a rescaling plus a Gaussian blur.
``filter``
    The closed-form product filter ``G = prod_k Re exp(kappa {...})``
    multiplying the thermal Gaussian. It is the leading-order (large
    occupancy) description and loses accuracy once lambda^2 n is of order one.

All grids live in the frame co-rotating with the drift between rounds.
``PGrid.frame_rotation`` records the angle that maps them to the lab frame.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

import numpy as np

from .errors import DegenerateBathError, TruncationWarning
from .fock import Observables, OscillatorSpec
from .herald import SpinSpec
from .pulses import PulseSchedule, lambda_eff

__all__ = [
    "FilterParams",
    "GridConfig",
    "PGrid",
    "PRound",
    "p0_eval",
    "g_filter",
    "damped_filter",
    "kick_sequence",
    "evolve_p",
    "p_trajectory",
    "moments_from_p",
    "pgrid_rows",
    "params_from_schedule",
]

_SERIES_CUTOFF = 1e-6
_SPECTRAL_FLOOR = 1e-13
_EDGE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class FilterParams:
    """Kick strength, detuning and round count for the phase-space engines.

    ``epsilon`` is complex: the real part is the angular detuning of the
    pulse train, the imaginary part the oscillator energy damping rate.
    ``eta`` is the spin contrast seen by the readout, exp(-t/T2) * (2f - 1).
    """

    lam: float
    epsilon: complex = 0j
    block_time: float = 1.0
    rounds: int = 1
    eta: float = 1.0

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError(f"rounds must be >= 0, got {self.rounds}")
        if not self.block_time > 0:
            raise ValueError(f"block_time must be positive, got {self.block_time}")
        if complex(self.epsilon).imag < 0:
            raise ValueError("damping rate (imaginary part of epsilon) must be >= 0")
        if not -1.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [-1, 1], got {self.eta}")

    @property
    def detuning(self) -> float:
        return complex(self.epsilon).real

    @property
    def gamma(self) -> float:
        return complex(self.epsilon).imag

    @property
    def drift(self) -> float:
        """Phase accumulated between successive kicks, epsilon * t."""
        return self.detuning * self.block_time

    def kappa(self) -> complex:
        """lambda (e^{i eps t} - 1) / (eps t); tends to i lambda on resonance."""
        x = self.drift
        if abs(x) < _SERIES_CUTOFF:
            return self.lam * complex(-0.5 * x, 1.0 - x * x / 6.0)
        half = math.sin(0.5 * x)
        return self.lam * complex(-2.0 * half * half, math.sin(x)) / x


@dataclass(frozen=True)
class GridConfig:
    """Square sampling grid; ``extent`` defaults to 7 sqrt(n_thermal).

    The exact kernel needs the thermal tail to sit below round-off at the
    edge (exp(-49) here): the periodic spectrum sees any edge step, and the
    imaginary shifts amplify it round after round.
    """

    extent: float | None = None
    resolution: int = 256

    def __post_init__(self):
        if self.resolution < 64:
            raise ValueError(f"resolution must be >= 64, got {self.resolution}")
        if self.extent is not None and not self.extent > 0:
            raise ValueError("extent must be positive")

    def axis(self, n_thermal: float) -> np.ndarray:
        """Cell midpoints of one axis."""
        r = self.extent if self.extent is not None else 7.0 * math.sqrt(n_thermal)
        dx = 2.0 * r / self.resolution
        return -r + dx * (np.arange(self.resolution) + 0.5)


@dataclass(frozen=True, eq=False)
class PGrid:
    """Normalized P-function samples on cell midpoints, ``values[i, j] = P(x_i + i y_j)``."""

    extent: float
    resolution: int
    values: np.ndarray
    c_m: float
    frame_rotation: float = 0.0

    @property
    def axis(self) -> np.ndarray:
        dx = 2.0 * self.extent / self.resolution
        return -self.extent + dx * (np.arange(self.resolution) + 0.5)

    @property
    def cell_area(self) -> float:
        return (2.0 * self.extent / self.resolution) ** 2

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_area)


@dataclass(frozen=True)
class PRound:
    round: int
    p_success: float
    observables: Observables


def p0_eval(alpha, n_thermal: float):
    """Thermal P-function exp(-|alpha|^2 / n) / (pi n)."""
    if n_thermal <= 1e-9:
        raise DegenerateBathError(
            f"n_thermal={n_thermal} has a singular P-function; use the Fock engine"
        )
    a2 = np.abs(alpha) ** 2
    return np.exp(-a2 / n_thermal) / (math.pi * n_thermal)


def _filter_log(alpha, params: FilterParams, decay: float):
    """Sum over rounds of log|Re exp(z_k)| and the product of the signs."""
    alpha = np.asarray(alpha, dtype=complex)
    kappa = params.kappa()
    x = params.drift
    log_mag = np.zeros(alpha.shape)
    sign = np.ones(alpha.shape)
    for k in range(1, params.rounds + 1):
        fwd = cmath.exp(1j * (k - 1) * x - (k - 1) * decay)
        back = cmath.exp(-1j * k * x - k * decay)
        z = kappa * (alpha * fwd + np.conj(alpha) * back)
        c = np.cos(z.imag)
        with np.errstate(divide="ignore"):
            log_mag += z.real + np.log(np.abs(c))
        sign *= np.sign(c)
    return log_mag, sign


def g_filter(alpha, params: FilterParams):
    """Product filter over k = 1..M of Re exp(kappa {alpha e^{i(k-1)eps t} + conj(alpha) e^{-i k eps t}}).

    Evaluated as sign * exp(sum of logs) so that large M cannot overflow.
    Uses only the real detuning; see ``damped_filter`` for Gamma > 0.
    """
    log_mag, sign = _filter_log(alpha, params, 0.0)
    return sign * np.exp(log_mag)


def damped_filter(alpha, params: FilterParams):
    """Product filter with the complex detuning eps + i Gamma.

    The imaginary part enters every phase factor as exp(-Gamma t / 2) per
    round, in the direction that attenuates the later kicks. At Gamma = 0
    this is ``g_filter``.
    """
    log_mag, sign = _filter_log(alpha, params, 0.5 * params.gamma * params.block_time)
    return sign * np.exp(log_mag)


def kick_sequence(params: FilterParams) -> np.ndarray:
    """Co-rotating kick b_k = kappa e^{-i k eps t} for k = 1..M."""
    k = np.arange(1, params.rounds + 1)
    return params.kappa() * np.exp(-1j * k * params.drift)


class _Spectral:
    """Fourier machinery on a fixed midpoint grid."""

    def __init__(self, axis: np.ndarray):
        n = axis.size
        self.x = axis
        self.dx = float(axis[1] - axis[0])
        self.k = 2.0 * math.pi * np.fft.fftfreq(n, self.dx)
        self.kx = self.k[:, None]
        self.ky = self.k[None, :]
        self.z = axis[:, None] + 1j * axis[None, :]
        kmax = math.pi / self.dx
        self.edge_band = np.maximum(np.abs(self.kx), np.abs(self.ky)) > 0.75 * kmax
        self.edge_weight = 0.0

    def shifted(self, f: np.ndarray, sx: complex, sy: complex) -> np.ndarray:
        """Samples of P(x - sx, y - sy) from its spectrum ``f``; sx, sy may be complex."""
        return np.fft.ifft2(f * np.exp(-1j * (self.kx * sx + self.ky * sy)))

    def forward(self, values: np.ndarray) -> np.ndarray:
        f = np.fft.fft2(values)
        mag = np.abs(f)
        # largest relative spectral weight seen near Nyquist: an aliasing gauge
        self.edge_weight = max(self.edge_weight, float(mag[self.edge_band].max() / mag.max()))
        # spectral content below the floor is round-off; the imaginary shifts
        # amplify it exponentially, so drop it before it is used
        f[mag < _SPECTRAL_FLOOR * mag.max()] = 0.0
        return f

    def thermal_channel(self, values: np.ndarray, s: float, added: float) -> np.ndarray:
        """P(alpha / s) / s^2 convolved with a thermal Gaussian of occupancy ``added``."""
        e_s = np.exp(-1j * s * np.outer(self.k, self.x))
        spec = e_s @ values @ e_s.T
        spec *= np.exp(-0.25 * added * (self.kx**2 + self.ky**2))
        e_1 = np.exp(1j * np.outer(self.x, self.k))
        n = self.x.size
        return (e_1 @ spec @ e_1.T).real / (n * n)


def _exact_round(sp: _Spectral, values: np.ndarray, b: complex, eta: float) -> np.ndarray:
    f = sp.forward(values)
    br, bi = b.real, b.imag
    out = 0.25 * (sp.shifted(f, br, bi) + sp.shifted(f, -br, -bi))
    if eta != 0.0:
        # P(gamma - b, conj(gamma) + conj(b)) e^{2 (b conj(gamma) - conj(b) gamma) + 2|b|^2} and its mirror
        wave = np.exp(4j * (b * np.conj(sp.z)).imag)
        c1 = sp.shifted(f, 1j * bi, -1j * br) * wave
        c2 = sp.shifted(f, -1j * bi, 1j * br) * np.conj(wave)
        out += 0.25 * eta * math.exp(2.0 * abs(b) ** 2) * (c1 + c2)
    return out.real


@dataclass(frozen=True)
class _Step:
    kick: complex
    rotation: float
    shrink: float
    eta: float
    gamma: float


def _plan(params: FilterParams | Sequence[FilterParams]) -> list[_Step]:
    """Per-round kicks in the co-rotating frame and the lab angle after each round.

    A single FilterParams repeats the same block ``rounds`` times. A sequence
    gives one block per round (its ``rounds`` fields are ignored), which is
    how round-dependent pulse counts enter.
    """
    if isinstance(params, FilterParams):
        blocks = [params] * params.rounds
    else:
        blocks = list(params)
    steps, phi = [], 0.0
    for p in blocks:
        phi += p.drift
        steps.append(
            _Step(
                kick=p.kappa() * cmath.exp(-1j * phi),
                rotation=phi % (2.0 * math.pi),
                shrink=math.exp(-0.5 * p.gamma * p.block_time),
                eta=p.eta,
                gamma=p.gamma,
            )
        )
    return steps


def _iterate(
    n_thermal: float,
    params: FilterParams | Sequence[FilterParams],
    grid: GridConfig,
    kernel: str,
    n_bath: float,
) -> Iterator[tuple[int, np.ndarray, float, float]]:
    axis = grid.axis(n_thermal)
    dx = float(axis[1] - axis[0])
    area = dx * dx
    z = axis[:, None] + 1j * axis[None, :]
    p0 = p0_eval(z, n_thermal)
    yield 0, p0, 1.0, 0.0
    if kernel == "filter":
        if not isinstance(params, FilterParams):
            raise ValueError("the filter kernel takes a single FilterParams")
        prev = 1.0
        for m in range(1, params.rounds + 1):
            sub = FilterParams(params.lam, params.epsilon, params.block_time, m, params.eta)
            raw = p0 * damped_filter(z, sub)
            mass = float(raw.sum() * area)
            # ratio of successive normalizations plays the role of p_success
            yield m, raw / mass, mass / prev, (m * params.drift) % (2.0 * math.pi)
            prev = mass
        return
    sp = _Spectral(axis)
    steps = _plan(params)
    values = p0
    for m, st in enumerate(steps, start=1):
        if st.gamma > 0:
            values = sp.thermal_channel(values, st.shrink, n_bath * (1.0 - st.shrink**2))
        values = _exact_round(sp, values, st.kick, st.eta)
        p = float(values.sum() * area)
        values = values / p
        if sp.edge_weight > _EDGE_TOLERANCE:
            warnings.warn(
                f"P-function spectrum reaches the grid's Nyquist band (relative weight {sp.edge_weight:.1e}); "
                "raise the resolution",
                TruncationWarning,
                stacklevel=3,
            )
            sp.edge_weight = 0.0
        yield m, values, p, st.rotation


def _check_kernel(kernel: str) -> None:
    if kernel not in ("exact", "filter"):
        raise ValueError(f"kernel must be 'exact' or 'filter', got {kernel!r}")


def _boundary_mass(values: np.ndarray, area: float) -> float:
    edge = max(1, values.shape[0] // 20)
    inner = values[edge:-edge, edge:-edge].sum()
    return float(abs(values.sum() - inner) * area)


def _make_grid(values, axis, c_m, rotation) -> PGrid:
    extent = float(axis[-1] - axis[0] + (axis[1] - axis[0])) / 2.0
    out = np.array(values, dtype=float)
    out.setflags(write=False)
    return PGrid(extent, axis.size, out, c_m, rotation)


def evolve_p(
    n_thermal: float,
    params: FilterParams | Sequence[FilterParams],
    grid: GridConfig | None = None,
    kernel: Literal["exact", "filter"] = "exact",
    n_bath: float | None = None,
) -> PGrid:
    """Normalized P-function after all rounds of ``params`` succeed.

    ``c_m`` is the normalization constant, the inverse of the probability that
    all rounds succeed. ``n_bath`` is the bath occupancy seen by the damping
    channel and defaults to ``n_thermal``.
    """
    _check_kernel(kernel)
    grid = grid or GridConfig()
    axis = grid.axis(n_thermal)
    if axis[-1] + 0.5 * (axis[1] - axis[0]) < 5.0 * math.sqrt(n_thermal) * (1 - 1e-12):
        warnings.warn("grid extent below 5 sqrt(n_thermal)", TruncationWarning, stacklevel=2)
    bath = n_thermal if n_bath is None else n_bath
    total, rotation = 1.0, 0.0
    values = None
    for _, values, p, rotation in _iterate(n_thermal, params, grid, kernel, bath):
        total *= p
    area = float(axis[1] - axis[0]) ** 2
    if _boundary_mass(values, area) > 1e-4:
        warnings.warn("P-function mass near the grid boundary exceeds 1e-4", TruncationWarning, stacklevel=2)
    return _make_grid(values, axis, 1.0 / total, rotation)


def p_trajectory(
    n_thermal: float,
    params: FilterParams | Sequence[FilterParams],
    grid: GridConfig | None = None,
    kernel: Literal["exact", "filter"] = "exact",
    n_bath: float | None = None,
) -> list[PRound]:
    """Per-round success probability and lab-frame observables."""
    _check_kernel(kernel)
    grid = grid or GridConfig()
    axis = grid.axis(n_thermal)
    bath = n_thermal if n_bath is None else n_bath
    rows = []
    for m, values, p, rotation in _iterate(n_thermal, params, grid, kernel, bath):
        if m == 0:
            continue
        g = _make_grid(values, axis, 1.0, rotation)
        rows.append(PRound(m, p, moments_from_p(g)))
    return rows


def moments_from_p(grid: PGrid) -> Observables:
    """Normally ordered moments by midpoint quadrature, in the lab frame.

    var_x = 2 <(Re alpha)^2> - mean_x^2 + 1/2, the 1/2 being the vacuum
    contribution that normal ordering leaves out. Purity comes from the
    characteristic function: Tr rho^2 = (1/pi) int |chi_N(xi)|^2 e^{-|xi|^2}.
    """
    ax = grid.axis
    area = grid.cell_area
    lab = (ax[:, None] + 1j * ax[None, :]) * cmath.exp(1j * grid.frame_rotation)
    w = grid.values * area
    mass = w.sum()
    re, im = lab.real, lab.imag
    mx, mp = (w * re).sum() / mass, (w * im).sum() / mass
    occ = (w * (re * re + im * im)).sum() / mass
    vx = 2.0 * ((w * re * re).sum() / mass - mx * mx) + 0.5
    vp = 2.0 * ((w * im * im).sum() / mass - mp * mp) + 0.5
    f = np.abs(np.fft.fft2(grid.values)) * area / mass
    k = 2.0 * math.pi * np.fft.fftfreq(grid.resolution, ax[1] - ax[0])
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    dk2 = (k[1] - k[0]) ** 2
    purity = float((f**2 * np.exp(-0.25 * k2)).sum() * dk2 / (4.0 * math.pi))
    return Observables(
        occupancy=float(occ),
        mean_x=float(math.sqrt(2.0) * mx),
        var_x=float(vx),
        var_p=float(vp),
        purity=purity,
    )


def pgrid_rows(grid: PGrid) -> Iterator[tuple[float, float, float]]:
    """(re_alpha, im_alpha, p_value) rows in the grid's own frame."""
    ax = grid.axis
    for i, x in enumerate(ax):
        for j, y in enumerate(ax):
            yield float(x), float(y), float(grid.values[i, j])


def params_from_schedule(schedule: PulseSchedule, spec: OscillatorSpec, spin: SpinSpec | None = None) -> list[FilterParams]:
    """One FilterParams per round, matching what the Fock engine runs.

    With tau = pi / (omega + epsilon) the block falls short of a whole number
    of half periods, so the drift changes sign.
    """
    spin = spin or SpinSpec()
    sign = 1.0 if schedule.detuning_sign == "minus" else -1.0
    out = []
    for k in range(1, schedule.rounds_M + 1):
        t = schedule.block_time(spec.omega, k)
        lam = lambda_eff(schedule.g, schedule.pulses_for_round(k), spec.omega)
        eta = spin.contrast(t) * (2.0 * spin.readout_fidelity - 1.0)
        out.append(FilterParams(lam, complex(sign * schedule.epsilon, spec.gamma), t, 1, eta))
    return out
