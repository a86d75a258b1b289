"""Truncated Fock-space representation of the oscillator.

States are density matrices in the number basis, cut off at ``dim`` levels.
Operators that cannot be represented exactly on the truncated space (the
displacement operator) are built from their exact infinite-space matrix
elements; only unitarity is lost, and only near the truncation edge.
"""

from __future__ import annotations

import cmath
import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import StepSizeError, TruncationError, TruncationWarning

__all__ = [
    "OscillatorSpec",
    "DensityMatrix",
    "Observables",
    "annihilation",
    "build_thermal",
    "vacuum",
    "displacement_op",
    "rotation_op",
    "interior_size",
    "observables_of",
    "lindblad_damping",
    "thermal_channel",
]

TAIL_TOLERANCE = 1e-6


@dataclass(frozen=True)
class OscillatorSpec:
    """Single mechanical mode in contact with a thermal bath.

    ``gamma`` is the energy damping rate, ``gamma_h`` an extra incoherent
    heating rate, ``n_thermal`` the bath occupancy (also the initial one).
    """

    omega: float
    gamma: float = 0.0
    n_thermal: float = 0.0
    dim: int = 64
    gamma_h: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.gamma < 0 or self.gamma_h < 0:
            raise ValueError("damping and heating rates must be non-negative")
        if self.n_thermal < 0:
            raise ValueError(f"n_thermal must be non-negative, got {self.n_thermal}")
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dim must be an integer >= 2, got {self.dim}")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Oscillator state on the truncated space. Treat ``data`` as read-only."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def populations(self) -> np.ndarray:
        return np.diag(self.data).real.copy()

    def check(self, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-8) -> None:
        """Raise ValueError if the state breaks hermiticity or normalization.

        Negative eigenvalues only warn; a silent projection would hide
        integration errors upstream.
        """
        rho = self.data
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > herm_tol:
            raise ValueError(f"density matrix not Hermitian (deviation {herm:.3e})")
        if abs(self.trace - 1.0) > trace_tol:
            raise ValueError(f"density matrix trace is {self.trace!r}, expected 1")
        min_eig = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
        if min_eig < -eig_tol:
            warnings.warn(f"density matrix has eigenvalue {min_eig:.3e}", RuntimeWarning, stacklevel=2)


@dataclass(frozen=True)
class Observables:
    occupancy: float
    mean_x: float
    var_x: float
    var_p: float
    purity: float


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


def vacuum(dim: int) -> DensityMatrix:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return DensityMatrix(rho)


def thermal_tail_mass(n_thermal: float, dim: int) -> float:
    """Weight of the untruncated thermal distribution on levels >= dim."""
    if n_thermal == 0:
        return 0.0
    return (n_thermal / (n_thermal + 1.0)) ** dim


def build_thermal(spec: OscillatorSpec, strict: bool = False) -> DensityMatrix:
    """Thermal state with mean occupancy ``spec.n_thermal``, renormalized on the truncated space.

    Warns when ``dim < 10 (n + 1)`` or the discarded tail exceeds 1e-6; with
    ``strict=True`` the tail condition raises :class:`TruncationError` instead.
    """
    n, dim = spec.n_thermal, spec.dim
    tail = thermal_tail_mass(n, dim)
    if tail > TAIL_TOLERANCE:
        msg = f"thermal tail mass {tail:.2e} beyond dim={dim} (n_thermal={n})"
        if strict:
            raise TruncationError(msg)
        warnings.warn(msg, TruncationWarning, stacklevel=2)
    elif dim < 10 * (n + 1):
        warnings.warn(f"dim={dim} below the 10*(n+1) rule for n_thermal={n}", TruncationWarning, stacklevel=2)

    k = np.arange(dim)
    if n == 0:
        p = (k == 0).astype(float)
    else:
        # log form keeps large dims free of underflow warnings
        logp = k * (math.log(n) - math.log1p(n))
        p = np.exp(logp - logp.max())
        p /= p.sum()
    return DensityMatrix(np.diag(p).astype(complex))


def interior_size(dim: int, beta: complex | float) -> int:
    """Number of leading Fock levels on which D(beta) is unitary to ~1e-10.

    Matrix elements <k|D|n> fall off like J_{k-n}(2|beta| sqrt(n)), so the
    margin has to grow with sqrt(dim) as well as with |beta|^2.
    """
    b = abs(beta)
    margin = 4.0 * b * b + 8.0 + 4.0 * b * math.sqrt(dim)
    return max(int(dim - math.ceil(margin)), 0)


def _displacement_lower(beta: complex, dim: int) -> np.ndarray:
    # <n+k|D|n> = beta^k e^{-x/2} sqrt(n!/(n+k)!) L_n^(k)(x), x = |beta|^2, for k >= 0.
    # h_n^(k) = sqrt(n!/(n+k)!) L_n^(k)(x) obeys a normalized three-term recurrence
    # in n that is stable and needs no factorials; all k are advanced together.
    x = abs(beta) ** 2
    k = np.arange(dim, dtype=float)
    log_fact = np.array([math.lgamma(kk + 1.0) for kk in k])
    with np.errstate(divide="ignore"):
        log_mag = k * math.log(abs(beta)) - 0.5 * log_fact - 0.5 * x
    prev = np.exp(log_mag) * np.exp(1j * cmath.phase(beta) * k)
    out = np.zeros((dim, dim), dtype=complex)
    rows = np.arange(dim)
    out[rows, 0] = prev
    if dim == 1:
        return out
    cur = prev[:-1] * (1.0 + k[:-1] - x) / np.sqrt(k[:-1] + 1.0)
    out[rows[1:], 1] = cur
    for n in range(1, dim - 1):
        kk = k[: dim - 1 - n]
        nxt = ((2 * n + kk + 1 - x) * cur[: dim - 1 - n] - np.sqrt(n * (n + kk)) * prev[: dim - 1 - n]) / np.sqrt(
            (n + 1) * (n + kk + 1)
        )
        prev, cur = cur, nxt
        out[rows[n + 1 :], n + 1] = nxt
    return out


def displacement_op(beta: complex, dim: int) -> np.ndarray:
    """Matrix of exp(beta a^dag - beta^* a) restricted to the first ``dim`` levels.

    Every entry is the exact infinite-space matrix element (Laguerre form),
    so the only truncation artifact is the loss of unitarity near the edge.
    The upper triangle comes from D(beta)^dag = D(-beta).
    """
    beta = complex(beta)
    if beta == 0:
        return np.eye(dim, dtype=complex)
    lower = _displacement_lower(beta, dim)
    upper = _displacement_lower(-beta, dim).conj().T
    return np.tril(lower) + np.triu(upper, 1)


def rotation_op(theta: float, dim: int) -> np.ndarray:
    """Free evolution exp(-i theta a^dag a)."""
    return np.diag(np.exp(-1j * theta * np.arange(dim)))


def observables_of(rho: DensityMatrix) -> Observables:
    """Occupancy, position mean/variance, momentum variance and purity.

    Quadratures are X = (a + a^dag)/sqrt(2) and P = (a - a^dag)/(i sqrt(2)),
    so the vacuum has Var(X) = Var(P) = 1/2. Second moments use
    <a a^dag> = <a^dag a> + 1 rather than the truncated product.
    """
    r = rho.data
    dim = r.shape[0]
    k = np.arange(dim)
    sq = np.sqrt(k[1:])
    n_mean = float(np.dot(k, np.diag(r).real))
    a_mean = complex(np.sum(sq * np.diagonal(r, offset=-1)))
    # <a^2> = sum_m sqrt(m (m-1)) rho[m, m-2]
    if dim > 2:
        a2_mean = complex(np.sum(np.sqrt(k[2:] * k[1:-1]) * np.diagonal(r, offset=-2)))
    else:
        a2_mean = 0j
    x_mean = math.sqrt(2.0) * a_mean.real
    p_mean = math.sqrt(2.0) * a_mean.imag
    x2 = a2_mean.real + n_mean + 0.5
    p2 = -a2_mean.real + n_mean + 0.5
    purity = float(np.real(np.vdot(r, r)))
    return Observables(
        occupancy=n_mean,
        mean_x=x_mean,
        var_x=x2 - x_mean**2,
        var_p=p2 - p_mean**2,
        purity=purity,
    )


def _dissipator(rho: np.ndarray, down: float, up: float, sq: np.ndarray, nn: np.ndarray, nn1: np.ndarray) -> np.ndarray:
    # down*(a rho a^dag - {a^dag a, rho}/2) + up*(a^dag rho a - {a a^dag, rho}/2), truncated a
    out = -(0.5 * down) * (nn[:, None] + nn[None, :]) * rho
    out -= (0.5 * up) * (nn1[:, None] + nn1[None, :]) * rho
    inner = sq[:, None] * sq[None, :]
    out[:-1, :-1] += down * inner * rho[1:, 1:]
    out[1:, 1:] += up * inner * rho[:-1, :-1]
    return out


def _rk4(rho: np.ndarray, down: float, up: float, duration: float, n_steps: int) -> np.ndarray:
    dim = rho.shape[0]
    sq = np.sqrt(np.arange(1, dim, dtype=float))
    nn = np.arange(dim, dtype=float)
    nn1 = nn + 1.0
    nn1[-1] = 0.0  # truncated a a^dag annihilates the top level
    h = duration / n_steps
    for _ in range(n_steps):
        k1 = _dissipator(rho, down, up, sq, nn, nn1)
        k2 = _dissipator(rho + 0.5 * h * k1, down, up, sq, nn, nn1)
        k3 = _dissipator(rho + 0.5 * h * k2, down, up, sq, nn, nn1)
        k4 = _dissipator(rho + h * k3, down, up, sq, nn, nn1)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


def _step_count(down: float, up: float, duration: float, dim: int) -> int:
    # accuracy bound on the slow rate, RK4 stability bound on the fastest mode
    h_acc = 0.05 / max(down, up)
    h_stab = 1.0 / ((down + up) * dim)
    return max(1, math.ceil(duration / min(h_acc, h_stab)))


@functools.lru_cache(maxsize=256)
def _checked_steps(dim: int, down: float, up: float, duration: float) -> int:
    # double the step count until a halving comparison on a generic probe state agrees
    rng = np.random.default_rng(dim)
    w = rng.random(dim) * np.exp(-np.arange(dim) / max(dim / 8, 1.0))
    probe = np.outer(w, w).astype(complex)
    probe += np.diag(w)
    probe /= np.trace(probe)
    n_steps = _step_count(down, up, duration, dim)
    for _ in range(7):
        coarse = _rk4(probe, down, up, duration, n_steps)
        fine = _rk4(probe, down, up, duration, 2 * n_steps)
        err = np.max(np.abs(coarse - fine))
        if err <= 1e-8 and abs(np.trace(coarse) - 1) <= 1e-8:
            return n_steps
        n_steps *= 2
    raise StepSizeError(f"RK4 halving check failed: deviation {err:.2e} with {n_steps // 2} steps")


@functools.lru_cache(maxsize=64)
def _loss_coeffs(dim: int, transmissivity: float) -> np.ndarray:
    # c[n, k] = sqrt(C(n, k) T^(n-k) (1-T)^k), amplitude of losing k quanta from n
    n = np.arange(dim)[:, None]
    k = np.arange(dim)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        logc = logc + (n - k) * math.log(transmissivity)
        logc = logc + (k * math.log1p(-transmissivity) if transmissivity < 1 else np.where(k == 0, 0.0, -np.inf))
    c = np.where(k <= n, np.exp(0.5 * logc), 0.0)
    return c


@functools.lru_cache(maxsize=64)
def _gain_coeffs(dim: int, gain: float) -> np.ndarray:
    # b[n, k] = sqrt(C(n+k, k) ((G-1)/G)^k / G^(n+1)), amplitude of gaining k quanta from n
    n = np.arange(dim)[:, None]
    k = np.arange(dim)[None, :]
    with np.errstate(divide="ignore"):
        logb = gammaln(n + k + 1) - gammaln(k + 1) - gammaln(n + 1)
        logb = logb + k * (math.log(gain - 1.0) - math.log(gain)) - (n + 1) * math.log(gain)
    return np.exp(0.5 * logb)


_KRAUS_FLOOR = 1e-34


def _support(rho: np.ndarray) -> int:
    # number of leading levels outside which rho is negligible
    diag = np.abs(np.diag(rho))
    above = np.nonzero(diag > _KRAUS_FLOOR * max(diag.max(), 1e-300))[0]
    return int(above[-1]) + 1 if above.size else 1


def _apply_loss(rho: np.ndarray, c: np.ndarray) -> np.ndarray:
    dim = rho.shape[0]
    s = _support(rho)
    out = np.zeros_like(rho)
    for k in range(s):
        v = c[k:s, k]
        if v.max() ** 2 < _KRAUS_FLOOR:
            break
        out[: s - k, : s - k] += np.outer(v, v) * rho[k:s, k:s]
    return out


def _apply_gain(rho: np.ndarray, b: np.ndarray) -> np.ndarray:
    dim = rho.shape[0]
    s = _support(rho)
    out = np.zeros_like(rho)
    for k in range(dim):
        m = min(s, dim - k)
        v = b[:m, k]
        if v.max() ** 2 < _KRAUS_FLOOR:
            break
        out[k : k + m, k : k + m] += np.outer(v, v) * rho[:m, :m]
    return out


def thermal_channel(rho: DensityMatrix, down: float, up: float, duration: float) -> DensityMatrix:
    """Exact solution of the thermal dissipator for down > up.

    The channel is a pure loss of transmissivity T/G followed by a
    quantum-limited amplifier of gain G, with T = exp(-(down - up) t) and
    G = 1 + (1 - T) up / (down - up). Both act through binomial Kraus
    operators. Population the amplifier pushes above the cut is reported
    as a truncation warning and the state is renormalized.
    """
    if not down > up:
        raise ValueError("thermal_channel needs down > up")
    rate = down - up
    transmissivity = math.exp(-rate * duration)
    gain = 1.0 - math.expm1(-rate * duration) * up / rate
    data = np.array(rho.data)
    trace = float(np.trace(data).real)
    data = _apply_loss(data, _loss_coeffs(rho.dim, transmissivity / gain))
    if gain > 1.0:
        data = _apply_gain(data, _gain_coeffs(rho.dim, gain))
    data = 0.5 * (data + data.conj().T)
    leak = trace - float(np.trace(data).real)
    if leak > 1e-8 * max(trace, 1e-300):
        warnings.warn(f"damping pushed {leak:.2e} of population beyond dim={rho.dim}", TruncationWarning, stacklevel=3)
    if trace > 0:
        data *= trace / float(np.trace(data).real)
    return DensityMatrix(data)


def lindblad_damping(rho: DensityMatrix, spec: OscillatorSpec, duration: float, method: str = "exact") -> DensityMatrix:
    """Evolve under thermal contact for ``duration`` seconds.

    Down-rate gamma*(n_th + 1), up-rate gamma*n_th + gamma_h. No Hamiltonian
    term: free rotation commutes with this dissipator and is carried by the
    conditional kicks instead. ``method="exact"`` uses the closed-form
    channel whenever the down-rate dominates. ``method="rk4"`` integrates the
    truncated master equation and is the fallback when heating dominates.
    """
    if method not in ("exact", "rk4"):
        raise ValueError(f"unknown damping method {method!r}")
    down = spec.gamma * (spec.n_thermal + 1.0)
    up = spec.gamma * spec.n_thermal + spec.gamma_h
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if duration == 0 or (down == 0 and up == 0):
        return rho
    if not math.isfinite(down * duration) or not math.isfinite(up * duration):
        raise StepSizeError("damping rate times duration is not finite")
    if method == "exact" and down > up:
        return thermal_channel(rho, down, up, duration)
    n_steps = _checked_steps(rho.dim, down, up, float(duration))
    out = _rk4(np.array(rho.data), down, up, duration, n_steps)
    out = 0.5 * (out + out.conj().T)
    drift = abs(np.trace(out).real - rho.trace)
    if drift > 1e-8:
        raise StepSizeError(f"trace drift {drift:.2e} during damping")
    return DensityMatrix(out)
