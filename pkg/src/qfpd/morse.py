"""Morse-oscillator molecule model: spectrum, eigenfunctions, operator matrices.

Input parameters are spectroscopic (eV, Angstrom, kg, Debye); everything is
converted to Hartree atomic units (hbar = 1) once, and all outputs are atomic:
energies in hartree, positions in bohr, dipole entries in e*a0.

Conversion constants (CODATA 2018):

    1 eV       = 0.036749322175655 hartree
    1 Angstrom = 1.8897261246      bohr
    1 Debye    = 0.3934303070      e*a0
    1 kg       = 1 / 9.1093837015e-31 electron masses

The bound-state spectrum is E_n = -(hbar^2 alpha^2 / 2 m_r) ((nu-1)/2 - n)^2
for n = 0 .. l-1 with l-1 = floor((nu-1)/2), and the eigenfunctions are

    psi_n(r) = N_n exp(-y/2) y^s L_n^{2s}(y),   y = nu exp(-alpha (r - r_eq)),

with 2s = nu - 2n - 1 and N_n = sqrt(alpha (nu-2n-1) Gamma(n+1) / Gamma(nu-n)).
The normalization factor is evaluated through log-gamma to avoid overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from .dynamics import PhysicalSystem
from .errors import NumericsError, ValidationError
from .states import Observable

EV_TO_HARTREE = 0.036749322175655
ANGSTROM_TO_BOHR = 1.8897261246257702
DEBYE_TO_EA0 = 0.3934303070
KG_TO_ELECTRON_MASS = 1.0 / 9.1093837015e-31

# quadrature window in the y = nu * exp(-alpha (r - r_eq)) variable: the
# left edge (large y) keeps exp(-y/2) below ~1e-26, the right edge (small y)
# keeps the y^s tail of every bound state negligible
QUAD_Y_MAX = 120.0
QUAD_Y_MIN = 1e-12
RESCALE_LIMIT = 1e100


@dataclass(frozen=True)
class MorseParameters:
    """Spectroscopic Morse and dipole parameters of a diatomic molecule."""

    d0: float       # well depth, eV
    r_eq: float     # equilibrium separation, Angstrom
    m_r: float      # reduced mass, kg
    alpha: float    # potential width, 1/Angstrom
    nu: float       # dimensionless depth parameter
    mu0: float      # dipole scale, Debye
    r_star: float   # dipole decay length, Angstrom

    def __post_init__(self):
        for name in ("d0", "r_eq", "m_r", "alpha", "mu0", "r_star"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"Morse parameter {name} must be positive")
        if self.nu <= 1:
            raise ValidationError(f"no bound states: nu = {self.nu} <= 1")
        if self.levels < 2:
            raise ValidationError(
                f"need at least two bound levels, got {self.levels} for nu = {self.nu}")

    @property
    def levels(self) -> int:
        """Number of bound levels l, with l - 1 = floor((nu - 1) / 2).

        At exactly integral (nu - 1)/2 the top counted state sits at zero
        binding with a vanishing normalization factor (nu - 2n - 1 = 0); it
        is excluded, keeping every included level square-integrable.
        """
        half = (self.nu - 1) / 2.0
        top = int(np.floor(half))
        if top == half:
            top -= 1
        return top + 1


@dataclass(frozen=True)
class TargetGaussian:
    """Gaussian target operator o(r) = (gamma0/sqrt(pi)) exp(-gamma0^2 (r-r')^2)."""

    gamma0: float   # width parameter, 1/Angstrom
    r_prime: float  # center, Angstrom

    def __post_init__(self):
        if self.gamma0 <= 0:
            raise ValidationError("target width gamma0 must be positive")


@dataclass(frozen=True)
class MorseAtomicParameters:
    """The same parameters converted to atomic units (hartree, bohr, m_e)."""

    d0: float
    r_eq: float
    m_r: float
    alpha: float
    nu: float
    mu0: float
    r_star: float


# LiH parameter set used by the bundled 'morse-lih' scenario
LIH = MorseParameters(d0=2.45090, r_eq=2.379, m_r=2.5986e-27,
                      alpha=13.956, nu=6.1346, mu0=5.8677, r_star=1.595)
LIH_TARGET = TargetGaussian(gamma0=47.2590, r_prime=2.4871)


def atomic_units(p: MorseParameters) -> MorseAtomicParameters:
    """Convert the spectroscopic parameter set to atomic units."""
    return MorseAtomicParameters(
        d0=p.d0 * EV_TO_HARTREE,
        r_eq=p.r_eq * ANGSTROM_TO_BOHR,
        m_r=p.m_r * KG_TO_ELECTRON_MASS,
        alpha=p.alpha / ANGSTROM_TO_BOHR,
        nu=p.nu,
        mu0=p.mu0 * DEBYE_TO_EA0,
        r_star=p.r_star * ANGSTROM_TO_BOHR,
    )


def morse_potential(p: MorseParameters, r: np.ndarray) -> np.ndarray:
    """V(r) = D0 (exp(-2 alpha (r-r_eq)) - 2 exp(-alpha (r-r_eq))), r in bohr."""
    a = atomic_units(p)
    e = np.exp(-a.alpha * (np.asarray(r, dtype=float) - a.r_eq))
    return a.d0 * (e * e - 2.0 * e)


def morse_energies(p: MorseParameters) -> np.ndarray:
    """Bound-state energies in hartree, n = 0 .. levels-1."""
    a = atomic_units(p)
    n = np.arange(p.levels)
    return -(a.alpha ** 2) / (2.0 * a.m_r) * ((a.nu - 1) / 2.0 - n) ** 2


def generalized_laguerre(n: int, a: float, y: np.ndarray) -> np.ndarray:
    """L_n^a(y) by the three-term recurrence, with overflow rescaling.

    Rescaling divides the running pair by 2^512 whenever magnitudes pass
    1e100 and repays the factor at the end; for the small degrees used here
    it never triggers, but it keeps large-n use safe.
    """
    y = np.asarray(y, dtype=float)
    if n < 0:
        raise ValidationError(f"Laguerre degree must be nonnegative, got {n}")
    if n == 0:
        return np.ones_like(y)
    prev = np.ones_like(y)
    cur = 1.0 + a - y
    scale_log = np.zeros_like(y)
    for k in range(2, n + 1):
        prev, cur = cur, ((2 * k - 1 + a - y) * cur - (k - 1 + a) * prev) / k
        big = np.abs(cur) > RESCALE_LIMIT
        if big.any():
            factor = np.where(big, 2.0 ** -512, 1.0)
            cur = cur * factor
            prev = prev * factor
            scale_log = scale_log + np.where(big, 512 * np.log(2.0), 0.0)
    return cur * np.exp(scale_log) if scale_log.any() else cur


def morse_wavefunction(p: MorseParameters, n: int, r: np.ndarray) -> np.ndarray:
    """Normalized bound eigenfunction psi_n evaluated on r (bohr)."""
    if not 0 <= n <= p.levels - 1:
        raise ValidationError(f"level {n} outside 0..{p.levels - 1}")
    a = atomic_units(p)
    r = np.asarray(r, dtype=float)
    y = a.nu * np.exp(-a.alpha * (r - a.r_eq))
    s = (a.nu - 2 * n - 1) / 2.0
    log_norm = 0.5 * (np.log(a.alpha * (a.nu - 2 * n - 1))
                      + gammaln(n + 1) - gammaln(a.nu - n))
    with np.errstate(divide="ignore", invalid="ignore"):
        envelope = np.where(y > 0, np.exp(log_norm - y / 2.0 + s * np.log(y)), 0.0)
    return envelope * generalized_laguerre(n, 2 * s, y)


def quadrature_window(p: MorseParameters) -> tuple[float, float]:
    """Integration bounds in bohr covering y in [QUAD_Y_MIN, QUAD_Y_MAX]."""
    a = atomic_units(p)
    lo = a.r_eq - np.log(QUAD_Y_MAX / a.nu) / a.alpha
    hi = a.r_eq + np.log(a.nu / QUAD_Y_MIN) / a.alpha
    return lo, hi


def _matrix_elements(p: MorseParameters, weight, points=None) -> np.ndarray:
    lo, hi = quadrature_window(p)
    # breakpoints pin the bound-state support (a few 1/alpha around r_eq)
    # inside the window, which spans many support widths for shallow wells
    a = atomic_units(p)
    anchors = [a.r_eq + k / a.alpha for k in (-3.0, -1.0, 0.0, 1.0, 3.0, 8.0)]
    points = list(points) if points is not None else []
    points = sorted({min(max(pt, lo), hi) for pt in points + anchors})
    l = p.levels
    out = np.zeros((l, l))
    for n in range(l):
        for m in range(n, l):
            integrand = lambda r: weight(r) * morse_wavefunction(p, n, r) \
                * morse_wavefunction(p, m, r)
            val, err = quad(integrand, lo, hi, limit=600,
                            epsabs=1e-12, epsrel=1e-10, points=points)
            if err > 1e-8:
                raise NumericsError(
                    f"quadrature did not converge for entry ({n},{m}): "
                    f"value {val:.6e}, error estimate {err:.2e}")
            out[n, m] = out[m, n] = val
    return out


def dipole_function(p: MorseParameters, r: np.ndarray) -> np.ndarray:
    """mu(r) = mu0 r exp(-r/r*), r in bohr, result in e*a0."""
    a = atomic_units(p)
    r = np.asarray(r, dtype=float)
    return a.mu0 * r * np.exp(-r / a.r_star)


def dipole_matrix(p: MorseParameters) -> np.ndarray:
    """Dipole matrix mu_nm = <psi_n| mu(r) |psi_m> by adaptive quadrature."""
    return _matrix_elements(p, lambda r: dipole_function(p, r))


def gaussian_weight(t: TargetGaussian, r: np.ndarray) -> np.ndarray:
    """o(r) in atomic units for r in bohr."""
    g = t.gamma0 / ANGSTROM_TO_BOHR
    c = t.r_prime * ANGSTROM_TO_BOHR
    r = np.asarray(r, dtype=float)
    return g / np.sqrt(np.pi) * np.exp(-(g * (r - c)) ** 2)


def gaussian_target(p: MorseParameters, t: TargetGaussian) -> Observable:
    """Matrix of the Gaussian target operator in the bound-state basis.

    Breakpoints bracket the peak at several widths so the adaptive rule
    cannot step over a needle-thin operator (large gamma0).
    """
    center = t.r_prime * ANGSTROM_TO_BOHR
    sigma = 1.0 / (t.gamma0 / ANGSTROM_TO_BOHR * np.sqrt(2.0))
    points = [center + k * sigma for k in (-30.0, -10.0, -3.0, 0.0, 3.0, 10.0, 30.0)]
    mat = _matrix_elements(p, lambda r: gaussian_weight(t, r), points=points)
    return Observable(mat)


def reference_matrix_elements(p: MorseParameters, weight,
                              num: int = 1_000_000) -> np.ndarray:
    """Trapezoid-rule reference on r in [r_eq - 2, r_eq + 6] Angstrom.

    Deliberately a different route from :func:`dipole_matrix` /
    :func:`gaussian_target` (fixed dense grid instead of adaptive
    subdivision); used by tests and the CLI oracle commands.
    """
    a = atomic_units(p)
    lo = a.r_eq - 2.0 * ANGSTROM_TO_BOHR
    hi = a.r_eq + 6.0 * ANGSTROM_TO_BOHR
    r = np.linspace(lo, hi, num)
    w = weight(r)
    l = p.levels
    psis = [morse_wavefunction(p, n, r) for n in range(l)]
    out = np.zeros((l, l))
    for n in range(l):
        for m in range(n, l):
            out[n, m] = out[m, n] = np.trapezoid(w * psis[n] * psis[m], r)
    return out


def morse_system(p: MorseParameters) -> PhysicalSystem:
    """Closed-system level data (no dissipation) in atomic units."""
    return PhysicalSystem(energies=morse_energies(p), dipole=dipole_matrix(p),
                          rates=None, hbar=1.0)
