"""Differential geometry of star-shaped planar curves in polar form.

A closed curve is stored as the radial distance r(phi) from an interior
origin, sampled on a uniform periodic grid. Because r is smooth and
periodic, all angular derivatives are computed spectrally (FFT), which
keeps critical-point and bifurcation-time detection sharp.

Conventions:
    curvature   kappa = (r^2 + 2 r_phi^2 - r r_phiphi) / (r^2 + r_phi^2)^(3/2)
    tangential factor  w = sqrt((r^2 + r_phi^2) / r^2)  (= 1/cos(gamma))

At an angle where r_phi = r_phiphi = 0 the curvature reduces to 1/r.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

DEFAULT_GRID_SIZE = 1024

# Bisection tolerance for critical-point angles, and the relative
# |r_phiphi| threshold below which a root is flagged near-degenerate
# instead of being force-classified.
DEFAULT_ROOT_TOL = 1e-10
NEAR_DEGENERATE_REL = 1e-6

# max|r_phi| below this (relative to max|r|) means the whole curve is a
# circle about the origin: every point is critical and the curve is
# reported as the distinct degenerate case.
DEGENERATE_CIRCLE_REL = 1e-12


class GeometryDomainError(ValueError):
    """Input outside the geometric domain (non-positive radius, etc.)."""


def _check_power_of_two(m: int) -> None:
    if m < 16 or (m & (m - 1)) != 0:
        raise GeometryDomainError(f"grid size must be a power of two >= 16, got {m}")


@dataclass(frozen=True)
class PolarCurve:
    """Star-shaped closed curve sampled as r_j > 0 at phi_j = 2*pi*j/M."""

    samples: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.samples, dtype=float)
        if r.ndim != 1:
            raise GeometryDomainError("samples must be a 1-D array")
        _check_power_of_two(r.size)
        if not np.all(np.isfinite(r)):
            raise GeometryDomainError("samples must be finite")
        if np.any(r <= 0.0):
            raise GeometryDomainError("curve is not star-shaped: some r <= 0")
        object.__setattr__(self, "samples", r)

    @property
    def m(self) -> int:
        return self.samples.size

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.m) / self.m

    @classmethod
    def from_function(cls, func, m: int = DEFAULT_GRID_SIZE) -> "PolarCurve":
        """Sample r(phi) on the uniform M-point grid."""
        phi = 2.0 * np.pi * np.arange(m) / m
        return cls(np.asarray(func(phi), dtype=float))

    def resample(self, m_new: int) -> "PolarCurve":
        """Band-limited resampling by spectral zero-padding/truncation."""
        _check_power_of_two(m_new)
        coeff = np.fft.rfft(self.samples)
        out = np.zeros(m_new // 2 + 1, dtype=complex)
        n = min(coeff.size, out.size)
        out[:n] = coeff[:n]
        return PolarCurve(np.fft.irfft(out, n=m_new) * (m_new / self.m))


@dataclass(frozen=True)
class CurveJet:
    """Radial value and first three angular derivatives at one angle."""

    r: float
    r_phi: float = 0.0
    r_phiphi: float = 0.0
    r_phiphiphi: float = 0.0

    def __post_init__(self):
        if self.r <= 0.0:
            raise GeometryDomainError("jet requires r > 0")


class CriticalKind(enum.Enum):
    MINIMUM = "minimum"
    MAXIMUM = "maximum"


@dataclass(frozen=True)
class CriticalPoint:
    angle: float
    kind: CriticalKind
    value: float
    near_degenerate: bool = False


@dataclass(frozen=True)
class CriticalPointSet:
    """Result of critical-point location.

    ``degenerate_circle`` is the distinct whole-curve case (r_phi == 0
    everywhere); it is never reported as an empty list of points.
    """

    points: tuple = ()
    degenerate_circle: bool = False

    @property
    def count(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------------
# spectral machinery
# ---------------------------------------------------------------------------

def _deriv_factor(m: int, order: int) -> np.ndarray:
    k = np.arange(m // 2 + 1)
    fac = (1j * k) ** order
    if order % 2 == 1:
        fac = fac.copy()
        fac[-1] = 0.0  # Nyquist mode carries no odd-derivative information
    return fac


def spectrum(curve_samples: np.ndarray) -> np.ndarray:
    """rfft coefficients of the sampled radial function."""
    return np.fft.rfft(curve_samples)


def deriv_from_spectrum(coeff: np.ndarray, m: int, order: int) -> np.ndarray:
    return np.fft.irfft(coeff * _deriv_factor(m, order), n=m)


def evaluate_spectrum(coeff: np.ndarray, m: int, phis: np.ndarray, order: int = 0) -> np.ndarray:
    """Evaluate the trigonometric interpolant (or a derivative) off-grid."""
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    k = np.arange(m // 2 + 1)
    d = coeff * _deriv_factor(m, order)
    w = np.full(m // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    basis = np.exp(1j * np.outer(phis, k))
    return (basis @ (w * d)).real / m


def differentiate(curve: PolarCurve, order: int) -> np.ndarray:
    """order-th angular derivative at the grid angles (spectral, exact
    for band-limited data)."""
    if order not in (1, 2, 3):
        raise ValueError(f"derivative order must be 1, 2 or 3, got {order}")
    return deriv_from_spectrum(spectrum(curve.samples), curve.m, order)


# ---------------------------------------------------------------------------
# pointwise differential geometry
# ---------------------------------------------------------------------------

def curvature_arrays(r, r_phi, r_phiphi):
    """Polar curvature; accepts scalars or arrays of jet values."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise GeometryDomainError("curvature requires r > 0")
    a = r * r + np.asarray(r_phi) ** 2
    return (r * r + 2.0 * np.asarray(r_phi) ** 2 - r * np.asarray(r_phiphi)) / a ** 1.5


def polar_curvature(jet: CurveJet) -> float:
    return float(curvature_arrays(jet.r, jet.r_phi, jet.r_phiphi))


def tangential_factor(r, r_phi):
    """w = sqrt((r^2 + r_phi^2)/r^2), the radial-speed correction for
    tangential movement of curve points."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise GeometryDomainError("tangential factor requires r > 0")
    return np.sqrt((r * r + np.asarray(r_phi) ** 2) / (r * r))


def curve_kappa_w(r: np.ndarray):
    """Grid arrays (kappa, w, r_phi, r_phiphi) for one sampled curve."""
    m = r.size
    coeff = np.fft.rfft(r)
    r_p = deriv_from_spectrum(coeff, m, 1)
    r_pp = deriv_from_spectrum(coeff, m, 2)
    kap = curvature_arrays(r, r_p, r_pp)
    w = tangential_factor(r, r_p)
    return kap, w, r_p, r_pp


def enclosed_area(curve: PolarCurve) -> float:
    """Shoelace area of the polygon through the sample points."""
    r = curve.samples
    phi = curve.angles
    x = r * np.cos(phi)
    y = r * np.sin(phi)
    return 0.5 * float(np.sum(x * np.roll(y, -1) - y * np.roll(x, -1)))


def min_curvature_radius(curve: PolarCurve) -> float:
    """min over the grid of 1/kappa; the Eikonal smoothness horizon.

    Only meaningful for convex curves; non-convex input is rejected.
    """
    kap, _, _, _ = curve_kappa_w(curve.samples)
    if np.any(kap <= 0.0):
        raise GeometryDomainError("min_curvature_radius requires a convex curve")
    return float(np.min(1.0 / kap))


# ---------------------------------------------------------------------------
# critical points
# ---------------------------------------------------------------------------

def _bisect_root(coeff, m, lo, hi, f_lo, tol):
    """Bisection for a bracketed root of r_phi on the interpolant."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = float(evaluate_spectrum(coeff, m, np.array([mid]), order=1)[0])
        if f_lo * f_mid <= 0.0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def locate_critical_points(curve: PolarCurve, tol: float = DEFAULT_ROOT_TOL) -> CriticalPointSet:
    """All roots of r_phi, bracketed on the grid and bisection-refined.

    Classification is by the sign of r_phiphi at the refined root; roots
    with |r_phiphi| below the near-degenerate threshold are flagged
    rather than misclassified. A circle (r_phi identically zero) is the
    distinct degenerate whole-curve case.
    """
    r = curve.samples
    m = curve.m
    coeff = spectrum(r)
    r_p = deriv_from_spectrum(coeff, m, 1)
    scale = float(np.max(np.abs(r)))
    if float(np.max(np.abs(r_p))) < DEGENERATE_CIRCLE_REL * scale:
        return CriticalPointSet(degenerate_circle=True)

    dphi = 2.0 * np.pi / m
    phi = curve.angles
    s = np.sign(r_p)
    # treat exact grid zeros as belonging to the following interval
    s[s == 0.0] = 1.0
    flips = np.nonzero(s * np.roll(s, -1) < 0.0)[0]

    points = []
    for j in flips:
        root = _bisect_root(coeff, m, phi[j], phi[j] + dphi, r_p[j], tol)
        root %= 2.0 * np.pi
        r_pp = float(evaluate_spectrum(coeff, m, np.array([root]), order=2)[0])
        val = float(evaluate_spectrum(coeff, m, np.array([root]), order=0)[0])
        near_deg = abs(r_pp) < NEAR_DEGENERATE_REL * scale
        kind = CriticalKind.MINIMUM if r_pp > 0.0 else CriticalKind.MAXIMUM
        points.append(CriticalPoint(root, kind, val, near_degenerate=near_deg))

    points.sort(key=lambda p: p.angle)
    return CriticalPointSet(points=tuple(points))


@dataclass(frozen=True)
class AlternationCount:
    """Critical-point count plus the r_phi extremum data it came from.

    ``count`` is -1 for the degenerate circle. ``ext_angles``/``ext_values``
    are the interior extrema of r_phi (roots of r_phiphi) and the value of
    r_phi there; the flow engine reuses them for event-site analysis.
    """

    count: int
    ext_angles: np.ndarray
    ext_values: np.ndarray
    r_phi: np.ndarray = field(repr=False, default=None)
    r_phiphi: np.ndarray = field(repr=False, default=None)

    @property
    def degenerate_circle(self) -> bool:
        return self.count < 0


def count_critical_points(r: np.ndarray, coeff: np.ndarray | None = None) -> AlternationCount:
    """Fast critical-point count via sign alternation of r_phi at its
    interior extrema.

    Between consecutive extrema of r_phi (roots of r_phiphi) the
    derivative is monotone, so the number of roots of r_phi equals the
    number of sign alternations of the extremal values. This resolves
    merging root pairs well below the grid spacing, which plain grid
    sign-change counting cannot.
    """
    m = r.size
    if coeff is None:
        coeff = np.fft.rfft(r)
    r_p = deriv_from_spectrum(coeff, m, 1)
    r_pp = deriv_from_spectrum(coeff, m, 2)
    scale = float(np.max(np.abs(r)))
    if float(np.max(np.abs(r_p))) < DEGENERATE_CIRCLE_REL * scale:
        return AlternationCount(-1, np.empty(0), np.empty(0), r_p, r_pp)

    s = np.sign(r_pp)
    s[s == 0.0] = 1.0
    j = np.nonzero(s * np.roll(s, -1) < 0.0)[0]
    if j.size == 0:
        return AlternationCount(0, np.empty(0), np.empty(0), r_p, r_pp)
    dphi = 2.0 * np.pi / m

    # linear-in-r_phiphi estimate of each extremum of r_phi, then value of
    # r_phi there by cubic interpolation on the surrounding 4-point stencil
    a = r_pp[j]
    b = r_pp[(j + 1) % m]
    frac = a / (a - b)
    phis = (j + frac) * dphi

    idx = (j[:, None] + np.arange(-1, 3)[None, :]) % m
    ys = r_p[idx]
    t = frac[:, None] - np.array([-1.0, 0.0, 1.0, 2.0])[None, :]
    # Lagrange weights on nodes {-1,0,1,2} relative to j
    l0 = -t[:, 1] * t[:, 2] * t[:, 3] / 6.0
    l1 = t[:, 0] * t[:, 2] * t[:, 3] / 2.0
    l2 = -t[:, 0] * t[:, 1] * t[:, 3] / 2.0
    l3 = t[:, 0] * t[:, 1] * t[:, 2] / 6.0
    vals = ys[:, 0] * l0 + ys[:, 1] * l1 + ys[:, 2] * l2 + ys[:, 3] * l3

    sv = np.where(vals >= 0.0, 1.0, -1.0)
    count = int(np.sum(sv != np.roll(sv, 1)))
    return AlternationCount(count, phis, vals, r_p, r_pp)
