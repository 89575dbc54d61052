"""Saddle-node germs on surfaces and the stochastic sign law.

At a generic saddle-node of the radial distance r(x, y) the third-order
Taylor data determines both principal curvatures and the annihilation
indicator

    Omega = sgn(v_kappa * r_yyy^2 + r_xxy * r_yyy * v_lambda),

where (v_kappa, v_lambda) are the partials of the normal speed at the
germ's curvatures. Replacing (r_xxy, r_yyy) by zero-mean, zero-covariance
random variables turns Omega into a random variable whose expected sign
equals sgn(v_kappa); this module estimates E(Omega) by Monte Carlo for a
catalog of samplers, including skewed and dependent ones.

Monte Carlo draws are generated in fixed-size blocks, each block seeded
by (seed, block index), so estimates are bit-identical regardless of how
the index range is partitioned across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

BLOCK_SIZE = 1 << 16

Z99 = 2.5758293035489004  # two-sided 99% normal quantile


class DegenerateGermError(ValueError):
    """Germ data violating the generic saddle-node conditions."""


# ---------------------------------------------------------------------------
# germ data and curvature formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceGerm:
    """Third-order Taylor data of r(x, y) at a saddle-node (x = y = 0).

    The lower-order conditions r_x = r_y = r_xy = r_yy = 0 are implicit;
    the stored fields reconstruct

        r(x,y) = r + r_xx/2 x^2 + r_yyy/6 y^3 + r_xxy/2 x^2 y
                 + r_yyx/2 y^2 x + r_xxx/6 x^3.
    """

    r: float
    r_xx: float
    r_yyy: float
    r_xxy: float
    r_yyx: float = 0.0
    r_xxx: float = 0.0

    def __post_init__(self):
        if self.r <= 0.0:
            raise DegenerateGermError("germ requires r > 0")
        if self.r_xx == 0.0:
            raise DegenerateGermError("r_xx = 0 would make the point umbilic-ambiguous")

    def polynomial(self):
        """The truncated Taylor polynomial as a callable of (x, y)."""
        g = self

        def poly(x, y):
            return (g.r + 0.5 * g.r_xx * x * x + g.r_yyy / 6.0 * y ** 3
                    + 0.5 * g.r_xxy * x * x * y + 0.5 * g.r_yyx * y * y * x
                    + g.r_xxx / 6.0 * x ** 3)

        return poly


def principal_curvatures_at_c(germ: SurfaceGerm):
    """(kappa, lambda) at the saddle-node: kappa = 1/r, lambda = (r - r_xx)/r^2.

    The two are never equal there, so the point cannot be an umbilic.
    """
    kappa = 1.0 / germ.r
    lam = (germ.r - germ.r_xx) / (germ.r * germ.r)
    assert kappa != lam, "saddle-node curvatures coincide (umbilic)"
    return kappa, lam


def curvature_y_derivatives(germ: SurfaceGerm):
    """y-derivatives of the principal curvatures at the saddle-node:
    kappa_y = -r_yyy / r^2, lambda_y = -r_xxy / r^2."""
    r2 = germ.r * germ.r
    return -germ.r_yyy / r2, -germ.r_xxy / r2


def omega_3d(v_kappa, v_lambda, r_yyy, r_xxy):
    """Annihilation indicator sgn(v_kappa r_yyy^2 + r_xxy r_yyy v_lambda).

    +1 is an annihilation, -1 a creation; scale-invariant in the pair
    (r_yyy, r_xxy). Accepts scalars or arrays (r_yyy must be nonzero
    where scalar; array draws hitting exactly zero count as 0).
    """
    r_yyy = np.asarray(r_yyy, dtype=float)
    r_xxy = np.asarray(r_xxy, dtype=float)
    if r_yyy.ndim == 0:
        if float(r_yyy) == 0.0:
            raise DegenerateGermError("r_yyy = 0: degenerate germ")
        return int(np.sign(v_kappa * float(r_yyy) ** 2 + float(r_xxy) * float(r_yyy) * v_lambda))
    arg = v_kappa * r_yyy ** 2 + r_xxy * r_yyy * v_lambda
    return np.sign(arg)


# ---------------------------------------------------------------------------
# speed laws on surfaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeedLaw3D:
    """Partials (v_kappa, v_lambda) of v(kappa, lambda) at a germ's curvatures.

    When a closed form is supplied the stored partials are validated
    against central finite differences (relative error 1e-6).
    """

    name: str
    v_kappa: float
    v_lambda: float
    closed_form: callable = None
    at: tuple = None          # (kappa, lambda) evaluation point for the closed form
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.closed_form is None:
            return
        if self.at is None:
            raise ValueError("closed-form laws need the (kappa, lambda) evaluation point")
        k, lam = self.at
        for stored, axis in ((self.v_kappa, 0), (self.v_lambda, 1)):
            h = 1e-6 * max(1.0, abs(self.at[axis]))
            lo = [k, lam]
            hi = [k, lam]
            lo[axis] -= h
            hi[axis] += h
            fd = (self.closed_form(*hi) - self.closed_form(*lo)) / (2.0 * h)
            if abs(stored - fd) > 1e-6 * max(1.0, abs(fd)):
                raise ValueError(
                    f"law {self.name!r}: stored partial {stored} disagrees with "
                    f"finite difference {fd}"
                )


def law_heat() -> SpeedLaw3D:
    """Heat-equation proxy: v_kappa = v_lambda = 1."""
    return SpeedLaw3D("heat", 1.0, 1.0)


def law_constant_partials(v_kappa: float, v_lambda: float) -> SpeedLaw3D:
    return SpeedLaw3D(f"partials({v_kappa},{v_lambda})", float(v_kappa), float(v_lambda))


def law_rayleigh(kappa: float, lam: float, c: float = 1.0) -> SpeedLaw3D:
    """v = c (kappa lambda)^(1/4)."""
    f = lambda k, l: c * (k * l) ** 0.25
    vk = 0.25 * c * kappa ** (-0.75) * lam ** 0.25
    vl = 0.25 * c * lam ** (-0.75) * kappa ** 0.25
    return SpeedLaw3D("rayleigh", vk, vl, closed_form=f, at=(kappa, lam), params={"c": c})


def law_firey(kappa: float, lam: float, c: float = 1.0) -> SpeedLaw3D:
    """v = c kappa lambda (Gauss curvature flow)."""
    f = lambda k, l: c * k * l
    return SpeedLaw3D("firey", c * lam, c * kappa, closed_form=f, at=(kappa, lam), params={"c": c})


def law_mean_curvature(kappa: float, lam: float, b: float = 1.0) -> SpeedLaw3D:
    """v = b (kappa + lambda)."""
    f = lambda k, l: b * (k + l)
    return SpeedLaw3D("mean", b, b, closed_form=f, at=(kappa, lam), params={"b": b})


def law_bloore(kappa: float, lam: float, radius: float = 1.0) -> SpeedLaw3D:
    """v = (1 + R kappa)(1 + R lambda), spherical abraders of radius R."""
    rr = float(radius)
    f = lambda k, l: (1.0 + rr * k) * (1.0 + rr * l)
    vk = rr * (1.0 + rr * lam)
    vl = rr * (1.0 + rr * kappa)
    return SpeedLaw3D("bloore", vk, vl, closed_form=f, at=(kappa, lam), params={"R": rr})


def law_eikonal(kappa: float = 1.0, lam: float = 2.0) -> SpeedLaw3D:
    """v = 1."""
    return SpeedLaw3D("eikonal", 0.0, 0.0, closed_form=lambda k, l: 1.0, at=(kappa, lam))


def law_principal(kappa: float, lam: float, c: float = 1.0) -> SpeedLaw3D:
    """v = c kappa (one principal curvature only)."""
    return SpeedLaw3D("principal", c, 0.0, closed_form=lambda k, l: c * k,
                      at=(kappa, lam), params={"c": c})


# ---------------------------------------------------------------------------
# the Damon creation example
# ---------------------------------------------------------------------------

class _Poly3:
    """Tiny polynomial-in-(x, y, t) arithmetic on coefficient dicts."""

    def __init__(self, coeffs: dict):
        self.c = {k: v for k, v in coeffs.items() if v != 0.0}

    def diff(self, axis: int) -> "_Poly3":
        out = {}
        for mono, v in self.c.items():
            if mono[axis] > 0:
                new = list(mono)
                new[axis] -= 1
                out[tuple(new)] = out.get(tuple(new), 0.0) + v * mono[axis]
        return _Poly3(out)

    def __sub__(self, other: "_Poly3") -> "_Poly3":
        out = dict(self.c)
        for mono, v in other.c.items():
            out[mono] = out.get(mono, 0.0) - v
        return _Poly3(out)

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.c.values())

    def eval_at_origin_deriv(self, dx: int, dy: int, dt: int) -> float:
        coeff = self.c.get((dx, dy, dt), 0.0)
        return coeff * math.factorial(dx) * math.factorial(dy) * math.factorial(dt)


def damon_creation_check() -> dict:
    """Verify the explicit creation example under the heat equation.

    The polynomial r = y^3 - 6ty - 6yx^2 + x^2 + 2t satisfies
    r_t = r_xx + r_yy identically; at the origin it is a saddle-node germ
    with r_yyy = 6, r_xxy = -12, and the indicator reports a creation.
    """
    # monomials keyed (x-power, y-power, t-power)
    r = _Poly3({(0, 3, 0): 1.0, (0, 1, 1): -6.0, (2, 1, 0): -6.0,
                (2, 0, 0): 1.0, (0, 0, 1): 2.0})
    residual = r.diff(2) - r.diff(0).diff(0) - r.diff(1).diff(1)
    partials = {
        "r_x": r.diff(0).eval_at_origin_deriv(0, 0, 0),
        "r_y": r.diff(1).eval_at_origin_deriv(0, 0, 0),
        "r_xy": r.diff(0).diff(1).eval_at_origin_deriv(0, 0, 0),
        "r_yy": r.diff(1).diff(1).eval_at_origin_deriv(0, 0, 0),
        "r_yyy": r.diff(1).diff(1).diff(1).eval_at_origin_deriv(0, 0, 0),
        "r_xxy": r.diff(0).diff(0).diff(1).eval_at_origin_deriv(0, 0, 0),
    }
    omega = omega_3d(1.0, 1.0, partials["r_yyy"], partials["r_xxy"])
    return {
        "heat_equation_residual_zero": residual.is_zero(),
        "residual_coefficients": residual.c,
        "partials_at_origin": partials,
        "omega": int(omega),
        "kind": "creation" if omega < 0 else "annihilation",
    }


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _block_rngs(seed: int, n: int):
    """Per-block generators keyed by (seed, block); partition-independent."""
    n_blocks = (n + BLOCK_SIZE - 1) // BLOCK_SIZE
    for b in range(n_blocks):
        size = min(BLOCK_SIZE, n - b * BLOCK_SIZE)
        yield np.random.default_rng(np.random.SeedSequence((int(seed), b))), size


@dataclass(frozen=True)
class Sampler:
    """Named zero-mean, zero-covariance family for (r_xxy, r_yyy) draws."""

    name: str
    draw_block: callable      # (rng, size) -> (r_xxy, r_yyy) arrays

    def draw(self, n: int, seed: int):
        xs, ys = [], []
        for rng, size in _block_rngs(seed, n):
            a, b = self.draw_block(rng, size)
            xs.append(a)
            ys.append(b)
        return np.concatenate(xs), np.concatenate(ys)

    def moment_check(self, n: int = 1_000_000, seed: int = 0):
        """Empirical means and covariance with their 3-sigma bounds."""
        a, b = self.draw(n, seed)
        stats = {
            "mean_xxy": float(np.mean(a)),
            "mean_yyy": float(np.mean(b)),
            "cov": float(np.mean(a * b) - np.mean(a) * np.mean(b)),
        }
        bounds = {
            "mean_xxy": 3.0 * float(np.std(a)) / math.sqrt(n),
            "mean_yyy": 3.0 * float(np.std(b)) / math.sqrt(n),
            "cov": 3.0 * float(np.std(a * b)) / math.sqrt(n),
        }
        stats["within_3se"] = all(abs(stats[k]) <= bounds[k] for k in bounds)
        stats["bounds_3se"] = bounds
        return stats


def normal_sampler() -> Sampler:
    """Independent standard normals (the symmetric reference case)."""
    return Sampler("normal", lambda rng, m: (rng.standard_normal(m), rng.standard_normal(m)))


def exponential_sampler() -> Sampler:
    """Independent centered exponentials: skewed but zero-mean."""
    def block(rng, m):
        return rng.exponential(size=m) - 1.0, rng.exponential(size=m) - 1.0
    return Sampler("exponential", block)


def decorrelated_sampler() -> Sampler:
    """Correlated-then-decorrelated pair: dependent, zero covariance.

    With X, Y independent centered exponentials (Var Y = 1, E Y^3 = 2),
    A = X + Y^2 - 1 - 2Y has cov(A, Y) = 0 while remaining a nonlinear
    function of Y.
    """
    def block(rng, m):
        x = rng.exponential(size=m) - 1.0
        y = rng.exponential(size=m) - 1.0
        a = x + y * y - 1.0 - 2.0 * y
        return a, y
    return Sampler("decorrelated", block)


SAMPLER_CATALOG = {
    "normal": normal_sampler,
    "exponential": exponential_sampler,
    "decorrelated": decorrelated_sampler,
}


# ---------------------------------------------------------------------------
# Monte Carlo estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    n: int
    mean: float
    p_plus: float
    p_zero: float
    ci99: float
    law: str
    sampler: str
    seed: int
    warning: str = ""

    def to_dict(self) -> dict:
        return {
            "law": self.law,
            "sampler": self.sampler,
            "n": self.n,
            "seed": self.seed,
            "mean": self.mean,
            "p_plus": self.p_plus,
            "p_zero": self.p_zero,
            "ci99": self.ci99,
            "warning": self.warning,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _estimate_from_signs(signs: np.ndarray, law_name, sampler_name, seed, warning=""):
    n = signs.size
    mean = float(np.mean(signs))
    p_plus = float(np.mean(signs > 0.0))
    p_zero = float(np.mean(signs == 0.0))
    ci = Z99 * float(np.std(signs)) / math.sqrt(n)
    return MCEstimate(n, mean, p_plus, p_zero, ci, law_name, sampler_name, seed, warning)


def mc_expected_omega(law: SpeedLaw3D, sampler: Sampler, n: int, seed: int) -> MCEstimate:
    """Monte Carlo estimate of E(Omega) under the sampler's germ distribution.

    Deterministic for fixed seed and independent of block partitioning.
    A sampler violating the zero-mean/zero-covariance invariant at three
    standard errors attaches a warning instead of failing.
    """
    if n < 10_000:
        raise ValueError("n must be at least 10^4 for a meaningful estimate")
    a, b = sampler.draw(n, seed)
    signs = omega_3d(law.v_kappa, law.v_lambda, b, a)
    warning = ""
    mean_a, mean_b = float(np.mean(a)), float(np.mean(b))
    cov = float(np.mean(a * b)) - mean_a * mean_b
    se_a = 3.0 * float(np.std(a)) / math.sqrt(n)
    se_b = 3.0 * float(np.std(b)) / math.sqrt(n)
    se_ab = 3.0 * float(np.std(a * b)) / math.sqrt(n)
    if abs(mean_a) > se_a or abs(mean_b) > se_b or abs(cov) > se_ab:
        warning = "sampler moments outside 3 standard errors of zero"
    return _estimate_from_signs(signs, law.name, sampler.name, seed, warning)


def assumption_2a_omega(law: SpeedLaw3D, r_yyy: float, det_sampler, n: int, seed: int) -> MCEstimate:
    """E(sgn(v_kappa r_yyy^2 + xi v_lambda)) for Hessian-determinant draws xi.

    ``det_sampler(rng, size)`` must produce determinant values whose signs
    are +1/-1 with equal probability (the relevant elliptic/hyperbolic
    balance on a topological sphere); imbalance beyond three standard
    errors is an error.
    """
    if r_yyy == 0.0:
        raise DegenerateGermError("r_yyy = 0: degenerate germ")
    xis = []
    for rng, size in _block_rngs(seed, n):
        xis.append(np.asarray(det_sampler(rng, size), dtype=float))
    xi = np.concatenate(xis)
    sign_mean = float(np.mean(np.sign(xi)))
    if abs(sign_mean) > 3.0 / math.sqrt(n):
        raise ValueError(
            f"determinant sampler sign frequencies unbalanced: mean sgn = {sign_mean:.4g}"
        )
    signs = np.sign(law.v_kappa * r_yyy ** 2 + xi * law.v_lambda)
    return _estimate_from_signs(signs, law.name, "determinant", seed)


def euler_counts(s: int, u: int, h: int):
    """Relevant critical-point counts after removing the global extrema.

    Requires the Euler characteristic S + U - H = 2 (topological sphere);
    returns (S-1, U-1, H) and the total n, with the elliptic/hyperbolic
    balance asserted.
    """
    if s + u - h != 2:
        raise ValueError(f"S + U - H = {s + u - h} != 2: not a topological sphere")
    s_bar, u_bar, h_bar = s - 1, u - 1, h
    assert s_bar + u_bar == h_bar
    return (s_bar, u_bar, h_bar), s + u + h - 2
