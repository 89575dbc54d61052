"""Stochastic layer: the N(t) jump chain, uniform noise, and delta(d).

At each bifurcation epoch the critical-point count moves by -2 with
probability p and +2 with probability 1-p. Modelling the moving-centroid
effect as uniform noise eta on [-d, d] added inside the sign gives
p = (d + 1) / (2 d) for unit drift, so d = 1 recovers the deterministic
non-smooth Eikonal case (always down) and d -> infinity the symmetric
walk.

For trajectory-type probabilities q = (q0, q1, q2) the closed-form
globally/ultimately-bounded probabilities of the noisy model are

    P_glob(p) = q0 + q1 p + q2 p^2
    P_ult(p)  = q0 + 2 q2 p (1 - p) + q1 p + q2 p^2

and delta(d) is the squared mismatch against the deterministic pair.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

PAPER_REPORTED_D_STAR = 1.8
D_STAR_FLAG_TOLERANCE = 0.2


@dataclass(frozen=True)
class NoiseModel:
    """Uniform noise eta on [-d, d], d >= 1.

    For d < 1 with unit drift sgn(1 + eta) is always +1, which is the
    degenerate no-noise regime; such amplitudes are rejected.
    """

    d: float

    def __post_init__(self):
        if self.d < 1.0:
            raise ValueError("noise amplitude d must be >= 1")


def noisy_omega(v_kappa: float, noise: NoiseModel, rng: np.random.Generator) -> int:
    """One draw of sgn(v_kappa + eta); the zero-measure tie returns +1."""
    eta = rng.uniform(-noise.d, noise.d)
    s = v_kappa + eta
    return 1 if s >= 0.0 else -1


def p_of_d(d: float) -> float:
    """Down-step probability p = (d + 1) / (2 d) of the unit-drift noisy sign."""
    if d < 1.0:
        raise ValueError("noise amplitude d must be >= 1")
    return (d + 1.0) / (2.0 * d)


@dataclass(frozen=True)
class ChainSpec:
    """Embedded discrete jump chain of N(t)."""

    n0: int
    p: float
    epochs: int
    floor: int = 4          # a closed planar convex body keeps >= 2 maxima + 2 minima

    def __post_init__(self):
        if self.n0 < 4 or self.n0 % 2 != 0:
            raise ValueError("initial count N0 must be an even integer >= 4")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("down-step probability must lie in [0, 1]")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")


def simulate_chain(spec: ChainSpec, seed: int) -> np.ndarray:
    """One trajectory: N moves by -2 w.p. p, +2 otherwise, floored.

    Returns the length-(epochs+1) array of states, deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    states = np.empty(spec.epochs + 1, dtype=int)
    states[0] = spec.n0
    draws = rng.random(spec.epochs)
    n = spec.n0
    for i, u in enumerate(draws):
        n = n - 2 if u < spec.p else n + 2
        n = max(n, spec.floor)
        states[i + 1] = n
    return states


def simulate_chains(spec: ChainSpec, n_chains: int, seed: int) -> np.ndarray:
    """Batch of independent trajectories, one sub-seed per chain."""
    out = np.empty((n_chains, spec.epochs + 1), dtype=int)
    root = np.random.SeedSequence(seed)
    for i, child in enumerate(root.spawn(n_chains)):
        rng = np.random.default_rng(child)
        draws = rng.random(spec.epochs)
        n = spec.n0
        out[i, 0] = n
        for j, u in enumerate(draws):
            n = max(n - 2 if u < spec.p else n + 2, spec.floor)
            out[i, j + 1] = n
    return out


@dataclass(frozen=True)
class TrajectoryTypeDistribution:
    """Probabilities of trajectory types with 0, 1, or 2 jumps."""

    q0: float
    q1: float
    q2: float

    def __post_init__(self):
        q = (self.q0, self.q1, self.q2)
        if min(q) < 0.0 or abs(sum(q) - 1.0) > 1e-12:
            raise ValueError(f"q must lie on the probability simplex, got {q}")


def stochastic_bounds(q: TrajectoryTypeDistribution, p: float):
    """(P_glob, P_ult) of the noisy model at down-step probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    p_glob = q.q0 + q.q1 * p + q.q2 * p * p
    p_ult = p_glob + 2.0 * q.q2 * p * (1.0 - p)
    return p_glob, p_ult


def delta_error(d: float, q: TrajectoryTypeDistribution,
                p_det_glob: float, p_det_ult: float) -> float:
    """Squared mismatch of the noisy bounds against the deterministic pair."""
    p = p_of_d(d)
    s_glob, s_ult = stochastic_bounds(q, p)
    return (p_det_ult - s_ult) ** 2 + (p_det_glob - s_glob) ** 2


def minimize_delta(q: TrajectoryTypeDistribution, p_det,
                   d_range=(1.0, 6.0), step: float = 1e-3):
    """Grid scan plus golden-section refinement of delta(d).

    Returns (d_star, delta(d_star)); the boundary d = 1 is reported when
    delta is nondecreasing over the range.
    """
    d_lo, d_hi = d_range
    if d_lo < 1.0 or d_hi <= d_lo or step <= 0.0:
        raise ValueError("d_range must satisfy 1 <= d_lo < d_hi with step > 0")
    p_glob, p_ult = p_det
    ds = np.arange(d_lo, d_hi + step, step)
    vals = np.array([delta_error(d, q, p_glob, p_ult) for d in ds])
    i = int(np.argmin(vals))
    if i == 0:
        return float(ds[0]), float(vals[0])
    lo = ds[max(i - 1, 0)]
    hi = ds[min(i + 1, ds.size - 1)]

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc = delta_error(c, q, p_glob, p_ult)
    fe = delta_error(e, q, p_glob, p_ult)
    for _ in range(80):
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = delta_error(c, q, p_glob, p_ult)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = delta_error(e, q, p_glob, p_ult)
        if b - a < 1e-12:
            break
    d_star = 0.5 * (a + b)
    return float(d_star), float(delta_error(d_star, q, p_glob, p_ult))


def delta_report(q: TrajectoryTypeDistribution, p_det, d_range=(1.0, 6.0),
                 step: float = 1e-3, table_points: int = 101) -> dict:
    """Full delta(d) summary with the reported-minimum discrepancy flag.

    The reported noise amplitude of the reference analysis is 1.8; if the
    computed minimizer differs by more than 0.2 the summary carries the
    full delta(d) table and an explicit flag instead of adjusted constants.
    """
    d_star, delta_star = minimize_delta(q, p_det, d_range, step)
    ds = np.linspace(d_range[0], d_range[1], table_points)
    table = [{"d": float(d), "delta": delta_error(float(d), q, p_det[0], p_det[1])}
             for d in ds]
    discrepancy = abs(d_star - PAPER_REPORTED_D_STAR) > D_STAR_FLAG_TOLERANCE
    return {
        "q": [q.q0, q.q1, q.q2],
        "p_det": {"glob": p_det[0], "ult": p_det[1]},
        "d_grid": {"lo": d_range[0], "hi": d_range[1], "step": step},
        "d_star": d_star,
        "delta_at_d_star": delta_star,
        "delta_at_1": delta_error(1.0, q, p_det[0], p_det[1]),
        "reported_d_star": PAPER_REPORTED_D_STAR,
        "reported_value_discrepancy": discrepancy,
        "delta_table": table,
    }


def write_delta_json(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
