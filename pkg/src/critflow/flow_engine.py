"""Time evolution of polar curves under normal-speed laws v(kappa).

The radial PDE is r_t = -v(kappa(r, r_phi, r_phiphi)) * w(r, r_phi),
integrated with explicit RK4 on the periodic spectral grid. The engine
tracks the number N(t) of critical points of r, brackets each change of
N by bisection in time, and classifies the event:

  * kind        annihilation (N drops) or creation (N rises),
  * Omega       observed jump direction vs. the predicted sgn(v_kappa),
  * topology    saddle-node, or pitchfork-like when r_phiphiphi is
                (numerically) degenerate at the event site, which is the
                symmetric-merger route.

A change of N is detected from the sign alternation of r_phi at its
extrema, so merging root pairs are still seen when their separation is
far below the grid spacing.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry_core import (
    AlternationCount,
    GeometryDomainError,
    PolarCurve,
    count_critical_points,
    curvature_arrays,
    deriv_from_spectrum,
    enclosed_area,
    evaluate_spectrum,
    min_curvature_radius,
    tangential_factor,
)

# |r_phiphiphi| below this fraction of max|r| at a bracketed event marks
# the event pitchfork-like (proximity to the symmetric degeneracy).
PITCHFORK_REL_THRESHOLD = 1e-4

# An Eikonal run refuses to continue past this fraction of the initial
# minimal curvature radius; the polar chart cannot express the swallowtail.
EIKONAL_HORIZON_FRACTION = 0.95


class CurveCollapsedError(RuntimeError):
    """The curve passed through the origin during a step."""


class StiffnessError(RuntimeError):
    """NaN/Inf appeared during a step; reduce dt."""


class EventLocalizationError(RuntimeError):
    """A change of N could not be resolved into consistent events."""


# ---------------------------------------------------------------------------
# speed laws
# ---------------------------------------------------------------------------

_PROBE_KAPPAS = np.array([0.2, 0.5, 1.0, 2.0, 5.0])


@dataclass(frozen=True)
class SpeedLaw:
    """Normal-speed rule v(kappa) together with its partial v_kappa.

    ``partial`` is checked against central finite differences on a probe
    set at construction (relative error < 1e-6).
    """

    name: str
    value: callable
    partial: callable
    params: dict = field(default_factory=dict)
    probe: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        probe = _PROBE_KAPPAS if self.probe is None else np.asarray(self.probe, dtype=float)
        object.__setattr__(self, "probe", probe)
        h = 1e-6 * np.maximum(1.0, np.abs(probe))
        fd = (self.value(probe + h) - self.value(probe - h)) / (2.0 * h)
        an = self.partial(probe) * np.ones_like(probe)
        err = np.abs(an - fd) / np.maximum(1.0, np.abs(fd))
        if np.any(err > 1e-6):
            raise ValueError(
                f"speed law {self.name!r}: stored partial disagrees with finite "
                f"differences (max rel err {float(np.max(err)):.2e})"
            )
        object.__setattr__(self, "_zero_partial", bool(np.all(an == 0.0)))

    @property
    def is_constant_speed(self) -> bool:
        """True when v_kappa vanishes identically on the probe set."""
        return self._zero_partial


def grayson() -> SpeedLaw:
    """Curve-shortening law v = kappa."""
    return SpeedLaw("grayson", lambda k: np.asarray(k, dtype=float), lambda k: np.ones_like(np.asarray(k, dtype=float)))


def eikonal() -> SpeedLaw:
    """Parallel map v = 1."""
    return SpeedLaw(
        "eikonal",
        lambda k: np.ones_like(np.asarray(k, dtype=float)),
        lambda k: np.zeros_like(np.asarray(k, dtype=float)),
    )


def bloore_planar(radius: float = 1.0) -> SpeedLaw:
    """Planar abrasion-by-spheres law v = 1 + R*kappa."""
    r = float(radius)
    return SpeedLaw(
        "bloore_planar",
        lambda k: 1.0 + r * np.asarray(k, dtype=float),
        lambda k: np.full_like(np.asarray(k, dtype=float), r),
        params={"R": r},
    )


def power_law(p: float) -> SpeedLaw:
    """v = kappa^p on convex curves (kappa > 0)."""
    p = float(p)
    return SpeedLaw(
        "power_law",
        lambda k: np.asarray(k, dtype=float) ** p,
        lambda k: p * np.asarray(k, dtype=float) ** (p - 1.0),
        params={"p": p},
        probe=np.array([0.5, 1.0, 2.0, 5.0]),
    )


def reversed_grayson() -> SpeedLaw:
    """Expanding law v = -kappa (v_kappa < 0: creations expected)."""
    return SpeedLaw(
        "reversed",
        lambda k: -np.asarray(k, dtype=float),
        lambda k: -np.ones_like(np.asarray(k, dtype=float)),
    )


LAW_CATALOG = {
    "grayson": grayson,
    "eikonal": eikonal,
    "bloore": bloore_planar,
    "power": power_law,
    "reversed": reversed_grayson,
}


def predicted_omega(law: SpeedLaw, kappa: float) -> int:
    """Predicted annihilation indicator sgn(v_kappa) at the event."""
    vk = float(law.partial(np.asarray(kappa, dtype=float)))
    return int(np.sign(vk))


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def scenario_superellipse(a: float, b: float, n: int, eps: float = 0.0,
                          psi: float = 0.0, m: int = 1024) -> PolarCurve:
    """Smooth rounded-rectangle proxy with an optional symmetry-breaking bump.

    r(phi) = ((cos phi / a)^(2n) + (sin phi / b)^(2n))^(-1/(2n))
             * (1 + eps * sin(2 phi + psi))

    eps = 0 keeps both reflection symmetries (pitchfork route); eps > 0
    breaks them (saddle-node route). a = b, n = 1, eps = 0 is a circle.
    """
    if not (a >= b > 0.0):
        raise ValueError("superellipse requires a >= b > 0")
    if int(n) != n or n < 1:
        raise ValueError("superellipse exponent n must be a positive integer")
    if eps < 0.0:
        raise ValueError("superellipse requires eps >= 0")

    def radial(phi):
        u = (np.abs(np.cos(phi)) / a) ** (2 * n) + (np.abs(np.sin(phi)) / b) ** (2 * n)
        return u ** (-1.0 / (2 * n)) * (1.0 + eps * np.sin(2.0 * phi + psi))

    return PolarCurve.from_function(radial, m)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def _rhs(r: np.ndarray, law: SpeedLaw) -> np.ndarray:
    m = r.size
    coeff = np.fft.rfft(r)
    r_p = deriv_from_spectrum(coeff, m, 1)
    r_pp = deriv_from_spectrum(coeff, m, 2)
    kap = curvature_arrays(r, r_p, r_pp)
    w = tangential_factor(r, r_p)
    return -law.value(kap) * w


def _rk4(r: np.ndarray, dt: float, law: SpeedLaw) -> np.ndarray:
    k1 = _rhs(r, law)
    k2 = _rhs(r + 0.5 * dt * k1, law)
    k3 = _rhs(r + 0.5 * dt * k2, law)
    k4 = _rhs(r + dt * k3, law)
    return r + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_state(r: np.ndarray) -> None:
    if not np.all(np.isfinite(r)):
        raise StiffnessError("state became non-finite: stiffness/blow-up, reduce dt")
    if np.any(r <= 0.0):
        raise CurveCollapsedError("curve collapsed through origin")


def _stable_dt(r, r_p, r_pp, kap, w, law, safety=0.2):
    """Parabolic/advective step bound from the linearized operator.

    d(rhs)/d(r_phiphi) = v_kappa * w * r / (r^2 + r_phi^2)^(3/2) is the
    diffusion coefficient; the first-derivative couplings give the
    advective bound used when v_kappa vanishes (Eikonal).
    """
    m = r.size
    dphi = 2.0 * np.pi / m
    a = r * r + r_p * r_p
    vk = law.partial(kap) * np.ones_like(kap)
    v = law.value(kap) * np.ones_like(kap)

    diffusion = np.max(np.abs(vk) * w * r / a ** 1.5)
    kap_rp = r_p * (4.0 / a ** 1.5 - 3.0 * kap / a)
    w_rp = r_p / (r * r * w)
    advection = np.max(np.abs(vk * kap_rp * w) + np.abs(v * w_rp))

    dt = np.inf
    if diffusion > 0.0:
        dt = min(dt, safety * dphi * dphi / diffusion)
    if advection > 0.0:
        dt = min(dt, safety * dphi / advection)
    # cap radial motion at 5% of the smallest radius per step
    vmax = float(np.max(np.abs(v * w)))
    if vmax > 0.0:
        dt = min(dt, 0.05 * float(np.min(r)) / vmax)
    if not math.isfinite(dt):
        raise StiffnessError("could not determine a stable step size")
    return dt


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BifurcationEvent:
    time: float
    angle: float
    kind: str                 # "annihilation" | "creation"
    omega_observed: int
    omega_predicted: int
    topology: str             # "saddle-node" | "pitchfork-like"
    delta_n: int
    simultaneous: bool = False

    def to_dict(self) -> dict:
        return {
            "t": self.time,
            "phi": self.angle,
            "kind": self.kind,
            "omega_observed": self.omega_observed,
            "omega_predicted": self.omega_predicted,
            "topology": self.topology,
            "delta_n": self.delta_n,
            "simultaneous": self.simultaneous,
        }


def _circ_dist(a, b):
    d = np.abs(a - b) % (2.0 * np.pi)
    return np.minimum(d, 2.0 * np.pi - d)


def _match_extrema(pre: AlternationCount, post: AlternationCount, cutoff: float):
    """Greedy nearest-angle matching of r_phi extrema across the bracket."""
    np_pre, np_post = pre.ext_angles.size, post.ext_angles.size
    if np_pre == 0 or np_post == 0:
        return {}, set(range(np_pre)), set(range(np_post))
    d = _circ_dist(pre.ext_angles[:, None], post.ext_angles[None, :])
    pairs = []
    order = np.argsort(d, axis=None)
    used_pre, used_post, mapping = set(), set(), {}
    for flat in order:
        i, j = divmod(int(flat), np_post)
        if d[i, j] > cutoff:
            break
        if i in used_pre or j in used_post:
            continue
        mapping[i] = j
        used_pre.add(i)
        used_post.add(j)
        pairs.append((i, j))
    return mapping, set(range(np_pre)) - used_pre, set(range(np_post)) - used_post


def _local_alternations(values) -> int:
    """Sign changes along a non-cyclic value sequence."""
    s = np.where(np.asarray(values) >= 0.0, 1, -1)
    return int(np.sum(s[1:] != s[:-1]))


def _circular_mean(angles):
    z = np.exp(1j * np.asarray(angles, dtype=float))
    return float(np.angle(np.mean(z))) % (2.0 * np.pi)


def _analyze_sites(pre: AlternationCount, post: AlternationCount, m: int):
    """Split one bracketed change of N into event sites.

    A site is a maximal cyclic run of affected extrema of r_phi: matched
    extrema whose value flipped sign, plus vanished/created ones. The
    per-site change of N is the local change of sign alternations,
    anchored between the nearest surviving unaffected extrema; summed
    over sites this reproduces the total change exactly.
    """
    dphi = 2.0 * np.pi / m
    cutoff = 3.0 * dphi
    mapping, vanished, created = _match_extrema(pre, post, cutoff)

    flipped = {i for i, j in mapping.items()
               if (pre.ext_values[i] >= 0.0) != (post.ext_values[j] >= 0.0)}
    affected = []  # (angle, pre_index or None, post_index or None)
    for i in flipped:
        affected.append((float(pre.ext_angles[i]), i, mapping[i]))
    for i in vanished:
        affected.append((float(pre.ext_angles[i]), i, None))
    for j in created:
        affected.append((float(post.ext_angles[j]), None, j))
    if not affected:
        return []

    affected.sort(key=lambda rec: rec[0])
    gap = max(5.0 * dphi, 2.0 * cutoff)
    clusters = [[affected[0]]]
    for rec in affected[1:]:
        if rec[0] - clusters[-1][-1][0] <= gap:
            clusters[-1].append(rec)
        else:
            clusters.append([rec])
    # cyclic wrap: merge last into first if they touch around 2*pi
    if len(clusters) > 1 and _circ_dist(clusters[0][0][0], clusters[-1][-1][0]) <= gap:
        clusters[0] = clusters.pop() + clusters[0]

    affected_pre = flipped | vanished
    anchors = sorted(i for i in range(pre.ext_angles.size) if i not in affected_pre)
    if not anchors:
        # everything affected at once; report a single site with the full change
        angle = _circular_mean([rec[0] for rec in affected])
        return [(angle, post.count - pre.count)]

    sites = []
    for cluster in clusters:
        angles = [rec[0] for rec in cluster]
        left, right = _bracketing_anchors(pre.ext_angles, anchors, angles)
        pre_members = [rec[1] for rec in cluster if rec[1] is not None]
        post_members = [rec[2] for rec in cluster if rec[2] is not None]
        pre_seq = ([pre.ext_values[left]]
                   + [pre.ext_values[i] for i in pre_members]
                   + [pre.ext_values[right]])
        post_seq = ([post.ext_values[mapping[left]]]
                    + [post.ext_values[j] for j in post_members]
                    + [post.ext_values[mapping[right]]])
        delta = _local_alternations(post_seq) - _local_alternations(pre_seq)
        sites.append((_circular_mean(angles), delta))
    return sites


def _bracketing_anchors(pre_angles, anchors, cluster_angles):
    """Nearest unaffected pre-extrema on either side of a cluster (cyclic)."""
    anchor_angles = pre_angles[np.asarray(anchors, dtype=int)]
    center = _circular_mean(cluster_angles)
    rel = (anchor_angles - center) % (2.0 * np.pi)
    right = anchors[int(np.argmin(rel))]
    left = anchors[int(np.argmax(rel))]
    return left, right


# ---------------------------------------------------------------------------
# run record
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    """Event-annotated history of one flow run."""

    law_name: str
    times: list = field(default_factory=list)
    counts: list = field(default_factory=list)
    areas: list = field(default_factory=list)
    r_mins: list = field(default_factory=list)
    events: list = field(default_factory=list)
    final_curve: PolarCurve = None
    stopped_reason: str = ""

    def sample(self, t: float, n: int, curve: PolarCurve) -> None:
        self.times.append(t)
        self.counts.append(n)
        self.areas.append(enclosed_area(curve))
        try:
            self.r_mins.append(min_curvature_radius(curve))
        except GeometryDomainError:
            self.r_mins.append(float("nan"))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "N", "area", "R_min"])
            for t, n, a, rmin in zip(self.times, self.counts, self.areas, self.r_mins):
                writer.writerow([f"{t:.17g}", n, f"{a:.17g}", f"{rmin:.17g}"])

    def events_dict(self) -> dict:
        return {
            "law": self.law_name,
            "stopped": self.stopped_reason,
            "events": [ev.to_dict() for ev in self.events],
        }

    def events_to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.events_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass(frozen=True)
class FlowControls:
    dt: float = None            # None: recompute the stability bound each step
    sample_every: int = 25
    event_tol: float = 1e-8     # bisection tolerance for event times
    max_steps: int = 2_000_000
    stop_when_n_at_most: int = None


# ---------------------------------------------------------------------------
# the driver
# ---------------------------------------------------------------------------

def radial_step(curve: PolarCurve, law: SpeedLaw, dt: float) -> PolarCurve:
    """One explicit RK4 step of r_t = -v(kappa) w."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    r_new = _rk4(curve.samples, dt, law)
    _check_state(r_new)
    return PolarCurve(r_new)


def evolve(curve: PolarCurve, law: SpeedLaw, t_end: float,
           controls: FlowControls = FlowControls()) -> RunRecord:
    """Integrate the flow to t_end, recording N(t) and bifurcation events.

    Each change of N is bracketed by bisection over sub-steps to
    ``controls.event_tol``; surviving r_phi extrema are matched to prior
    ones by angular proximity and the change is split into event sites.
    Under a constant-speed (Eikonal) law the run refuses to continue past
    0.95 * R_min of the initial curve.
    """
    if t_end <= 0.0:
        raise ValueError("t_end must be positive")
    if law.is_constant_speed:
        horizon = EIKONAL_HORIZON_FRACTION * min_curvature_radius(curve)
        if t_end > horizon:
            t_end = horizon

    record = RunRecord(law_name=law.name)
    r = curve.samples.copy()
    m = r.size
    scale0 = float(np.max(np.abs(r)))
    t = 0.0
    alt = count_critical_points(r)
    n_cur = alt.count
    record.sample(t, n_cur, PolarCurve(r))

    steps = 0
    while t < t_end and steps < controls.max_steps:
        coeff = np.fft.rfft(r)
        r_p = deriv_from_spectrum(coeff, m, 1)
        r_pp = deriv_from_spectrum(coeff, m, 2)
        kap = curvature_arrays(r, r_p, r_pp)
        w = tangential_factor(r, r_p)
        dt = controls.dt if controls.dt is not None else _stable_dt(r, r_p, r_pp, kap, w, law)
        dt = min(dt, t_end - t)

        r_new = _rk4(r, dt, law)
        _check_state(r_new)
        alt_new = count_critical_points(r_new)

        if alt_new.count != n_cur and not alt_new.degenerate_circle:
            n_cur, r = _handle_bracket(record, law, r, t, dt, r_new, alt_new,
                                       n_cur, controls.event_tol, scale0)
        else:
            r = r_new
        t += dt
        steps += 1

        if steps % controls.sample_every == 0:
            record.sample(t, n_cur, PolarCurve(r))
        if controls.stop_when_n_at_most is not None and n_cur <= controls.stop_when_n_at_most:
            record.stopped_reason = f"N reached {n_cur}"
            break
    if not record.stopped_reason:
        record.stopped_reason = "t_end reached" if t >= t_end else "max_steps reached"

    record.sample(t, n_cur, PolarCurve(r))
    record.final_curve = PolarCurve(r)
    _mark_simultaneous(record, controls.event_tol)
    return record


def _handle_bracket(record, law, r_start, t_start, dt, r_end, alt_end, n_start, tol, scale0):
    """Resolve every change of N inside [t_start, t_start + dt].

    Bisection re-integrates single RK4 sub-steps from the bracket start;
    the O(tau^5) local error of one step is far below the event
    tolerance. Several well-separated events in one strip are peeled off
    left to right.
    """
    offset = 0.0
    r_lo = r_start
    n_cur = n_start
    guard = 0
    while alt_end.count != n_cur and offset < dt:
        lo, hi = 0.0, dt - offset
        r_hi, alt_hi = r_end, alt_end
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            r_mid = _rk4(r_lo, mid, law)
            _check_state(r_mid)
            alt_mid = count_critical_points(r_mid)
            if alt_mid.count == n_cur:
                lo = mid
            else:
                hi = mid
                r_hi, alt_hi = r_mid, alt_mid
        t_star = t_start + offset + hi
        pre_state = _rk4(r_lo, lo, law) if lo > 0.0 else r_lo
        alt_pre = count_critical_points(pre_state)
        _emit_events(record, law, pre_state, alt_pre, alt_hi, t_star, scale0)
        record.sample(t_star, alt_hi.count, PolarCurve(r_hi))

        # continue scanning the remainder of the strip for further changes
        offset += hi
        r_lo = r_hi
        n_cur = alt_hi.count
        alt_end = count_critical_points(r_end)
        guard += 1
        if guard > 16:
            raise EventLocalizationError(
                f"event localization failed near t={t_star}: too many changes in one step"
            )
    return n_cur, r_end


def _emit_events(record, law, pre_state, alt_pre, alt_post, t_star, scale0):
    m = pre_state.size
    delta_total = alt_post.count - alt_pre.count
    sites = _analyze_sites(alt_pre, alt_post, m)
    if not sites or sum(d for _, d in sites) != delta_total:
        raise EventLocalizationError(
            f"event localization failed at t={t_star}: site deltas "
            f"{[d for _, d in sites]} do not account for dN={delta_total}"
        )
    coeff = np.fft.rfft(pre_state)
    for angle, delta in sites:
        if delta == 0:
            continue
        r_at = float(evaluate_spectrum(coeff, m, np.array([angle]), order=0)[0])
        r3 = float(evaluate_spectrum(coeff, m, np.array([angle]), order=3)[0])
        kind = "annihilation" if delta < 0 else "creation"
        omega_obs = 1 if delta < 0 else -1
        omega_pred = predicted_omega(law, 1.0 / r_at)
        topology = "pitchfork-like" if abs(r3) < PITCHFORK_REL_THRESHOLD * scale0 else "saddle-node"
        record.events.append(BifurcationEvent(
            time=t_star, angle=angle, kind=kind, omega_observed=omega_obs,
            omega_predicted=omega_pred, topology=topology, delta_n=delta,
        ))


def _mark_simultaneous(record, tol):
    events = record.events
    for i, ev in enumerate(events):
        close = any(j != i and abs(other.time - ev.time) <= 2.0 * tol
                    for j, other in enumerate(events))
        if close and not ev.simultaneous:
            events[i] = replace(ev, simultaneous=True)
