"""Physiological kinetics: pH, PCr depletion, and monoexponential fits.

Sample-time convention: within a phase the i-th frame (i = 0, 1, ...) is
assigned the time (i + 1) * tr_s from the phase boundary, i.e. each frame
reports the metabolite state reached by the end of its TR interval.  The
fitted curve therefore passes through the pinned baseline exactly at the
phase boundary and the first acquired point already carries information
about the time constant.  Excluding initial points (start_offset > 0) keeps
the original time axis; the model extrapolates back to the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .acquisition import Phase, ProtocolTiming
from .errors import DomainError, FitError

if TYPE_CHECKING:  # pragma: no cover
    from .quantifier import FrameQuant

# Henderson-Hasselbalch calibration for the Pi-PCr chemical shift.
PH_PKA = 6.75
PH_SHIFT_MIN_PPM = 3.27
PH_SHIFT_MAX_PPM = 5.69

TAU_FLOOR_S = 1.0
TAU_CAP_S = 600.0


def ph_from_shift(delta_ppm: float) -> float:
    """Intracellular pH from the Pi-PCr chemical shift in ppm.

    The shift must lie strictly inside (3.27, 5.69) ppm; values outside
    signal a non-physiological shift or a failed Pi fit.
    """
    if not PH_SHIFT_MIN_PPM < delta_ppm < PH_SHIFT_MAX_PPM:
        raise DomainError(
            f"Pi-PCr shift {delta_ppm} ppm outside "
            f"({PH_SHIFT_MIN_PPM}, {PH_SHIFT_MAX_PPM})"
        )
    return PH_PKA + math.log10(
        (delta_ppm - PH_SHIFT_MIN_PPM) / (PH_SHIFT_MAX_PPM - delta_ppm)
    )


def shift_from_ph(ph: float) -> float:
    """Inverse of ph_from_shift: the Pi-PCr shift in ppm that encodes ph."""
    r = 10.0 ** (ph - PH_PKA)
    return (PH_SHIFT_MIN_PPM + PH_SHIFT_MAX_PPM * r) / (1.0 + r)


def pcr_depletion(pcr_rest: float, pcr_post: float) -> float:
    """Percent PCr drop from rest to end-exercise: (1 - post/rest) * 100."""
    if pcr_rest <= 0:
        raise DomainError(f"pcr_rest must be > 0, got {pcr_rest}")
    return (1.0 - pcr_post / pcr_rest) * 100.0


@dataclass(frozen=True)
class MonoExpFit:
    """A fitted y(t) = baseline +/- delta * (1 - exp(-t / tau_s)) curve."""

    baseline: float
    delta: float
    tau_s: float
    direction: str  # "down" or "up"
    r2: float
    phase: Phase
    start_offset: int = 0
    tau_at_cap: bool = False

    def predict(self, times_s: np.ndarray) -> np.ndarray:
        sign = 1.0 if self.direction == "up" else -1.0
        return self.baseline + sign * self.delta * (
            1.0 - np.exp(-np.asarray(times_s, dtype=float) / self.tau_s)
        )


def _tau_cost(tau: float, t: np.ndarray, dev: np.ndarray) -> tuple[float, float]:
    """Least-squares cost and the closed-form delta (>= 0) for a fixed tau."""
    g = 1.0 - np.exp(-t / tau)
    gg = float(g @ g)
    if gg <= 0.0:
        return float(dev @ dev), 0.0
    delta = max(float(g @ dev) / gg, 0.0)
    r = dev - delta * g
    return float(r @ r), delta


def fit_monoexp(
    values: Sequence[float],
    times_s: Sequence[float],
    direction: str,
    baseline: float,
    start_offset: int = 0,
    phase: Phase = Phase.RECOVERY,
    tau_bounds_s: tuple[float, float] = (TAU_FLOOR_S, TAU_CAP_S),
) -> MonoExpFit:
    """Fit (delta, tau) with the baseline pinned and delta constrained >= 0.

    The tau axis is searched by a coarse log-spaced grid followed by
    golden-section refinement: deterministic, derivative-free, and immune
    to divergence on a 2-parameter problem.  Points before start_offset are
    excluded but the time axis is not re-referenced.
    """
    if direction not in ("down", "up"):
        raise ValueError(f"direction must be 'down' or 'up', got {direction!r}")
    if not 0 <= start_offset <= 3:
        raise ValueError("start_offset must be in 0..3")
    y = np.asarray(values, dtype=float)[start_offset:]
    t = np.asarray(times_s, dtype=float)[start_offset:]
    if y.shape != t.shape or y.ndim != 1:
        raise ValueError("values and times_s must be 1-D and equally long")
    if y.size < 5:
        raise FitError(f"need >= 5 points after offset exclusion, got {y.size}")
    if np.any(np.diff(t) <= 0):
        raise FitError("times must be strictly increasing")
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot <= 0.0:
        raise FitError("degenerate data: zero variance")

    sign = 1.0 if direction == "up" else -1.0
    dev = sign * (y - baseline)

    lo, hi = math.log(tau_bounds_s[0]), math.log(tau_bounds_s[1])
    grid = np.linspace(lo, hi, 96)
    costs = [_tau_cost(math.exp(lt), t, dev)[0] for lt in grid]
    k = int(np.argmin(costs))

    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _tau_cost(math.exp(c), t, dev)[0]
    fd = _tau_cost(math.exp(d), t, dev)[0]
    while b - a > 1e-12:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _tau_cost(math.exp(c), t, dev)[0]
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _tau_cost(math.exp(d), t, dev)[0]
    log_tau = float((a + b) / 2.0)
    tau = math.exp(log_tau)
    ss_res, delta = _tau_cost(tau, t, dev)
    at_cap = bool(hi - log_tau < 1e-9)
    if at_cap:
        tau = tau_bounds_s[1]
    return MonoExpFit(
        baseline=float(baseline),
        delta=delta,
        tau_s=tau,
        direction=direction,
        r2=1.0 - ss_res / ss_tot,
        phase=phase,
        start_offset=start_offset,
        tau_at_cap=at_cap,
    )


def phase_sample_times(timing: ProtocolTiming, phase: Phase) -> np.ndarray:
    """Fit times for a phase: (i + 1) * tr_s from the phase boundary."""
    n = len(timing.frame_indices(phase))
    return (np.arange(n) + 1.0) * timing.tr_s


@dataclass
class KineticsResult:
    """Depletion, pH, and the four phase fits for one dataset.

    Fields that could not be computed are None, with the reason recorded
    in errors under the field's name; a failed fit never aborts the rest.
    """

    pcr_rest: float | None = None
    pcr_post: float | None = None
    depletion_pct: float | None = None
    ph_rest: float | None = None
    ph_post: float | None = None
    pcr_ex: MonoExpFit | None = None
    pi_ex: MonoExpFit | None = None
    pcr_rec: MonoExpFit | None = None
    pi_rec: MonoExpFit | None = None
    errors: dict[str, str] = field(default_factory=dict)


def _mean_ph(deltas_ppm: Sequence[float]) -> tuple[float | None, str | None]:
    values = []
    bad = 0
    for d in deltas_ppm:
        try:
            values.append(ph_from_shift(float(d)))
        except DomainError:
            bad += 1
    if not values:
        return None, f"no frame yielded an in-domain Pi-PCr shift ({bad} rejected)"
    note = f"{bad} frame(s) with out-of-domain shift excluded" if bad else None
    return float(np.mean(values)), note


def extract_kinetics(
    quants: Sequence["FrameQuant"],
    timing: ProtocolTiming,
    pcr_post_window: int = 3,
    ph_post_window: int = 3,
) -> KineticsResult:
    """Assemble pH means, depletion, and the four offset-0 phase fits.

    pcr_post is the mean concentration over the last pcr_post_window
    exercise frames; ph_post averages the first ph_post_window recovery
    frames.  Exercise fits pin the rest mean; recovery fits pin the
    end-exercise mean.
    """
    result = KineticsResult()
    pcr = np.array([q.concentrations["pcr"] for q in quants])
    pi = np.array([q.concentrations["pi"] for q in quants])
    deltas = [q.delta_pi_pcr_ppm for q in quants]

    rest = timing.frame_indices(Phase.REST)
    exercise = timing.frame_indices(Phase.EXERCISE)
    recovery = timing.frame_indices(Phase.RECOVERY)

    pcr_rest = float(pcr[rest].mean())
    pi_rest = float(pi[rest].mean())
    w = min(pcr_post_window, len(exercise))
    pcr_post = float(pcr[exercise][-w:].mean())
    pi_post = float(pi[exercise][-w:].mean())
    result.pcr_rest = pcr_rest
    result.pcr_post = pcr_post

    try:
        result.depletion_pct = pcr_depletion(pcr_rest, pcr_post)
    except DomainError as exc:
        result.errors["depletion_pct"] = str(exc)

    result.ph_rest, note = _mean_ph([deltas[i] for i in rest])
    if result.ph_rest is None:
        result.errors["ph_rest"] = note or "unavailable"
    wp = min(ph_post_window, len(recovery))
    result.ph_post, note = _mean_ph([deltas[i] for i in list(recovery)[:wp]])
    if result.ph_post is None:
        result.errors["ph_post"] = note or "unavailable"

    t_ex = phase_sample_times(timing, Phase.EXERCISE)
    t_rec = phase_sample_times(timing, Phase.RECOVERY)
    specs = {
        "pcr_ex": (pcr[exercise], t_ex, "down", pcr_rest, Phase.EXERCISE),
        "pi_ex": (pi[exercise], t_ex, "up", pi_rest, Phase.EXERCISE),
        "pcr_rec": (pcr[recovery], t_rec, "up", pcr_post, Phase.RECOVERY),
        "pi_rec": (pi[recovery], t_rec, "down", pi_post, Phase.RECOVERY),
    }
    for name, (vals, times, direction, base, phase) in specs.items():
        try:
            setattr(
                result,
                name,
                fit_monoexp(vals, times, direction, base, phase=phase),
            )
        except FitError as exc:
            result.errors[name] = str(exc)
    return result


def monoexp_to_dict(fit: MonoExpFit | None) -> dict | None:
    if fit is None:
        return None
    return {
        "baseline": fit.baseline,
        "delta": fit.delta,
        "tau_s": fit.tau_s,
        "direction": fit.direction,
        "r2": fit.r2,
        "phase": fit.phase.value,
        "start_offset": fit.start_offset,
        "tau_at_cap": fit.tau_at_cap,
    }


def kinetics_to_dict(kin: KineticsResult) -> dict:
    return {
        "pcr_rest": kin.pcr_rest,
        "pcr_post": kin.pcr_post,
        "depletion_pct": kin.depletion_pct,
        "ph_rest": kin.ph_rest,
        "ph_post": kin.ph_post,
        "pcr_ex": monoexp_to_dict(kin.pcr_ex),
        "pi_ex": monoexp_to_dict(kin.pi_ex),
        "pcr_rec": monoexp_to_dict(kin.pcr_rec),
        "pi_rec": monoexp_to_dict(kin.pi_rec),
        "errors": dict(kin.errors),
    }
