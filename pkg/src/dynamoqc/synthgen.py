"""Synthetic dynamic series with known ground truth.

The forward model mirrors the quantifier's basis: each metabolite peak is a
Lorentzian-decay complex exponential sampled at the spectral width, the Pi
position encodes pH through the inverse shift calibration, and PCr + Pi is
conserved by construction.  A sidecar JSON records the per-frame truth so
tests can score any downstream stage against it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .acquisition import (
    AcquisitionHeader,
    BasisModel,
    DynamicSeries,
    Phase,
    ProtocolTiming,
    phase_of_frame,
    save_series,
    sequence_as_frames,
)
from .errors import ValidationError
from .kinetics import shift_from_ph

SIGNAL_GAIN = 1.0  # ADC units per mmol/L; amplitudes equal concentrations


@dataclass(frozen=True)
class GroundTruth:
    """Metabolite kinetics a synthetic dataset is built from.

    snr_target is the linear PCr-peak SNR of clean rest frames (spectral
    peak height over spectral noise standard deviation); None disables
    noise entirely.
    """

    pcr_rest: float = 33.0
    pi_rest: float = 4.0
    depletion_frac: float = 0.4
    tau_ex_s: float = 30.0
    tau_rec_s: float = 33.0
    ph: float = 7.0
    atp: float = 8.2
    snr_target: float | None = None

    def __post_init__(self) -> None:
        if self.pcr_rest <= 0 or self.pi_rest <= 0 or self.atp <= 0:
            raise ValidationError("concentrations must be > 0")
        if not 0.0 <= self.depletion_frac < 1.0:
            raise ValidationError("depletion_frac must lie in [0, 1)")
        if self.tau_ex_s <= 0 or self.tau_rec_s <= 0:
            raise ValidationError("time constants must be > 0")
        if self.snr_target is not None and self.snr_target <= 0:
            raise ValidationError("snr_target must be > 0 or None")


class CorruptionKind(str, Enum):
    DROPOUT = "dropout"
    DRIFT = "drift"
    MISTIMED_CONTRACTION = "mistimed_contraction"


@dataclass(frozen=True)
class CorruptionEvent:
    """A localized acquisition artefact injected into the clean signal.

    magnitude semantics by kind: dropout scales the signal of every frame
    in [start, end] by magnitude (in [0, 1)); drift adds a frequency ramp
    of magnitude Hz per frame, reaching magnitude * (k - start + 1) Hz at
    frame k; mistimed_contraction scales a single frame by magnitude.
    """

    kind: CorruptionKind
    start: int
    end: int
    magnitude: float

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise ValidationError("corruption frame range must satisfy 0 <= start <= end")
        if self.kind in (CorruptionKind.DROPOUT, CorruptionKind.MISTIMED_CONTRACTION):
            if not 0.0 <= self.magnitude < 1.0:
                raise ValidationError(f"{self.kind.value} magnitude must lie in [0, 1)")
        if self.kind is CorruptionKind.MISTIMED_CONTRACTION and self.start != self.end:
            raise ValidationError("mistimed_contraction applies to a single frame")
        if self.kind is CorruptionKind.DRIFT and self.magnitude == 0.0:
            raise ValidationError("drift magnitude must be non-zero")


@dataclass(frozen=True)
class TruthTimecourse:
    """Per-frame metabolite state; arrays indexed by frame."""

    pcr: np.ndarray
    pi: np.ndarray
    atp: np.ndarray
    ph: np.ndarray


def truth_timecourse(gt: GroundTruth, timing: ProtocolTiming) -> TruthTimecourse:
    """Evaluate the three-phase kinetics at every frame's sample time.

    The i-th frame of a phase samples the curve at (i + 1) * tr_s from the
    phase boundary, so the last exercise frame carries the full-duration
    exercise value and the recovery curve is continuous at the boundary.
    Pi mirrors PCr so that PCr + Pi is constant to machine precision.
    """
    n = timing.n_frames
    pcr = np.empty(n)
    total = gt.pcr_rest + gt.pi_rest
    asym_drop = gt.pcr_rest * gt.depletion_frac
    pcr_end_ex = gt.pcr_rest - asym_drop * (
        1.0 - np.exp(-(timing.n_exercise * timing.tr_s) / gt.tau_ex_s)
    )
    for k in range(n):
        phase = phase_of_frame(timing, k)
        if phase is Phase.REST:
            pcr[k] = gt.pcr_rest
        elif phase is Phase.EXERCISE:
            t = (k - timing.n_rest + 1) * timing.tr_s
            pcr[k] = gt.pcr_rest - asym_drop * (1.0 - np.exp(-t / gt.tau_ex_s))
        else:
            t = (k - timing.recovery_start_index + 1) * timing.tr_s
            pcr[k] = pcr_end_ex + (gt.pcr_rest - pcr_end_ex) * (
                1.0 - np.exp(-t / gt.tau_rec_s)
            )
    return TruthTimecourse(
        pcr=pcr,
        pi=total - pcr,
        atp=np.full(n, gt.atp),
        ph=np.full(n, gt.ph),
    )


def peak_lines(
    basis: BasisModel, header: AcquisitionHeader
) -> list[list[tuple[float, float]]]:
    """Per peak: list of (frequency_hz, amplitude_fraction) line positions."""
    hpp = header.hz_per_ppm
    out = []
    for p in basis.peaks:
        f0 = (p.ppm - header.reference_ppm) * hpp
        if p.multiplicity == 1:
            out.append([(f0, 1.0)])
        else:
            half = basis.doublet_split_hz / 2.0
            out.append([(f0 - half, 0.5), (f0 + half, 0.5)])
    return out


def _frame_fid(
    t: np.ndarray,
    lines: list[list[tuple[float, float]]],
    amplitudes: Sequence[float],
    shifts_hz: Sequence[float],
    linewidth_hz: float,
) -> np.ndarray:
    fid = np.zeros(t.shape, dtype=np.complex128)
    for amp, shift, peak in zip(amplitudes, shifts_hz, lines):
        if amp == 0.0:
            continue
        for f, w in peak:
            fid += amp * w * np.exp(
                (2j * np.pi * (f + shift) - np.pi * linewidth_hz) * t
            )
    return fid


def _clean_rest_peak_height(
    header: AcquisitionHeader, basis: BasisModel, gt: GroundTruth
) -> float:
    """Spectral PCr peak height of a clean rest frame (raw spectrum)."""
    t = header.time_axis_s()
    lines = peak_lines(basis, header)
    amps, shifts = _frame_amplitudes(gt.pcr_rest, gt.pi_rest, gt.atp, gt.ph, basis, header)
    fid = _frame_fid(t, lines, amps, shifts, basis.base_linewidth_hz)
    spec = np.fft.fftshift(np.fft.fft(fid))
    freqs = np.fft.fftshift(np.fft.fftfreq(header.n_points, header.dwell_s))
    window = np.abs(freqs / header.hz_per_ppm) <= 1.0
    return float(spec.real[window].max())


def _frame_amplitudes(
    pcr: float,
    pi: float,
    atp: float,
    ph: float,
    basis: BasisModel,
    header: AcquisitionHeader,
) -> tuple[list[float], list[float]]:
    """Amplitude and frequency offset per basis peak for one frame.

    Only Pi moves with pH: its line sits at the shift that Eq.-2-style
    calibration maps back to ph, expressed as an offset from the basis
    position.
    """
    amps = []
    shifts = []
    pi_ppm = shift_from_ph(ph)
    for p in basis.peaks:
        if p.name == "pcr":
            amps.append(pcr * SIGNAL_GAIN)
            shifts.append(0.0)
        elif p.name == "pi":
            amps.append(pi * SIGNAL_GAIN)
            shifts.append((pi_ppm - p.ppm) * header.hz_per_ppm)
        else:
            amps.append(atp * SIGNAL_GAIN)
            shifts.append(0.0)
    return amps, shifts


@dataclass
class TruthSidecar:
    """Everything a test oracle needs about a generated dataset."""

    dataset_id: str
    seed: int
    noise_sigma: float
    ground_truth: GroundTruth
    corruptions: tuple[CorruptionEvent, ...]
    frames: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        gt = self.ground_truth
        return {
            "dataset_id": self.dataset_id,
            "seed": self.seed,
            "noise_sigma": self.noise_sigma,
            "ground_truth": {
                "pcr_rest": gt.pcr_rest,
                "pi_rest": gt.pi_rest,
                "depletion_frac": gt.depletion_frac,
                "tau_ex_s": gt.tau_ex_s,
                "tau_rec_s": gt.tau_rec_s,
                "ph": gt.ph,
                "atp": gt.atp,
                "snr_target": gt.snr_target,
            },
            "corruptions": [
                {
                    "kind": c.kind.value,
                    "start": c.start,
                    "end": c.end,
                    "magnitude": c.magnitude,
                }
                for c in self.corruptions
            ],
            "frames": self.frames,
        }

    def write(self, dataset_path: str | Path) -> Path:
        """Write next to the dataset file as <dataset>.truth.json."""
        path = Path(str(dataset_path) + ".truth.json")
        path.write_text(json.dumps(self.to_dict(), indent=1))
        return path


def synthesize(
    gt: GroundTruth,
    basis: BasisModel,
    header: AcquisitionHeader,
    corruptions: Sequence[CorruptionEvent] = (),
    rng_seed: int = 0,
    dataset_id: str = "",
) -> tuple[DynamicSeries, TruthSidecar]:
    """Generate a dynamic series plus its truth sidecar.

    Corruptions are applied to the clean signal before noise; the same seed
    always yields a bit-identical series.
    """
    timing = header.timing
    for c in corruptions:
        if c.end >= timing.n_frames:
            raise ValidationError(
                f"corruption range {c.start}..{c.end} exceeds series bounds "
                f"(total frames {timing.n_frames})"
            )

    truth = truth_timecourse(gt, timing)
    t = header.time_axis_s()
    lines = peak_lines(basis, header)
    rng = np.random.default_rng(rng_seed)

    noise_sigma = 0.0
    if gt.snr_target is not None:
        height = _clean_rest_peak_height(header, basis, gt)
        noise_sigma = height / (gt.snr_target * np.sqrt(header.n_points))

    scale = np.ones(timing.n_frames)
    drift_hz = np.zeros(timing.n_frames)
    for c in corruptions:
        idx = np.arange(c.start, c.end + 1)
        if c.kind is CorruptionKind.DRIFT:
            drift_hz[idx] += c.magnitude * (idx - c.start + 1)
        else:
            scale[idx] *= c.magnitude

    fids = []
    frames_truth = []
    peak_names = basis.peak_names
    for k in range(timing.n_frames):
        amps, shifts = _frame_amplitudes(
            truth.pcr[k], truth.pi[k], truth.atp[k], truth.ph[k], basis, header
        )
        amps = [a * scale[k] for a in amps]
        shifts = [s + drift_hz[k] for s in shifts]
        fid = _frame_fid(t, lines, amps, shifts, basis.base_linewidth_hz)
        if noise_sigma > 0.0:
            noise = rng.normal(0.0, noise_sigma, size=(header.n_points, 2))
            fid = fid + noise[:, 0] + 1j * noise[:, 1]
        fids.append(fid)
        frames_truth.append(
            {
                "i": k,
                "phase": phase_of_frame(timing, k).value,
                "pcr": float(truth.pcr[k]),
                "pi": float(truth.pi[k]),
                "atp": float(truth.atp[k]),
                "ph": float(truth.ph[k]),
                "amp_scale": float(scale[k]),
                "amp": {name: float(a) for name, a in zip(peak_names, amps)},
                "shift_hz": {name: float(s) for name, s in zip(peak_names, shifts)},
            }
        )

    series = DynamicSeries(
        header=header,
        frames=sequence_as_frames(fids, timing),
        dataset_id=dataset_id,
    )
    sidecar = TruthSidecar(
        dataset_id=dataset_id,
        seed=rng_seed,
        noise_sigma=float(noise_sigma),
        ground_truth=gt,
        corruptions=tuple(corruptions),
        frames=frames_truth,
    )
    return series, sidecar


def synthesize_to_file(
    path: str | Path,
    gt: GroundTruth,
    basis: BasisModel | None = None,
    header: AcquisitionHeader | None = None,
    corruptions: Sequence[CorruptionEvent] = (),
    rng_seed: int = 0,
    dataset_id: str | None = None,
) -> tuple[Path, Path]:
    """Generate, save the series, and write the truth sidecar."""
    path = Path(path)
    basis = basis or BasisModel()
    header = header or AcquisitionHeader()
    if dataset_id is None:
        dataset_id = path.stem
    series, sidecar = synthesize(
        gt, basis, header, corruptions, rng_seed=rng_seed, dataset_id=dataset_id
    )
    save_series(series, path)
    truth_path = sidecar.write(path)
    return path, truth_path
