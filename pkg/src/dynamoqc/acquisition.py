"""Containers for dynamic acquisitions, protocol timing, and the metabolite basis.

The on-disk format is the DMRS-JSON container: a single JSON object with
"header", "dataset_id" and "frames" keys.  Frames store the complex FID as
separate "re"/"im" arrays; floats round-trip exactly.  Unknown fields are
rejected so that silent schema drift cannot occur.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContainerError, ValidationError


class Phase(str, Enum):
    REST = "rest"
    EXERCISE = "exercise"
    RECOVERY = "recovery"


@dataclass(frozen=True)
class ProtocolTiming:
    """Three-phase protocol timeline.

    Frame k spans [k*tr_s, (k+1)*tr_s); timestamps are frame-start times.
    With the defaults the recovery phase begins at frame 40 (t = 160 s).
    """

    tr_s: float = 4.0
    n_rest: int = 10
    n_exercise: int = 30
    n_recovery: int = 90

    def __post_init__(self) -> None:
        if self.tr_s <= 0:
            raise ValidationError("tr_s must be > 0")
        for name in ("n_rest", "n_exercise", "n_recovery"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")

    @property
    def n_frames(self) -> int:
        return self.n_rest + self.n_exercise + self.n_recovery

    @property
    def exercise_start_s(self) -> float:
        return self.n_rest * self.tr_s

    @property
    def recovery_start_s(self) -> float:
        return (self.n_rest + self.n_exercise) * self.tr_s

    @property
    def recovery_start_index(self) -> int:
        return self.n_rest + self.n_exercise

    def frame_time_s(self, frame_index: int) -> float:
        return frame_index * self.tr_s

    def frame_indices(self, phase: Phase) -> range:
        if phase is Phase.REST:
            return range(0, self.n_rest)
        if phase is Phase.EXERCISE:
            return range(self.n_rest, self.n_rest + self.n_exercise)
        return range(self.n_rest + self.n_exercise, self.n_frames)


def phase_of_frame(timing: ProtocolTiming, frame_index: int) -> Phase:
    """Map a frame index onto its protocol phase.

    Raises IndexError for indices outside [0, total frames).
    """
    if not 0 <= frame_index < timing.n_frames:
        raise IndexError(
            f"frame index {frame_index} outside [0, {timing.n_frames})"
        )
    if frame_index < timing.n_rest:
        return Phase.REST
    if frame_index < timing.n_rest + timing.n_exercise:
        return Phase.EXERCISE
    return Phase.RECOVERY


@dataclass(frozen=True)
class AcquisitionHeader:
    """Spectrometer settings shared by every frame of a series."""

    larmor_hz: float = 49.886e6
    spectral_width_hz: float = 5000.0
    n_points: int = 512
    reference_ppm: float = 0.0
    timing: ProtocolTiming = field(default_factory=ProtocolTiming)

    def __post_init__(self) -> None:
        if self.spectral_width_hz <= 0:
            raise ValidationError("spectral_width_hz must be > 0")
        if self.n_points < 64:
            raise ValidationError("n_points must be >= 64")
        if self.larmor_hz <= 0:
            raise ValidationError("larmor_hz must be > 0")

    @property
    def hz_per_ppm(self) -> float:
        return self.larmor_hz / 1e6

    @property
    def dwell_s(self) -> float:
        return 1.0 / self.spectral_width_hz

    def time_axis_s(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dwell_s


@dataclass(frozen=True)
class FidFrame:
    """One complex FID plus its position in the protocol."""

    samples: np.ndarray
    frame_index: int
    time_s: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.complex128)
        )
        if self.samples.ndim != 1:
            raise ValidationError("FID samples must be a 1-D complex array")


@dataclass(frozen=True)
class BasisPeak:
    name: str
    ppm: float
    multiplicity: int  # 1 = singlet, 2 = doublet


DEFAULT_PEAKS: tuple[BasisPeak, ...] = (
    BasisPeak("pcr", 0.0, 1),
    BasisPeak("pi", 5.02, 1),
    BasisPeak("atp_gamma", -2.48, 2),
    BasisPeak("atp_alpha", -7.52, 2),
    BasisPeak("atp_beta", -16.26, 1),
)

ATP_PEAK_NAMES: tuple[str, ...] = ("atp_gamma", "atp_alpha", "atp_beta")


@dataclass(frozen=True)
class BasisModel:
    """Lorentzian metabolite basis and the fit constraint box.

    Doublets are split symmetrically by doublet_split_hz with the amplitude
    shared 50/50 between the two lines; the splitting is a configured
    constant, not a fitted parameter.
    """

    peaks: tuple[BasisPeak, ...] = DEFAULT_PEAKS
    base_linewidth_hz: float = 47.0
    damping_bound_hz: float = 40.0
    shift_bound_hz: float = 30.0
    doublet_split_hz: float = 16.0

    def __post_init__(self) -> None:
        if self.base_linewidth_hz <= 0:
            raise ValidationError("base_linewidth_hz must be > 0")
        if self.damping_bound_hz >= self.base_linewidth_hz:
            raise ValidationError(
                "damping_bound_hz must stay below base_linewidth_hz "
                "(total linewidth must remain positive)"
            )
        if self.shift_bound_hz <= 0 or self.damping_bound_hz <= 0:
            raise ValidationError("constraint bounds must be > 0")
        names = [p.name for p in self.peaks]
        if len(set(names)) != len(names):
            raise ValidationError("basis peak names must be unique")

    @property
    def peak_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.peaks)

    def peak(self, name: str) -> BasisPeak:
        for p in self.peaks:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True)
class DynamicSeries:
    """An ordered dynamic acquisition: header plus one FID per frame."""

    header: AcquisitionHeader
    frames: tuple[FidFrame, ...]
    dataset_id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))
        self.validate()

    def validate(self) -> None:
        timing = self.header.timing
        if len(self.frames) != timing.n_frames:
            raise ValidationError(
                f"frame count {len(self.frames)} does not match timing total "
                f"{timing.n_frames} (n_rest + n_exercise + n_recovery)"
            )
        for k, frame in enumerate(self.frames):
            if frame.frame_index != k:
                raise ValidationError(
                    f"frame indices must be contiguous from 0; "
                    f"position {k} holds index {frame.frame_index}"
                )
            if frame.samples.shape[0] != self.header.n_points:
                raise ValidationError(
                    f"frame {k} has {frame.samples.shape[0]} samples, "
                    f"header declares n_points={self.header.n_points}"
                )
            if frame.time_s != timing.frame_time_s(k):
                raise ValidationError(
                    f"frame {k} time_s {frame.time_s} != frame_index * tr_s"
                )
            if not np.all(np.isfinite(frame.samples.view(np.float64))):
                raise ValidationError(f"frame {k} contains non-finite samples")

    def sample_matrix(self) -> np.ndarray:
        """All FIDs as an (n_frames, n_points) complex matrix."""
        return np.stack([f.samples for f in self.frames])


# --- DMRS-JSON container -------------------------------------------------

_TOP_KEYS = {"header", "dataset_id", "frames"}
_HEADER_KEYS = {"larmor_hz", "spectral_width_hz", "n_points", "reference_ppm", "timing"}
_TIMING_KEYS = {"tr_s", "n_rest", "n_exercise", "n_recovery"}
_FRAME_KEYS = {"i", "re", "im"}


def _check_keys(obj: dict, expected: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ContainerError(f"{where}: expected a JSON object")
    unknown = set(obj) - expected
    if unknown:
        raise ContainerError(f"{where}: unknown fields {sorted(unknown)}")
    missing = expected - set(obj)
    if missing:
        raise ContainerError(f"{where}: missing fields {sorted(missing)}")


def load_series(path: str | Path) -> DynamicSeries:
    """Load and fully validate a DMRS-JSON container.

    Parse problems raise ContainerError with field context; invariant
    violations raise ValidationError naming the invariant.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ContainerError(f"{path}: cannot read file: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ContainerError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc

    _check_keys(doc, _TOP_KEYS, f"{path}")
    _check_keys(doc["header"], _HEADER_KEYS, f"{path}: header")
    _check_keys(doc["header"]["timing"], _TIMING_KEYS, f"{path}: header.timing")
    if not isinstance(doc["dataset_id"], str):
        raise ContainerError(f"{path}: dataset_id must be a string")
    if not isinstance(doc["frames"], list):
        raise ContainerError(f"{path}: frames must be an array")

    h = doc["header"]
    t = h["timing"]
    timing = ProtocolTiming(
        tr_s=float(t["tr_s"]),
        n_rest=int(t["n_rest"]),
        n_exercise=int(t["n_exercise"]),
        n_recovery=int(t["n_recovery"]),
    )
    header = AcquisitionHeader(
        larmor_hz=float(h["larmor_hz"]),
        spectral_width_hz=float(h["spectral_width_hz"]),
        n_points=int(h["n_points"]),
        reference_ppm=float(h["reference_ppm"]),
        timing=timing,
    )

    frames = []
    for pos, fr in enumerate(doc["frames"]):
        _check_keys(fr, _FRAME_KEYS, f"{path}: frames[{pos}]")
        re = np.asarray(fr["re"], dtype=np.float64)
        im = np.asarray(fr["im"], dtype=np.float64)
        if re.shape != im.shape or re.ndim != 1:
            raise ContainerError(
                f"{path}: frames[{pos}]: re/im must be 1-D arrays of equal length"
            )
        index = int(fr["i"])
        frames.append(
            FidFrame(
                samples=re + 1j * im,
                frame_index=index,
                time_s=timing.frame_time_s(index),
            )
        )
    return DynamicSeries(header=header, frames=tuple(frames), dataset_id=doc["dataset_id"])


def series_to_dict(series: DynamicSeries) -> dict:
    h = series.header
    return {
        "header": {
            "larmor_hz": float(h.larmor_hz),
            "spectral_width_hz": float(h.spectral_width_hz),
            "n_points": int(h.n_points),
            "reference_ppm": float(h.reference_ppm),
            "timing": {
                "tr_s": float(h.timing.tr_s),
                "n_rest": int(h.timing.n_rest),
                "n_exercise": int(h.timing.n_exercise),
                "n_recovery": int(h.timing.n_recovery),
            },
        },
        "dataset_id": series.dataset_id,
        "frames": [
            {
                "i": f.frame_index,
                "re": f.samples.real.tolist(),
                "im": f.samples.imag.tolist(),
            }
            for f in series.frames
        ],
    }


def save_series(series: DynamicSeries, path: str | Path) -> None:
    """Write a validated series as a DMRS-JSON container.

    load_series(save_series(s)) reproduces every sample bit-exactly.
    """
    series.validate()
    path = Path(path)
    try:
        with path.open("w") as fh:
            json.dump(series_to_dict(series), fh)
    except OSError as exc:
        raise OSError(f"cannot write series to {path}: {exc}") from exc


def sequence_as_frames(
    fids: Sequence[np.ndarray], timing: ProtocolTiming
) -> tuple[FidFrame, ...]:
    """Wrap raw FID arrays into indexed, timestamped frames."""
    return tuple(
        FidFrame(samples=fid, frame_index=k, time_s=timing.frame_time_s(k))
        for k, fid in enumerate(fids)
    )
