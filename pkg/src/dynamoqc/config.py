"""Run configuration: basis overrides, weights, fit tolerances, windows.

The effective configuration is hashed (sha256 of its canonical JSON) into
the config fingerprint embedded in every report.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .acquisition import BasisModel, BasisPeak
from .errors import ConfigError, ValidationError
from .qcs import WeightTable
from .quantifier import FitOptions

_TOP_KEYS = {
    "apodization_lb_hz",
    "atp_reference_mmol",
    "pcr_post_window",
    "ph_post_window",
    "workers",
    "basis",
    "weights",
    "fit",
}
_BASIS_KEYS = {
    "peaks",
    "base_linewidth_hz",
    "damping_bound_hz",
    "shift_bound_hz",
    "doublet_split_hz",
}
_WEIGHT_KEYS = {
    "depletion",
    "r2_rec",
    "outlier_per_event",
    "tau_ex",
    "r2_ex",
    "cv_rec",
    "exclusion_threshold",
}
_FIT_KEYS = {
    "ftol",
    "max_iter",
    "multistart_shifts_hz",
    "early_stop_rel",
    "same_optimum_rel",
}


@dataclass(frozen=True)
class PipelineConfig:
    basis: BasisModel = field(default_factory=BasisModel)
    weights: WeightTable = field(default_factory=WeightTable)
    fit: FitOptions = field(default_factory=FitOptions)
    apodization_lb_hz: float = 5.0
    atp_reference_mmol: float = 8.2
    pcr_post_window: int = 3
    ph_post_window: int = 3
    workers: int = 1

    def to_dict(self) -> dict:
        return {
            "apodization_lb_hz": self.apodization_lb_hz,
            "atp_reference_mmol": self.atp_reference_mmol,
            "pcr_post_window": self.pcr_post_window,
            "ph_post_window": self.ph_post_window,
            "workers": self.workers,
            "basis": {
                "peaks": [
                    {"name": p.name, "ppm": p.ppm, "multiplicity": p.multiplicity}
                    for p in self.basis.peaks
                ],
                "base_linewidth_hz": self.basis.base_linewidth_hz,
                "damping_bound_hz": self.basis.damping_bound_hz,
                "shift_bound_hz": self.basis.shift_bound_hz,
                "doublet_split_hz": self.basis.doublet_split_hz,
            },
            "weights": {
                "depletion": self.weights.depletion,
                "r2_rec": self.weights.r2_rec,
                "outlier_per_event": self.weights.outlier_per_event,
                "tau_ex": self.weights.tau_ex,
                "r2_ex": self.weights.r2_ex,
                "cv_rec": self.weights.cv_rec,
                "exclusion_threshold": self.weights.exclusion_threshold,
            },
            "fit": {
                "ftol": self.fit.ftol,
                "max_iter": self.fit.max_iter,
                "multistart_shifts_hz": list(self.fit.multistart_shifts_hz),
                "early_stop_rel": self.fit.early_stop_rel,
                "same_optimum_rel": self.fit.same_optimum_rel,
            },
        }

    def fingerprint(self) -> str:
        """sha256 of the canonical analysis settings.

        The workers count is an execution knob with no effect on results,
        so it stays out of the hash: reports from serial and parallel runs
        of the same analysis are byte-identical.
        """
        doc = self.to_dict()
        doc.pop("workers")
        canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _require_keys(obj: dict, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown fields {sorted(unknown)}")


def config_from_dict(doc: dict) -> PipelineConfig:
    _require_keys(doc, _TOP_KEYS, "config")
    defaults = PipelineConfig()

    basis = defaults.basis
    if "basis" in doc:
        _require_keys(doc["basis"], _BASIS_KEYS, "config.basis")
        b = doc["basis"]
        peaks = basis.peaks
        if "peaks" in b:
            peaks = tuple(
                BasisPeak(p["name"], float(p["ppm"]), int(p["multiplicity"]))
                for p in b["peaks"]
            )
        try:
            basis = BasisModel(
                peaks=peaks,
                base_linewidth_hz=float(b.get("base_linewidth_hz", basis.base_linewidth_hz)),
                damping_bound_hz=float(b.get("damping_bound_hz", basis.damping_bound_hz)),
                shift_bound_hz=float(b.get("shift_bound_hz", basis.shift_bound_hz)),
                doublet_split_hz=float(b.get("doublet_split_hz", basis.doublet_split_hz)),
            )
        except ValidationError as exc:
            raise ConfigError(f"config.basis: {exc}") from exc

    weights = defaults.weights
    if "weights" in doc:
        _require_keys(doc["weights"], _WEIGHT_KEYS, "config.weights")
        merged = {**weights.__dict__, **doc["weights"]}
        try:
            weights = WeightTable(**{k: float(v) for k, v in merged.items()})
        except ValidationError as exc:
            raise ConfigError(f"config.weights: {exc}") from exc

    fit = defaults.fit
    if "fit" in doc:
        _require_keys(doc["fit"], _FIT_KEYS, "config.fit")
        f = doc["fit"]
        fit = FitOptions(
            ftol=float(f.get("ftol", fit.ftol)),
            max_iter=int(f.get("max_iter", fit.max_iter)),
            multistart_shifts_hz=tuple(
                float(s) for s in f.get("multistart_shifts_hz", fit.multistart_shifts_hz)
            ),
            early_stop_rel=float(f.get("early_stop_rel", fit.early_stop_rel)),
            same_optimum_rel=float(f.get("same_optimum_rel", fit.same_optimum_rel)),
        )

    return PipelineConfig(
        basis=basis,
        weights=weights,
        fit=fit,
        apodization_lb_hz=float(doc.get("apodization_lb_hz", defaults.apodization_lb_hz)),
        atp_reference_mmol=float(doc.get("atp_reference_mmol", defaults.atp_reference_mmol)),
        pcr_post_window=int(doc.get("pcr_post_window", defaults.pcr_post_window)),
        ph_post_window=int(doc.get("ph_post_window", defaults.ph_post_window)),
        workers=int(doc.get("workers", defaults.workers)),
    )


def load_config(path: str | Path | None) -> PipelineConfig:
    """Load a config file; None yields the defaults."""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return config_from_dict(doc)
