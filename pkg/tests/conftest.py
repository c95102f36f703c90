"""Shared fixtures: default models and reusable synthetic datasets."""

from __future__ import annotations

from dataclasses import dataclass

import pytest

from dynamoqc import (
    AcquisitionHeader,
    BasisModel,
    GroundTruth,
    ProtocolTiming,
    shift_from_ph,
    synthesize,
)

PH7_DELTA_PPM = shift_from_ph(7.0)


@pytest.fixture(scope="session")
def header() -> AcquisitionHeader:
    return AcquisitionHeader()


@pytest.fixture(scope="session")
def basis() -> BasisModel:
    return BasisModel()


@pytest.fixture(scope="session")
def timing() -> ProtocolTiming:
    return ProtocolTiming()


@pytest.fixture(scope="session")
def clean_gt() -> GroundTruth:
    return GroundTruth(depletion_frac=0.4, tau_ex_s=30.0, tau_rec_s=33.0, ph=7.0)


@pytest.fixture(scope="session")
def clean_series(clean_gt, basis, header):
    """Noiseless default dataset plus its truth sidecar."""
    return synthesize(clean_gt, basis, header, rng_seed=11, dataset_id="clean")


@pytest.fixture(scope="session")
def seeded_store(tmp_path_factory):
    """A small engineered cohort run through the full pipeline once.

    Three datasets: one clean (AutoAccept), one with low depletion
    (AutoReject), one with a first-recovery-frame dropout (ManualInspect).
    """
    import json as _json

    from dynamoqc import CorruptionEvent, CorruptionKind, synthesize_to_file
    from dynamoqc.config import PipelineConfig
    from dynamoqc.pipeline import run_cohort

    data = tmp_path_factory.mktemp("cohort-data")
    out = tmp_path_factory.mktemp("cohort-reports")
    synthesize_to_file(data / "clean01.json", GroundTruth(), rng_seed=1)
    synthesize_to_file(
        data / "lowdep01.json", GroundTruth(depletion_frac=0.1), rng_seed=2
    )
    synthesize_to_file(
        data / "dropout01.json",
        GroundTruth(tau_rec_s=20.0),
        corruptions=[CorruptionEvent(CorruptionKind.DROPOUT, 40, 40, 0.5)],
        rng_seed=3,
    )
    (data / "groups.json").write_text(
        _json.dumps(
            {"clean01": "healthy", "lowdep01": "patient", "dropout01": "patient"}
        )
    )
    config = PipelineConfig()
    summary = run_cohort(data, config, out)
    return {"data": data, "out": out, "summary": summary, "config": config}


@dataclass
class FakeQuant:
    """Duck-typed stand-in for FrameQuant in kinetics/qcs unit tests."""

    concentrations: dict[str, float]
    delta_pi_pcr_ppm: float = PH7_DELTA_PPM

    @classmethod
    def series(cls, pcr, pi, delta_ppm=PH7_DELTA_PPM):
        return [
            cls(concentrations={"pcr": float(a), "pi": float(b), "atp": 8.2},
                delta_pi_pcr_ppm=delta_ppm)
            for a, b in zip(pcr, pi)
        ]


@pytest.fixture
def fake_quants():
    return FakeQuant
