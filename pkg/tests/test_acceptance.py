"""Acceptance suite: one test per criterion, one printed line per criterion.

Criteria 3 and 5 are Monte Carlo over full pipeline runs and dominate the
runtime (several minutes on one core); run with `pytest -s
tests/test_acceptance.py` to see the per-criterion lines as they pass.
Criterion 9 (the review-console contract) lives in frontend/tests and runs
against a live service.
"""

from __future__ import annotations

import json
import shutil
import time

import numpy as np
import pytest

from dynamoqc import (
    AcquisitionHeader,
    CorruptionEvent,
    CorruptionKind,
    GroundTruth,
    ProtocolTiming,
    Verdict,
    WeightTable,
    compute_qcs,
    derivative_outliers,
    extract_kinetics,
    fit_frame,
    ph_from_shift,
    quantify_series,
    reselect_recovery_start,
    shift_from_ph,
    synthesize,
    synthesize_to_file,
)
from dynamoqc.config import PipelineConfig
from dynamoqc.pipeline import (
    DecisionChoice,
    ReviewDecision,
    fold_decisions,
    load_decision_log,
    read_report,
    record_decision,
    run_cohort,
    run_dataset,
)
from dynamoqc.qcs import Criterion, CriterionViolation
from dynamoqc.quantifier import preprocess_frame


def _announce(number: int, name: str) -> None:
    print(f"\n[acceptance] criterion {number} ({name}): PASS")


def _concentration_series(series, basis):
    quants = quantify_series(series, basis)
    pcr = np.array([q.concentrations["pcr"] for q in quants])
    pi = np.array([q.concentrations["pi"] for q in quants])
    return quants, pcr, pi


def _depletion_frac_for(target_pct: float, tau_ex_s: float, timing: ProtocolTiming) -> float:
    """Solve for the asymptotic depletion fraction that makes the pipeline's
    end-exercise window (mean of the last 3 exercise frames) hit target_pct."""
    t = (np.arange(timing.n_exercise) + 1.0) * timing.tr_s
    window = 1.0 - np.exp(-t[-3:] / tau_ex_s)
    return target_pct / 100.0 / float(window.mean())


class TestCriterion1QuantifierOracle:
    def test_twenty_noiseless_frames(self, basis, header):
        cases = [(6.8, 0.0), (6.9, 0.2), (7.0, 0.4), (7.1, 0.5)]
        frames = []
        for ph, dep in cases:
            gt = GroundTruth(ph=ph, depletion_frac=dep)
            series, sidecar = synthesize(gt, basis, header, dataset_id=f"ph{ph}")
            for idx in (0, 15, 39, 40, 100):
                frames.append((series.frames[idx].samples, sidecar.frames[idx]))
        assert len(frames) == 20

        start = time.monotonic()
        for samples, truth in frames:
            fid, phi = preprocess_frame(samples, header, 5.0)
            quant = fit_frame(fid, basis, header, zero_order_phase_rad=phi)
            for name in basis.peak_names:
                expected = truth["amp"][name]
                got = quant.peaks[name].amplitude
                if expected > 0:
                    assert abs(got / expected - 1.0) < 1e-3, (name, truth["i"])
                assert abs(
                    quant.peaks[name].freq_shift_hz - truth["shift_hz"][name]
                ) < 0.1, (name, truth["i"])
        elapsed = time.monotonic() - start
        assert elapsed < 5.0, f"20-frame oracle took {elapsed:.2f}s"
        _announce(1, f"quantifier oracle, {elapsed:.2f}s for 20 frames")


class TestCriterion2PhRoundTrip:
    def test_round_trip_and_midpoint(self):
        for ph in np.linspace(6.8, 7.2, 81):
            assert ph_from_shift(shift_from_ph(float(ph))) == pytest.approx(
                float(ph), abs=1e-9
            )
        assert ph_from_shift(4.48) == 6.75
        _announce(2, "pH round-trip within 1e-9; 4.48 ppm -> 6.75")


class TestCriterion3KineticsOracle:
    def test_noiseless_tau_within_one_percent(self, basis, header):
        gt = GroundTruth(depletion_frac=0.4, tau_rec_s=33.0)
        series, _ = synthesize(gt, basis, header, dataset_id="kin")
        quants, _, _ = (lambda q: (q, None, None))(quantify_series(series, basis))
        kin = extract_kinetics(quants, header.timing)
        assert kin.pcr_rec.tau_s == pytest.approx(33.0, rel=0.01)
        assert kin.pi_rec.tau_s == pytest.approx(33.0, rel=0.01)

    def test_snr20_median_tau_error(self, basis):
        header = AcquisitionHeader(n_points=256)
        gt = GroundTruth(depletion_frac=0.4, tau_rec_s=33.0, snr_target=20.0)
        errors = []
        for seed in range(50):
            series, _ = synthesize(gt, basis, header, rng_seed=seed)
            quants = quantify_series(series, basis)
            kin = extract_kinetics(quants, header.timing)
            assert kin.pcr_rec is not None
            errors.append(abs(kin.pcr_rec.tau_s / 33.0 - 1.0))
        median = float(np.median(errors))
        assert median < 0.10, f"median tau error {median:.3f}"
        _announce(3, f"kinetics oracle, SNR-20 median tau error {median:.1%}")


class TestCriterion4Reselection:
    def test_corrupt_first_recovery_point(self, basis, header):
        gt = GroundTruth(depletion_frac=0.4, tau_rec_s=20.0)
        dropout = CorruptionEvent(
            CorruptionKind.DROPOUT, header.timing.recovery_start_index,
            header.timing.recovery_start_index, 0.5,
        )
        series, _ = synthesize(gt, basis, header, [dropout], dataset_id="resel")
        _, pcr, pi = _concentration_series(series, basis)
        resel = reselect_recovery_start(pcr, pi, header.timing)

        offset0 = resel.fits["pcr"][0]
        assert abs(offset0.tau_s / 20.0 - 1.0) > 0.10
        assert resel.recommended_offset >= 1
        chosen = resel.fits["pcr"][resel.recommended_offset]
        assert abs(chosen.tau_s / 20.0 - 1.0) < 0.05
        _announce(
            4,
            f"reselection: offset-0 tau {offset0.tau_s:.1f}s biased, "
            f"offset-{resel.recommended_offset} tau {chosen.tau_s:.1f}s",
        )


class TestCriterion5OutlierDetection:
    N_SEEDS = 100

    def test_detection_and_false_positive_rates(self, basis):
        header = AcquisitionHeader(n_points=256)
        timing = header.timing
        dropout = CorruptionEvent(CorruptionKind.DROPOUT, 25, 25, 0.5)
        gt = GroundTruth(depletion_frac=0.4, snr_target=20.0)

        detected = 0
        fp_fractions = []
        for seed in range(self.N_SEEDS):
            corrupt, _ = synthesize(gt, basis, header, [dropout], rng_seed=seed)
            _, pcr, pi = _concentration_series(corrupt, basis)
            hits = derivative_outliers(pcr + pi)
            if any(k in (24, 25) for k, _ in hits):
                detected += 1

            clean, _ = synthesize(gt, basis, header, rng_seed=seed + 10_000)
            _, pcr, pi = _concentration_series(clean, basis)
            false_hits = derivative_outliers(pcr + pi)
            fp_fractions.append(len(false_hits) / (timing.n_frames - 1))

        assert detected >= 95, f"detected {detected}/{self.N_SEEDS}"
        worst_fp = max(fp_fractions)
        assert worst_fp <= 0.05, f"worst per-series FP fraction {worst_fp:.3f}"
        _announce(
            5,
            f"outliers: dropout flagged {detected}/{self.N_SEEDS}, "
            f"worst clean FP fraction {worst_fp:.1%}",
        )


class TestCriterion6TriageBoundaries:
    def test_score_boundaries_unit_level(self):
        w = WeightTable()
        at_zero = compute_qcs([], w)
        assert at_zero.score == 0.0 and at_zero.verdict is Verdict.AUTO_ACCEPT
        four_outliers = [
            CriterionViolation(Criterion.OUTLIER_DETECTED, w.outlier_per_event, "e")
        ] * 4
        at_minus_three = compute_qcs(four_outliers, w)
        assert at_minus_three.score == pytest.approx(-3.0)
        assert at_minus_three.verdict is Verdict.AUTO_REJECT

    @pytest.mark.parametrize(
        "target_pct,expected", [(19.9, Verdict.AUTO_REJECT), (20.1, Verdict.AUTO_ACCEPT)]
    )
    def test_depletion_boundary_end_to_end(
        self, basis, header, tmp_path, target_pct, expected
    ):
        frac = _depletion_frac_for(target_pct, 30.0, header.timing)
        gt = GroundTruth(depletion_frac=frac, tau_ex_s=30.0)
        name = f"dep{target_pct}".replace(".", "_")
        path, _ = synthesize_to_file(tmp_path / f"{name}.json", gt, header=header)
        report = run_dataset(path, PipelineConfig(), tmp_path / "out")
        measured = report["kinetics"]["depletion_pct"]
        assert measured == pytest.approx(target_pct, abs=0.05)
        assert report["qcs"]["verdict"] == expected.value
        if target_pct == 20.1:
            _announce(6, "triage boundaries at 19.9/20.1% depletion and -3/0 scores")


@pytest.fixture(scope="module")
def engineered_cohort(tmp_path_factory, basis, header):
    """33 clean, 55 mid-corruption, 12 severe synthetic datasets."""
    data = tmp_path_factory.mktemp("cohort100")
    timing = header.timing
    groups = {}
    n = 0

    def add(name, gt, corruptions=(), group="engineered"):
        nonlocal n
        synthesize_to_file(
            data / f"{name}.json", gt, header=header,
            corruptions=corruptions, rng_seed=n,
        )
        groups[name] = group
        n += 1

    for i in range(33):
        add(f"clean{i:03d}", GroundTruth(depletion_frac=0.4), group="clean")
    for i in range(28):
        # exercise kinetics too slow: single TauExGt100 violation (-0.75)
        add(
            f"slowex{i:03d}",
            GroundTruth(depletion_frac=0.5, tau_ex_s=140.0),
            group="mid",
        )
    for i in range(27):
        # first-recovery-frame dropout: outlier event (-0.75)
        add(
            f"dropout{i:03d}",
            GroundTruth(depletion_frac=0.4, tau_rec_s=20.0),
            corruptions=[
                CorruptionEvent(
                    CorruptionKind.DROPOUT,
                    timing.recovery_start_index,
                    timing.recovery_start_index,
                    0.5,
                )
            ],
            group="mid",
        )
    for i in range(12):
        # shallow depletion: hard -3 violation
        add(f"shallow{i:03d}", GroundTruth(depletion_frac=0.15), group="severe")

    (data / "groups.json").write_text(json.dumps(groups))
    out = tmp_path_factory.mktemp("cohort100-reports")
    summary = run_cohort(data, PipelineConfig(), out)
    return {"data": data, "out": out, "summary": summary}


class TestCriterion7EngineeredCohort:
    def test_exact_triage_split(self, engineered_cohort):
        summary = engineered_cohort["summary"]
        assert summary.failures == {}
        assert summary.total == 100
        assert summary.verdicts == {
            "AutoAccept": 33,
            "ManualInspect": 55,
            "AutoReject": 12,
        }
        assert summary.categories["AcceptAll"] == 33
        assert summary.categories["PendingReview"] == 55
        assert summary.categories["RejectAll"] == 12
        assert summary.by_group["clean"]["AcceptAll"] == 33
        assert summary.by_group["mid"]["PendingReview"] == 55
        assert summary.by_group["severe"]["RejectAll"] == 12
        _announce(7, "engineered cohort split 33/55/12 reproduced exactly")


class TestCriterion8InvarianceSuite:
    def test_concentration_scale_invariance_of_verdicts(self, basis, header):
        gt = GroundTruth(depletion_frac=0.4, tau_rec_s=20.0)
        dropout = CorruptionEvent(
            CorruptionKind.DROPOUT, header.timing.recovery_start_index,
            header.timing.recovery_start_index, 0.5,
        )
        config = PipelineConfig()
        outcomes = []
        for scale in (1.0, 12.5):
            series, _ = synthesize(gt, basis, header, [dropout], dataset_id="s")
            scaled = type(series)(
                header=series.header,
                frames=tuple(
                    type(f)(f.samples * scale, f.frame_index, f.time_s)
                    for f in series.frames
                ),
                dataset_id="s",
            )
            quants, pcr, pi = _concentration_series(scaled, basis)
            kin = extract_kinetics(quants, header.timing)
            outliers = {
                "pcr": derivative_outliers(pcr),
                "pi": derivative_outliers(pi),
                "pcr_plus_pi": derivative_outliers(pcr + pi),
            }
            resel = reselect_recovery_start(pcr, pi, header.timing)
            from dynamoqc import evaluate_criteria

            violations = evaluate_criteria(kin, outliers, resel, config.weights)
            outcomes.append(compute_qcs(violations, config.weights))
        base, scaled_outcome = outcomes
        assert scaled_outcome.score == pytest.approx(base.score)
        assert scaled_outcome.verdict is base.verdict
        assert [v.criterion for v in scaled_outcome.violations] == [
            v.criterion for v in base.violations
        ]

    def test_report_determinism(self, basis, header, tmp_path):
        gt = GroundTruth(depletion_frac=0.4)
        path, _ = synthesize_to_file(tmp_path / "det.json", gt, header=header)
        config = PipelineConfig()
        run_dataset(path, config, tmp_path / "a")
        run_dataset(path, config, tmp_path / "b")
        docs = []
        for sub in ("a", "b"):
            doc = json.loads((tmp_path / sub / "det.qcreport.json").read_text())
            doc.pop("generated_at")
            docs.append(json.dumps(doc, sort_keys=True))
        assert docs[0] == docs[1]

    def test_decision_log_fold(self, engineered_cohort, tmp_path):
        out = tmp_path / "reports"
        shutil.copytree(engineered_cohort["out"], out)
        (out / "decisions.jsonl").unlink(missing_ok=True)

        def decide(offset, choice):
            return ReviewDecision(
                dataset_id="dropout000",
                decided_by="op",
                decision=choice,
                recovery_start_offset=offset,
            )

        record_decision(out, decide(1, DecisionChoice.ACCEPT_RECOVERY_ONLY))
        first = (out / "decisions.jsonl").read_text()
        record_decision(out, decide(2, DecisionChoice.ACCEPT_ALL))
        second = (out / "decisions.jsonl").read_text()
        assert second.startswith(first)  # append-only
        log = load_decision_log(out)
        assert len(log) == 2
        state = fold_decisions(log)
        assert state["dropout000"].recovery_start_offset == 2
        report = read_report(out, "dropout000")
        assert report["review"]["category"] == "AcceptAll"
        _announce(8, "invariance suite: scale, determinism, append-only fold")
