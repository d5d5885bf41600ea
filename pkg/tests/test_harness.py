"""Harness behaviour: severance drills, benchmark rows, report rendering.

The full seven-backend matrix at scale belongs to the acceptance suite;
here each moving part is exercised small: one drill per distinct verdict
path, severance and restore of the data tier, a TLS cluster, partial
benchmark rows, and the report renderer against synthetic inputs.
"""

from __future__ import annotations

import csv
import io
import json
import random

import pytest

from healthvault.backends import BackendKind
from healthvault.errors import (
    BackendUnavailable,
    DuplicatePatient,
    TargetNotRunning,
)
from healthvault.harness import (
    AttackScenario,
    AttackTarget,
    Cluster,
    CostRow,
    DrillResult,
    emit_report,
    merge_drills,
    run_benchmark,
    run_recovery_drill,
    verdict_mismatches,
)
from healthvault.harness.drill import (
    EXPECTED_RECOVERABILITY,
    RESILIENCE_VERDICTS,
    VERDICT_LOST_UNRECOVERED,
    VERDICT_PROPOSED_RECOVERED,
    VERDICT_SNAPSHOT_RECOVERABLE,
)
from healthvault.harness.report import (
    EVAL_COLUMNS,
    EVAL_ROW_ORDER,
    TABLE2_COLUMNS,
    TABLE2_FOOTNOTE,
    TABLE2_ROWS,
)
from healthvault.healthapp import HealthAppClient
from healthvault.model import generate_synthetic


def _cost_row(kind: BackendKind, **overrides) -> CostRow:
    """A synthetic but channel-consistent cost row for render tests."""
    values = dict(
        backend=kind.value,
        n_create=100,
        n_fetch=10,
        seed=7,
        workers=1,
        avg_encrypt_ms=1.2 if kind.is_encrypted else 0.0,
        avg_decrypt_ms=1.4 if kind.is_encrypted else 0.0,
        avg_network_us=118.0 if kind.is_remote else 0.0,
        encrypt_total_ms=120.0 if kind.is_encrypted else 0.0,
        decrypt_total_ms=14.0 if kind.is_encrypted else 0.0,
        network_total_ms=13.0 if kind.is_remote else 0.0,
        wall_elapsed_s=2.5,
        completed_creates=100,
        completed_fetches=10,
        partial=False,
    )
    values.update(overrides)
    return CostRow(**values)


def _drill_result(kind: BackendKind, verdict: str | None = None) -> DrillResult:
    expected = EXPECTED_RECOVERABILITY[kind]
    verdict = expected if verdict is None else verdict
    return DrillResult(
        backend=kind.value,
        n_patients=50,
        seed=7,
        recovered=kind is BackendKind.PROPOSED_VAULT,
        verdict=verdict,
        expected_verdict=expected,
        matches_expected=verdict == expected,
        recovery_elapsed_s=1.5,
        total_elapsed_s=9.0,
    )


# merge_drills annotates rows in place, so every test builds fresh ones
def all_rows() -> list[CostRow]:
    return [_cost_row(kind) for kind in BackendKind]


def all_drills() -> list[DrillResult]:
    return [_drill_result(kind) for kind in BackendKind]


class TestVerdictVocabulary:
    def test_every_backend_has_expected_verdicts(self):
        assert set(EXPECTED_RECOVERABILITY) == set(BackendKind)
        assert set(RESILIENCE_VERDICTS) == set(BackendKind)

    def test_resilience_labels_are_from_fixed_scale(self):
        assert set(RESILIENCE_VERDICTS.values()) == {
            "Low",
            "Moderate",
            "High",
            "Very High",
        }

    def test_proposed_verdict_carries_recovery_narrative(self):
        assert "less than 2 minutes" in VERDICT_PROPOSED_RECOVERED
        assert "back in business!" in VERDICT_PROPOSED_RECOVERED

    def test_only_proposed_counts_as_recovered_outcome(self):
        unrecovered = [
            kind
            for kind, verdict in EXPECTED_RECOVERABILITY.items()
            if verdict in (VERDICT_LOST_UNRECOVERED, VERDICT_SNAPSHOT_RECOVERABLE)
            or "could not be recovered" in verdict
        ]
        assert BackendKind.PROPOSED_VAULT not in unrecovered
        assert len(unrecovered) == 6


class TestReportRendering:
    def test_text_report_contains_both_tables(self):
        out = emit_report(all_rows(), "text", drills=all_drills())
        assert "EVALUATION AGAINST OTHER APPROACHES OVER COST CRITERIA" in out
        assert "PROPOSED EVALUATION CRITERIA BY FUNCTIONALITY" in out
        assert "back in business!" in out
        assert "Note: " + TABLE2_FOOTNOTE in out
        # every backend shows up under its display name
        for kind in BackendKind:
            assert kind.display_name in out

    def test_text_report_header_states_run_parameters(self):
        out = emit_report(all_rows(), "text")
        assert "100 creates / 10 fetches per approach (seed 7, 1 worker)" in out

    def test_undrilled_rows_are_marked(self):
        out = emit_report(all_rows(), "text")
        assert out.count("(not drilled)") == len(BackendKind)

    def test_partial_rows_are_flagged(self):
        rows = [_cost_row(BackendKind.REMOTE_FILE_PLAIN, partial=True)]
        out = emit_report(rows, "text")
        assert "[partial run]" in out

    def test_rows_come_out_in_canonical_order(self):
        shuffled = all_rows()
        random.Random(3).shuffle(shuffled)
        payload = json.loads(emit_report(shuffled, "json", drills=all_drills()))
        got = [row["backend"] for row in payload["measured"]]
        assert got == [kind.value for kind in EVAL_ROW_ORDER]

    def test_csv_has_measured_block_then_static_block(self):
        out = emit_report(all_rows(), "csv", drills=all_drills())
        parsed = list(csv.reader(io.StringIO(out)))
        split = parsed.index([])
        measured, static = parsed[:split], parsed[split + 1 :]
        assert measured[0] == list(EVAL_COLUMNS)
        assert len(measured) == 1 + len(BackendKind)
        assert static[0] == list(TABLE2_COLUMNS)
        assert [tuple(row) for row in static[1:]] == list(TABLE2_ROWS)

    def test_json_report_reparses_into_dataclasses(self):
        payload = json.loads(emit_report(all_rows(), "json", drills=all_drills()))
        rows = [CostRow.from_dict(entry) for entry in payload["measured"]]
        drills = [DrillResult.from_dict(entry) for entry in payload["drills"]]
        assert len(rows) == len(drills) == len(BackendKind)
        assert payload["static_matrix"]["footnote"] == TABLE2_FOOTNOTE
        assert payload["static_matrix"]["rows"] == [list(r) for r in TABLE2_ROWS]

    def test_static_matrix_rows_never_computed_from_measurements(self):
        # Same static block regardless of what was measured.
        a = json.loads(emit_report([_cost_row(BackendKind.LOCAL_FILE_PLAIN)], "json"))
        b = json.loads(emit_report(all_rows(), "json", drills=all_drills()))
        assert a["static_matrix"] == b["static_matrix"]

    def test_empty_rows_rejected(self):
        with pytest.raises(ValueError):
            emit_report([], "text")

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            emit_report(all_rows(), "yaml")

    def test_merge_drills_attaches_both_verdict_columns(self):
        rows = [_cost_row(kind) for kind in BackendKind]
        merged = merge_drills(rows, [_drill_result(BackendKind.PROPOSED_VAULT)])
        by_backend = {row.backend: row for row in merged}
        for kind in BackendKind:
            assert by_backend[kind.value].resilience_verdict == RESILIENCE_VERDICTS[kind]
        assert (
            by_backend["proposed_vault"].recoverability_verdict
            == VERDICT_PROPOSED_RECOVERED
        )
        assert by_backend["local_file_plain"].recoverability_verdict is None

    def test_verdict_mismatches_empty_when_all_match(self):
        assert verdict_mismatches(all_drills()) == []

    def test_verdict_mismatches_reports_divergence(self):
        bad = _drill_result(BackendKind.LOCAL_DATABASE, verdict="UNEXPECTED: oops")
        lines = verdict_mismatches([*all_drills(), bad])
        assert len(lines) == 1
        assert "local_database" in lines[0]
        assert "UNEXPECTED: oops" in lines[0]


@pytest.mark.service
class TestRecoveryDrills:
    def test_proposed_vault_drill_recovers(self, cluster):
        result = run_recovery_drill(cluster, BackendKind.PROPOSED_VAULT, 12, seed=31)
        assert result.recovered
        assert result.verdict == VERDICT_PROPOSED_RECOVERED
        assert result.matches_expected
        assert result.recovery_elapsed_s < 120
        assert result.details["seeded"] == 12
        assert result.details["app_host_severed"]
        assert result.details["post_recovery_reads"] == 12
        assert result.details["mismatched_records"] == 0
        # serialization survives a disk roundtrip
        assert DrillResult.from_dict(json.loads(json.dumps(result.to_dict()))) == result

    def test_local_plain_drill_cannot_recover(self, cluster):
        result = run_recovery_drill(cluster, "local_file_plain", 8, seed=32)
        assert not result.recovered
        assert result.verdict == VERDICT_LOST_UNRECOVERED
        assert result.matches_expected
        assert "recover_refused" in result.details
        assert result.details["post_attack_visible_patients"] == 0
        assert result.details["post_attack_readable_sample"] == 0

    def test_remote_database_drill_records_snapshot_verdict(self, cluster):
        result = run_recovery_drill(cluster, BackendKind.REMOTE_DATABASE, 8, seed=33)
        assert not result.recovered  # verdict recorded, no automated rebuild
        assert result.verdict == VERDICT_SNAPSHOT_RECOVERABLE
        assert result.matches_expected
        assert result.details["surviving_db_rows_sample"] == "8/8"


@pytest.mark.service
class TestSeverance:
    def test_datahost_severance_blocks_storage_until_restore(self, tmp_path):
        with Cluster(tmp_path / "run") as cluster:
            app = cluster.start_app("remote_file_plain")
            records = generate_synthetic(3, seed=41)
            client = HealthAppClient(app.url)
            try:
                for record in records:
                    client.create(record)

                handle = cluster.simulate_attack(
                    AttackScenario(AttackTarget.DATA_HOST)
                )
                # the remote storage tier is the whole severed set
                assert len(handle.severed) == 2
                # app host itself is alive, storage behind it is not
                assert client.health()["instance_id"] == app.instance_id
                extra = generate_synthetic(4, seed=41)[3]
                with pytest.raises(BackendUnavailable):
                    client.create(extra)

                cluster.restore(handle)
                got = client.read(records[0].patient_id)
                assert got == records[0]
                client.create(extra)
                assert len(client.list_ids()) == 4
            finally:
                client.close()

    def test_apphost_severance_destroys_state_dir(self, tmp_path):
        with Cluster(tmp_path / "run") as cluster:
            app = cluster.start_app("local_file_plain")
            client = HealthAppClient(app.url)
            try:
                client.create(generate_synthetic(1, seed=42)[0])
            finally:
                client.close()
            assert app.data_dir.exists()

            handle = cluster.simulate_attack(
                AttackScenario(AttackTarget.APP_HOST), app=app
            )
            assert not app.data_dir.exists()
            assert not app.process.running
            probe = HealthAppClient(app.url)
            try:
                with pytest.raises(BackendUnavailable):
                    probe.health()
            finally:
                probe.close()

            # destroyed hosts are rebuilt, never restored
            with pytest.raises(TargetNotRunning):
                cluster.restore(handle)

    def test_apphost_attack_needs_a_running_app(self, tmp_path):
        with Cluster(tmp_path / "run") as cluster:
            with pytest.raises(TargetNotRunning):
                cluster.simulate_attack(AttackScenario(AttackTarget.APP_HOST))

    def test_datahost_attack_requires_live_tier(self, tmp_path):
        with Cluster(tmp_path / "run") as cluster:
            cluster.simulate_attack(AttackScenario(AttackTarget.DATA_HOST))
            with pytest.raises(TargetNotRunning):
                cluster.simulate_attack(AttackScenario(AttackTarget.DATA_HOST))


@pytest.mark.service
class TestTlsCluster:
    def test_full_stack_over_tls(self, tmp_path):
        with Cluster(tmp_path / "run", tls=True) as cluster:
            assert cluster.vault_url.startswith("https://")
            app = cluster.start_app("proposed_vault")
            assert app.url.startswith("https://")
            client = HealthAppClient(app.url, ca_file=cluster.cert_path)
            try:
                record = generate_synthetic(1, seed=51)[0]
                client.create(record)
                assert client.read(record.patient_id) == record
                with pytest.raises(DuplicatePatient):
                    client.create(record)
            finally:
                client.close()


@pytest.mark.service
class TestBenchmarkRows:
    def test_local_plain_row_has_empty_cost_channels(self, cluster, tmp_path):
        row = run_benchmark(
            BackendKind.LOCAL_FILE_PLAIN,
            40,
            20,
            seed=61,
            cluster=cluster,
            work_dir=tmp_path / "bench",
        )
        assert not row.partial
        assert row.completed_creates == 40
        assert row.completed_fetches == 20
        assert row.avg_encrypt_ms == 0.0
        assert row.avg_decrypt_ms == 0.0
        assert row.avg_network_us == 0.0
        assert row.wall_elapsed_s > 0

    def test_proposed_row_exercises_all_three_channels(self, cluster, tmp_path):
        row = run_benchmark(
            "proposed_vault",
            12,
            8,
            seed=62,
            cluster=cluster,
            work_dir=tmp_path / "bench",
        )
        assert not row.partial
        assert row.completed_creates == 12
        assert row.completed_fetches == 8
        assert row.avg_encrypt_ms > 0
        assert row.avg_decrypt_ms > 0
        assert row.avg_network_us > 0

    def test_worker_pool_produces_complete_row(self, cluster, tmp_path):
        row = run_benchmark(
            BackendKind.REMOTE_FILE_ENCRYPTED,
            16,
            10,
            seed=63,
            cluster=cluster,
            work_dir=tmp_path / "bench",
            workers=4,
        )
        assert not row.partial
        assert row.completed_creates == 16
        assert row.completed_fetches == 10
        assert row.workers == 4
        assert row.avg_network_us > 0
        assert row.avg_encrypt_ms > 0

    def test_metered_time_bounded_by_wall_clock(self, cluster, tmp_path):
        # With one worker the three channels are disjoint slices of the run.
        row = run_benchmark(
            BackendKind.REMOTE_FILE_ENCRYPTED,
            30,
            15,
            seed=65,
            cluster=cluster,
            work_dir=tmp_path / "bench",
            workers=1,
        )
        metered_ms = row.encrypt_total_ms + row.decrypt_total_ms + row.network_total_ms
        assert metered_ms <= row.wall_elapsed_s * 1000

    def test_severed_data_tier_yields_partial_row(self, tmp_path):
        with Cluster(tmp_path / "run") as cluster:
            cluster.simulate_attack(AttackScenario(AttackTarget.DATA_HOST))
            row = run_benchmark(
                BackendKind.REMOTE_FILE_PLAIN,
                10,
                5,
                seed=64,
                cluster=cluster,
                work_dir=tmp_path / "bench",
            )
        assert row.partial
        assert row.completed_creates == 0
        assert row.completed_fetches == 0
