"""The application front door: CRUD over HTTP, identity, recovery gating."""

import pytest

from healthvault.backends import BackendKind
from healthvault.errors import (
    DuplicatePatient,
    HealthVaultError,
    InvalidRecord,
    NotFound,
    RecoveryUnsupported,
)
from healthvault.healthapp import HealthAppClient
from healthvault.model import PatientRecord, generate_synthetic

pytestmark = pytest.mark.service


@pytest.fixture
def app(cluster):
    handle = cluster.start_app(BackendKind.PROPOSED_VAULT.value)
    client = HealthAppClient(handle.url, ca_file=cluster.cert_path)
    yield handle, client
    client.close()
    handle.process.stop()


RECORDS = generate_synthetic(6, seed=31)


class TestCrudOverHttp:
    def test_health_reports_identity_and_kind(self, app):
        handle, client = app
        payload = client.health()
        assert payload["instance_id"] == handle.instance_id
        assert payload["storage_kind"] == "proposed_vault"

    def test_create_read_update_delete(self, app):
        _, client = app
        rec = RECORDS[0]
        client.create(rec)
        assert client.read(rec.patient_id) == rec
        changed = PatientRecord(**{**rec.to_dict(), "address": "1 Birch Lane, Ashford"})
        client.update(rec.patient_id, changed)
        assert client.read(rec.patient_id) == changed
        client.delete(rec.patient_id)
        with pytest.raises(NotFound):
            client.read(rec.patient_id)

    def test_list_ids(self, app):
        _, client = app
        for rec in RECORDS[1:4]:
            client.create(rec)
        assert set(client.list_ids()) >= {r.patient_id for r in RECORDS[1:4]}

    def test_duplicate_create_is_409(self, app):
        _, client = app
        client.create(RECORDS[4])
        with pytest.raises(DuplicatePatient):
            client.create(RECORDS[4])

    def test_invalid_record_rejected_by_service(self, app):
        _, client = app
        # Construction does not validate; the service does, on arrival.
        bad = PatientRecord(**{**RECORDS[5].to_dict(), "address": "has?delimiter"})
        from healthvault.errors import DelimiterInField

        with pytest.raises((DelimiterInField, InvalidRecord)):
            client.create(bad)

    def test_read_missing_is_404(self, app):
        _, client = app
        with pytest.raises(NotFound):
            client.read("P12341234")


class TestRecovery:
    def test_non_vault_kind_refuses_recovery(self, cluster):
        handle = cluster.start_app(BackendKind.LOCAL_FILE_PLAIN.value)
        client = HealthAppClient(handle.url, ca_file=cluster.cert_path)
        try:
            with pytest.raises(RecoveryUnsupported):
                client.recover(handle.instance_id, cluster.admin_token)
        finally:
            client.close()
            handle.process.stop()

    def test_recover_adopts_identity_and_restores(self, cluster):
        first = cluster.start_app(BackendKind.PROPOSED_VAULT.value)
        client = HealthAppClient(first.url, ca_file=cluster.cert_path)
        records = generate_synthetic(8, seed=37)
        for rec in records:
            client.create(rec)
        client.close()
        first.process.stop()  # polite shutdown; state dir left behind is moot

        fresh = cluster.start_app(BackendKind.PROPOSED_VAULT.value)
        fresh_client = HealthAppClient(fresh.url, ca_file=cluster.cert_path)
        try:
            report = fresh_client.recover(first.instance_id, cluster.admin_token)
            assert report["instance_id"] == first.instance_id
            assert report["patients_restored"] == len(records)
            assert report["records_restored"] == 2 * len(records)
            assert report["incomplete_patients"] == []
            assert fresh_client.health()["instance_id"] == first.instance_id
            for rec in records:
                assert fresh_client.read(rec.patient_id) == rec
        finally:
            fresh_client.close()
            fresh.process.stop()

    def test_recover_with_bad_admin_token_fails(self, cluster):
        handle = cluster.start_app(BackendKind.PROPOSED_VAULT.value)
        client = HealthAppClient(handle.url, ca_file=cluster.cert_path)
        try:
            with pytest.raises(HealthVaultError) as excinfo:
                client.recover(handle.instance_id, "not-the-admin-token")
            assert excinfo.value.http_status in (401, 503)
        finally:
            client.close()
            handle.process.stop()
