"""Data host: naive file and database row stores behind plain HTTP."""

import base64

import pytest
from fastapi.testclient import TestClient

from healthvault.datahost import DatabaseStore, FileStore, create_app
from healthvault.errors import InvalidRecord, NotFound


@pytest.fixture
def file_store(tmp_path):
    return FileStore(tmp_path / "files")


@pytest.fixture
def db_store(tmp_path):
    s = DatabaseStore(tmp_path / "rows.sqlite3")
    yield s
    s.close()


class TestFileStore:
    def test_put_get_roundtrip(self, file_store):
        file_store.put("pii", "P1", b"\x01\x02raw")
        assert file_store.get("pii", "P1") == b"\x01\x02raw"

    def test_kinds_are_separate_namespaces(self, file_store):
        file_store.put("pii", "P1", b"a")
        file_store.put("financial", "P1", b"b")
        assert file_store.get("pii", "P1") == b"a"
        assert file_store.get("financial", "P1") == b"b"

    def test_put_overwrites(self, file_store):
        file_store.put("pii", "P1", b"old")
        file_store.put("pii", "P1", b"new")
        assert file_store.get("pii", "P1") == b"new"

    def test_get_missing_raises(self, file_store):
        with pytest.raises(NotFound):
            file_store.get("pii", "P404")

    def test_delete(self, file_store):
        file_store.put("pii", "P1", b"a")
        file_store.delete("pii", "P1")
        with pytest.raises(NotFound):
            file_store.get("pii", "P1")
        with pytest.raises(NotFound):
            file_store.delete("pii", "P1")

    def test_list_names(self, file_store):
        for pid in ("P3", "P1", "P2"):
            file_store.put("pii", pid, b"x")
        assert sorted(file_store.list_names("pii")) == ["P1", "P2", "P3"]
        assert file_store.list_names("financial") == []

    def test_unknown_kind_rejected(self, file_store):
        with pytest.raises(InvalidRecord):
            file_store.put("secrets", "P1", b"x")

    @pytest.mark.parametrize("name", ["../escape", "a/b", "a\\b", "", ".", ".."])
    def test_hostile_names_rejected(self, file_store, name):
        with pytest.raises(InvalidRecord):
            file_store.put("pii", name, b"x")


class TestDatabaseStore:
    def test_put_get_roundtrip(self, db_store):
        db_store.put("pii", "P1", "1980-01-01?123-45-6789?addr")
        assert db_store.get("pii", "P1") == "1980-01-01?123-45-6789?addr"

    def test_put_is_upsert(self, db_store):
        db_store.put("financial", "P1", "old")
        db_store.put("financial", "P1", "new")
        assert db_store.get("financial", "P1") == "new"

    def test_get_missing_raises(self, db_store):
        with pytest.raises(NotFound):
            db_store.get("pii", "P404")

    def test_delete(self, db_store):
        db_store.put("pii", "P1", "row")
        db_store.delete("pii", "P1")
        with pytest.raises(NotFound):
            db_store.get("pii", "P1")

    def test_list_ids(self, db_store):
        for pid in ("P2", "P1"):
            db_store.put("pii", pid, "row")
        assert sorted(db_store.list_ids("pii")) == ["P1", "P2"]

    def test_rows_survive_reopen(self, tmp_path):
        path = tmp_path / "rows.sqlite3"
        s1 = DatabaseStore(path)
        s1.put("pii", "P1", "row-a")
        s1.close()
        s2 = DatabaseStore(path)
        try:
            assert s2.get("pii", "P1") == "row-a"
        finally:
            s2.close()


class TestWire:
    @pytest.fixture
    def client(self, tmp_path):
        app = create_app(
            FileStore(tmp_path / "files"), DatabaseStore(tmp_path / "rows.sqlite3")
        )
        with TestClient(app, raise_server_exceptions=False) as c:
            yield c

    def test_file_endpoints(self, client):
        content = base64.b64encode(b"some-bytes").decode()
        put = client.put("/files/pii/P1", json={"content": content})
        assert put.status_code == 200
        assert client.get("/files/pii/P1").json()["content"] == content
        assert client.get("/files/pii").json()["names"] == ["P1"]
        assert client.delete("/files/pii/P1").status_code == 204
        assert client.get("/files/pii/P1").status_code == 404

    def test_db_endpoints(self, client):
        put = client.put("/db/financial/P9", json={"row": "c?e?a"})
        assert put.status_code == 200
        assert client.get("/db/financial/P9").json()["row"] == "c?e?a"
        assert client.get("/db/financial").json()["names"] == ["P9"]
        assert client.delete("/db/financial/P9").status_code == 204
        assert client.get("/db/financial/P9").status_code == 404

    def test_unknown_kind_400(self, client):
        r = client.get("/files/passwords/P1")
        assert r.status_code == 400
        assert r.json()["error"] == "invalid_record"

    def test_traversal_blocked_at_wire(self, client):
        r = client.get("/files/pii/%2E%2E%2Fescape")
        assert r.status_code in (400, 404)
