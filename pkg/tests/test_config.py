"""Config file loading: defaults, TOML parsing, strict key checking."""

from pathlib import Path

import pytest

from healthvault.config import Config, Endpoint, config_from_mapping, load_config


def test_defaults_without_file():
    config = load_config(None)
    assert config.storage_kind == "proposed_vault"
    assert config.registry.port == 8601
    assert config.vault.port == 8602
    assert config.datahost.port == 8603
    assert config.tls_enabled is False
    config.validate()


def test_empty_mapping_is_valid():
    assert config_from_mapping({}) == Config()


def test_toml_file_roundtrip(tmp_path):
    path = tmp_path / "healthvault.toml"
    path.write_text(
        """
        [kdf]
        iterations = 5000

        [storage]
        kind = "remote_database"
        data_dir = "state"

        [vault]
        host = "10.0.0.5"
        port = 9000

        [tls]
        enabled = true
        cert = "pki/cert.pem"
        key = "pki/key.pem"
        """
    )
    config = load_config(path)
    assert config.kdf_iterations == 5000
    assert config.storage_kind == "remote_database"
    assert config.data_dir == Path("state")
    assert config.vault == Endpoint("10.0.0.5", 9000)
    assert config.registry.port == 8601
    assert config.tls_enabled and config.tls_cert == Path("pki/cert.pem")


def test_endpoint_url_scheme():
    ep = Endpoint("127.0.0.1", 8602)
    assert ep.url(tls=False) == "http://127.0.0.1:8602"
    assert ep.url(tls=True) == "https://127.0.0.1:8602"


@pytest.mark.parametrize(
    "mapping",
    [
        {"vualt": {}},
        {"vault": {"prot": 1}},
        {"kdf": {"rounds": 10}},
        {"storage": {"kind": "proposed_vault", "dir": "x"}},
        {"tls": {"on": True}},
    ],
)
def test_unknown_keys_rejected(mapping):
    with pytest.raises(ValueError, match="unknown config key"):
        config_from_mapping(mapping)


def test_bad_storage_kind_rejected():
    with pytest.raises(ValueError, match="storage.kind"):
        config_from_mapping({"storage": {"kind": "cloud"}})


def test_tls_requires_cert_and_key():
    with pytest.raises(ValueError, match="tls.enabled"):
        config_from_mapping({"tls": {"enabled": True}})


def test_nonpositive_iterations_rejected():
    with pytest.raises(ValueError, match="iterations"):
        config_from_mapping({"kdf": {"iterations": 0}})


def test_with_overrides_returns_new_config():
    base = Config()
    changed = base.with_overrides(storage_kind="local_database")
    assert changed.storage_kind == "local_database"
    assert base.storage_kind == "proposed_vault"
