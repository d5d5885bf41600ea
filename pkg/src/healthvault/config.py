"""Configuration shared by the services, the app, and the harness.

A single TOML file describes where the registry, vault, and data host
listen, which storage approach the app uses, how hard the KDF works, and
whether the wire is TLS or plaintext (the latter for local tests). Every
key has a default so an empty file, or no file, is a valid configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .kdf import DEFAULT_ITERATIONS

STORAGE_KINDS = (
    "local_file_plain",
    "local_file_encrypted",
    "remote_file_plain",
    "remote_file_encrypted",
    "local_database",
    "remote_database",
    "proposed_vault",
)


@dataclass(frozen=True)
class Endpoint:
    host: str
    port: int

    def url(self, tls: bool) -> str:
        scheme = "https" if tls else "http"
        return f"{scheme}://{self.host}:{self.port}"


@dataclass(frozen=True)
class Config:
    kdf_iterations: int = DEFAULT_ITERATIONS
    storage_kind: str = "proposed_vault"
    data_dir: Path = field(default_factory=lambda: Path("healthvault-data"))
    registry: Endpoint = field(default_factory=lambda: Endpoint("127.0.0.1", 8601))
    vault: Endpoint = field(default_factory=lambda: Endpoint("127.0.0.1", 8602))
    datahost: Endpoint = field(default_factory=lambda: Endpoint("127.0.0.1", 8603))
    tls_enabled: bool = False
    # When TLS is on, clients verify against tls_cert; services present
    # tls_cert/tls_key. Both must be set together.
    tls_cert: Path | None = None
    tls_key: Path | None = None

    def with_overrides(self, **changes) -> "Config":
        return replace(self, **changes)

    def validate(self) -> None:
        if self.storage_kind not in STORAGE_KINDS:
            raise ValueError(
                f"storage.kind must be one of {', '.join(STORAGE_KINDS)};"
                f" got {self.storage_kind!r}"
            )
        if self.kdf_iterations < 1:
            raise ValueError("kdf.iterations must be positive")
        if self.tls_enabled and (self.tls_cert is None or self.tls_key is None):
            raise ValueError("tls.enabled requires tls.cert and tls.key paths")


def _endpoint_from(section: dict, name: str, default: Endpoint) -> Endpoint:
    sub = section.get(name, {})
    _reject_unknown(sub, {"host", "port"}, name)
    return Endpoint(
        host=str(sub.get("host", default.host)),
        port=int(sub.get("port", default.port)),
    )


def _reject_unknown(mapping: dict, allowed: set, where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ValueError(f"unknown config key(s) in [{where}]: {', '.join(sorted(unknown))}")


def config_from_mapping(data: dict) -> Config:
    """Build a Config from parsed TOML; unknown keys are errors, not typos."""
    defaults = Config()
    _reject_unknown(
        data, {"kdf", "storage", "registry", "vault", "datahost", "tls"}, "top level"
    )
    kdf_section = data.get("kdf", {})
    _reject_unknown(kdf_section, {"iterations"}, "kdf")
    storage = data.get("storage", {})
    _reject_unknown(storage, {"kind", "data_dir"}, "storage")
    tls = data.get("tls", {})
    _reject_unknown(tls, {"enabled", "cert", "key"}, "tls")

    config = Config(
        kdf_iterations=int(kdf_section.get("iterations", defaults.kdf_iterations)),
        storage_kind=str(storage.get("kind", defaults.storage_kind)),
        data_dir=Path(storage.get("data_dir", defaults.data_dir)),
        registry=_endpoint_from(data, "registry", defaults.registry),
        vault=_endpoint_from(data, "vault", defaults.vault),
        datahost=_endpoint_from(data, "datahost", defaults.datahost),
        tls_enabled=bool(tls.get("enabled", defaults.tls_enabled)),
        tls_cert=Path(tls["cert"]) if "cert" in tls else None,
        tls_key=Path(tls["key"]) if "key" in tls else None,
    )
    config.validate()
    return config


def load_config(path: str | Path | None = None) -> Config:
    """Read a config file, or hand back pure defaults when path is None."""
    if path is None:
        return Config()
    with open(path, "rb") as fh:
        return config_from_mapping(tomllib.load(fh))
