"""Child-service orchestration and host severance.

A Cluster owns one run directory and the three long-lived services
(registry, vault, data host) as real subprocesses, plus any number of app
instances. Severance is a hard kill: the process gets SIGKILL, and for the
app host the state directory is deleted too, which is the ransomware
scenario this whole design answers. Restoration re-spawns a process on the
same port over the same surviving data directory.
"""

from __future__ import annotations

import enum
import os
import secrets
import shutil
import signal
import socket
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

from ..errors import TargetNotRunning
from ..httpkit import wait_until_ready
from ..kdf import DEFAULT_ITERATIONS
from ..registry import hash_admin_token
from ..tls import generate_self_signed

ADMIN_TOKEN_ENV = "HEALTHVAULT_ADMIN_TOKEN"


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class AttackTarget(enum.Enum):
    APP_HOST = "apphost"
    DATA_HOST = "datahost"


@dataclass(frozen=True)
class AttackScenario:
    """One severance event. The threat model attacks one host at a time, so
    a scenario has exactly one target. start_after is advisory sequencing
    (an op count or a delay in seconds) honored by the orchestrating run."""

    target: AttackTarget
    start_after: float | int | None = None


class ServiceProcess:
    """One child service with a health endpoint and a log file."""

    def __init__(
        self,
        name: str,
        argv: list[str],
        *,
        ready_url: str,
        log_path: Path,
        env_extra: dict[str, str] | None = None,
        ca_file: Path | None = None,
    ) -> None:
        self.name = name
        self.argv = argv
        self.ready_url = ready_url
        self.log_path = log_path
        self.env_extra = dict(env_extra or {})
        self.ca_file = ca_file
        self.proc: subprocess.Popen | None = None

    def start(self, ready_deadline_s: float = 30.0) -> None:
        if self.running:
            raise RuntimeError(f"{self.name} already running")
        env = dict(os.environ)
        env.update(self.env_extra)
        env["PYTHONUNBUFFERED"] = "1"
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        log = open(self.log_path, "ab")
        try:
            self.proc = subprocess.Popen(
                self.argv, stdout=log, stderr=subprocess.STDOUT, env=env
            )
        finally:
            log.close()
        try:
            wait_until_ready(
                self.ready_url, ca_file=self.ca_file, deadline_s=ready_deadline_s
            )
        except Exception:
            tail = b""
            if self.log_path.exists():
                tail = self.log_path.read_bytes()[-2000:]
            self.kill()
            raise RuntimeError(
                f"{self.name} failed to become ready; log tail:\n{tail.decode(errors='replace')}"
            )

    @property
    def running(self) -> bool:
        return self.proc is not None and self.proc.poll() is None

    def kill(self) -> None:
        """SIGKILL: the process gets no chance to flush or say goodbye."""
        if self.proc is None:
            return
        if self.proc.poll() is None:
            self.proc.send_signal(signal.SIGKILL)
        self.proc.wait()
        self.proc = None

    def stop(self, grace_s: float = 5.0) -> None:
        if self.proc is None:
            return
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=grace_s)
            except subprocess.TimeoutExpired:
                self.proc.send_signal(signal.SIGKILL)
                self.proc.wait()
        self.proc = None


@dataclass
class AppHandle:
    process: ServiceProcess
    url: str
    data_dir: Path
    storage_kind: str
    instance_id: str | None = None


@dataclass
class SeveranceHandle:
    scenario: AttackScenario
    severed: list[ServiceProcess]


class Cluster:
    """Registry + vault + data host for one run, plus app instances."""

    def __init__(
        self,
        run_dir: str | Path,
        *,
        tls: bool = False,
        kdf_iterations: int = DEFAULT_ITERATIONS,
    ) -> None:
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.tls = tls
        self.kdf_iterations = kdf_iterations
        self.admin_token = secrets.token_hex(16)

        self.cert_path: Path | None = None
        self.key_path: Path | None = None
        if tls:
            self.cert_path, self.key_path = generate_self_signed(self.run_dir / "tls")

        scheme = "https" if tls else "http"
        self._ports = {
            "registry": free_port(),
            "vault": free_port(),
            "datahost": free_port(),
        }
        self.registry_url = f"{scheme}://127.0.0.1:{self._ports['registry']}"
        self.vault_url = f"{scheme}://127.0.0.1:{self._ports['vault']}"
        self.datahost_url = f"{scheme}://127.0.0.1:{self._ports['datahost']}"

        self.registry = self._service(
            "registry",
            [
                "--port",
                str(self._ports["registry"]),
                "--data-dir",
                str(self.run_dir / "registry"),
                "--admin-token-hash",
                hash_admin_token(self.admin_token),
            ],
        )
        self.vault = self._service(
            "vault",
            [
                "--port",
                str(self._ports["vault"]),
                "--data-dir",
                str(self.run_dir / "vault"),
                "--registry-url",
                self.registry_url,
                *self._client_ca_args(),
            ],
        )
        self.datahost = self._service(
            "datahost",
            [
                "--port",
                str(self._ports["datahost"]),
                "--data-dir",
                str(self.run_dir / "datahost"),
            ],
        )
        self.apps: list[AppHandle] = []
        self._app_counter = 0

    def _tls_args(self) -> list[str]:
        if not self.tls:
            return []
        return ["--tls-cert", str(self.cert_path), "--tls-key", str(self.key_path)]

    def _client_ca_args(self) -> list[str]:
        return ["--ca-file", str(self.cert_path)] if self.tls else []

    def _service(self, name: str, extra_argv: list[str]) -> ServiceProcess:
        scheme = "https" if self.tls else "http"
        port = self._ports[name]
        return ServiceProcess(
            name,
            [
                sys.executable,
                "-m",
                f"healthvault.{name}",
                "--host",
                "127.0.0.1",
                *extra_argv,
                *self._tls_args(),
            ],
            ready_url=f"{scheme}://127.0.0.1:{port}",
            log_path=self.run_dir / "logs" / f"{name}.log",
            ca_file=self.cert_path,
        )

    def start_core(self) -> None:
        self.registry.start()
        self.vault.start()
        self.datahost.start()

    # -- app instances ---------------------------------------------------

    def start_app(
        self,
        storage_kind: str,
        *,
        instance_id: str | None = None,
        data_dir: Path | None = None,
    ) -> AppHandle:
        """Spin up one app instance; a fresh identity unless instance_id
        asks the app to resume an existing one."""
        from ..healthapp import HealthAppClient

        self._app_counter += 1
        name = f"app{self._app_counter}"
        port = free_port()
        scheme = "https" if self.tls else "http"
        url = f"{scheme}://127.0.0.1:{port}"
        if data_dir is None:
            data_dir = self.run_dir / name
        argv = [
            sys.executable,
            "-m",
            "healthvault.healthapp",
            "--host",
            "127.0.0.1",
            "--port",
            str(port),
            "--data-dir",
            str(data_dir),
            "--registry-url",
            self.registry_url,
            "--vault-url",
            self.vault_url,
            "--datahost-url",
            self.datahost_url,
            "--storage-kind",
            storage_kind,
            "--kdf-iterations",
            str(self.kdf_iterations),
            *(["--instance-id", instance_id] if instance_id else []),
            *self._client_ca_args(),
            *self._tls_args(),
        ]
        process = ServiceProcess(
            name,
            argv,
            ready_url=url,
            log_path=self.run_dir / "logs" / f"{name}.log",
            env_extra={ADMIN_TOKEN_ENV: self.admin_token},
            ca_file=self.cert_path,
        )
        process.start(ready_deadline_s=60.0)
        handle = AppHandle(process, url, Path(data_dir), storage_kind)
        client = HealthAppClient(url, ca_file=self.cert_path)
        try:
            handle.instance_id = client.health()["instance_id"]
        finally:
            client.close()
        self.apps.append(handle)
        return handle

    # -- severance ---------------------------------------------------------

    def simulate_attack(
        self, scenario: AttackScenario, app: AppHandle | None = None
    ) -> SeveranceHandle:
        """Sever one host. AppHost: kill the app process and destroy its
        state directory. DataHost: kill the remote storage tier (data host
        and vault); their directories survive, the registry stays up."""
        if scenario.target is AttackTarget.APP_HOST:
            if app is None or not app.process.running:
                raise TargetNotRunning("no running app instance to sever")
            app.process.kill()
            shutil.rmtree(app.data_dir, ignore_errors=True)
            return SeveranceHandle(scenario, [app.process])
        severed = [svc for svc in (self.datahost, self.vault) if svc.running]
        if not severed:
            raise TargetNotRunning("data host tier is not running")
        for svc in severed:
            svc.kill()
        return SeveranceHandle(scenario, severed)

    def restore(self, handle: SeveranceHandle) -> None:
        """Bring severed data-tier services back on their old ports and
        data. App hosts are never restored; they are rebuilt fresh."""
        if handle.scenario.target is AttackTarget.APP_HOST:
            raise TargetNotRunning(
                "a severed app host is destroyed; start a new instance instead"
            )
        for svc in handle.severed:
            svc.start()

    def shutdown(self) -> None:
        for app in self.apps:
            app.process.stop()
        for svc in (self.datahost, self.vault, self.registry):
            svc.stop()

    def __enter__(self) -> "Cluster":
        self.start_core()
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()
