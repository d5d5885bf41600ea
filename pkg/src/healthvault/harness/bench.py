"""Cost benchmark: n creates then n uniformly random fetches, per backend.

The benchmark drives the storage layer directly, in process, against the
live remote services, because the three channels being measured (seal,
open, network round trip) all belong to that layer; the app's own HTTP
front door costs the same for every approach and would only blur the
comparison. Network time is the client-observed round trip, crypto time is
wall time around seal/open calls.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from ..backends import BackendKind, make_backend
from ..errors import BackendUnavailable, VaultUnreachable
from ..kdf import derive_key
from ..model import generate_synthetic
from ..registry import RegistryClient
from .procs import Cluster


@dataclass
class CostRow:
    """One row of the measured cost matrix."""

    backend: str
    n_create: int
    n_fetch: int
    seed: int
    workers: int
    avg_encrypt_ms: float
    avg_decrypt_ms: float
    avg_network_us: float
    encrypt_total_ms: float
    decrypt_total_ms: float
    network_total_ms: float
    wall_elapsed_s: float
    completed_creates: int
    completed_fetches: int
    partial: bool
    resilience_verdict: str | None = None
    recoverability_verdict: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CostRow":
        return cls(**data)


def _run_ops(fn, items, workers: int) -> None:
    """Apply fn over items, sequentially or from a worker pool. The first
    error propagates either way."""
    if workers <= 1:
        for item in items:
            fn(item)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for _ in pool.map(fn, items):
            pass


def run_benchmark(
    kind: BackendKind | str,
    n_create: int,
    n_fetch: int,
    seed: int,
    *,
    cluster: Cluster,
    work_dir: str | Path,
    workers: int = 1,
) -> CostRow:
    """Measure one backend's cost channels at the given scale.

    A data-host or vault loss mid-run aborts the phase and flags the row as
    partial; averages are then over the operations that completed.
    """
    kind = BackendKind(kind)
    work_dir = Path(work_dir)
    work_dir.mkdir(parents=True, exist_ok=True)

    credentials = None
    key = None
    if kind.is_encrypted or kind is BackendKind.PROPOSED_VAULT:
        registry = RegistryClient(cluster.registry_url, ca_file=cluster.cert_path)
        try:
            credentials = registry.register(cluster.admin_token, name=f"bench-{kind.value}-{seed}-{time.time_ns()}")
        finally:
            registry.close()
        key = derive_key(credentials, cluster.kdf_iterations).key

    backend = make_backend(
        kind,
        data_dir=work_dir,
        key=key,
        credentials=credentials,
        datahost_url=cluster.datahost_url,
        vault_url=cluster.vault_url,
        ca_file=cluster.cert_path,
    )

    records = generate_synthetic(n_create, seed)
    rng = random.Random(seed + 1)

    partial = False
    wall_started = time.perf_counter()
    try:
        _run_ops(backend.create, records, workers)
    except (BackendUnavailable, VaultUnreachable):
        partial = True
    after_create = backend.metrics.snapshot()

    completed_creates = after_create.op_counts.get("create", 0)
    if not partial and completed_creates:
        fetch_pool = records[:completed_creates]
        fetch_ids = [
            fetch_pool[rng.randrange(len(fetch_pool))].patient_id
            for _ in range(n_fetch)
        ]
        try:
            _run_ops(backend.read, fetch_ids, workers)
        except (BackendUnavailable, VaultUnreachable):
            partial = True
    wall_elapsed = time.perf_counter() - wall_started

    final = backend.metrics.snapshot()
    fetch_phase = final.minus(after_create)
    completed_fetches = fetch_phase.op_counts.get("read", 0)
    backend.close()
    backend.index.close()

    def per_op(total_ns: int, ops: int, scale: float) -> float:
        return total_ns / ops / scale if ops else 0.0

    return CostRow(
        backend=kind.value,
        n_create=n_create,
        n_fetch=n_fetch,
        seed=seed,
        workers=workers,
        avg_encrypt_ms=per_op(after_create.encrypt_ns, completed_creates, 1e6),
        avg_decrypt_ms=per_op(fetch_phase.decrypt_ns, completed_fetches, 1e6),
        avg_network_us=per_op(
            final.network_ns, completed_creates + completed_fetches, 1e3
        ),
        encrypt_total_ms=final.encrypt_ns / 1e6,
        decrypt_total_ms=final.decrypt_ns / 1e6,
        network_total_ms=final.network_ns / 1e6,
        wall_elapsed_s=wall_elapsed,
        completed_creates=completed_creates,
        completed_fetches=completed_fetches,
        partial=partial,
    )
