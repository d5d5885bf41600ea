"""Command-line interface for the benchmark and drill harness.

Commands mirror the experiment: seed synthetic patients, bench the seven
storage approaches, sever a host, run attack-and-recovery drills, and
render the report tables. Everything runs against throwaway service
processes on loopback; nothing touches hosts outside the run directory.
"""

from __future__ import annotations

import json
import sys
import tempfile
import time
from pathlib import Path

import click

from . import __version__
from .backends import BackendKind
from .errors import BackendUnavailable, HealthVaultError
from .harness.bench import CostRow, run_benchmark
from .harness.drill import DrillResult, run_recovery_drill
from .harness.procs import AttackScenario, AttackTarget, Cluster
from .harness.report import emit_report, verdict_mismatches
from .healthapp import HealthAppClient
from .model import generate_synthetic

_ALL = "all"
_KIND_CHOICES = [_ALL] + [kind.value for kind in BackendKind]


def _kinds(backend: str) -> list[BackendKind]:
    if backend == _ALL:
        from .harness.report import EVAL_ROW_ORDER

        return list(EVAL_ROW_ORDER)
    return [BackendKind(backend)]


def _run_dir(run_dir: str | None, label: str) -> Path:
    if run_dir:
        return Path(run_dir)
    return Path(tempfile.mkdtemp(prefix=f"healthvault-{label}-"))


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


@click.group()
@click.version_option(version=__version__, prog_name="healthvault")
def main() -> None:
    """Ransomware-resilience storage benchmark and recovery drills."""


@main.command()
@click.option("--count", type=int, required=True, help="number of synthetic patients")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=str, default=None, help="write JSONL here instead of stdout")
def seed(count: int, seed: int, out: str | None) -> None:
    """Generate deterministic synthetic patient records (JSONL)."""
    lines = [
        json.dumps(record.to_dict(), separators=(",", ":"))
        for record in generate_synthetic(count, seed)
    ]
    _write_or_print("\n".join(lines) + ("\n" if lines else ""), out)


@main.command()
@click.option("--backend", type=click.Choice(_KIND_CHOICES), default=_ALL, show_default=True)
@click.option("--creates", type=int, default=100_000, show_default=True)
@click.option("--fetches", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True,
              help="concurrent benchmark workers (1 = sequential averaging)")
@click.option("--out", type=str, default=None, help="write cost rows as JSON")
@click.option("--run-dir", type=str, default=None, help="working directory (default: temp)")
@click.option("--tls/--no-tls", default=False, show_default=True)
def bench(backend: str, creates: int, fetches: int, seed: int, workers: int,
          out: str | None, run_dir: str | None, tls: bool) -> None:
    """Measure create/fetch costs for one or all storage approaches."""
    base = _run_dir(run_dir, "bench")
    rows: list[CostRow] = []
    with Cluster(base, tls=tls) as cluster:
        for kind in _kinds(backend):
            click.echo(f"benchmarking {kind.value} ...", err=True)
            row = run_benchmark(
                kind, creates, fetches, seed,
                cluster=cluster,
                work_dir=base / f"bench-{kind.value}",
                workers=workers,
            )
            rows.append(row)
            click.echo(
                f"  {kind.value}: encrypt {row.avg_encrypt_ms:.3f} ms,"
                f" decrypt {row.avg_decrypt_ms:.3f} ms,"
                f" network {row.avg_network_us:.1f} us"
                + (" [partial]" if row.partial else ""),
                err=True,
            )
    payload = json.dumps([row.to_dict() for row in rows], indent=2)
    _write_or_print(payload, out)


@main.command()
@click.option("--target", type=click.Choice([t.value for t in AttackTarget]), required=True)
@click.option("--run-dir", type=str, default=None)
@click.option("--tls/--no-tls", default=False, show_default=True)
def attack(target: str, run_dir: str | None, tls: bool) -> None:
    """Demonstrate one host-severance attack end to end."""
    base = _run_dir(run_dir, "attack")
    scenario = AttackScenario(AttackTarget(target))
    with Cluster(base, tls=tls) as cluster:
        if scenario.target is AttackTarget.DATA_HOST:
            _demo_datahost_attack(cluster, scenario)
        else:
            _demo_apphost_attack(cluster, scenario)


def _demo_datahost_attack(cluster: Cluster, scenario: AttackScenario) -> None:
    app = cluster.start_app(BackendKind.REMOTE_FILE_PLAIN.value)
    client = HealthAppClient(app.url, ca_file=cluster.cert_path)
    try:
        records = generate_synthetic(3, seed=7)
        for record in records:
            client.create(record)
        click.echo(f"seeded {len(records)} patients on the data host")
        handle = cluster.simulate_attack(scenario)
        click.echo("data host severed (SIGKILL)")
        try:
            client.create(generate_synthetic(4, seed=7)[3])
            raise click.ClickException("create unexpectedly succeeded while severed")
        except BackendUnavailable:
            click.echo("create during severance failed with backend-unavailable, as expected")
        cluster.restore(handle)
        click.echo("data host restored on the same port and data")
        restored = client.read(records[0].patient_id)
        if restored != records[0]:
            raise click.ClickException("restored host returned different data")
        click.echo("post-restore read returned the original record; attack demo complete")
    finally:
        client.close()


def _demo_apphost_attack(cluster: Cluster, scenario: AttackScenario) -> None:
    app = cluster.start_app(BackendKind.PROPOSED_VAULT.value)
    client = HealthAppClient(app.url, ca_file=cluster.cert_path)
    records = generate_synthetic(5, seed=7)
    try:
        for record in records:
            client.create(record)
    finally:
        client.close()
    click.echo(f"seeded {len(records)} patients via instance {app.instance_id}")
    cluster.simulate_attack(scenario, app=app)
    click.echo("app host severed and its state directory destroyed")
    fresh = cluster.start_app(BackendKind.PROPOSED_VAULT.value)
    fresh_client = HealthAppClient(fresh.url, ca_file=cluster.cert_path)
    try:
        report = fresh_client.recover(app.instance_id, cluster.admin_token)
        click.echo(
            f"recovered {report['patients_restored']} patients"
            f" ({report['records_restored']} blobs) in {report['elapsed_s']}s"
        )
        for record in records:
            if fresh_client.read(record.patient_id) != record:
                raise click.ClickException("post-recovery read mismatch")
        click.echo("all post-recovery reads identical; attack demo complete")
    finally:
        fresh_client.close()


@main.command()
@click.option("--backend", type=click.Choice(_KIND_CHOICES), default=_ALL, show_default=True)
@click.option("--patients", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=str, default=None, help="write drill results as JSON")
@click.option("--check", is_flag=True, help="exit nonzero on any verdict mismatch")
@click.option("--run-dir", type=str, default=None)
@click.option("--tls/--no-tls", default=False, show_default=True)
def drill(backend: str, patients: int, seed: int, out: str | None, check: bool,
          run_dir: str | None, tls: bool) -> None:
    """Sever the app host and attempt recovery, per storage approach."""
    base = _run_dir(run_dir, "drill")
    results: list[DrillResult] = []
    with Cluster(base, tls=tls) as cluster:
        for kind in _kinds(backend):
            click.echo(f"drilling {kind.value} ...", err=True)
            started = time.perf_counter()
            result = run_recovery_drill(cluster, kind, patients, seed)
            results.append(result)
            status = "match" if result.matches_expected else "MISMATCH"
            click.echo(
                f"  {kind.value}: recovered={result.recovered}"
                f" verdict={status} ({time.perf_counter() - started:.1f}s)",
                err=True,
            )
    if out:
        Path(out).write_text(json.dumps([r.to_dict() for r in results], indent=2))
        click.echo(f"wrote {out}")
    for result in results:
        click.echo(f"{result.backend}: {result.verdict}")
    if check:
        problems = verdict_mismatches(results)
        for problem in problems:
            click.echo(f"MISMATCH {problem}", err=True)
        if problems:
            sys.exit(1)
        click.echo("all verdicts match the expected recoverability column", err=True)


@main.command()
@click.option("--format", "fmt", type=click.Choice(["text", "csv", "json"]),
              default="text", show_default=True)
@click.option("--bench", "bench_file", type=str, required=True,
              help="cost rows JSON written by the bench command")
@click.option("--drills", "drills_file", type=str, default=None,
              help="drill results JSON written by the drill command")
@click.option("--out", type=str, default=None)
@click.option("--check", is_flag=True, help="exit nonzero on any verdict mismatch")
def report(fmt: str, bench_file: str, drills_file: str | None, out: str | None,
           check: bool) -> None:
    """Render the cost matrix and the static ratings table."""
    rows = [CostRow.from_dict(d) for d in json.loads(Path(bench_file).read_text())]
    drills = None
    if drills_file:
        drills = [DrillResult.from_dict(d) for d in json.loads(Path(drills_file).read_text())]
    try:
        text = emit_report(rows, fmt, drills=drills)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    _write_or_print(text, out)
    if check and drills:
        problems = verdict_mismatches(drills)
        for problem in problems:
            click.echo(f"MISMATCH {problem}", err=True)
        if problems:
            sys.exit(1)


if __name__ == "__main__":
    try:
        main()
    except HealthVaultError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
