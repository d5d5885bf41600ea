"""Ransomware-resilient patient record storage.

A healthcare-style app that keeps nothing worth ransoming on its own host:
records are sealed client-side and externalized to a vault that maintains a
per-owner reference ledger, so a compromised app instance can simply be
abandoned and rebuilt. The package also ships the six conventional storage
approaches it is measured against, plus a harness that benchmarks all
seven, severs hosts, and attempts recovery.
"""

__version__ = "0.1.0"
