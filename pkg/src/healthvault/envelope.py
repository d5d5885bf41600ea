"""Sealed record envelopes: what actually leaves the app boundary.

Every row is wrapped client-side with AES-256-GCM before it goes anywhere.
The envelope is self-describing: the encrypted payload carries the record
kind and patient id alongside the row, so the owning key can reconstruct
the full patient index from nothing but a pile of envelopes. Without the
key an envelope is an opaque blob with no queryable structure.

Wire layout (bytes):

    [0]      version tag (0x01)
    [1:13]   96-bit random nonce
    [13:-16] ciphertext
    [-16:]   GCM tag

The version byte is bound as associated data, so a tampered or rewritten
tag fails authentication instead of being silently accepted.
"""

from __future__ import annotations

import os
import struct

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import MalformedEnvelope
from .model import RecordKind

ENVELOPE_VERSION = 1
NONCE_BYTES = 12
TAG_BYTES = 16
_MIN_ENVELOPE_BYTES = 1 + NONCE_BYTES + TAG_BYTES

_KIND_TO_BYTE = {RecordKind.PII: 0x01, RecordKind.FINANCIAL: 0x02}
_BYTE_TO_KIND = {v: k for k, v in _KIND_TO_BYTE.items()}


def _encode_payload(kind: RecordKind, patient_id: str, row: str) -> bytes:
    pid = patient_id.encode("utf-8")
    if len(pid) > 0xFFFF:
        raise MalformedEnvelope("patient_id too long to encode")
    return (
        bytes([_KIND_TO_BYTE[kind]])
        + struct.pack(">H", len(pid))
        + pid
        + row.encode("utf-8")
    )


def _decode_payload(payload: bytes) -> tuple[RecordKind, str, str]:
    if len(payload) < 3:
        raise MalformedEnvelope("payload truncated")
    kind = _BYTE_TO_KIND.get(payload[0])
    if kind is None:
        raise MalformedEnvelope(f"unknown record kind byte {payload[0]:#04x}")
    (pid_len,) = struct.unpack(">H", payload[1:3])
    if len(payload) < 3 + pid_len:
        raise MalformedEnvelope("payload shorter than declared patient_id")
    patient_id = payload[3 : 3 + pid_len].decode("utf-8")
    row = payload[3 + pid_len :].decode("utf-8")
    return kind, patient_id, row


def _seal_with_nonce(
    key: bytes, nonce: bytes, kind: RecordKind, patient_id: str, row: str
) -> bytes:
    # Deterministic core, split out so tests can pin a golden envelope.
    payload = _encode_payload(kind, patient_id, row)
    aad = bytes([ENVELOPE_VERSION])
    ciphertext = AESGCM(key).encrypt(nonce, payload, aad)
    return aad + nonce + ciphertext


def seal(key: bytes, kind: RecordKind, patient_id: str, row: str) -> bytes:
    """Encrypt one row into a self-contained envelope under a fresh nonce."""
    return _seal_with_nonce(key, os.urandom(NONCE_BYTES), kind, patient_id, row)


def unseal(key: bytes, envelope: bytes) -> tuple[RecordKind, str, str]:
    """Authenticate and decrypt an envelope back to (kind, patient_id, row).

    Raises MalformedEnvelope on any structural problem, wrong key, or any
    bit flip anywhere in the envelope.
    """
    if len(envelope) < _MIN_ENVELOPE_BYTES:
        raise MalformedEnvelope(
            f"envelope shorter than minimum {_MIN_ENVELOPE_BYTES} bytes"
        )
    version = envelope[0]
    if version != ENVELOPE_VERSION:
        raise MalformedEnvelope(f"unsupported envelope version {version}")
    nonce = envelope[1 : 1 + NONCE_BYTES]
    ciphertext = envelope[1 + NONCE_BYTES :]
    try:
        payload = AESGCM(key).decrypt(nonce, ciphertext, bytes([version]))
    except InvalidTag as exc:
        raise MalformedEnvelope("authentication failed: envelope corrupt or wrong key") from exc
    try:
        return _decode_payload(payload)
    except UnicodeDecodeError as exc:
        raise MalformedEnvelope("payload is not valid UTF-8") from exc
