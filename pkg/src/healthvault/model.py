"""Patient record model, question-mark row serialization, synthetic data.

A patient carries two triples: personal data (date of birth, social security
number, address) and financial data (credit card number, expiration date,
auth code). Storage layers persist the two triples as separate rows, each a
``field1?field2?field3`` string. Because ``?`` is the delimiter it is banned
from field values; there is no escaping scheme, rows with a delimiter inside
a field are rejected outright.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, fields as dataclass_fields

from .errors import DelimiterInField, InvalidRecord, MalformedRow

DELIMITER = "?"

PII_FIELDS = ("date_of_birth", "social_security_number", "address")
FINANCIAL_FIELDS = ("credit_card_number", "expiration_date", "auth_code")


class RecordKind(enum.Enum):
    """The two row families every patient splits into."""

    PII = "pii"
    FINANCIAL = "financial"

    @property
    def field_names(self) -> tuple[str, str, str]:
        return PII_FIELDS if self is RecordKind.PII else FINANCIAL_FIELDS


@dataclass(frozen=True)
class PatientRecord:
    """One patient's identifying and financial data; the unit of CRUD."""

    patient_id: str
    date_of_birth: str
    social_security_number: str
    address: str
    credit_card_number: str
    expiration_date: str
    auth_code: str

    def validate(self) -> None:
        if not self.patient_id:
            raise InvalidRecord("patient_id must be non-empty")
        for f in dataclass_fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, str):
                raise InvalidRecord(f"{f.name} must be a string")
            if DELIMITER in value:
                raise DelimiterInField(
                    f"field {f.name} contains the reserved delimiter {DELIMITER!r}"
                )

    def fields_for(self, kind: RecordKind) -> tuple[str, str, str]:
        a, b, c = kind.field_names
        return (getattr(self, a), getattr(self, b), getattr(self, c))

    def to_dict(self) -> dict[str, str]:
        return {f.name: getattr(self, f.name) for f in dataclass_fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "PatientRecord":
        try:
            record = cls(**{f.name: data[f.name] for f in dataclass_fields(cls)})
        except (KeyError, TypeError) as exc:
            raise InvalidRecord(f"incomplete patient record: {exc}") from exc
        record.validate()
        return record


def serialize_row(record: PatientRecord, kind: RecordKind) -> str:
    """Join the requested triple with ``?``; no trailing delimiter."""
    record.validate()
    return DELIMITER.join(record.fields_for(kind))


def parse_row(row: str, kind: RecordKind) -> tuple[str, str, str]:
    """Split a row back into its three fields, in schema order.

    The kind does not change how the split happens, only what the caller
    should read the positions as; it is taken so call sites stay explicit
    about which triple they are handling.
    """
    parts = row.split(DELIMITER)
    if len(parts) != 3:
        raise MalformedRow(
            f"expected exactly 2 delimiters, found {row.count(DELIMITER)}"
        )
    return (parts[0], parts[1], parts[2])


def record_from_rows(patient_id: str, pii_row: str, financial_row: str) -> PatientRecord:
    """Reassemble a record from its two stored rows."""
    dob, ssn, address = parse_row(pii_row, RecordKind.PII)
    card, expiry, auth = parse_row(financial_row, RecordKind.FINANCIAL)
    record = PatientRecord(
        patient_id=patient_id,
        date_of_birth=dob,
        social_security_number=ssn,
        address=address,
        credit_card_number=card,
        expiration_date=expiry,
        auth_code=auth,
    )
    record.validate()
    return record


_STREETS = (
    "Maple", "Cedar", "Oakwood", "Birch", "Willow", "Juniper", "Magnolia",
    "Sycamore", "Chestnut", "Alder", "Hickory", "Laurel",
)
_STREET_SUFFIXES = ("Street", "Avenue", "Lane", "Drive", "Court", "Road")
_CITIES = (
    "Riverton", "Lakeview", "Fairfield", "Brookside", "Greenfield",
    "Ashford", "Milltown", "Harborview", "Stonebridge", "Eastvale",
)


def _random_date(rng: random.Random, first_year: int, last_year: int) -> str:
    year = rng.randint(first_year, last_year)
    month = rng.randint(1, 12)
    # Day capped at 28 so every (year, month) is valid without calendar math.
    day = rng.randint(1, 28)
    return f"{year:04d}-{month:02d}-{day:02d}"


def generate_synthetic(count: int, seed: int) -> list[PatientRecord]:
    """Deterministically generate ``count`` plausible-but-fake records.

    Same (count, seed) always yields the identical sequence. Patient ids are
    pairwise distinct and no field ever contains the row delimiter.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = random.Random(seed)
    records = []
    for i in range(count):
        record = PatientRecord(
            patient_id=f"P{i:08d}",
            date_of_birth=_random_date(rng, 1930, 2009),
            social_security_number=(
                f"{rng.randint(100, 899):03d}-{rng.randint(10, 99):02d}"
                f"-{rng.randint(1000, 9999):04d}"
            ),
            address=(
                f"{rng.randint(10, 9999)} {rng.choice(_STREETS)} "
                f"{rng.choice(_STREET_SUFFIXES)}, {rng.choice(_CITIES)}"
            ),
            credit_card_number="".join(str(rng.randint(0, 9)) for _ in range(16)),
            expiration_date=_random_date(rng, 2025, 2032),
            auth_code=f"AUTH-{rng.randint(10_000_000, 99_999_999)}",
        )
        records.append(record)
    return records
