"""Patent corpus data model: records, labels, ingestion, validation, persistence.

A corpus is a set of :class:`PatentRecord` keyed by patent id plus an optional
sidecar of :class:`LabeledExample`. Records arrive either as JSONL (one object
per line, schema below) or as PatentsView-style TSV tables joined on patent id.

JSONL record schema (one object per line)::

    {"patent_id": str, "title": str, "abstract": str, "claims": str,
     "description": str, "cpc_codes": [str], "citations": [str],
     "family_id": str, "grant_date": "YYYY-MM-DD" | null}

Labels JSONL schema::

    {"patent_id": str, "label": "positive"|"negative",
     "difficulty": "easy"|"hard", "source": str,
     "annotator_id": str|null, "labeled_at": RFC3339 str}
"""

from __future__ import annotations

import csv
import io
import json
import re
import threading
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping

from .errors import CorpusFormatError, RecordValidationError, UnknownIdError

LABELS = ("positive", "negative")
DIFFICULTIES = ("easy", "hard")
SOURCES = ("seed", "anti_seed", "annotator")

# Pretty category keys used throughout evaluation and reporting.
CATEGORIES = ("Hard+", "Hard-", "Easy+", "Easy-")

_CPC_RE = re.compile(r"^([A-Z])([0-9]{2})([A-Z])([0-9]+(?:/[0-9]+)?)?$")


@dataclass(frozen=True, order=True)
class CpcCode:
    """A Cooperative Patent Classification code, e.g. ``A01B1/024``.

    ``group`` holds everything after the subclass letter ("1/024") and may be
    empty when only the subclass is known.
    """

    section: str
    class_digits: str
    subclass_letter: str
    group: str = ""

    @classmethod
    def parse(cls, text: str) -> "CpcCode":
        m = _CPC_RE.match(text.strip())
        if m is None:
            raise RecordValidationError(f"invalid CPC code syntax: {text!r}")
        section, digits, sub, group = m.groups()
        return cls(section, digits, sub, group or "")

    def __str__(self) -> str:
        return f"{self.section}{self.class_digits}{self.subclass_letter}{self.group}"

    @property
    def subclass(self) -> str:
        """Truncation to subclass level, e.g. ``A01B``."""
        return f"{self.section}{self.class_digits}{self.subclass_letter}"

    def is_valid(self) -> bool:
        """True iff the fields round-trip through the canonical string form."""
        m = _CPC_RE.match(str(self))
        return m is not None and CpcCode.parse(str(self)) == self


@dataclass
class PatentRecord:
    """One patent: identifiers, text fields, CPC codes, citations, family."""

    patent_id: str
    title: str = ""
    abstract: str = ""
    claims: str = ""
    description: str = ""
    cpc_codes: list[CpcCode] = field(default_factory=list)
    citations: list[str] = field(default_factory=list)
    family_id: str = ""
    grant_date: date | None = None

    def subclasses(self) -> tuple[str, ...]:
        """Distinct subclass-level codes, sorted."""
        return tuple(sorted({c.subclass for c in self.cpc_codes}))


@dataclass(frozen=True)
class LabeledExample:
    """A (patent, label) pair with its provenance.

    Invariants enforced at construction: seeds are easy positives, anti-seeds
    are easy negatives, annotator labels are always hard.
    """

    patent_id: str
    label: str
    difficulty: str
    source: str
    annotator_id: str | None = None
    labeled_at: datetime = field(
        default_factory=lambda: datetime.now(timezone.utc)
    )

    def __post_init__(self):
        if not self.patent_id:
            raise RecordValidationError("labeled example requires a patent_id")
        if self.label not in LABELS:
            raise RecordValidationError(f"label must be one of {LABELS}, got {self.label!r}")
        if self.difficulty not in DIFFICULTIES:
            raise RecordValidationError(
                f"difficulty must be one of {DIFFICULTIES}, got {self.difficulty!r}"
            )
        if self.source not in SOURCES:
            raise RecordValidationError(f"source must be one of {SOURCES}, got {self.source!r}")
        if self.source == "seed" and (self.label, self.difficulty) != ("positive", "easy"):
            raise RecordValidationError("seed examples must be easy positives")
        if self.source == "anti_seed" and (self.label, self.difficulty) != ("negative", "easy"):
            raise RecordValidationError("anti-seed examples must be easy negatives")
        if self.source == "annotator" and self.difficulty != "hard":
            raise RecordValidationError("annotator examples are hard by definition")

    @property
    def category(self) -> str:
        """One of ``Hard+``, ``Hard-``, ``Easy+``, ``Easy-``."""
        sign = "+" if self.label == "positive" else "-"
        return f"{self.difficulty.capitalize()}{sign}"


# ---------------------------------------------------------------------------
# JSONL parsing / serialization
# ---------------------------------------------------------------------------


def _iter_lines(stream) -> Iterator[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for raw in stream:
        if isinstance(raw, (bytes, bytearray)):
            yield raw.decode("utf-8")
        else:
            yield raw


def record_from_dict(obj: Mapping, where: str = "record") -> PatentRecord:
    patent_id = obj.get("patent_id")
    if not patent_id or not isinstance(patent_id, str):
        raise RecordValidationError(f"{where}: missing or empty patent_id")
    try:
        codes = [CpcCode.parse(c) for c in obj.get("cpc_codes", [])]
    except RecordValidationError as e:
        raise RecordValidationError(f"{where}: cpc_codes: {e}") from e
    raw_date = obj.get("grant_date")
    grant_date = None
    if raw_date:
        try:
            grant_date = date.fromisoformat(raw_date)
        except ValueError as e:
            raise RecordValidationError(f"{where}: grant_date: {e}") from e
    return PatentRecord(
        patent_id=patent_id,
        title=obj.get("title", "") or "",
        abstract=obj.get("abstract", "") or "",
        claims=obj.get("claims", "") or "",
        description=obj.get("description", "") or "",
        cpc_codes=codes,
        citations=[str(c) for c in obj.get("citations", [])],
        family_id=obj.get("family_id", "") or "",
        grant_date=grant_date,
    )


def record_to_dict(rec: PatentRecord) -> dict:
    return {
        "patent_id": rec.patent_id,
        "title": rec.title,
        "abstract": rec.abstract,
        "claims": rec.claims,
        "description": rec.description,
        "cpc_codes": [str(c) for c in rec.cpc_codes],
        "citations": list(rec.citations),
        "family_id": rec.family_id,
        "grant_date": rec.grant_date.isoformat() if rec.grant_date else None,
    }


def parse_jsonl(stream) -> list[PatentRecord]:
    """Parse patent records from a JSONL stream (bytes, str, or file-like).

    Records return in file order. Malformed lines raise with their 1-based
    line number rather than being silently skipped.
    """
    records = []
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusFormatError(f"line {lineno}: malformed JSON: {e}") from e
        records.append(record_from_dict(obj, where=f"line {lineno}"))
    return records


def serialize_jsonl(records: Iterable[PatentRecord], stream: IO[str] | None = None) -> str:
    """Serialize records to the JSONL schema. Returns the text, and writes to
    *stream* when given."""
    out = io.StringIO()
    for rec in records:
        out.write(json.dumps(record_to_dict(rec), ensure_ascii=False))
        out.write("\n")
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def label_from_dict(obj: Mapping, where: str = "label") -> LabeledExample:
    patent_id = obj.get("patent_id")
    if not patent_id:
        raise RecordValidationError(f"{where}: missing or empty patent_id")
    raw_ts = obj.get("labeled_at")
    if raw_ts:
        try:
            labeled_at = datetime.fromisoformat(raw_ts.replace("Z", "+00:00"))
        except ValueError as e:
            raise RecordValidationError(f"{where}: labeled_at: {e}") from e
    else:
        labeled_at = datetime.now(timezone.utc)
    try:
        return LabeledExample(
            patent_id=patent_id,
            label=obj.get("label", ""),
            difficulty=obj.get("difficulty", ""),
            source=obj.get("source", ""),
            annotator_id=obj.get("annotator_id"),
            labeled_at=labeled_at,
        )
    except RecordValidationError as e:
        raise RecordValidationError(f"{where}: {e}") from e


def label_to_dict(ex: LabeledExample) -> dict:
    return {
        "patent_id": ex.patent_id,
        "label": ex.label,
        "difficulty": ex.difficulty,
        "source": ex.source,
        "annotator_id": ex.annotator_id,
        "labeled_at": ex.labeled_at.isoformat(),
    }


def parse_labels_jsonl(stream) -> list[LabeledExample]:
    labels = []
    for lineno, line in enumerate(_iter_lines(stream), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusFormatError(f"line {lineno}: malformed JSON: {e}") from e
        labels.append(label_from_dict(obj, where=f"line {lineno}"))
    return labels


def serialize_labels_jsonl(labels: Iterable[LabeledExample]) -> str:
    return "".join(json.dumps(label_to_dict(ex), ensure_ascii=False) + "\n" for ex in labels)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(record: PatentRecord) -> list[str]:
    """Check PatentRecord invariants. Returns violations naming the field;
    empty list means the record is well-formed. Violations are data, not
    exceptions."""
    violations = []
    if not record.patent_id:
        violations.append("patent_id: must be non-empty")
    for i, code in enumerate(record.cpc_codes):
        if not isinstance(code, CpcCode) or not code.is_valid():
            violations.append(f"cpc_codes[{i}]: invalid code {code!s}")
    if record.patent_id and record.patent_id in record.citations:
        violations.append("citations: record cites itself")
    return violations


# ---------------------------------------------------------------------------
# PatentsView-style TSV adapter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TsvColumnMap:
    """Column names for the three PatentsView-style tables.

    Defaults mirror the JSONL field names; point them at the real
    PatentsView headers (patent_title, citation_patent_id, ...) as needed.
    Optional patent columns that are absent from the file default to empty.
    """

    patent_id: str = "patent_id"
    title: str = "title"
    abstract: str = "abstract"
    claims: str = "claims"
    description: str = "description"
    family_id: str = "family_id"
    grant_date: str = "grant_date"
    cpc_patent_id: str = "patent_id"
    cpc_code: str = "cpc_code"
    citation_patent_id: str = "patent_id"
    citation_cited_id: str = "citation_id"


@dataclass
class TsvIngestResult:
    records: list[PatentRecord]
    unmatched_cpc_rows: int = 0
    unmatched_citation_rows: int = 0

    @property
    def warnings(self) -> list[str]:
        out = []
        if self.unmatched_cpc_rows:
            out.append(f"{self.unmatched_cpc_rows} CPC rows referenced absent patent ids")
        if self.unmatched_citation_rows:
            out.append(f"{self.unmatched_citation_rows} citation rows referenced absent patent ids")
        return out


def _read_tsv(stream, name: str, required: tuple[str, ...]) -> Iterator[dict]:
    if isinstance(stream, (bytes, bytearray)):
        text = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        text = io.StringIO(stream)
    elif isinstance(stream, io.TextIOBase):
        text = stream
    else:
        text = io.TextIOWrapper(stream, encoding="utf-8")
    reader = csv.reader(text, delimiter="\t", quoting=csv.QUOTE_NONE)
    try:
        header = next(reader)
    except StopIteration:
        raise CorpusFormatError(f"{name}: missing header row") from None
    missing = [c for c in required if c not in header]
    if missing:
        raise CorpusFormatError(f"{name}: missing header column(s) {missing}")
    for rowno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise CorpusFormatError(
                f"{name}: row {rowno}: expected {len(header)} columns, got {len(row)}"
            )
        yield dict(zip(header, row))


def parse_patentsview_tsv(
    files: Mapping[str, IO],
    columns: TsvColumnMap | None = None,
) -> TsvIngestResult:
    """Join per-table TSVs (patent text, CPC assignments, citations) into
    PatentRecords. ``files`` maps table names ("patents" required, "cpc" and
    "citations" optional) to byte or text streams with header rows.

    One record per patent row; CPC/citation rows whose patent id does not
    match any patent row are counted, not joined.
    """
    cols = columns or TsvColumnMap()
    if "patents" not in files:
        raise CorpusFormatError("patents table is required")

    records: dict[str, PatentRecord] = {}
    for row in _read_tsv(files["patents"], "patents", required=(cols.patent_id,)):
        pid = row[cols.patent_id].strip()
        if not pid:
            raise RecordValidationError("patents: empty patent_id")
        raw_date = row.get(cols.grant_date, "").strip()
        grant_date = date.fromisoformat(raw_date) if raw_date else None
        if pid in records:
            raise RecordValidationError(f"patents: duplicate patent_id {pid!r}")
        records[pid] = PatentRecord(
            patent_id=pid,
            title=row.get(cols.title, ""),
            abstract=row.get(cols.abstract, ""),
            claims=row.get(cols.claims, ""),
            description=row.get(cols.description, ""),
            family_id=row.get(cols.family_id, ""),
            grant_date=grant_date,
        )

    unmatched_cpc = 0
    if "cpc" in files:
        for row in _read_tsv(files["cpc"], "cpc", required=(cols.cpc_patent_id, cols.cpc_code)):
            pid = row[cols.cpc_patent_id].strip()
            if pid not in records:
                unmatched_cpc += 1
                continue
            records[pid].cpc_codes.append(CpcCode.parse(row[cols.cpc_code]))

    unmatched_cit = 0
    if "citations" in files:
        for row in _read_tsv(
            files["citations"], "citations", required=(cols.citation_patent_id, cols.citation_cited_id)
        ):
            pid = row[cols.citation_patent_id].strip()
            if pid not in records:
                unmatched_cit += 1
                continue
            records[pid].citations.append(row[cols.citation_cited_id].strip())

    return TsvIngestResult(
        records=list(records.values()),
        unmatched_cpc_rows=unmatched_cpc,
        unmatched_citation_rows=unmatched_cit,
    )


# ---------------------------------------------------------------------------
# Store
# ---------------------------------------------------------------------------


class CorpusStore:
    """Immutable record set plus an append-only label sidecar.

    Records never change after construction; label appends are serialized
    through a lock so concurrent readers always see a consistent store.
    """

    def __init__(
        self,
        records: Iterable[PatentRecord] = (),
        labels: Iterable[LabeledExample] = (),
        source: str = "memory",
    ):
        self.records: dict[str, PatentRecord] = {}
        for rec in records:
            if rec.patent_id in self.records:
                raise RecordValidationError(f"duplicate patent_id {rec.patent_id!r}")
            self.records[rec.patent_id] = rec
        self.labels: dict[str, LabeledExample] = {}
        self._label_lock = threading.Lock()
        for ex in labels:
            self.add_label(ex)
        self.source = source

    def __contains__(self, patent_id: str) -> bool:
        return patent_id in self.records

    def __len__(self) -> int:
        return len(self.records)

    def get(self, patent_id: str) -> PatentRecord:
        try:
            return self.records[patent_id]
        except KeyError:
            raise UnknownIdError(patent_id) from None

    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.records))

    def add_label(self, example: LabeledExample) -> None:
        with self._label_lock:
            if example.patent_id not in self.records:
                raise UnknownIdError(example.patent_id)
            if example.patent_id in self.labels:
                from .errors import LabelConflictError

                raise LabelConflictError(example.patent_id, self.labels[example.patent_id])
            self.labels[example.patent_id] = example

    @property
    def counts(self) -> dict[str, int]:
        return {"records": len(self.records), "labels": len(self.labels)}

    @property
    def provenance(self) -> dict:
        return {"source": self.source, **self.counts}

    def validate_all(self) -> dict[str, list[str]]:
        """Per-record violations for every record that has any."""
        out = {}
        for pid in sorted(self.records):
            v = validate(self.records[pid])
            if v:
                out[pid] = v
        return out

    # Persistence: patents.jsonl + sidecar labels.jsonl in a directory.

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "patents.jsonl").write_text(
            serialize_jsonl(self.records[pid] for pid in sorted(self.records)),
            encoding="utf-8",
        )
        (directory / "labels.jsonl").write_text(
            serialize_labels_jsonl(self.labels[pid] for pid in sorted(self.labels)),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, directory: str | Path) -> "CorpusStore":
        directory = Path(directory)
        with open(directory / "patents.jsonl", "rb") as f:
            records = parse_jsonl(f)
        labels_path = directory / "labels.jsonl"
        labels: list[LabeledExample] = []
        if labels_path.exists():
            with open(labels_path, "rb") as f:
                labels = parse_labels_jsonl(f)
        return cls(records, labels, source=str(directory))
