"""Instruction corpus loading, validation, and canonical text composition."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class CorpusError(ValueError):
    """A corpus file violates the record schema."""


@dataclass(frozen=True)
class InstructionRecord:
    """One corpus entry: an instruction, its answer, and an optional image reference."""

    id: str
    instruction: str
    answer: str = ""
    image_ref: str | None = None
    tag: str | None = None


@dataclass(frozen=True)
class Corpus:
    """Ordered, validated records plus the raw file lines they came from.

    Raw lines are retained so selection output can re-emit records
    byte-for-byte as they appeared in the source file.
    """

    records: tuple[InstructionRecord, ...]
    raw_lines: tuple[str, ...]
    source_path: str

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> tuple[str, ...]:
        return tuple(record.id for record in self.records)

    def record_by_id(self, record_id: str) -> InstructionRecord:
        try:
            return self.records[self.index_of(record_id)]
        except KeyError:
            raise KeyError(f"unknown record id: {record_id}") from None

    def index_of(self, record_id: str) -> int:
        index = self._id_index().get(record_id)
        if index is None:
            raise KeyError(record_id)
        return index

    def _id_index(self) -> dict[str, int]:
        cached = getattr(self, "_index_cache", None)
        if cached is None:
            cached = {record.id: i for i, record in enumerate(self.records)}
            object.__setattr__(self, "_index_cache", cached)
        return cached


def _require_string(obj: dict, field: str, line_no: int, *, optional: bool = False) -> str | None:
    value = obj.get(field)
    if value is None:
        if optional:
            return None
        raise CorpusError(f"line {line_no}: missing required field '{field}'")
    if not isinstance(value, str):
        raise CorpusError(f"line {line_no}: field '{field}' must be a string")
    return value


def parse_record(obj: dict, line_no: int) -> InstructionRecord:
    """Validate one decoded JSONL object into an InstructionRecord."""
    record_id = _require_string(obj, "id", line_no)
    if record_id == "":
        raise CorpusError(f"line {line_no}: field 'id' must be nonempty")
    instruction = _require_string(obj, "instruction", line_no)
    if instruction == "":
        raise CorpusError(f"line {line_no}: field 'instruction' must be nonempty")
    if not instruction.split():
        raise CorpusError(
            f"line {line_no}: instruction contains no word tokens (id '{record_id}')"
        )
    answer = _require_string(obj, "answer", line_no, optional=True) or ""
    image_ref = _require_string(obj, "image_ref", line_no, optional=True)
    tag = _require_string(obj, "tag", line_no, optional=True)
    return InstructionRecord(
        id=record_id, instruction=instruction, answer=answer, image_ref=image_ref, tag=tag
    )


def load_corpus(path: str | Path) -> Corpus:
    """Load a JSONL corpus, preserving file order.

    Aborts with a diagnostic naming the offending line on malformed JSON,
    missing/empty id or instruction, or duplicate ids.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc

    records: list[InstructionRecord] = []
    raw_lines: list[str] = []
    seen: dict[str, int] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise CorpusError(f"line {line_no}: record must be a JSON object")
        record = parse_record(obj, line_no)
        if record.id in seen:
            raise CorpusError(
                f"duplicate id '{record.id}' on lines {seen[record.id]} and {line_no}"
            )
        seen[record.id] = line_no
        records.append(record)
        raw_lines.append(line)
    return Corpus(records=tuple(records), raw_lines=tuple(raw_lines), source_path=str(path))


def composite_text(record: InstructionRecord, variant_instruction: str | None = None) -> str:
    """The single string submitted to a scoring embedding provider.

    Fixed template ``<image:{image_ref}>\\n{instruction}\\n{answer}`` with the
    image segment omitted when the record has no image reference. Field
    whitespace is preserved verbatim so embeddings are bit-stable functions
    of the record.
    """
    instruction = record.instruction if variant_instruction is None else variant_instruction
    parts: list[str] = []
    if record.image_ref is not None:
        parts.append(f"<image:{record.image_ref}>")
    parts.append(instruction)
    parts.append(record.answer)
    return "\n".join(parts)
