"""Corpus ingestion: tokenization, log-tf features, and binary topic labels.

Documents arrive either in a canonical JSONL interchange format or through
adapters for two public moderation corpora (Wikipedia attack comments and
ASKfm cyberbullying pairs).  A loaded :class:`Dataset` is immutable and can
be shared freely across worker processes.
"""

from __future__ import annotations

import csv
import json
import math
import re
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "AnnotationRecord",
    "Dataset",
    "Document",
    "LoadError",
    "Topic",
    "Vocabulary",
    "aggregate_label",
    "convert_askfm",
    "convert_wikipedia",
    "featurize",
    "load_dataset",
    "prevalence",
    "tokenize",
]


class LoadError(ValueError):
    """Raised when an input corpus file violates its schema."""


# ---------------------------------------------------------------------------
# tokenization and features
# ---------------------------------------------------------------------------

# ASCII separators: whitespace plus every ASCII punctuation character.
_ASCII_SPLIT = re.compile(r"[\s!-/:-@\[-`{-~]+")
_ASCII_PUNCT = frozenset(string.punctuation)


def _is_separator(ch: str) -> bool:
    if ch.isspace() or ch in _ASCII_PUNCT:
        return True
    return unicodedata.category(ch)[0] in ("P", "S")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace, punctuation, and symbol codepoints.

    Separators are discarded; empty strings never appear in the output.
    """
    text = text.lower()
    if text.isascii():
        return [t for t in _ASCII_SPLIT.split(text) if t]
    tokens = []
    current: list[str] = []
    for ch in text:
        if _is_separator(ch):
            if current:
                tokens.append("".join(current))
                current = []
        else:
            current.append(ch)
    if current:
        tokens.append("".join(current))
    return tokens


class Vocabulary:
    """Bijective term → id map with insertion-ordered, 0-based ids."""

    def __init__(self) -> None:
        self._ids: dict[str, int] = {}

    def add(self, term: str) -> int:
        """Return the id for ``term``, assigning the next free id if new."""
        term_id = self._ids.get(term)
        if term_id is None:
            term_id = len(self._ids)
            self._ids[term] = term_id
        return term_id

    def id_of(self, term: str) -> int | None:
        return self._ids.get(term)

    def __contains__(self, term: str) -> bool:
        return term in self._ids

    def __len__(self) -> int:
        return len(self._ids)

    def terms(self) -> Iterator[str]:
        return iter(self._ids)


def featurize(tokens: Sequence[str], vocab: Vocabulary, *, grow: bool = False) -> dict[int, float]:
    """Map tokens to a sparse ``term_id -> 1 + ln(tf)`` weight map.

    With ``grow=True`` unseen terms are added to ``vocab`` (corpus build);
    otherwise they are dropped (out-of-vocabulary at inference).
    """
    features: dict[int, float] = {}
    for term, tf in Counter(tokens).items():
        if grow:
            term_id = vocab.add(term)
        else:
            term_id = vocab.id_of(term)
            if term_id is None:
                continue
        features[term_id] = 1.0 + math.log(tf)
    return features


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Document:
    doc_id: int
    text: str
    features: dict[int, float]


@dataclass(frozen=True)
class Topic:
    """A binary classification task over the whole document universe."""

    name: str
    positives: frozenset[int]
    n_docs: int

    @property
    def prevalence(self) -> float:
        return len(self.positives) / self.n_docs

    @property
    def usable(self) -> bool:
        """True when the topic has at least one positive and one negative."""
        return 0 < len(self.positives) < self.n_docs

    def label(self, doc_id: int) -> bool:
        return doc_id in self.positives


@dataclass(frozen=True)
class AnnotationRecord:
    """One document's per-annotator categorical labels."""

    doc_id: int
    labels: tuple[str, ...]
    annotator_count: int

    def __post_init__(self) -> None:
        if len(self.labels) != self.annotator_count:
            raise ValueError(
                f"doc {self.doc_id}: {len(self.labels)} labels recorded "
                f"but annotator count is {self.annotator_count}"
            )


def aggregate_label(
    record: AnnotationRecord,
    positive_classes: frozenset[str] | set[str],
    threshold: int,
    known_classes: frozenset[str] | set[str] | None = None,
) -> bool:
    """Reduce per-annotator labels to one binary label by vote threshold.

    Positive iff at least ``threshold`` annotators chose a class in
    ``positive_classes``.  When ``known_classes`` is given, any label outside
    it raises :class:`LoadError` naming the document.
    """
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    votes = 0
    for label in record.labels:
        if known_classes is not None and label not in known_classes:
            raise LoadError(f"doc {record.doc_id}: unknown annotation class {label!r}")
        if label in positive_classes:
            votes += 1
    return votes >= threshold


class Dataset:
    """An immutable labeled corpus with cached feature matrix and label arrays.

    Documents keep their file order; that order defines the rows of
    :meth:`feature_matrix` and the entries of :meth:`label_array`.
    """

    def __init__(
        self,
        name: str,
        documents: list[Document],
        topics: list[Topic],
        vocabulary: Vocabulary,
    ) -> None:
        if not documents:
            raise LoadError("dataset contains no documents")
        ids = [d.doc_id for d in documents]
        if len(set(ids)) != len(ids):
            raise LoadError("duplicate doc_id in dataset")
        n = len(documents)
        for topic in topics:
            if topic.n_docs != n or not topic.positives <= set(ids):
                raise LoadError(f"topic {topic.name!r} does not cover the document universe")
        self.name = name
        self.documents = documents
        self.topics = topics
        self.vocabulary = vocabulary
        self._by_name = {t.name: t for t in topics}
        self.doc_ids = np.asarray(ids, dtype=np.int64)
        self.row_of = {doc_id: row for row, doc_id in enumerate(ids)}
        self._matrix: sp.csr_matrix | None = None
        self._labels: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.documents)

    def topic(self, name: str) -> Topic:
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"no topic named {name!r} in dataset {self.name!r}") from None

    def topic_names(self) -> list[str]:
        return [t.name for t in self.topics]

    def feature_matrix(self) -> sp.csr_matrix:
        """CSR matrix of log-tf weights, one row per document."""
        if self._matrix is None:
            indptr = [0]
            indices: list[int] = []
            data: list[float] = []
            for doc in self.documents:
                for term_id in sorted(doc.features):
                    indices.append(term_id)
                    data.append(doc.features[term_id])
                indptr.append(len(indices))
            self._matrix = sp.csr_matrix(
                (np.asarray(data), np.asarray(indices, dtype=np.int32), np.asarray(indptr)),
                shape=(len(self.documents), len(self.vocabulary)),
            )
        return self._matrix

    def label_array(self, topic_name: str) -> np.ndarray:
        """Boolean ground-truth array aligned with feature matrix rows."""
        if topic_name not in self._labels:
            positives = self.topic(topic_name).positives
            arr = np.fromiter(
                (d.doc_id in positives for d in self.documents), dtype=bool, count=len(self.documents)
            )
            arr.flags.writeable = False
            self._labels[topic_name] = arr
        return self._labels[topic_name]


def prevalence(topic: Topic) -> float:
    """Exact fraction of positive documents for the topic."""
    return topic.prevalence


# ---------------------------------------------------------------------------
# canonical JSONL
# ---------------------------------------------------------------------------


def _build_dataset(name: str, records: list[tuple[int, str, dict[str, bool]]]) -> Dataset:
    """Assemble a Dataset from (doc_id, text, labels) triples.

    Every record must carry the same topic-name set; callers validate that
    and duplicate ids so errors can point at input line numbers.
    """
    vocab = Vocabulary()
    documents = []
    topic_names = list(records[0][2])
    positives: dict[str, set[int]] = {t: set() for t in topic_names}
    for doc_id, text, labels in records:
        documents.append(Document(doc_id, text, featurize(tokenize(text), vocab, grow=True)))
        for topic_name, value in labels.items():
            if value:
                positives[topic_name].add(doc_id)
    n = len(documents)
    topics = [Topic(t, frozenset(positives[t]), n) for t in topic_names]
    return Dataset(name, documents, topics, vocab)


def _parse_jsonl_line(line: str, line_no: int, expected_topics: set[str] | None):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise LoadError(f"line {line_no}: invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise LoadError(f"line {line_no}: expected a JSON object")
    doc_id = obj.get("doc_id")
    if isinstance(doc_id, bool) or not isinstance(doc_id, int):
        raise LoadError(f"line {line_no}: doc_id must be an integer")
    text = obj.get("text")
    if not isinstance(text, str):
        raise LoadError(f"line {line_no}: text must be a string")
    labels = obj.get("labels")
    if not isinstance(labels, dict) or not labels:
        raise LoadError(f"line {line_no}: labels must be a non-empty object")
    if expected_topics is not None and set(labels) != expected_topics:
        raise LoadError(f"line {line_no}: label names differ from the first document's")
    parsed: dict[str, bool] = {}
    for topic_name, value in labels.items():
        if value not in (0, 1, True, False):
            raise LoadError(f"line {line_no}: label {topic_name!r} must be 0 or 1")
        parsed[topic_name] = bool(value)
    return doc_id, text, parsed


def _load_jsonl(path: Path) -> Dataset:
    records: list[tuple[int, str, dict[str, bool]]] = []
    seen: set[int] = set()
    expected: set[str] | None = None
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            doc_id, text, labels = _parse_jsonl_line(line, line_no, expected)
            if expected is None:
                expected = set(labels)
            if doc_id in seen:
                raise LoadError(f"line {line_no}: duplicate doc_id {doc_id}")
            seen.add(doc_id)
            records.append((doc_id, text, labels))
    if not records:
        raise LoadError(f"{path}: no documents")
    return _build_dataset(path.stem, records)


def _write_jsonl(records: Iterable[tuple[int, str, dict[str, bool]]], out_path: Path) -> int:
    count = 0
    with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
        for doc_id, text, labels in records:
            row = {
                "doc_id": doc_id,
                "text": text,
                "labels": {t: int(v) for t, v in labels.items()},
            }
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
            count += 1
    return count


# ---------------------------------------------------------------------------
# Wikipedia attack-comments adapter
# ---------------------------------------------------------------------------

# Per-annotator flags are reduced to one categorical class; when several
# flags are set the most specific target wins.
_WIKI_CLASS_PRIORITY = ("recipient", "third_party", "quotation", "other")
_WIKI_FLAG_COLUMNS = {
    "recipient": "recipient_attack",
    "third_party": "third_party_attack",
    "quotation": "quoting_attack",
    "other": "other_attack",
}
_WIKI_CLASSES = frozenset(_WIKI_CLASS_PRIORITY) | {"none"}

# topic name -> positive annotation classes
_WIKI_TOPICS = {
    "recipient_attack": frozenset({"recipient"}),
    "third_party_attack": frozenset({"third_party"}),
    "other_attack": frozenset({"other"}),
    "attack": frozenset(_WIKI_CLASS_PRIORITY),
}


def _wiki_annotator_class(row: dict[str, str], line_no: int) -> str:
    for cls in _WIKI_CLASS_PRIORITY:
        value = row[_WIKI_FLAG_COLUMNS[cls]]
        try:
            flag = float(value)
        except ValueError:
            raise LoadError(f"line {line_no}: non-numeric annotation flag {value!r}") from None
        if flag == 1.0:
            return cls
    return "none"


def _read_tsv(path: Path, required: Sequence[str]) -> Iterator[tuple[int, dict[str, str]]]:
    with open(path, encoding="utf-8") as handle:
        reader = csv.reader(handle, delimiter="\t", quoting=csv.QUOTE_NONE)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise LoadError(f"{path}: missing columns {missing}")
        index = {c: header.index(c) for c in header}
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise LoadError(f"{path}: line {line_no}: expected {len(header)} fields, got {len(row)}")
            yield line_no, {c: row[index[c]] for c in index}


def _wikipedia_records(directory: Path):
    comments_path = directory / "attack_annotated_comments.tsv"
    annotations_path = directory / "attack_annotations.tsv"
    for p in (comments_path, annotations_path):
        if not p.is_file():
            raise LoadError(f"missing expected file {p}")

    texts: dict[int, str] = {}
    order: list[int] = []
    for line_no, row in _read_tsv(comments_path, ["rev_id", "comment"]):
        try:
            rev_id = int(float(row["rev_id"]))
        except ValueError:
            raise LoadError(f"{comments_path}: line {line_no}: bad rev_id {row['rev_id']!r}") from None
        if rev_id in texts:
            raise LoadError(f"{comments_path}: line {line_no}: duplicate rev_id {rev_id}")
        text = row["comment"].replace("NEWLINE_TOKEN", " ").replace("TAB_TOKEN", " ")
        texts[rev_id] = text
        order.append(rev_id)

    votes: dict[int, list[str]] = {}
    required = ["rev_id"] + [_WIKI_FLAG_COLUMNS[c] for c in _WIKI_CLASS_PRIORITY]
    for line_no, row in _read_tsv(annotations_path, required):
        try:
            rev_id = int(float(row["rev_id"]))
        except ValueError:
            raise LoadError(f"{annotations_path}: line {line_no}: bad rev_id {row['rev_id']!r}") from None
        if rev_id not in texts:
            raise LoadError(f"{annotations_path}: line {line_no}: annotation for unknown rev_id {rev_id}")
        votes.setdefault(rev_id, []).append(_wiki_annotator_class(row, line_no))

    records = []
    for rev_id in order:
        labels_list = votes.get(rev_id)
        if not labels_list:
            raise LoadError(f"rev_id {rev_id} has a comment but no annotations")
        record = AnnotationRecord(rev_id, tuple(labels_list), len(labels_list))
        # majority vote for this document's annotator pool (5 of 8, 6 of 10, ...)
        threshold = len(labels_list) // 2 + 1
        labels = {
            topic: aggregate_label(record, classes, threshold, _WIKI_CLASSES)
            for topic, classes in _WIKI_TOPICS.items()
        }
        records.append((rev_id, texts[rev_id], labels))
    return records


# ---------------------------------------------------------------------------
# ASKfm pairs adapter
# ---------------------------------------------------------------------------

_ASKFM_TEXT_COLUMNS = ("utterance", "response")
_ASKFM_ROLE_COLUMNS = ("poster_role", "responder_role")
_ASKFM_ID_COLUMN = "id"


def _askfm_paths(path: Path) -> list[Path]:
    if path.is_dir():
        found = sorted(path.glob("*.csv"))
        if not found:
            raise LoadError(f"no .csv files in {path}")
        return found
    return [path]


def _askfm_records(path: Path):
    """Read utterance/response pair CSVs.

    Expected columns: ``id`` (optional), ``utterance``, ``response``,
    optional categorical ``poster_role``/``responder_role`` columns, and any
    number of 0/1 expression-type columns, each of which becomes a topic.
    Role columns expand to one topic per observed ``<side>_<role>`` value.
    """
    records: list[tuple[int, str, dict[str, str]]] = []
    flag_columns: list[str] | None = None
    role_columns: list[str] | None = None
    has_id = False
    next_id = 0
    for csv_path in _askfm_paths(path):
        with open(csv_path, encoding="utf-8", newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None:
                raise LoadError(f"{csv_path}: empty file")
            header = list(reader.fieldnames)
            for col in _ASKFM_TEXT_COLUMNS:
                if col not in header:
                    raise LoadError(f"{csv_path}: missing column {col!r}")
            file_roles = [c for c in _ASKFM_ROLE_COLUMNS if c in header]
            reserved = set(_ASKFM_TEXT_COLUMNS) | set(file_roles) | {_ASKFM_ID_COLUMN}
            file_flags = [c for c in header if c not in reserved]
            if flag_columns is None:
                flag_columns, role_columns = file_flags, file_roles
                has_id = _ASKFM_ID_COLUMN in header
            elif file_flags != flag_columns or file_roles != role_columns:
                raise LoadError(f"{csv_path}: columns differ from the first file")
            for line_no, row in enumerate(reader, start=2):
                if has_id:
                    try:
                        doc_id = int(row[_ASKFM_ID_COLUMN])
                    except (TypeError, ValueError):
                        raise LoadError(
                            f"{csv_path}: line {line_no}: bad id {row.get(_ASKFM_ID_COLUMN)!r}"
                        ) from None
                else:
                    doc_id = next_id
                    next_id += 1
                raw = {c: (row[c] or "").strip() for c in file_flags + file_roles}
                for col in file_flags:
                    if raw[col] not in ("0", "1"):
                        raise LoadError(
                            f"{csv_path}: line {line_no}: column {col!r} must be 0 or 1, got {raw[col]!r}"
                        )
                text = f"{row['utterance'] or ''}\n{row['response'] or ''}"
                records.append((doc_id, text, raw))

    assert flag_columns is not None and role_columns is not None
    # role topics are named for the values actually present, in sorted order
    role_topics: list[tuple[str, str, str]] = []
    for side in role_columns:
        values = sorted({raw[side] for _, _, raw in records if raw[side]})
        prefix = side.removesuffix("_role")
        role_topics.extend((f"{prefix}_{v}", side, v) for v in values)

    out = []
    for doc_id, text, raw in records:
        labels = {c: raw[c] == "1" for c in flag_columns}
        for topic_name, side, value in role_topics:
            labels[topic_name] = raw[side] == value
        out.append((doc_id, text, labels))
    return out


# ---------------------------------------------------------------------------
# public loading API
# ---------------------------------------------------------------------------

_FORMATS = ("canonical-jsonl", "wikipedia-attack", "askfm")


def load_dataset(path: str | Path, format: str = "canonical-jsonl") -> Dataset:
    """Load a labeled corpus.

    ``canonical-jsonl`` reads one document per line; ``wikipedia-attack``
    reads the two public annotation TSVs from a directory and builds four
    topics; ``askfm`` reads pair CSVs and builds one topic per annotation
    column.  Topics with zero positives load as-is; the workflow refuses
    them at run time.
    """
    path = Path(path)
    if format == "canonical-jsonl":
        return _load_jsonl(path)
    if format == "wikipedia-attack":
        records = _wikipedia_records(path)
        if not records:
            raise LoadError(f"{path}: no documents")
        return _build_dataset("wikipedia-attack", records)
    if format == "askfm":
        records = _askfm_records(path)
        if not records:
            raise LoadError(f"{path}: no documents")
        seen: set[int] = set()
        for doc_id, _, _ in records:
            if doc_id in seen:
                raise LoadError(f"duplicate doc id {doc_id} across askfm input")
            seen.add(doc_id)
        return _build_dataset("askfm", records)
    raise ValueError(f"unknown format {format!r}; expected one of {_FORMATS}")


def convert_wikipedia(in_dir: str | Path, out_path: str | Path) -> int:
    """Convert the Wikipedia attack TSV pair to canonical JSONL; returns doc count."""
    records = _wikipedia_records(Path(in_dir))
    return _write_jsonl(records, Path(out_path))


def convert_askfm(in_path: str | Path, out_path: str | Path) -> int:
    """Convert ASKfm pair CSVs to canonical JSONL; returns doc count."""
    records = _askfm_records(Path(in_path))
    return _write_jsonl(records, Path(out_path))
