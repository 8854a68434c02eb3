"""Ground-truth corpus handling for DocBank-style annotation files.

A corpus is a directory tree of UTF-8 plaintext files, one token per line.
Each line carries at least ten tab-separated fields:

    token  x0  y0  x1  y1  R  G  B  font  label

Extra trailing fields are ignored. Page identity (document id, page index) is
derived from the filename through a configurable regular expression.
"""

from __future__ import annotations

import functools
import json
import logging
import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, KeyParseError, MalformedRecord, UnknownLabel

logger = logging.getLogger(__name__)

DEFAULT_LABELS: frozenset[str] = frozenset({
    "abstract", "author", "caption", "equation", "figure", "footer",
    "list", "paragraph", "reference", "section", "table", "title",
})

# Annotation filenames embed a shard prefix, an arXiv-style id, the source
# name, and a trailing page index, e.g. 2.tar_1801.00617.gz_main_4.txt.
# The pattern is configurable because naming schemes vary between dumps.
DEFAULT_KEY_PATTERN = r"(?P<doc>\d{4}\.\d{4,5})(?:\D[^\t]*?)?_(?P<page>\d+)\.txt$"

GT_FIELD_COUNT = 10

_LABEL_RE = re.compile(r"^[a-z][a-z0-9_-]*$")
_MONTH_RE = re.compile(r"^\d{4}$")
_NEW_STYLE_ID_RE = re.compile(r"^(\d{4})\.")

INDEX_FORMAT_VERSION = 1


def validate_label(label: str) -> str:
    """Check label syntax (lowercase identifier); returns the label unchanged."""
    if not _LABEL_RE.match(label):
        raise ConfigError(f"invalid label syntax: {label!r}")
    return label


@dataclass(frozen=True, order=True)
class PageKey:
    document_id: str
    page_index: int

    def __post_init__(self):
        if not self.document_id:
            raise ValueError("document_id must be non-empty")
        if self.page_index < 0:
            raise ValueError("page_index must be >= 0")

    def __str__(self) -> str:
        return f"{self.document_id}:{self.page_index}"


@dataclass(frozen=True, order=True)
class DocumentKey:
    """Identity of a whole document, used by document-scoped tool output."""

    document_id: str

    def __str__(self) -> str:
        return self.document_id


@dataclass(frozen=True)
class GroundTruthToken:
    text: str
    x0: int
    y0: int
    x1: int
    y1: int
    r: int
    g: int
    b: int
    font_name: str
    label: str


@dataclass(frozen=True)
class ParseIssue:
    line_no: int
    kind: str  # "malformed" | "unknown-label" | "fractional-coordinate" | "decode"
    message: str


@dataclass(frozen=True)
class GroundTruthPage:
    key: PageKey
    tokens: tuple[GroundTruthToken, ...]
    source_path: Path | None = None
    issues: tuple[ParseIssue, ...] = ()

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(t.label for t in self.tokens)

    def tokens_for_label(self, label: str) -> tuple[str, ...]:
        """Token texts carrying the given label, in file order."""
        return tuple(t.text for t in self.tokens if t.label == label)


def _parse_coordinate(raw: str, name: str, line_no: int) -> tuple[int, ParseIssue | None]:
    raw = raw.strip()
    try:
        return int(raw), None
    except ValueError:
        pass
    try:
        value = float(raw)
    except ValueError:
        raise MalformedRecord(f"non-numeric {name}: {raw!r}", line_no) from None
    issue = ParseIssue(line_no, "fractional-coordinate",
                       f"{name}={raw} truncated to {int(value)}")
    return int(value), issue


def parse_gt_record(
    line: str,
    vocabulary: frozenset[str] = DEFAULT_LABELS,
    line_no: int = 0,
    nfc: bool = False,
) -> tuple[GroundTruthToken, tuple[ParseIssue, ...]]:
    """Parse one annotation line into a token plus any non-fatal warnings.

    Raises MalformedRecord for structural problems and UnknownLabel for a
    label outside the vocabulary; both carry the line number.
    """
    fields = line.rstrip("\n").split("\t")
    if len(fields) < GT_FIELD_COUNT:
        raise MalformedRecord(
            f"expected >= {GT_FIELD_COUNT} fields, got {len(fields)}", line_no)
    text = fields[0].strip()
    if not text:
        raise MalformedRecord("empty token text", line_no)
    if nfc:
        text = unicodedata.normalize("NFC", text)

    issues: list[ParseIssue] = []
    coords = []
    for raw, name in zip(fields[1:5], ("x0", "y0", "x1", "y1")):
        value, issue = _parse_coordinate(raw, name, line_no)
        coords.append(value)
        if issue:
            issues.append(issue)
    x0, y0, x1, y1 = coords
    if x0 > x1 or y0 > y1:
        raise MalformedRecord(f"inverted bbox ({x0},{y0},{x1},{y1})", line_no)

    rgb = []
    for raw, name in zip(fields[5:8], ("R", "G", "B")):
        try:
            channel = int(raw.strip())
        except ValueError:
            raise MalformedRecord(f"non-integer {name}: {raw!r}", line_no) from None
        if not 0 <= channel <= 255:
            raise MalformedRecord(f"{name} out of range: {channel}", line_no)
        rgb.append(channel)

    label = fields[9].strip()
    if label not in vocabulary:
        raise UnknownLabel(label, line_no)

    token = GroundTruthToken(text, x0, y0, x1, y1, rgb[0], rgb[1], rgb[2],
                             fields[8].strip(), label)
    return token, tuple(issues)


def format_gt_record(token: GroundTruthToken) -> str:
    """Inverse of parse_gt_record for well-formed tokens."""
    return "\t".join([
        token.text,
        str(token.x0), str(token.y0), str(token.x1), str(token.y1),
        str(token.r), str(token.g), str(token.b),
        token.font_name, token.label,
    ])


@functools.lru_cache(maxsize=64)
def _compiled_key_pattern(pattern: str) -> re.Pattern[str]:
    # Accept .NET-style (?<name>...) groups as well; translate to Python
    # syntax, leaving lookbehinds (?<= and (?<! alone.
    translated = re.sub(r"\(\?<(?![=!])", "(?P<", pattern)
    try:
        compiled = re.compile(translated)
    except re.error as exc:
        raise ConfigError(f"invalid key pattern: {exc}") from None
    for group in ("doc", "page"):
        if group not in compiled.groupindex:
            raise ConfigError(f"key pattern lacks a (?P<{group}>...) group")
    return compiled


def parse_page_key(filename: str | Path, pattern: str = DEFAULT_KEY_PATTERN) -> PageKey:
    """Derive (document id, page index) from an annotation filename."""
    name = Path(filename).name
    match = _compiled_key_pattern(pattern).search(name)
    if not match:
        raise KeyParseError(f"filename does not match key pattern: {name!r}")
    return PageKey(match.group("doc"), int(match.group("page")))


def parse_gt_page(
    path: str | Path,
    vocabulary: frozenset[str] = DEFAULT_LABELS,
    pattern: str = DEFAULT_KEY_PATTERN,
    strict: bool = False,
    nfc: bool = False,
) -> GroundTruthPage:
    """Parse one annotation file.

    Lenient mode (default) skips malformed lines and records them as issues
    on the returned page; strict mode raises on the first problem.
    """
    path = Path(path)
    key = parse_page_key(path.name, pattern)
    data = path.read_bytes()
    issues: list[ParseIssue] = []
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        if strict:
            raise
        text = data.decode("utf-8", errors="replace")
        issues.append(ParseIssue(0, "decode", f"lossy UTF-8 decode: {exc}"))

    tokens: list[GroundTruthToken] = []
    for line_no, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            token, warnings = parse_gt_record(line, vocabulary, line_no, nfc)
        except MalformedRecord as exc:
            if strict:
                raise
            issues.append(ParseIssue(exc.line_no, "malformed", str(exc)))
            continue
        except UnknownLabel as exc:
            if strict:
                raise
            issues.append(ParseIssue(exc.line_no, "unknown-label", str(exc)))
            continue
        tokens.append(token)
        issues.extend(warnings)
    return GroundTruthPage(key, tuple(tokens), path, tuple(issues))


@dataclass(frozen=True)
class CorpusIndex:
    entries: dict[PageKey, Path]
    label_presence: dict[str, frozenset[PageKey]]
    vocabulary: frozenset[str] = DEFAULT_LABELS
    skipped_files: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def pages_with_label(self, label: str) -> frozenset[PageKey]:
        return self.label_presence.get(label, frozenset())


def index_corpus(
    root: str | Path,
    vocabulary: frozenset[str] = DEFAULT_LABELS,
    pattern: str = DEFAULT_KEY_PATTERN,
) -> CorpusIndex:
    """Walk a corpus tree and record which labels occur on which pages.

    This is a fast pass over the label field only; it does not validate
    coordinates or colours. Files whose names do not match the key pattern
    are skipped with a warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"corpus root is not a directory: {root}")
    found: dict[PageKey, Path] = {}
    presence: dict[str, set[PageKey]] = {}
    skipped: list[str] = []
    for path in sorted(root.rglob("*.txt")):
        try:
            key = parse_page_key(path.name, pattern)
        except KeyParseError:
            skipped.append(path.name)
            logger.warning("skipping unrecognized filename: %s", path.name)
            continue
        found[key] = path
        with open(path, "rb") as handle:
            for raw in handle:
                fields = raw.decode("utf-8", errors="replace").rstrip("\n").split("\t")
                if len(fields) < GT_FIELD_COUNT:
                    continue
                label = fields[9].strip()
                if label in vocabulary:
                    presence.setdefault(label, set()).add(key)
    entries = {key: found[key] for key in sorted(found)}
    label_presence = {label: frozenset(keys) for label, keys in sorted(presence.items())}
    return CorpusIndex(entries, label_presence, vocabulary, tuple(skipped))


def filter_by_label(index: CorpusIndex, label: str) -> tuple[PageKey, ...]:
    """Pages containing at least one token with the given label, sorted."""
    if label not in index.vocabulary:
        raise UnknownLabel(label)
    return tuple(sorted(index.pages_with_label(label)))


def sample_by_month(index: CorpusIndex, from_month: str, to_month: str) -> frozenset[PageKey]:
    """Pages of documents whose id starts with a YYMM prefix inside the range.

    Document ids that do not follow the new-style arXiv convention
    (four leading digits, then a dot) are excluded with a warning.
    """
    for value in (from_month, to_month):
        if not _MONTH_RE.match(value) or not 1 <= int(value[2:]) <= 12:
            raise ConfigError(f"invalid YYMM month: {value!r}")
    if from_month > to_month:
        raise ConfigError(f"month range is inverted: {from_month} > {to_month}")
    keep: set[PageKey] = set()
    warned: set[str] = set()
    for key in index.entries:
        match = _NEW_STYLE_ID_RE.match(key.document_id)
        if not match:
            if key.document_id not in warned:
                warned.add(key.document_id)
                logger.warning("document id without YYMM prefix excluded "
                               "from sample: %s", key.document_id)
            continue
        if from_month <= match.group(1) <= to_month:
            keep.add(key)
    return frozenset(keep)


def save_index(index: CorpusIndex, path: str | Path) -> None:
    """Write the index to a versioned JSON cache."""
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "vocabulary": sorted(index.vocabulary),
        "entries": [
            {
                "doc": key.document_id,
                "page": key.page_index,
                "path": str(index.entries[key]),
                "labels": sorted(label for label, keys in index.label_presence.items()
                                 if key in keys),
            }
            for key in index.entries
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n",
                          encoding="utf-8")


def load_index(path: str | Path) -> CorpusIndex:
    """Load a JSON cache produced by save_index."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"index cache is not valid JSON: {exc}") from None
    if payload.get("format_version") != INDEX_FORMAT_VERSION:
        raise ConfigError(
            f"unsupported index format_version: {payload.get('format_version')!r}")
    entries: dict[PageKey, Path] = {}
    presence: dict[str, set[PageKey]] = {}
    for entry in payload["entries"]:
        key = PageKey(entry["doc"], int(entry["page"]))
        entries[key] = Path(entry["path"])
        for label in entry["labels"]:
            presence.setdefault(label, set()).add(key)
    entries = {key: entries[key] for key in sorted(entries)}
    label_presence = {label: frozenset(keys) for label, keys in sorted(presence.items())}
    return CorpusIndex(entries, label_presence, frozenset(payload["vocabulary"]))
