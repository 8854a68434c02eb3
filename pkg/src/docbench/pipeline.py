"""Corpus-scale evaluation runs.

A run walks the ground-truth index, plans one evaluation unit per
(page, label) pair present in the ground truth, locates the corresponding
tool output file, scores it, and appends one JSON line per unit to a journal.
Reruns skip units already journalled, so an interrupted run resumes where it
stopped. Unit order is deterministic (sorted by page key, then label) and
independent of the worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .corpus import (DEFAULT_KEY_PATTERN, DEFAULT_LABELS, CorpusIndex,
                     DocumentKey, PageKey, index_corpus, parse_gt_page,
                     sample_by_month, validate_label)
from .errors import AdapterError, ConfigError
from .interchange import (AdapterConfig, ExtractionRecord, parse_json_extraction,
                          parse_plaintext, parse_table_csv, parse_xml_extraction,
                          restrict_units)
from .metrics import DEFAULT_MATCH, DocumentScores, MatchConfig, score_document

logger = logging.getLogger(__name__)

HARNESS_NAME = "docbench"
HARNESS_VERSION = "0.1.0"
JOURNAL_FORMAT_VERSION = 1

STATUS_SCORED = "scored"
STATUS_MISSING = "tool_output_missing"
STATUS_ERROR = "tool_error_artifact"


@dataclass(frozen=True)
class RunConfig:
    output_root: Path
    adapter: AdapterConfig
    labels: tuple[str, ...]
    gt_root: Path | None = None
    match: MatchConfig = DEFAULT_MATCH
    vocabulary: frozenset[str] = DEFAULT_LABELS
    key_pattern: str = DEFAULT_KEY_PATTERN
    sample: tuple[str, str] | None = None
    parallelism: int = 1

    def __post_init__(self):
        if not self.labels:
            raise ConfigError("no labels selected")
        for label in self.labels:
            validate_label(label)
            if label not in self.vocabulary:
                raise ConfigError(f"label outside vocabulary: {label!r}")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1: {self.parallelism}")


@dataclass(frozen=True)
class EvaluationUnit:
    key: PageKey
    label: str
    gt_tokens: tuple[str, ...]
    gt_path: Path | None = None


@dataclass(frozen=True)
class UnitResult:
    key: PageKey
    label: str
    status: str
    scores: DocumentScores


def config_hash(config: RunConfig) -> str:
    """Fingerprint of everything that can change scores.

    Filesystem roots and the worker count are deliberately excluded: moving
    a corpus or changing --jobs must not invalidate a journal.
    """
    payload = {
        "labels": sorted(config.labels),
        "threshold": config.match.threshold,
        "substitution_cost": config.match.substitution_cost,
        "case_sensitive": config.match.case_sensitive,
        "normalize_nfc": config.match.normalize_nfc,
        "adapter": {
            "tool": config.adapter.tool,
            "format": config.adapter.format,
            "scope": config.adapter.scope,
            "selectors": dict(sorted(config.adapter.selector_map.items())),
            "path_template": config.adapter.effective_path_template,
        },
        "sample": list(config.sample) if config.sample else None,
        "key_pattern": config.key_pattern,
    }
    digest = hashlib.sha256(
        json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8"))
    return digest.hexdigest()[:12]


def plan_units(index: CorpusIndex, config: RunConfig) -> list[EvaluationUnit]:
    """All evaluation units, sorted by page key then label.

    The unit population depends only on the ground truth, never on tool
    output; a unit exists exactly when the page has tokens for the label.
    """
    wanted = sorted(set(config.labels))
    for label in wanted:
        if label not in index.vocabulary:
            logger.warning("label %r is outside the index vocabulary; "
                           "no units will be planned for it", label)
    keys: set[PageKey] = set()
    for label in wanted:
        keys |= index.pages_with_label(label)
    if config.sample:
        keys &= sample_by_month(index, *config.sample)
    units: list[EvaluationUnit] = []
    for key in sorted(keys):
        page = parse_gt_page(index.entries[key], index.vocabulary,
                             config.key_pattern, strict=False,
                             nfc=config.match.normalize_nfc)
        for label in wanted:
            gt_tokens = page.tokens_for_label(label)
            if gt_tokens:
                units.append(EvaluationUnit(key, label, gt_tokens, page.source_path))
    return units


class _DocumentCache:
    """Parsed document-scope records, shared across a run's workers."""

    def __init__(self):
        self._lock = threading.Lock()
        self._records: dict[tuple[Path, str], ExtractionRecord] = {}

    def get_or_parse(self, path: Path, label: str, parse) -> ExtractionRecord:
        cache_key = (path, label)
        with self._lock:
            if cache_key in self._records:
                return self._records[cache_key]
        record = parse()
        with self._lock:
            self._records.setdefault(cache_key, record)
            return self._records[cache_key]


def _run_adapter(path: Path, adapter: AdapterConfig, label: str,
                 key: PageKey | DocumentKey) -> ExtractionRecord:
    if adapter.format == "xml":
        return parse_xml_extraction(path, adapter, label, key=key)[0]
    if adapter.format == "json":
        return parse_json_extraction(path, adapter, label, key=key)[0]
    if adapter.format == "csv":
        return parse_table_csv(path, tool=adapter.tool, key=key)[0]
    return parse_plaintext(path, adapter, label, key=key)[0]


def resolve_output(
    unit: EvaluationUnit,
    config: RunConfig,
    cache: _DocumentCache | None = None,
) -> tuple[ExtractionRecord | None, str]:
    """Locate and parse the tool's output for a unit.

    Returns (record, status). The record is None unless status is 'scored'.
    Document-scope output is parsed once per document and then restricted to
    the items this unit's page-level ground truth covers.
    """
    adapter = config.adapter
    template = adapter.effective_path_template
    if adapter.scope == "document":
        relative = template.format(doc=unit.key.document_id)
        record_key: PageKey | DocumentKey = DocumentKey(unit.key.document_id)
    else:
        relative = template.format(doc=unit.key.document_id,
                                   page=unit.key.page_index)
        record_key = unit.key
    path = Path(config.output_root) / relative
    if not path.is_file():
        return None, STATUS_MISSING

    def parse() -> ExtractionRecord:
        return _run_adapter(path, adapter, unit.label, record_key)

    try:
        if adapter.scope == "document":
            record = cache.get_or_parse(path, unit.label, parse) if cache else parse()
            restricted = restrict_units(record.units, unit.gt_tokens, config.match)
            record = ExtractionRecord(record.tool, record.key, record.label,
                                      restricted, record.source_path, record.flags)
        else:
            record = parse()
    except AdapterError as exc:
        logger.warning("unreadable tool output for %s/%s: %s",
                       unit.key, unit.label, exc)
        return None, STATUS_ERROR
    return record, STATUS_SCORED


def score_unit(unit: EvaluationUnit, config: RunConfig,
               cache: _DocumentCache | None = None) -> UnitResult:
    record, status = resolve_output(unit, config, cache)
    tokens: tuple[str, ...] = record.tokens if record is not None else ()
    scores = score_document(tokens, unit.gt_tokens, config.match)
    return UnitResult(unit.key, unit.label, status, scores)


def unit_result_to_line(result: UnitResult) -> str:
    """One journal line; score fields carry exactly six decimals."""
    s = result.scores
    return (
        '{"doc":%s,"page":%d,"label":%s,"status":%s,'
        '"p":%.6f,"r":%.6f,"f1":%.6f,"acc":%.6f,"m":%d,"n":%d}' % (
            json.dumps(result.key.document_id, ensure_ascii=False),
            result.key.page_index,
            json.dumps(result.label, ensure_ascii=False),
            json.dumps(result.status, ensure_ascii=False),
            s.precision, s.recall, s.f1, s.accuracy, s.m, s.n,
        ))


def _result_from_payload(payload: dict) -> UnitResult:
    m = int(payload["m"])
    n = int(payload["n"])
    p = float(payload["p"])
    r = float(payload["r"])
    scores = DocumentScores(
        precision=p,
        recall=r,
        f1=float(payload["f1"]),
        accuracy=float(payload["acc"]),
        # journal lines do not store match counts; reconstruct them
        matched_extracted=round(p * m),
        matched_gt=round(r * n),
        m=m,
        n=n,
    )
    return UnitResult(PageKey(payload["doc"], int(payload["page"])),
                      payload["label"], payload["status"], scores)


def journal_header(config: RunConfig) -> str:
    return json.dumps({
        "kind": "header",
        "format_version": JOURNAL_FORMAT_VERSION,
        "harness": HARNESS_NAME,
        "version": HARNESS_VERSION,
        "tool": config.adapter.tool,
        "config": config_hash(config),
    }, ensure_ascii=False, separators=(",", ":"))


def read_journal(path: str | Path) -> tuple[dict | None, list[UnitResult]]:
    """Parse a journal; returns (header or None, results in file order)."""
    header = None
    results: list[UnitResult] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError:
                logger.warning("skipping malformed journal line %d", line_no)
                continue
            if payload.get("kind") == "header":
                header = payload
                continue
            results.append(_result_from_payload(payload))
    return header, results


def evaluate_run(
    config: RunConfig,
    index: CorpusIndex | None = None,
    journal_path: str | Path | None = None,
) -> Iterator[UnitResult]:
    """Score every planned unit, yielding results in deterministic unit order.

    With a journal path, previously journalled units are not recomputed and
    new results are appended as they complete; the yielded stream always
    covers all units. Worker count changes neither results nor bytes.
    """
    if index is None:
        if config.gt_root is None:
            raise ConfigError("need either an index or a ground-truth root")
        index = index_corpus(config.gt_root, config.vocabulary, config.key_pattern)
    units = plan_units(index, config)

    done: dict[tuple[str, int, str], UnitResult] = {}
    journal_file = None
    expected_hash = config_hash(config)
    if journal_path is not None:
        journal_path = Path(journal_path)
        if journal_path.exists() and journal_path.stat().st_size > 0:
            header, previous = read_journal(journal_path)
            if header is not None and header.get("config") != expected_hash:
                raise ConfigError(
                    f"journal {journal_path} was written with config "
                    f"{header.get('config')!r}, current config is "
                    f"{expected_hash!r}")
            for result in previous:
                done[(result.key.document_id, result.key.page_index,
                      result.label)] = result
            journal_file = open(journal_path, "a", encoding="utf-8")
        else:
            journal_file = open(journal_path, "w", encoding="utf-8")
            journal_file.write(journal_header(config) + "\n")
            journal_file.flush()

    cache = _DocumentCache()
    pending = [u for u in units
               if (u.key.document_id, u.key.page_index, u.label) not in done]

    def compute(unit: EvaluationUnit) -> UnitResult:
        return score_unit(unit, config, cache)

    try:
        if config.parallelism == 1 or not pending:
            fresh: Iterable[UnitResult] = map(compute, pending)
            yield from _merge(units, done, fresh, journal_file)
        else:
            with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
                yield from _merge(units, done, pool.map(compute, pending),
                                  journal_file)
    finally:
        if journal_file is not None:
            journal_file.close()


def _merge(units, done, fresh, journal_file) -> Iterator[UnitResult]:
    fresh_iter = iter(fresh)
    for unit in units:
        key = (unit.key.document_id, unit.key.page_index, unit.label)
        if key in done:
            yield done[key]
            continue
        result = next(fresh_iter)
        if journal_file is not None:
            journal_file.write(unit_result_to_line(result) + "\n")
            journal_file.flush()
        yield result


def zero_score_labels(results: Iterable[UnitResult]) -> frozenset[str]:
    """Labels whose every unit scored zero F1.

    Intended for a two-phase workflow: evaluate a small sample, drop the
    labels this reports, then run the full corpus on the rest.
    """
    seen: dict[str, bool] = {}
    for result in results:
        nonzero = result.scores.f1 > 0.0
        seen[result.label] = seen.get(result.label, False) or nonzero
    return frozenset(label for label, any_hit in seen.items() if not any_hit)
