"""Token and text matching scores.

The matching procedure works on two views of an extraction result: the token
sequence (order-insensitive scores via a pairwise similarity matrix) and the
collated text, i.e. tokens joined by single spaces (order-sensitive score).

Similarity between two strings is the Levenshtein ratio

    ratio(a, b) = 1 - distance(a, b) / (len(a) + len(b))

where insertions and deletions cost 1 and a substitution costs 2 by default,
making a substitution exactly as expensive as a delete plus an insert.
Cost 1 is available as a configuration option.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _fastpath

EMPTY_EXTRACTION = "EmptyExtraction"
EMPTY_GROUND_TRUTH = "EmptyGroundTruth"

# Above this cell count the scalar distance routes through the compiled
# kernel; below it the interpreter is faster than the call overhead.
_KERNEL_CUTOFF_CELLS = 2048

TokenSequence = Sequence[str]


@dataclass(frozen=True)
class MatchConfig:
    threshold: float = 0.7
    substitution_cost: int = 2
    case_sensitive: bool = True
    normalize_nfc: bool = False

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be within [0, 1]: {self.threshold}")
        if self.substitution_cost not in (1, 2):
            raise ValueError(
                f"substitution_cost must be 1 or 2: {self.substitution_cost}")


DEFAULT_MATCH = MatchConfig()


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise ratios, extracted tokens as rows, ground-truth tokens as columns."""

    values: np.ndarray

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class DocumentScores:
    precision: float
    recall: float
    f1: float
    accuracy: float
    matched_extracted: int
    matched_gt: int
    m: int
    n: int
    flags: tuple[str, ...] = ()


def collate(tokens: TokenSequence) -> str:
    """Single-space join; the order-sensitive view of a token sequence."""
    return " ".join(tokens)


def _prepare(text: str, config: MatchConfig) -> str:
    if not config.case_sensitive:
        text = text.casefold()
    if config.normalize_nfc:
        text = unicodedata.normalize("NFC", text)
    return text


def _distance_py(a: str, b: str, substitution_cost: int) -> int:
    # Two-row DP; b indexes the columns.
    la, lb = len(a), len(b)
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        ca = a[i - 1]
        for j in range(1, lb + 1):
            best = prev[j - 1] + (0 if ca == b[j - 1] else substitution_cost)
            up = prev[j] + 1
            if up < best:
                best = up
            left = cur[j - 1] + 1
            if left < best:
                best = left
            cur[j] = best
        prev = cur
    return prev[lb]


def edit_distance(a: str, b: str, substitution_cost: int = 2) -> int:
    """Levenshtein distance; insertions and deletions cost 1."""
    if substitution_cost not in (1, 2):
        raise ValueError(f"substitution_cost must be 1 or 2: {substitution_cost}")
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if _fastpath.HAVE_NUMBA and len(a) * len(b) >= _KERNEL_CUTOFF_CELLS:
        return int(_fastpath.distance_kernel(
            _fastpath.encode_string(a), _fastpath.encode_string(b),
            substitution_cost))
    return _distance_py(a, b, substitution_cost)


def lev_ratio(a: str, b: str, config: MatchConfig = DEFAULT_MATCH) -> float:
    """Normalized similarity in [0, 1]; two empty strings count as identical."""
    a = _prepare(a, config)
    b = _prepare(b, config)
    if not a and not b:
        return 1.0
    return 1.0 - edit_distance(a, b, config.substitution_cost) / (len(a) + len(b))


def similarity_matrix(
    extracted: TokenSequence,
    gt: TokenSequence,
    config: MatchConfig = DEFAULT_MATCH,
) -> SimilarityMatrix:
    """All pairwise ratios between extracted and ground-truth tokens.

    Either side may be empty; the matrix then has a zero dimension.
    """
    ex = [_prepare(t, config) for t in extracted]
    gx = [_prepare(t, config) for t in gt]
    if not ex or not gx:
        return SimilarityMatrix(np.zeros((len(ex), len(gx)), dtype=np.float64))
    if _fastpath.HAVE_NUMBA:
        ea, el = _fastpath.encode_tokens(ex)
        ga, gl = _fastpath.encode_tokens(gx)
        values = _fastpath.matrix_kernel(ea, el, ga, gl, config.substitution_cost)
        return SimilarityMatrix(values)
    values = np.empty((len(ex), len(gx)), dtype=np.float64)
    for i, a in enumerate(ex):
        for j, b in enumerate(gx):
            if a == b:
                values[i, j] = 1.0
            else:
                dist = _distance_py(a, b, config.substitution_cost)
                values[i, j] = 1.0 - dist / (len(a) + len(b))
    return SimilarityMatrix(values)


def _qualifying(matrix: SimilarityMatrix, threshold: float) -> tuple[int, int]:
    """Counts of rows and columns whose best entry reaches the threshold."""
    if matrix.m == 0 or matrix.n == 0:
        return 0, 0
    rows = int((matrix.values.max(axis=1) >= threshold).sum())
    cols = int((matrix.values.max(axis=0) >= threshold).sum())
    return rows, cols


def precision(matrix: SimilarityMatrix, threshold: float = 0.7) -> float:
    """Fraction of extracted tokens with some ground-truth match (row maxima)."""
    if matrix.m == 0:
        return 0.0
    rows, _ = _qualifying(matrix, threshold)
    return min(1.0, rows / matrix.m)


def recall(matrix: SimilarityMatrix, threshold: float = 0.7) -> float:
    """Fraction of ground-truth tokens with some extracted match (column maxima)."""
    if matrix.n == 0:
        return 0.0
    _, cols = _qualifying(matrix, threshold)
    return min(1.0, cols / matrix.n)


def f1(p: float, r: float) -> float:
    """Harmonic mean; zero when both inputs are zero."""
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def accuracy(
    extracted_text: str,
    gt_text: str,
    config: MatchConfig = DEFAULT_MATCH,
) -> float:
    """Ratio over collated texts; the order-sensitive score."""
    return lev_ratio(extracted_text, gt_text, config)


def score_document(
    extracted,
    gt_tokens: TokenSequence,
    config: MatchConfig = DEFAULT_MATCH,
) -> DocumentScores:
    """Full score set for one evaluation unit.

    extracted may be an extraction record (anything with a .tokens attribute)
    or a bare token sequence.
    """
    tokens = getattr(extracted, "tokens", extracted)
    matrix = similarity_matrix(tokens, gt_tokens, config)
    rows, cols = _qualifying(matrix, config.threshold)
    p = min(1.0, rows / matrix.m) if matrix.m else 0.0
    r = min(1.0, cols / matrix.n) if matrix.n else 0.0
    acc = accuracy(collate(tokens), collate(gt_tokens), config)
    flags = []
    if matrix.m == 0:
        flags.append(EMPTY_EXTRACTION)
    if matrix.n == 0:
        flags.append(EMPTY_GROUND_TRUTH)
    return DocumentScores(
        precision=p,
        recall=r,
        f1=f1(p, r),
        accuracy=acc,
        matched_extracted=rows,
        matched_gt=cols,
        m=matrix.m,
        n=matrix.n,
        flags=tuple(flags),
    )
