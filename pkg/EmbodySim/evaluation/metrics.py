"""Caption metrics: BLEU with epsilon smoothing and METEOR-lite."""

import math
from collections import Counter
from typing import List, Sequence, Tuple, Union

BLEU_EPSILON = 1e-9
METEOR_ALPHA = 0.9
METEOR_GAMMA = 0.5
METEOR_BETA = 3.0

Text = Union[str, Sequence[str]]


def tokens_of(text: Text) -> List[str]:
    if isinstance(text, str):
        return text.lower().split()
    return [t.lower() for t in text]


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def modified_precision(
    candidate: List[str], references: List[List[str]], n: int
) -> Tuple[int, int]:
    """Clipped n-gram matches and the candidate's n-gram total."""
    counts = ngrams(candidate, n)
    max_ref: Counter = Counter()
    for ref in references:
        for gram, count in ngrams(ref, n).items():
            max_ref[gram] = max(max_ref[gram], count)
    clipped = sum(min(count, max_ref[gram]) for gram, count in counts.items())
    return clipped, max(len(candidate) - n + 1, 0)


def closest_ref_length(candidate_length: int, references: List[List[str]]) -> int:
    """Reference length closest to the candidate's; ties go to the shorter one."""
    return min((abs(len(r) - candidate_length), len(r)) for r in references)[1]


def bleu(candidate: Text, references: Sequence[Text], max_n: int = 4) -> float:
    """Corpus-free sentence BLEU with uniform weights.

    p_n is the clipped n-gram precision, replaced by 1e-9 when no n-gram
    matches. The brevity penalty is exp(1 - r/c) when the candidate is not
    longer than the closest reference length r.

    Args:
        candidate: Sentence or token list
        references: One or more sentences or token lists
        max_n: Largest n-gram order, at least 1

    Returns:
        Score in [0, 1]

    Raises:
        ValueError: max_n < 1, empty candidate or no references
    """
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    cand = tokens_of(candidate)
    refs = [tokens_of(r) for r in references]
    if not cand:
        raise ValueError("candidate is empty")
    if not refs or not any(refs):
        raise ValueError("no non-empty reference")
    refs = [r for r in refs if r]

    log_total = 0.0
    for n in range(1, max_n + 1):
        clipped, total = modified_precision(cand, refs, n)
        precision = clipped / total if clipped else BLEU_EPSILON
        log_total += math.log(precision)
    c = len(cand)
    r = closest_ref_length(c, refs)
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return min(1.0, brevity * math.exp(log_total / max_n))


def align_unigrams(candidate: List[str], reference: List[str]) -> List[Tuple[int, int]]:
    """Exact-match alignment.

    Each candidate word takes the first unused equal reference word.
    """
    used = [False] * len(reference)
    pairs = []
    for i, word in enumerate(candidate):
        for j, ref_word in enumerate(reference):
            if not used[j] and ref_word == word:
                used[j] = True
                pairs.append((i, j))
                break
    return pairs


def count_chunks(pairs: List[Tuple[int, int]]) -> int:
    """Runs of alignments adjacent in both sentences."""
    chunks = 0
    previous = None
    for i, j in pairs:
        if previous is None or i != previous[0] + 1 or j != previous[1] + 1:
            chunks += 1
        previous = (i, j)
    return chunks


def meteor_single(candidate: List[str], reference: List[str]) -> float:
    pairs = align_unigrams(candidate, reference)
    matches = len(pairs)
    if not matches:
        return 0.0
    precision = matches / len(candidate)
    recall = matches / len(reference)
    f_mean = (
        precision
        * recall
        / (METEOR_ALPHA * precision + (1 - METEOR_ALPHA) * recall)
    )
    penalty = METEOR_GAMMA * (count_chunks(pairs) / matches) ** METEOR_BETA
    return f_mean * (1.0 - penalty)


def meteor_lite(candidate: Text, references: Sequence[Text]) -> float:
    """METEOR with exact unigram matching only; best score over the references.

    F_mean = 10PR / (R + 9P) and the fragmentation penalty is
    0.5 * (chunks / matches)^3.
    """
    cand = tokens_of(candidate)
    refs = [tokens_of(r) for r in references]
    if not cand or not refs:
        raise ValueError("meteor_lite needs a candidate and at least one reference")
    return max(meteor_single(cand, r) for r in refs if r) if any(refs) else 0.0
