import math
import random

import pytest

from skillweaver.knowledge import VectorIndex


def pure_cosine(a, b):
    """Independent cosine similarity: plain Python loops, no numpy."""
    dot = 0.0
    na = 0.0
    nb = 0.0
    for x, y in zip(a, b):
        dot += x * y
        na += x * x
        nb += y * y
    denom = math.sqrt(na) * math.sqrt(nb)
    if denom == 0.0:
        return 0.0
    return max(-1.0, min(1.0, dot / denom))


def brute_force_top_k(entries, query_vector, k):
    """Oracle ranking: score every chunk, sort by (-score, chunk_id).

    Scores compare at the contract's 1e-9 tie granularity.
    """
    scored = [(chunk_id, round(pure_cosine(query_vector, vector), 9))
              for chunk_id, vector in entries]
    scored.sort(key=lambda cs: (-cs[1], cs[0]))
    return [chunk_id for chunk_id, _ in scored[:k]]


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)


def make_vector_index(entries, embedder=None):
    index = VectorIndex(embedder=embedder)
    for chunk_id, vector in entries:
        index.add(chunk_id, doc_id=chunk_id.split(":")[0],
                  span=(0, 1), text=f"text for {chunk_id}", vector=vector)
    return index
