"""Coauthorship corpora: JSON Lines loading, random-walk sampling, synthesis.

A corpus is a bipartite graph between papers and authors. Each paper carries a
citation count which later becomes cochain weight on the coauthorship complex.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "CorpusError",
    "PaperRecord",
    "BipartiteGraph",
    "load_corpus",
    "save_corpus",
    "random_walk_sample",
    "synth_corpus",
]


class CorpusError(ValueError):
    """Malformed or inconsistent corpus data."""


@dataclass(frozen=True)
class PaperRecord:
    id: str
    authors: tuple[str, ...]
    citations: int

    def __post_init__(self):
        if not self.authors:
            raise CorpusError(f"paper {self.id!r} has an empty author list")
        if len(set(self.authors)) != len(self.authors):
            raise CorpusError(f"paper {self.id!r} lists duplicate authors")
        if self.citations < 0:
            raise CorpusError(f"paper {self.id!r} has negative citations")

    @property
    def author_set(self) -> frozenset[str]:
        return frozenset(self.authors)


@dataclass(frozen=True)
class BipartiteGraph:
    papers: tuple[PaperRecord, ...]

    def __post_init__(self):
        seen = set()
        for p in self.papers:
            if p.id in seen:
                raise CorpusError(f"duplicate paper id {p.id!r}")
            seen.add(p.id)

    @cached_property
    def authors(self) -> frozenset[str]:
        out: set[str] = set()
        for p in self.papers:
            out.update(p.authors)
        return frozenset(out)

    @cached_property
    def author_index(self) -> dict[str, tuple[int, ...]]:
        """Map author id -> indices of papers that list the author."""
        idx: dict[str, list[int]] = {}
        for i, p in enumerate(self.papers):
            for a in p.authors:
                idx.setdefault(a, []).append(i)
        return {a: tuple(v) for a, v in idx.items()}

    def __len__(self) -> int:
        return len(self.papers)


def _parse_record(obj: dict, lineno: int) -> PaperRecord:
    try:
        pid = obj["id"]
        authors = obj["authors"]
        citations = obj["citations"]
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"line {lineno}: missing field {exc}") from exc
    if not isinstance(pid, str) or not isinstance(authors, list):
        raise CorpusError(f"line {lineno}: bad field types")
    if not isinstance(citations, int) or isinstance(citations, bool):
        raise CorpusError(f"line {lineno}: citations must be an integer")
    try:
        return PaperRecord(pid, tuple(authors), citations)
    except CorpusError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from exc


def load_corpus(path) -> BipartiteGraph:
    """Read a JSON Lines corpus: one object per line with id/authors/citations."""
    papers = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            papers.append(_parse_record(obj, lineno))
    return BipartiteGraph(tuple(papers))


def save_corpus(g: BipartiteGraph, path) -> None:
    """Write a corpus as JSON Lines, preserving paper order."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in g.papers:
            fh.write(json.dumps(
                {"id": p.id, "authors": list(p.authors), "citations": p.citations},
                separators=(", ", ": ")) + "\n")


def random_walk_sample(g: BipartiteGraph, n_papers: int, cite_min: int,
                       cite_max: int, seed: int) -> BipartiteGraph:
    """Sample a connected-biased subgraph by walking paper -> author -> paper.

    Only papers with citations in [cite_min, cite_max] are visitable. From the
    current paper a uniform random author is drawn, then a uniform random
    eligible unvisited paper of that author; dead ends restart the walk at a
    uniform random eligible unvisited paper.
    """
    if cite_min > cite_max:
        raise CorpusError("cite_min must not exceed cite_max")
    eligible = [i for i, p in enumerate(g.papers)
                if cite_min <= p.citations <= cite_max]
    if not eligible:
        raise CorpusError("no paper satisfies the citation bounds")
    eligible_set = set(eligible)
    rng = np.random.default_rng(seed)

    visited: list[int] = []
    visited_set: set[int] = set()
    current = eligible[rng.integers(len(eligible))]

    while len(visited) < n_papers:
        visited.append(current)
        visited_set.add(current)
        if len(visited_set) == len(eligible_set):
            break
        paper = g.papers[current]
        candidates: list[int] = []
        author = paper.authors[rng.integers(len(paper.authors))]
        candidates = [j for j in g.author_index[author]
                      if j in eligible_set and j not in visited_set]
        if candidates:
            current = candidates[rng.integers(len(candidates))]
        else:
            rest = [j for j in eligible if j not in visited_set]
            current = rest[rng.integers(len(rest))]

    return BipartiteGraph(tuple(g.papers[i] for i in visited))


def synth_corpus(n_authors: int, n_papers: int, max_coauthors: int,
                 cite_max: int, seed: int,
                 community_size: int | None = None) -> BipartiteGraph:
    """Generate a ground-truth corpus with uniformly sized author sets.

    Author sets are drawn within communities (default size 2 * max_coauthors)
    so coauthorships overlap the way real collaboration data does; sizes and
    citations stay uniform. Guarantees at least one paper with max_coauthors
    authors so the complex built from the corpus reaches order
    max_coauthors - 1.
    """
    if max_coauthors < 1:
        raise CorpusError("max_coauthors must be at least 1")
    if n_authors < max_coauthors:
        raise CorpusError("n_authors must be at least max_coauthors")
    if n_papers < 1:
        raise CorpusError("n_papers must be at least 1")
    if cite_max < 1:
        raise CorpusError("cite_max must be at least 1")
    if community_size is None:
        community_size = 2 * max_coauthors
    community_size = max(community_size, max_coauthors)

    rng = np.random.default_rng(seed)
    width = max(3, len(str(n_authors - 1)))
    authors = [f"a{i:0{width}d}" for i in range(n_authors)]
    n_comm = max(1, n_authors // community_size)
    papers = []
    for i in range(n_papers):
        size = max_coauthors if i == 0 else int(rng.integers(1, max_coauthors + 1))
        lo = int(rng.integers(n_comm)) * community_size
        hi = min(n_authors, lo + community_size)
        members = lo + rng.choice(hi - lo, size=min(size, hi - lo), replace=False)
        papers.append(PaperRecord(
            id=f"p{i:04d}",
            authors=tuple(sorted(authors[j] for j in members)),
            citations=int(rng.integers(1, cite_max + 1)),
        ))
    return BipartiteGraph(tuple(papers))
