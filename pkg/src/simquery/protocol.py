"""Teacher/student query protocol over the simplicial structure.

For a query simplex the student identifies its Laplacian-coupled support set
H at the query's order, keeps the strongest-coupled fraction for local
handling (G), and relies on the teacher for the remainder (T): the teacher
encodes its complete cochains and transmits the hidden rows of T through the
channel, which then replace the student's own encoding at those slots before
the generator runs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Channel
from .complexes import SimplicialComplex, Simplex, canonical, ComplexError
from .reduction import LaplacianSet
from .scae import ScaeModel

__all__ = [
    "MetricError",
    "KnowledgeState",
    "QueryContext",
    "QueryTrace",
    "initial_knowledge",
    "query_support",
    "student_split",
    "teacher_respond",
    "student_infer",
    "update_knowledge",
    "run_query",
    "accuracy",
]


class MetricError(ValueError):
    """Undefined metric (e.g. accuracy of an empty prediction list)."""


@dataclass
class KnowledgeState:
    """What the student holds: cochain values and cached received embeddings."""

    values: dict[Simplex, float] = field(default_factory=dict)
    received: dict[Simplex, np.ndarray] = field(default_factory=dict)

    def knows(self, s: Simplex) -> bool:
        return s in self.values or s in self.received

    def known_set(self) -> set[Simplex]:
        return set(self.values) | set(self.received)


def initial_knowledge(s: SimplicialComplex, fraction: float, seed: int) -> KnowledgeState:
    """Student state knowing a random fraction of all cochains exactly."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    everything = [sx for order in s.simplices for sx in order]
    rng = np.random.default_rng(seed)
    n_known = int(round(fraction * len(everything)))
    chosen = rng.choice(len(everything), size=n_known, replace=False)
    values = {everything[i]: s.cochain_of(everything[i])
              for i in np.sort(chosen)}
    return KnowledgeState(values=values)


@dataclass
class QueryContext:
    sigma_q: Simplex
    h: list[Simplex]
    g: list[Simplex]
    t: list[Simplex]
    p_local: float
    prediction: float | None = None
    truth: float | None = None


@dataclass
class QueryTrace:
    sigma_q: Simplex
    h_size: int
    g_size: int
    t_size: int
    symbols: int
    snr_db: float
    prediction: float
    truth: float
    correct: bool
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "sigma_q": list(self.sigma_q),
            "h": self.h_size, "g": self.g_size, "t": self.t_size,
            "symbols": self.symbols,
            "snr_db": None if math.isinf(self.snr_db) else self.snr_db,
            "prediction": self.prediction, "truth": self.truth,
            "correct": self.correct, "flags": self.flags,
        }
        return json.dumps(doc)


def _coupling_rank(ls: LaplacianSet, s: SimplicialComplex, sigma_q: Simplex):
    """(neighbor simplex, |normalized coupling|) pairs at the query's order."""
    k, idx = s.locate(sigma_q)
    row = ls.masked_normalized(k).getrow(idx)
    pairs = []
    for j, val in zip(row.indices, row.data):
        if j != idx and val != 0.0:
            pairs.append((s.simplices[k][j], abs(float(val))))
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return pairs


def query_support(s: SimplicialComplex, ls: LaplacianSet, sigma_q: Simplex) -> list[Simplex]:
    """The support set H: simplices Laplacian-coupled to the query at its order.

    These are the simplices whose cochains feed the convolutional prediction
    of the query slot; they are faces or coface-siblings of the query's
    supersets. Ordered by descending coupling strength.
    """
    return [sx for sx, _ in _coupling_rank(ls, s, sigma_q)]


def student_split(h: list[Simplex], sigma_q: Simplex, p_local: float,
                  ls: LaplacianSet, s: SimplicialComplex) -> tuple[list[Simplex], list[Simplex]]:
    """Partition H into locally handled G (top-coupled) and teacher-side T."""
    if not 0.0 <= p_local <= 1.0:
        raise ValueError("p_local must lie in [0, 1]")
    if not h:
        return [], []
    ranked = [sx for sx, _ in _coupling_rank(ls, s, sigma_q) if sx in set(h)]
    leftovers = [sx for sx in h if sx not in set(ranked)]
    ranked.extend(sorted(leftovers))
    n_local = math.ceil(p_local * len(ranked))
    return ranked[:n_local], ranked[n_local:]


def _teacher_encode(s: SimplicialComplex, ls: LaplacianSet, model: ScaeModel,
                    k: int, sigma_q: Simplex) -> np.ndarray:
    """Teacher-side hidden features at order k from its complete cochains.

    The query slot is overwritten with a mid-range placeholder so the encoding
    matches the masked-training distribution: every other slot carries its
    true value and the query slot is the one to be inferred.
    """
    scale = max(float(s.cochains[k].max()), 1.0)
    x = s.cochains[k] / scale
    kq, iq = s.locate(sigma_q)
    if kq == k:
        x = x.copy()
        x[iq] = (1.0 + scale) / (2.0 * scale)
    return model.encode(k, ls.conv_operator(k), x)


def teacher_respond(sigma_q: Simplex, t: list[Simplex], model: ScaeModel,
                    ls: LaplacianSet, s: SimplicialComplex, channel: Channel,
                    skip: set[Simplex] | None = None):
    """Encode and transmit embedding rows for the query and T; returns (rows, symbols).

    Whenever anything is delegated to the teacher (T non-empty), the teacher
    also answers the query slot itself. Simplices in `skip` (already received
    by the student) are not re-sent.
    """
    want = [sigma_q] + [sx for sx in t if sx != sigma_q] if t else []
    to_send = [sx for sx in want if skip is None or sx not in skip]
    if not to_send:
        return {}, 0
    orders = sorted({len(sx) - 1 for sx in to_send})
    hidden = {k: _teacher_encode(s, ls, model, k, sigma_q) for k in orders}
    payload = np.concatenate([
        hidden[len(sx) - 1][s.locate(sx)[1]] for sx in to_send])
    received = channel.transmit(payload)
    width = model.hp.width
    rows = {sx: received[i * width:(i + 1) * width]
            for i, sx in enumerate(to_send)}
    return rows, payload.size


def student_infer(sigma_q: Simplex, model: ScaeModel, ls: LaplacianSet,
                  s: SimplicialComplex, state: KnowledgeState,
                  g: list[Simplex], t: list[Simplex],
                  received: dict[Simplex, np.ndarray],
                  p_local: float,
                  rng: np.random.Generator) -> tuple[float, list[str]]:
    """Predict the query cochain from local knowledge plus received rows.

    The student builds the order-k input from the values it knows and handles
    locally (the G side of the split, plus everything outside the support
    set; placeholders elsewhere), encodes it, overwrites the hidden rows of T
    with the received embeddings, blends the query row with the teacher's
    answer row (weight 1 - p_local), and reads the generator output at the
    query slot. Simplices delegated to the teacher never draw on local
    knowledge: their evidence arrives only through the channel.
    """
    k, idx = s.locate(sigma_q)
    flags = []
    scale = max(float(s.cochains[k].max()), 1.0)
    n = len(s.simplices[k])
    x = rng.integers(1, int(scale) + 1, size=n).astype(float)
    delegated = set(t)
    n_known = 0
    for i, sx in enumerate(s.simplices[k]):
        if sx == sigma_q:
            continue  # the query value is what we are after
        if sx in state.values and sx not in delegated:
            x[i] = state.values[sx]
            n_known += 1
    if n_known == 0 and not t:
        flags.append("low-confidence: no local knowledge and no transmission")
    lap = ls.conv_operator(k)
    z = model.encode(k, lap, x / scale)

    def row_for(sx):
        row = received.get(sx)
        if row is None:
            row = state.received.get(sx)
        return row

    for sx in t:
        row = row_for(sx)
        if row is not None and len(sx) - 1 == k and sx != sigma_q:
            z[s.locate(sx)[1]] = row
    q_row = row_for(sigma_q)
    if q_row is not None:
        z[idx] = p_local * z[idx] + (1.0 - p_local) * q_row
    pred = model.generate(k, lap, z)
    return float(pred[idx]) * scale, flags


def update_knowledge(state: KnowledgeState, ctx: QueryContext,
                     received: dict[Simplex, np.ndarray]) -> KnowledgeState:
    """Cache this round's received embeddings; knowledge only ever grows."""
    for sx, row in received.items():
        state.received[sx] = row
    return state


def run_query(sigma_q, s: SimplicialComplex, ls: LaplacianSet,
              model: ScaeModel, state: KnowledgeState, p_local: float,
              channel: Channel, rng: np.random.Generator,
              tau_acc: float = 0.05, update: bool = True) -> QueryTrace:
    """One full protocol round for a query simplex."""
    sigma_q = canonical(sigma_q)
    if not s.contains(sigma_q):
        raise ComplexError(f"query simplex {sigma_q!r} is not in the structure")
    h = query_support(s, ls, sigma_q)
    flags = []
    if not h:
        flags.append("pure-generation fallback: empty support set")
    g_set, t_set = student_split(h, sigma_q, p_local, ls, s)
    received, symbols = teacher_respond(
        sigma_q, t_set, model, ls, s, channel, skip=set(state.received))
    prediction, infer_flags = student_infer(
        sigma_q, model, ls, s, state, g_set, t_set, received, p_local, rng)
    flags.extend(infer_flags)
    truth = s.cochain_of(sigma_q)
    ctx = QueryContext(sigma_q=sigma_q, h=h, g=g_set, t=t_set,
                       p_local=p_local, prediction=prediction, truth=truth)
    if update:
        update_knowledge(state, ctx, received)
    correct = abs(prediction - truth) / max(truth, 1.0) <= tau_acc
    return QueryTrace(
        sigma_q=sigma_q, h_size=len(h), g_size=len(g_set), t_size=len(t_set),
        symbols=symbols, snr_db=channel.cfg.snr_db,
        prediction=prediction, truth=truth, correct=correct, flags=flags)


def accuracy(predictions, tau_acc: float = 0.05) -> float:
    """Fraction of (prediction, truth) pairs within relative error tau_acc."""
    if tau_acc <= 0:
        raise MetricError("tau_acc must be positive")
    pairs = list(predictions)
    if not pairs:
        raise MetricError("accuracy of an empty prediction list is undefined")
    hits = sum(1 for p, c in pairs if abs(p - c) / max(c, 1.0) <= tau_acc)
    return hits / len(pairs)
