"""Masked simplicial convolutional autoencoder.

Each order of the complex gets its own encoder/generator stack of polynomial
Laplacian filters: h = act(sum_i W_i L^i x + b), with powers applied as
repeated sparse matrix-vector products. Training masks a fraction of the
cochains, overwrites them with uniform random integers, and minimizes the L1
error of the masked slots only. Convolutions run on the (masked) normalized
Laplacian so filter powers stay well conditioned across complexes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, field
from itertools import combinations

import numpy as np
from scipy import sparse

from .channel import csi_noise_inject
from .complexes import SimplicialComplex, hop_distances
from .reduction import LaplacianSet

__all__ = [
    "ScaeError",
    "BatchError",
    "TrainingError",
    "Activation",
    "Hyperparams",
    "ConvLayer",
    "ScaeModel",
    "downsample_subcomplexes",
    "make_masked_batch",
    "remask_batch",
    "MaskedSample",
    "TrainBatch",
    "masked_l1",
    "train",
    "recursive_predict",
]


class ScaeError(RuntimeError):
    """Model misuse: shape mismatch or missing forward cache."""


class BatchError(ValueError):
    """No maskable simplex available for batch construction."""


class TrainingError(RuntimeError):
    """Training diverged."""


@dataclass(frozen=True)
class Activation:
    """Identity or leaky-rectifier nonlinearity."""

    kind: str = "leaky"
    slope: float = 0.01

    def __post_init__(self):
        if self.kind not in ("identity", "leaky"):
            raise ValueError(f"unknown activation {self.kind!r}")
        if self.kind == "leaky" and not 0.0 < self.slope <= 1.0:
            raise ValueError("leaky slope must lie in (0, 1]")

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return z
        return np.where(z > 0.0, z, self.slope * z)

    def derivative(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.ones_like(z)
        return np.where(z > 0.0, 1.0, self.slope)


@dataclass
class Hyperparams:
    width: int = 8
    degree: int = 3
    leaky_slope: float = 0.01
    learning_rate: float = 5e-3
    epochs: int = 200
    mask_ratio: float = 0.3
    n_hop: int = 3
    c_max: float = 1.0
    clip_norm: float = 5.0


class ConvLayer:
    """One polynomial simplicial filter: act(sum_i W_i L^i x + b)."""

    def __init__(self, f_in: int, f_out: int, degree: int,
                 activation: Activation, rng: np.random.Generator):
        if degree < 0:
            raise ValueError("polynomial degree must be nonnegative")
        limit = 1.0 / math.sqrt(f_in * (degree + 1))
        self.weights = rng.uniform(-limit, limit, size=(f_in, f_out, degree + 1))
        self.bias = np.zeros(f_out)
        self.activation = activation
        self._cache = None

    @property
    def degree(self) -> int:
        return self.weights.shape[2] - 1

    def forward(self, lap: sparse.spmatrix, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[0] == 1 and self.weights.shape[0] == 1 and x.shape[1] != 1:
            x = x.T
        if x.shape[1] != self.weights.shape[0]:
            raise ScaeError(
                f"input width {x.shape[1]} != layer fan-in {self.weights.shape[0]}")
        if lap.shape[0] != x.shape[0]:
            raise ScaeError(
                f"cochain length {x.shape[0]} != Laplacian size {lap.shape[0]}")
        powers = [x]
        for _ in range(self.degree):
            powers.append(lap @ powers[-1])
        stack = np.stack(powers, axis=2)  # (n, f_in, degree+1)
        z = np.einsum("nfd,fgd->ng", stack, self.weights) + self.bias
        self._cache = (lap, stack, z)
        return self.activation.apply(z)

    def backward(self, grad_out: np.ndarray) -> tuple[np.ndarray, dict]:
        """Gradients of the cached forward pass; returns (d input, param grads)."""
        if self._cache is None:
            raise ScaeError("backward called before forward")
        lap, stack, z = self._cache
        dz = grad_out * self.activation.derivative(z)
        grads = {
            "weights": np.einsum("nfd,ng->fgd", stack, dz),
            "bias": dz.sum(axis=0),
        }
        # d x = sum_d (L^T)^d (dz W_d^T), accumulated Horner-style
        deg = self.degree
        acc = dz @ self.weights[:, :, deg].T
        lap_t = lap.T
        for d in range(deg - 1, -1, -1):
            acc = lap_t @ acc + dz @ self.weights[:, :, d].T
        return acc, grads

    def apply_gradients(self, grads: dict, lr: float) -> None:
        self.weights -= lr * grads["weights"]
        self.bias -= lr * grads["bias"]


class ScaeModel:
    """Per-order encoder/generator stacks with shared hyperparameters."""

    def __init__(self, max_order: int, hp: Hyperparams, seed: int):
        self.hp = hp
        self.seed = seed
        self.max_order = max_order
        rng = np.random.default_rng(seed)
        hidden = Activation("leaky", hp.leaky_slope)
        final = Activation("identity")
        self.encoders: list[list[ConvLayer]] = []
        self.generators: list[list[ConvLayer]] = []
        for _ in range(max_order + 1):
            self.encoders.append([
                ConvLayer(1, hp.width, hp.degree, hidden, rng),
                ConvLayer(hp.width, hp.width, hp.degree, hidden, rng),
            ])
            self.generators.append([
                ConvLayer(hp.width, hp.width, hp.degree, hidden, rng),
                ConvLayer(hp.width, 1, hp.degree, final, rng),
            ])

    def layers(self, k: int) -> list[ConvLayer]:
        return self.encoders[k] + self.generators[k]

    def encode(self, k: int, lap: sparse.spmatrix, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=float).reshape(-1, 1)
        for layer in self.encoders[k]:
            h = layer.forward(lap, h)
        return h

    def generate(self, k: int, lap: sparse.spmatrix, z: np.ndarray) -> np.ndarray:
        h = z
        for layer in self.generators[k]:
            h = layer.forward(lap, h)
        return h[:, 0]

    def predict(self, k: int, lap: sparse.spmatrix, x: np.ndarray) -> np.ndarray:
        return self.generate(k, lap, self.encode(k, lap, x))

    def save(self, path) -> None:
        doc = {
            "hyperparams": asdict(self.hp),
            "seed": self.seed,
            "max_order": self.max_order,
            "orders": [
                {
                    "encoder": [_layer_doc(l) for l in self.encoders[k]],
                    "generator": [_layer_doc(l) for l in self.generators[k]],
                }
                for k in range(self.max_order + 1)
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path) -> "ScaeModel":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        hp = Hyperparams(**doc["hyperparams"])
        model = cls(doc["max_order"], hp, doc["seed"])
        for k, order in enumerate(doc["orders"]):
            for layer, saved in zip(model.encoders[k], order["encoder"]):
                _restore_layer(layer, saved)
            for layer, saved in zip(model.generators[k], order["generator"]):
                _restore_layer(layer, saved)
        return model


def _layer_doc(layer: ConvLayer) -> dict:
    return {
        "weights": layer.weights.tolist(),
        "bias": layer.bias.tolist(),
        "activation": {"kind": layer.activation.kind, "slope": layer.activation.slope},
    }


def _restore_layer(layer: ConvLayer, doc: dict) -> None:
    layer.weights = np.asarray(doc["weights"], dtype=float)
    layer.bias = np.asarray(doc["bias"], dtype=float)
    layer.activation = Activation(**doc["activation"])


def order_scales(s: SimplicialComplex) -> list[float]:
    """Per-order normalization scale: the max cochain value at each order.

    Normalizing each order by its own maximum keeps every order's values in
    (0, 1] regardless of how steeply cochain mass decays with order.
    """
    return [max(float(c.max()), 1.0) if c.size else 1.0 for c in s.cochains]


def _closure_of_tops(tops: list) -> set:
    out = set()
    for top in tops:
        for size in range(1, len(top) + 1):
            out.update(combinations(top, size))
    return out


def subcomplex_from_tops(parent: SimplicialComplex, tops: list) -> SimplicialComplex:
    """Closure of the given top simplices, cochains copied from the parent."""
    members = sorted(_closure_of_tops(tops), key=lambda s: (len(s), s))
    by_order: list[list] = []
    for s in members:
        k = len(s) - 1
        while len(by_order) <= k:
            by_order.append([])
        by_order[k].append(s)
    cochains = [np.array([parent.cochain_of(s) for s in order], dtype=float)
                for order in by_order]
    return SimplicialComplex(simplices=by_order, cochains=cochains)


def downsample_subcomplexes(s: SimplicialComplex, t: int, size: int,
                            seed: int) -> list[SimplicialComplex]:
    """Grow t closed sub-complexes from random top simplices.

    Each sample starts at a random top simplex and expands breadth-first over
    vertex-sharing top simplices until its closure holds about `size`
    simplices.
    """
    if s.size() == 0:
        raise ScaeError("cannot downsample an empty complex")
    if t == 0:
        return []
    tops = s.top_simplices()
    vertex_to_tops: dict[str, list[int]] = {}
    for i, top in enumerate(tops):
        for v in top:
            vertex_to_tops.setdefault(v, []).append(i)

    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(t):
        start = int(rng.integers(len(tops)))
        chosen = [start]
        chosen_set = {start}
        closure = _closure_of_tops([tops[start]])
        frontier = [start]
        while len(closure) < size and frontier:
            nxt = []
            for i in frontier:
                if len(closure) >= size:
                    break
                for v in tops[i]:
                    for j in vertex_to_tops[v]:
                        if j not in chosen_set:
                            chosen_set.add(j)
                            chosen.append(j)
                            nxt.append(j)
                            closure |= _closure_of_tops([tops[j]])
                            if len(closure) >= size:
                                break
                    if len(closure) >= size:
                        break
            frontier = nxt
        samples.append(subcomplex_from_tops(s, [tops[i] for i in chosen]))
    return samples


@dataclass
class MaskedSample:
    """One training sample: a sub-complex with its conv operators and masks."""

    complex: SimplicialComplex
    laplacians: list[sparse.csr_matrix]
    masks: list[np.ndarray]          # bool per order, True = masked slot
    replacements: list[np.ndarray]   # raw replacement values, used where masked
    scales: list[float] = field(default_factory=list)  # per-order max cochain
    _normalized: list = field(default_factory=list)  # cached for remasking

    def n_masked(self) -> int:
        return int(sum(m.sum() for m in self.masks))


@dataclass
class TrainBatch:
    samples: list[MaskedSample]
    c_max: float


def _draw_masks(sub: SimplicialComplex, normalized, p_train: float,
                n_hop: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Fresh masks for one sub-complex honoring the hop constraint."""
    masks = [np.zeros(len(order), dtype=bool) for order in sub.simplices]
    candidates = []
    for k, L in enumerate(normalized):
        nnz_off = L.copy()
        nnz_off.setdiag(0.0)
        nnz_off.eliminate_zeros()
        degrees = np.diff(nnz_off.indptr)
        candidates.extend((k, i) for i in range(L.shape[0]) if degrees[i] > 0)
    rng.shuffle(candidates)
    target = math.ceil(p_train * sub.size())
    for k, i in candidates:
        if sum(int(m.sum()) for m in masks) >= target:
            break
        masks[k][i] = True
        unmasked = np.flatnonzero(~masks[k])
        if unmasked.size == 0:
            masks[k][i] = False
            continue
        dist = hop_distances(normalized[k], unmasked)
        if np.any(dist[masks[k]] > n_hop):
            masks[k][i] = False
    return masks


def make_masked_batch(subs: list[SimplicialComplex], p_train: float, n_hop: int,
                      c_max: float, seed: int,
                      scales: list[float] | None = None) -> TrainBatch:
    """Mask ceil(p_train * |S|) simplices per sub-complex with uniform values.

    Every masked simplex keeps an unmasked simplex within n_hop hops at its
    own order, so convolutional message passing can reach it. All samples
    share per-order normalization scales (by default the per-order maximum
    over the whole batch, ideally the parent structure's scales) so that
    level differences between sub-complexes stay visible to the model.
    """
    if not 0.0 < p_train < 1.0:
        raise BatchError("p_train must lie in (0, 1)")
    if c_max < 1:
        raise BatchError("c_max must be at least 1")
    if scales is None:
        scales = []
        for sub in subs:
            for k, own in enumerate(order_scales(sub)):
                if k >= len(scales):
                    scales.append(own)
                else:
                    scales[k] = max(scales[k], own)
    rng = np.random.default_rng(seed)
    samples = []
    for sub in subs:
        laps = LaplacianSet.from_complex(sub)
        masks = _draw_masks(sub, laps.normalized, p_train, n_hop, rng)
        replacements = [
            rng.integers(1, int(scales[k]) + 1, size=len(order)).astype(float)
            for k, order in enumerate(sub.simplices)
        ]
        sample = MaskedSample(
            complex=sub,
            laplacians=[laps.conv_operator(k) for k in range(laps.max_order + 1)],
            masks=masks,
            replacements=replacements,
            scales=scales,
        )
        sample._normalized = laps.normalized
        samples.append(sample)
    if not any(sample.n_masked() for sample in samples):
        raise BatchError("no simplex satisfies the masking hop constraint")
    return TrainBatch(samples=samples, c_max=float(c_max))


def remask_batch(batch: TrainBatch, p_train: float, n_hop: int,
                 seed: int) -> None:
    """Redraw every sample's masks and replacement values in place.

    Redrawing per epoch keeps the model from memorizing which slots are
    masked, forcing it to infer masked values from their neighbors instead.
    """
    rng = np.random.default_rng(seed)
    for sample in batch.samples:
        sub = sample.complex
        sample.masks = _draw_masks(sub, sample._normalized, p_train, n_hop, rng)
        sample.replacements = [
            rng.integers(1, int(sample.scales[k]) + 1, size=len(order)).astype(float)
            for k, order in enumerate(sub.simplices)
        ]


def masked_l1(pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> float:
    """Sum of absolute errors over masked slots only.

    Target entries at unmasked slots never enter the value.
    """
    return float(np.abs(pred[mask] - target[mask]).sum())


def _sample_passes(model: ScaeModel, sample: MaskedSample, c_max: float,
                   csi_snr_db: float | None, rng: np.random.Generator | None):
    """Forward/backward over all orders of one sample; returns (loss, grads, n)."""
    per_layer_grads: list[tuple[ConvLayer, dict]] = []
    loss = 0.0
    n_masked = sample.n_masked()
    if n_masked == 0:
        return 0.0, [], 0
    for k, order in enumerate(sample.complex.simplices):
        if not order or k > model.max_order:
            continue
        mask = sample.masks[k]
        lap = sample.laplacians[k]
        scale = sample.scales[k] if sample.scales else c_max
        truth = sample.complex.cochains[k] / scale
        x = truth.copy()
        x[mask] = sample.replacements[k][mask] / scale

        enc = model.encoders[k]
        gen = model.generators[k]
        h = x.reshape(-1, 1)
        for layer in enc:
            h = layer.forward(lap, h)
        if csi_snr_db is not None and rng is not None:
            h = csi_noise_inject(h, csi_snr_db, rng)
        for layer in gen:
            h = layer.forward(lap, h)
        pred = h[:, 0]
        loss += masked_l1(pred, truth, mask)

        dpred = np.zeros_like(pred)
        dpred[mask] = np.sign(pred[mask] - truth[mask]) / n_masked
        grad = dpred.reshape(-1, 1)
        for layer in reversed(gen):
            grad, g = layer.backward(grad)
            per_layer_grads.append((layer, g))
        for layer in reversed(enc):
            grad, g = layer.backward(grad)
            per_layer_grads.append((layer, g))
    return loss / n_masked, per_layer_grads, n_masked


def _clip(per_layer_grads, clip_norm: float) -> None:
    total = 0.0
    for _, g in per_layer_grads:
        total += float(np.sum(g["weights"] ** 2)) + float(np.sum(g["bias"] ** 2))
    norm = math.sqrt(total)
    if clip_norm > 0 and norm > clip_norm:
        scale = clip_norm / norm
        for _, g in per_layer_grads:
            g["weights"] *= scale
            g["bias"] *= scale


class _AdamState:
    """First/second moment accumulators for one layer's parameters."""

    def __init__(self, layer: ConvLayer):
        self.m = {"weights": np.zeros_like(layer.weights),
                  "bias": np.zeros_like(layer.bias)}
        self.v = {"weights": np.zeros_like(layer.weights),
                  "bias": np.zeros_like(layer.bias)}
        self.t = 0

    def step(self, layer: ConvLayer, grads: dict, lr: float,
             b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8) -> None:
        self.t += 1
        for name, param in (("weights", layer.weights), ("bias", layer.bias)):
            g = grads[name]
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            m_hat = self.m[name] / (1 - b1 ** self.t)
            v_hat = self.v[name] / (1 - b2 ** self.t)
            param -= lr * m_hat / (np.sqrt(v_hat) + eps)


def train(model: ScaeModel, batch: TrainBatch, epochs: int | None = None,
          learning_rate: float | None = None, csi_snr_db: float | None = None,
          csi_seed: int = 0, remask_seed: int | None = None) -> list[float]:
    """Adam descent on the masked-L1 objective; returns per-epoch mean loss.

    With csi_snr_db set, channel noise at that SNR is injected between the
    encoder and generator every pass, making the generator denoise-aware.
    With remask_seed set, masks and replacement values are redrawn each epoch
    so the model cannot memorize which slots are hidden.
    """
    epochs = model.hp.epochs if epochs is None else epochs
    lr = model.hp.learning_rate if learning_rate is None else learning_rate
    c_max = batch.c_max
    csi_rng = np.random.default_rng(csi_seed) if csi_snr_db is not None else None
    states: dict[int, _AdamState] = {}
    trace = []
    for epoch in range(epochs):
        if remask_seed is not None and epoch > 0:
            remask_batch(batch, model.hp.mask_ratio, model.hp.n_hop,
                         seed=remask_seed + epoch)
        epoch_loss = 0.0
        n_samples = 0
        for sample in batch.samples:
            loss, grads, n_masked = _sample_passes(
                model, sample, c_max, csi_snr_db, csi_rng)
            if n_masked == 0:
                continue
            if not math.isfinite(loss):
                raise TrainingError(f"loss diverged at epoch {epoch}")
            _clip(grads, model.hp.clip_norm)
            for layer, g in grads:
                state = states.setdefault(id(layer), _AdamState(layer))
                state.step(layer, g, lr)
            epoch_loss += loss
            n_samples += 1
        trace.append(epoch_loss / max(n_samples, 1))
    return trace


def recursive_predict(model: ScaeModel, ls: LaplacianSet,
                      known_values: list[np.ndarray], known_mask: list[np.ndarray],
                      p_step: float, seed: int = 0):
    """Iteratively fill missing cochains, best-coupled simplices first.

    Each round ranks the still-missing simplices by their strongest normalized
    Laplacian coupling to any known simplex, predicts the top
    ceil(p_step * |missing|) of them with the generator, and promotes those to
    known. Missing simplices with no coupling to anything known are filled
    with the mean of the known values at their order and flagged.
    """
    if not 0.0 < p_step <= 1.0:
        raise ValueError("p_step must lie in (0, 1]")
    if not any(m.any() for m in known_mask):
        raise ScaeError("recursive prediction needs at least one known simplex")
    c_max = model.hp.c_max
    rng = np.random.default_rng(seed)
    values = [v.astype(float).copy() for v in known_values]
    known = [m.copy() for m in known_mask]
    log = []

    iteration = 0
    while True:
        missing = [(k, i) for k in range(len(known))
                   for i in np.flatnonzero(~known[k])]
        if not missing:
            break
        couplings = {}
        for k, i in missing:
            row = ls.masked_normalized(k).getrow(i)
            best = 0.0
            for j, val in zip(row.indices, row.data):
                if j != i and known[k][j]:
                    best = max(best, abs(float(val)))
            couplings[(k, i)] = best
        reachable = [(k, i) for k, i in missing if couplings[(k, i)] > 0.0]
        if not reachable:
            fallback = []
            for k, i in missing:
                known_at_k = values[k][known[k]]
                pool = known_at_k if known_at_k.size else np.concatenate(
                    [values[kk][known[kk]] for kk in range(len(known))])
                values[k][i] = float(pool.mean())
                known[k][i] = True
                fallback.append((k, i))
            log.append({"iteration": iteration, "predicted": [], "fallback": fallback})
            break
        reachable.sort(key=lambda ki: (-couplings[ki], ki[0], ki[1]))
        n_pick = min(len(reachable), math.ceil(p_step * len(missing)))
        picked = reachable[:n_pick]

        preds = {}
        for k in sorted({k for k, _ in picked}):
            known_at_k = values[k][known[k]]
            scale = max(float(known_at_k.max()), 1.0) if known_at_k.size else c_max
            x = values[k] / scale
            unknown = ~known[k]
            x[unknown] = rng.integers(1, int(scale) + 1, size=int(unknown.sum())) / scale
            pred = model.predict(k, ls.conv_operator(k), x)
            for kk, i in picked:
                if kk == k:
                    preds[(k, i)] = float(pred[i]) * scale
        for (k, i), v in preds.items():
            values[k][i] = v
            known[k][i] = True
        log.append({"iteration": iteration, "predicted": picked, "fallback": []})
        iteration += 1
    return values, log
