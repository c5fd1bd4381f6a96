"""Encoders and decoders for directed link prediction.

Every encoder emits a pair of embedding matrices (S, T): row u of S encodes
node u in its role as an edge source, row u of T as a target.  An ordered
pair (u, v) is scored by a decoder over (s_u, t_v), so scores need not be
symmetric under direction reversal.  The plain MLP encoder aliases T to S,
which is exactly what makes it direction-blind.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .graph import adjacency, degrees, normalize_adj, spmm, spmm_t

DECODER_KINDS = ("inner", "mlp_hadamard", "mlp_concat", "lr_concat")


@dataclass
class EncoderOutput:
    S: ad.Tensor
    T: ad.Tensor


def _uniform_weight(rng, fan_in, fan_out):
    bound = 1.0 / np.sqrt(fan_in)
    return ad.Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)


def _zero_bias(fan_out):
    return ad.Tensor(np.zeros((1, fan_out)), requires_grad=True)


class Mlp:
    """Dense layers with relu between them and a linear final layer."""

    def __init__(self, layers):
        self.layers = layers

    @classmethod
    def init(cls, rng, dims):
        layers = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            layers.append((_uniform_weight(rng, fan_in, fan_out), _zero_bias(fan_out)))
        return cls(layers)

    def __call__(self, x):
        for i, (w, b) in enumerate(self.layers):
            x = ad.add_bias(ad.matmul(x, w), b)
            if i < len(self.layers) - 1:
                x = ad.relu(x)
        return x

    def named_parameters(self, prefix):
        out = {}
        for i, (w, b) in enumerate(self.layers):
            out[f"{prefix}.{i}.w"] = w
            out[f"{prefix}.{i}.b"] = b
        return out


def _as_tensor(x):
    return x if isinstance(x, ad.Tensor) else ad.Tensor(np.asarray(x, dtype=np.float64))


@dataclass
class SdgaeParams:
    """Source/target polynomial-filter encoder parameters.

    Two input MLPs produce the initial embeddings; k propagation steps then
    mix them through the normalized adjacency with one learnable scalar per
    step and side, each initialized to exactly one.
    """

    mlp_s: Mlp
    mlp_t: Mlp
    gamma_s: list
    gamma_t: list
    k: int

    @classmethod
    def init(cls, rng, in_dim, hidden=64, emb=64, mlp_layers=2, k=5):
        if not 1 <= k <= 8:
            raise ValueError(f"k must be in 1..8, got {k}")
        dims = [in_dim, emb] if mlp_layers == 1 else [in_dim] + [hidden] * (mlp_layers - 1) + [emb]
        mlp_s = Mlp.init(rng, dims)
        mlp_t = Mlp.init(rng, dims)
        ones = lambda: ad.Tensor(np.ones((1, 1)), requires_grad=True)
        return cls(mlp_s, mlp_t, [ones() for _ in range(k)], [ones() for _ in range(k)], k)

    def named_parameters(self):
        out = {}
        out.update(self.mlp_s.named_parameters("mlp_s"))
        out.update(self.mlp_t.named_parameters("mlp_t"))
        for i, g in enumerate(self.gamma_s):
            out[f"gamma_s.{i}"] = g
        for i, g in enumerate(self.gamma_t):
            out[f"gamma_t.{i}"] = g
        return out


def sdgae_encode(p, a_norm, x):
    """Iterative propagation: each step applies the normalized adjacency to
    the opposite side and adds it back, scaled by that step's coefficient.

    S <- gamma_s[k] * (A_norm @ T) + S and T <- gamma_t[k] * (A_norm.T @ S) + T,
    both updates reading the pre-step values.  Cost is two sparse products of
    the edge set per step.
    """
    if a_norm.rows != a_norm.cols:
        raise ValueError("normalized adjacency must be square")
    xt = _as_tensor(x)
    if xt.shape[0] != a_norm.rows:
        raise ValueError(f"feature rows {xt.shape[0]} != node count {a_norm.rows}")
    s = p.mlp_s(xt)
    t = p.mlp_t(xt)
    for step in range(p.k):
        s_next = ad.add(ad.scale(ad.spmm_const(a_norm, t), p.gamma_s[step]), s)
        t_next = ad.add(ad.scale(ad.spmm_t_const(a_norm, s), p.gamma_t[step]), t)
        s, t = s_next, t_next
    return EncoderOutput(s, t)


def expand_coefficients(gamma_s, gamma_t, k):
    """Collapse the k-step recurrence into explicit polynomial coefficients.

    Returns (w_s, w_t), each of length k+1, such that the encoder output
    equals sum_j of w[j] times the j-th alternating power of the normalized
    block adjacency applied to the initial embeddings.  Degree-j terms on the
    S side pick up gamma_s on odd hops, gamma_t on even ones, and vice versa.
    """
    gs = np.asarray(gamma_s, dtype=np.float64).reshape(-1)
    gt = np.asarray(gamma_t, dtype=np.float64).reshape(-1)
    if len(gs) != k or len(gt) != k:
        raise ValueError("need exactly k coefficients per side")
    w_s = np.zeros(k + 1)
    w_t = np.zeros(k + 1)
    w_s[0] = 1.0
    w_t[0] = 1.0
    for step in range(k):
        new_s = w_s.copy()
        new_t = w_t.copy()
        new_s[1:] += gs[step] * w_t[:-1]
        new_t[1:] += gt[step] * w_s[:-1]
        w_s, w_t = new_s, new_t
    return w_s, w_t


def sdgae_encode_explicit(p, a_norm, x):
    """Forward-only oracle evaluating the explicit polynomial form.

    Expands the step coefficients, then accumulates w[j] times the j-th
    alternating block power of the initial embeddings.  No tape is built.
    """
    xt = _as_tensor(x)
    s0 = p.mlp_s(xt).data
    t0 = p.mlp_t(xt).data
    gs = [float(g.data[0, 0]) for g in p.gamma_s]
    gt = [float(g.data[0, 0]) for g in p.gamma_t]
    w_s, w_t = expand_coefficients(gs, gt, p.k)
    u, v = s0, t0
    s_out = w_s[0] * u
    t_out = w_t[0] * v
    for j in range(1, p.k + 1):
        u, v = spmm(a_norm, v), spmm_t(a_norm, u)
        s_out = s_out + w_s[j] * u
        t_out = t_out + w_t[j] * v
    return EncoderOutput(ad.Tensor(s_out), ad.Tensor(t_out))


@dataclass
class DigaeParams:
    """Directed graph-convolution encoder parameters.

    Each layer multiplies the opposite side through the degree-normalized
    self-looped adjacency (out-degrees to the power -beta on rows, in-degrees
    to the power -alpha on columns).  Hidden layers use relu; the final layer
    is linear.
    """

    w_s: list
    w_t: list
    alpha: float
    beta: float

    @classmethod
    def init(cls, rng, in_dim, hidden=64, emb=64, layers=1, alpha=0.4, beta=0.4):
        if not 0.0 <= alpha <= 1.0 or not 0.0 <= beta <= 1.0:
            raise ValueError("alpha and beta must lie in [0, 1]")
        if layers not in (1, 2):
            raise ValueError("layers must be 1 or 2")
        dims = [in_dim, emb] if layers == 1 else [in_dim, hidden, emb]
        w_s = [_uniform_weight(rng, a, b) for a, b in zip(dims[:-1], dims[1:])]
        w_t = [_uniform_weight(rng, a, b) for a, b in zip(dims[:-1], dims[1:])]
        return cls(w_s, w_t, float(alpha), float(beta))

    def named_parameters(self):
        out = {}
        for i, w in enumerate(self.w_s):
            out[f"w_s.{i}"] = w
        for i, w in enumerate(self.w_t):
            out[f"w_t.{i}"] = w
        return out


def digae_encode(p, g, x):
    """Layered directed convolution starting from S = T = X:

    S <- act(B @ (T @ W_t)) and T <- act(B.T @ (S @ W_s)), where B is the
    normalized self-looped adjacency and act is relu except on the last layer.
    """
    b = normalize_adj(g, p.alpha, p.beta)
    xt = _as_tensor(x)
    if xt.shape[0] != g.n:
        raise ValueError(f"feature rows {xt.shape[0]} != node count {g.n}")
    s = t = xt
    last = len(p.w_s) - 1
    for layer, (w_s, w_t) in enumerate(zip(p.w_s, p.w_t)):
        s_next = ad.spmm_const(b, ad.matmul(t, w_t))
        t_next = ad.spmm_t_const(b, ad.matmul(s, w_s))
        if layer < last:
            s_next = ad.relu(s_next)
            t_next = ad.relu(t_next)
        s, t = s_next, t_next
    return EncoderOutput(s, t)


def digae_encode_bipartite(p, g, x):
    """Forward-only oracle for the convolution via the bipartite block form.

    Stacks [S @ W_s; T @ W_t], multiplies by the symmetric 2n x 2n block
    lift of the self-looped adjacency sandwiched between the degree scalings,
    and splits the halves back.  Dense; for tests on small graphs.
    """
    x = np.asarray(x, dtype=np.float64)
    n = g.n
    a_hat = adjacency(g, self_loops=True).to_dense()
    block = np.zeros((2 * n, 2 * n))
    block[:n, n:] = a_hat
    block[n:, :n] = a_hat.T
    out_deg, in_deg = degrees(g, add_self_loops=True)
    dvec = np.concatenate(
        [np.power(out_deg.astype(np.float64), -p.beta), np.power(in_deg.astype(np.float64), -p.alpha)]
    )
    norm_block = dvec[:, None] * block * dvec[None, :]
    s = t = x
    last = len(p.w_s) - 1
    for layer, (w_s, w_t) in enumerate(zip(p.w_s, p.w_t)):
        z = np.vstack([s @ w_s.data, t @ w_t.data])
        h = norm_block @ z
        s, t = h[:n], h[n:]
        if layer < last:
            s, t = np.maximum(s, 0.0), np.maximum(t, 0.0)
    return EncoderOutput(ad.Tensor(s), ad.Tensor(t))


@dataclass
class MlpParams:
    """Graph-free baseline: one embedding per node, so T aliases S."""

    mlp: Mlp

    @classmethod
    def init(cls, rng, in_dim, hidden=64, emb=64, layers=2):
        dims = [in_dim, emb] if layers == 1 else [in_dim] + [hidden] * (layers - 1) + [emb]
        return cls(Mlp.init(rng, dims))

    def named_parameters(self):
        return self.mlp.named_parameters("mlp")


def mlp_encode(p, x):
    h = p.mlp(_as_tensor(x))
    return EncoderOutput(h, h)


@dataclass
class DecoderKind:
    """A pair scorer: kind plus its weights where applicable.

    out_dim 1 yields a single pre-sigmoid logit per pair; out_dim 2 yields a
    two-logit head (column 0 = edge present) for the softmax loss.  The inner
    decoder has no weights; under out_dim 2 its score is paired with a fixed
    zero logit, which makes the two losses coincide there.
    """

    kind: str
    layers: list = field(default_factory=list)
    out_dim: int = 1

    @classmethod
    def init(cls, rng, kind, emb, hidden=64, out_dim=1):
        if kind not in DECODER_KINDS:
            raise ValueError(f"unknown decoder kind {kind!r}")
        if out_dim not in (1, 2):
            raise ValueError("out_dim must be 1 or 2")
        if kind == "inner":
            layers = []
        elif kind == "lr_concat":
            layers = [(_uniform_weight(rng, 2 * emb, out_dim), _zero_bias(out_dim))]
        else:
            width = emb if kind == "mlp_hadamard" else 2 * emb
            layers = [
                (_uniform_weight(rng, width, hidden), _zero_bias(hidden)),
                (_uniform_weight(rng, hidden, out_dim), _zero_bias(out_dim)),
            ]
        return cls(kind, layers, out_dim)

    def named_parameters(self):
        out = {}
        for i, (w, b) in enumerate(self.layers):
            out[f"dec.{i}.w"] = w
            out[f"dec.{i}.b"] = b
        return out


def decode(dec, enc, pairs):
    """Logits for ordered pairs: row u of S with row v of T.

    inner: dot product.  mlp_hadamard / mlp_concat: relu MLP over the
    elementwise product / the concatenation.  lr_concat: affine map over the
    concatenation.  Output shape (len(pairs), out_dim), pre-sigmoid.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    su = ad.gather_rows(enc.S, pairs[:, 0])
    tv = ad.gather_rows(enc.T, pairs[:, 1])
    if dec.kind == "inner":
        z = ad.row_sum(ad.hadamard(su, tv))
        if dec.out_dim == 2:
            z = ad.concat_cols(z, ad.Tensor(np.zeros((z.shape[0], 1))))
        return z
    if dec.kind == "lr_concat":
        w, b = dec.layers[0]
        return ad.add_bias(ad.matmul(ad.concat_cols(su, tv), w), b)
    h = ad.hadamard(su, tv) if dec.kind == "mlp_hadamard" else ad.concat_cols(su, tv)
    (w1, b1), (w2, b2) = dec.layers
    hidden = ad.relu(ad.add_bias(ad.matmul(h, w1), b1))
    return ad.add_bias(ad.matmul(hidden, w2), b2)


def ranking_scores(dec, enc, pairs):
    """Scalar scores for ranking: the logit, or the logit margin of the
    edge-present column for two-logit heads."""
    z = decode(dec, enc, pairs).data
    if dec.out_dim == 1:
        return z[:, 0].copy()
    return z[:, 0] - z[:, 1]


def encoder_forward(enc_params, ctx, x):
    """Dispatch an encoder forward pass.

    ctx is the precomputed normalized adjacency for SdgaeParams, the graph
    for DigaeParams, and ignored for MlpParams.
    """
    if isinstance(enc_params, SdgaeParams):
        return sdgae_encode(enc_params, ctx, x)
    if isinstance(enc_params, DigaeParams):
        return digae_encode(enc_params, ctx, x)
    if isinstance(enc_params, MlpParams):
        return mlp_encode(enc_params, x)
    raise TypeError(f"unknown encoder params {type(enc_params).__name__}")


CHECKPOINT_VERSION = 1


def save_checkpoint(path, named_arrays, meta):
    """Write named parameter arrays plus a JSON meta blob; format versioned."""
    payload = dict(meta)
    payload["format_version"] = CHECKPOINT_VERSION
    arrays = {name: np.asarray(a, dtype=np.float64) for name, a in named_arrays.items()}
    np.savez(path, __meta__=np.array(json.dumps(payload)), **arrays)


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
        arrays = {k: data[k] for k in data.files if k != "__meta__"}
    meta.pop("format_version")
    return meta, arrays


def load_state(params_obj, arrays):
    """Copy checkpoint arrays into an existing parameter object by name."""
    named = params_obj.named_parameters()
    for name, t in named.items():
        if name not in arrays:
            raise ValueError(f"checkpoint missing parameter {name!r}")
        a = np.asarray(arrays[name], dtype=np.float64)
        if a.shape != t.data.shape:
            raise ValueError(f"shape mismatch for {name!r}: {a.shape} vs {t.data.shape}")
        t.data = a.copy()
