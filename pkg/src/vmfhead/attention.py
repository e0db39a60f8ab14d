"""Attention heads built from exponential kernels on the sphere.

Three head flavors share the same control-point data: the core head (a bare
kernel sum), the split head (softmax-normalized), and the classical head
(one dense softmax over prefix tokens and input positions, with fixed H and
W_V matrices).  A block-structured "universal" head embeds the sphere, the
attention keys, and the values into orthogonal subspaces of a 3(m+1)
(optionally +1) dimensional space so that the classical head reproduces the
split head exactly as the input-input suppression constant M goes to -inf.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DomainError
from .sphere import as_unit_vector

__all__ = [
    "ControlPoints",
    "AttentionHeadParams",
    "PrefixTokens",
    "OracleStage",
    "TransformerLayer",
    "TransformerStack",
    "core_head",
    "core_head_log",
    "split_head",
    "split_head_batch",
    "classical_head",
    "lift",
    "project",
    "build_universal_head",
    "assemble_prefix_tokens",
    "default_suppression",
    "transformer_eval",
    "export_prefix_artifact",
    "import_prefix_artifact",
]


@dataclass(frozen=True)
class ControlPoints:
    """Kernel control points: unit anchors p_alpha and output values p_beta.

    p_alpha rows live on S^m; p_beta rows are free vectors (the value
    attached to each anchor).  lam is the shared concentration.
    """

    m: int
    lam: float
    p_alpha: np.ndarray
    p_beta: np.ndarray

    def __post_init__(self):
        pa = np.asarray(self.p_alpha, dtype=np.float64)
        pb = np.asarray(self.p_beta, dtype=np.float64)
        if pa.ndim != 2 or pa.shape[0] < 1:
            raise DomainError("control points must be a nonempty (N, m+1) array")
        if pa.shape[1] != self.m + 1:
            raise DimensionMismatch("p_alpha width must be m+1")
        if pb.shape != pa.shape:
            raise DimensionMismatch("p_beta must match p_alpha's shape")
        if not self.lam > 0:
            raise DomainError("lam must be positive")
        norms = np.linalg.norm(pa, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise DomainError("p_alpha rows must be unit vectors")
        pa.setflags(write=False)
        pb.setflags(write=False)
        object.__setattr__(self, "p_alpha", pa)
        object.__setattr__(self, "p_beta", pb)

    @property
    def n_points(self) -> int:
        return self.p_alpha.shape[0]

    @property
    def items(self):
        return list(zip(self.p_alpha, self.p_beta))


@dataclass(frozen=True)
class AttentionHeadParams:
    """Fixed (pretrained) attention matrices of one head."""

    d: int
    H: np.ndarray
    W_V: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=np.float64)
        W = np.asarray(self.W_V, dtype=np.float64)
        if H.shape != (self.d, self.d) or W.shape != (self.d, self.d):
            raise DimensionMismatch("H and W_V must be d x d")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(W))):
            raise DomainError("H and W_V must be finite")
        H.setflags(write=False)
        W.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "W_V", W)


@dataclass(frozen=True)
class PrefixTokens:
    """Assembled prefix tokens plus the suppression constant they assume."""

    d: int
    tokens: np.ndarray
    M: float
    augmented: bool

    def __post_init__(self):
        t = np.asarray(self.tokens, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] < 1 or t.shape[1] != self.d:
            raise DimensionMismatch("tokens must be a nonempty (N, d) array")
        if not self.M < 0:
            raise DomainError("suppression constant M must be negative")
        t.setflags(write=False)
        object.__setattr__(self, "tokens", t)

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0]


@dataclass(frozen=True)
class OracleStage:
    """Exact per-position stage injected in place of an MLP (hybrid builds)."""

    fn: object
    label: str = "oracle"


@dataclass(frozen=True)
class TransformerLayer:
    params: AttentionHeadParams
    prefix: PrefixTokens
    mlp: tuple = ()

    def __post_init__(self):
        if self.prefix.d != self.params.d:
            raise DimensionMismatch("prefix and head parameters disagree on d")
        width = self.params.d
        for stage in self.mlp:
            if isinstance(stage, OracleStage):
                width = self.params.d  # oracle stages map states to states
                continue
            a, b = stage
            a = np.asarray(a)
            if a.ndim != 2 or a.shape[1] != width or np.asarray(b).shape != (a.shape[0],):
                raise DimensionMismatch("MLP stage shapes do not chain")
            width = a.shape[0]
        if width != self.params.d:
            raise DimensionMismatch("MLP must end back at the head dimension")


@dataclass(frozen=True)
class TransformerStack:
    """Alternating attention heads and element-wise MLP stages."""

    layers: tuple
    activation: str = "relu"
    meta: dict = field(default_factory=dict)

    @property
    def attention_layer_count(self) -> int:
        return len(self.layers)


# ---------------------------------------------------------------------------
# Head evaluation
# ---------------------------------------------------------------------------


def _logits(cp: ControlPoints, x: np.ndarray) -> np.ndarray:
    return cp.lam * (cp.p_alpha @ x)


def core_head(cp: ControlPoints, x) -> np.ndarray:
    """Bare kernel sum  sum_k exp(lam <x, p_alpha_k>) p_beta_k.

    Computed through the sign-split log accumulation, so intermediate terms
    never overflow; the returned linear value itself saturates to +-inf
    once it exceeds the double range (use core_head_log then).
    """
    signs, logmag = core_head_log(cp, x)
    with np.errstate(over="ignore"):
        return signs * np.exp(logmag)


def core_head_log(cp: ControlPoints, x):
    """(sign, ln|value|) per component of the core head output."""
    xv = as_unit_vector(x)
    if xv.size != cp.m + 1:
        raise DimensionMismatch("input dimension does not match control points")
    logits = _logits(cp, xv)
    peak = float(np.max(logits))
    w = np.exp(logits - peak)
    pos = w @ np.where(cp.p_beta > 0, cp.p_beta, 0.0)
    neg = w @ np.where(cp.p_beta < 0, -cp.p_beta, 0.0)
    diff = pos - neg
    signs = np.sign(diff)
    with np.errstate(divide="ignore"):
        logmag = np.where(diff != 0.0, np.log(np.abs(diff)) + peak, -np.inf)
    return signs, logmag


def split_head(cp: ControlPoints, x) -> np.ndarray:
    """Softmax-weighted value average with logits lam <x, p_alpha_k>."""
    xv = as_unit_vector(x)
    if xv.size != cp.m + 1:
        raise DimensionMismatch("input dimension does not match control points")
    logits = _logits(cp, xv)
    w = np.exp(logits - np.max(logits))
    w /= w.sum()
    return w @ cp.p_beta


def split_head_batch(cp: ControlPoints, points: np.ndarray) -> np.ndarray:
    """split_head over an (n, m+1) batch of unit vectors; returns (n, m+1)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != cp.m + 1:
        raise DimensionMismatch("points must have shape (n, m+1)")
    logits = cp.lam * (pts @ cp.p_alpha.T)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    return w @ cp.p_beta


def classical_head(inputs, prefix: PrefixTokens, params: AttentionHeadParams):
    """Dense attention head over prefix tokens and input positions.

    Position k attends over all N prefix tokens and all T input positions
    with logits x_k^T H c and values W_V c; the softmax is evaluated with a
    max shift.  Returns the list of per-position outputs.
    """
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != params.d or prefix.d != params.d:
        raise DimensionMismatch("inputs, prefix, and params disagree on d")
    cands = np.vstack([prefix.tokens, X])
    logits = X @ params.H @ cands.T  # (T, N + T)
    values = cands @ params.W_V.T  # (N + T, d)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    out = w @ values
    return [out[i] for i in range(out.shape[0])]


# ---------------------------------------------------------------------------
# Universal head construction
# ---------------------------------------------------------------------------


def _blocks(d_aug: int, augmented: bool) -> int:
    base = d_aug - 1 if augmented else d_aug
    if base % 3 != 0 or base < 6:
        raise DimensionMismatch(f"embedding dimension {d_aug} is not 3(m+1)(+1)")
    return base // 3


def lift(x, augmented: bool = False) -> np.ndarray:
    """Embed a sphere point into the first block of the head space.

    Layout (x, 0, 0) of width 3(m+1); the augmented variant appends a
    constant-1 slot that carries the input-input suppression logit.
    """
    xv = as_unit_vector(x)
    b = xv.size
    out = np.zeros(3 * b + (1 if augmented else 0))
    out[:b] = xv
    if augmented:
        out[-1] = 1.0
    return out


def project(y, block: int | None = None) -> np.ndarray:
    """Read the first block back out of a head-space vector."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise DimensionMismatch("project expects a single vector")
    b = block if block is not None else _blocks(y.size, augmented=(y.size % 3 == 1))
    return y[:b].copy()


def build_universal_head(m: int, M: float, augmented: bool = False) -> AttentionHeadParams:
    """Fixed H and W_V whose prefixed classical head realizes any split head.

    Non-augmented (d = 3(m+1)): H has M*I on the sphere-sphere block and I
    coupling the sphere block to the key block; W_V routes the value block
    of a token to the output block and annihilates lifted inputs.  The
    augmented variant (d = 3(m+1)+1) moves the suppression to a constant
    slot so that the input-input logit is M for every input pair, not
    M <x_i, x_j>.
    """
    if not M < 0:
        raise DomainError("suppression constant M must be negative")
    b = m + 1
    d = 3 * b + (1 if augmented else 0)
    H = np.zeros((d, d))
    W = np.zeros((d, d))
    eye = np.eye(b)
    H[0:b, b : 2 * b] = eye
    if augmented:
        H[d - 1, d - 1] = M
    else:
        H[0:b, 0:b] = M * eye
    W[0:b, 2 * b : 3 * b] = eye
    return AttentionHeadParams(d=d, H=H, W_V=W)


def assemble_prefix_tokens(cp: ControlPoints, M: float, augmented: bool = False) -> PrefixTokens:
    """Tokens (0, lam * p_alpha, p_beta[, 0]) matching the universal head."""
    b = cp.m + 1
    d = 3 * b + (1 if augmented else 0)
    tokens = np.zeros((cp.n_points, d))
    tokens[:, b : 2 * b] = cp.lam * cp.p_alpha
    tokens[:, 2 * b : 3 * b] = cp.p_beta
    return PrefixTokens(d=d, tokens=tokens, M=float(M), augmented=augmented)


def suppression_gap(cp: ControlPoints, x, M: float, t_inputs: int = 1) -> float:
    """Exact relative gap between the universal classical head and the split
    head at finite M.

    The two heads share their numerator, so the projected classical output
    equals split * S / (S + T e^M) with S the prefix mass at x; the relative
    gap is T e^M / (S + T e^M).  Evaluated in log domain because at working
    suppression levels the gap sits far below float subtraction resolution.
    """
    xv = as_unit_vector(x)
    logits = _logits(cp, xv)
    extra = M + math.log(t_inputs)
    peak = max(float(np.max(logits)), extra)
    denom = float(np.sum(np.exp(logits - peak))) + math.exp(extra - peak)
    return math.exp(extra - peak - math.log(denom))


def default_suppression(lam: float, n_points: int, extra: float = 30.0) -> float:
    """Default M = -(lam + extra + ln N): the spurious input mass is then at
    most e^-extra of the smallest possible prefix mass N e^-lam."""
    return -(lam + extra + math.log(n_points))


# ---------------------------------------------------------------------------
# Transformer stacks
# ---------------------------------------------------------------------------

_ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),
    "identity": lambda x: x,
}


def _apply_mlp(X: np.ndarray, stages, activation: str) -> np.ndarray:
    act = _ACTIVATIONS[activation]
    prev_affine = False
    for stage in stages:
        if isinstance(stage, OracleStage):
            X = np.stack([np.asarray(stage.fn(x), dtype=np.float64) for x in X])
            prev_affine = False
            continue
        A, b = stage
        if prev_affine:
            X = act(X)
        X = X @ np.asarray(A).T + np.asarray(b)
        prev_affine = True
    return X


def transformer_eval(stack: TransformerStack, inputs) -> list:
    """Run inputs through alternating attention heads and element-wise MLPs."""
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    for layer in stack.layers:
        X = np.stack(classical_head(X, layer.prefix, layer.params))
        if layer.mlp:
            X = _apply_mlp(X, layer.mlp, stack.activation)
    return [X[i] for i in range(X.shape[0])]


# ---------------------------------------------------------------------------
# Prefix artifact serialization (bit-exact via decimal strings)
# ---------------------------------------------------------------------------


def _enc_mat(a: np.ndarray):
    return [[repr(float(v)) for v in row] for row in np.atleast_2d(a)]


def _dec_mat(rows) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in rows], dtype=np.float64)


def export_prefix_artifact(
    prefix: PrefixTokens, params: AttentionHeadParams, m: int, lam: float
) -> str:
    """JSON artifact for a prefix + head pair; doubles are encoded as
    repr strings so the round trip is bit-exact."""
    payload = {
        "schema": "vmfhead-prefix-v1",
        "d": prefix.d,
        "m": m,
        "lambda": repr(float(lam)),
        "M": repr(float(prefix.M)),
        "augmented": prefix.augmented,
        "tokens": _enc_mat(prefix.tokens),
        "H": _enc_mat(params.H),
        "W_V": _enc_mat(params.W_V),
    }
    return json.dumps(payload)


def import_prefix_artifact(text: str):
    """Inverse of export_prefix_artifact; returns (prefix, params, m, lam)."""
    payload = json.loads(text)
    if payload.get("schema") != "vmfhead-prefix-v1":
        raise DomainError("unrecognized prefix artifact schema")
    d = int(payload["d"])
    tokens = _dec_mat(payload["tokens"])
    H = _dec_mat(payload["H"])
    W = _dec_mat(payload["W_V"])
    if tokens.shape[1] != d or H.shape != (d, d) or W.shape != (d, d):
        raise DomainError("artifact dimensions are inconsistent")
    prefix = PrefixTokens(d=d, tokens=tokens, M=float(payload["M"]), augmented=bool(payload["augmented"]))
    params = AttentionHeadParams(d=d, H=H, W_V=W)
    return prefix, params, int(payload["m"]), float(payload["lambda"])
