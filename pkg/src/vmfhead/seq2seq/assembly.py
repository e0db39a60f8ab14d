"""Assembly of the T+2 attention-layer sequence-to-sequence stack.

The stack operates on T(m+1) "virtual positions", one scalar coordinate
each.  Layer 1 applies the digit encoder to every coordinate (one shared
bank of control points per position, tagged so each position also gets its
one-hot and constant restored through the token values); its MLP stages
apply the per-coordinate contraction weight 3^-p and the per-element
positional weight 3^-(i-1)(m+1).  Layer 2 sums the weighted values across
positions with exactly uniform attention over inputs, producing the
aggregate scalar at every position, while tagged tokens re-inject the
position identity.  Layers 3..T+2 hold one decoder head per element:
token groups are tagged to that element's positions, every other position
attends to itself through a one-hot-keyed diagonal logit and passes its
state through bit-exactly.

Two build modes share this skeleton.  "hybrid" keeps the attention wiring
(the summation layer is the piece under test) but evaluates the digit
encoder and the decoders exactly inside oracle stages.  "full" synthesizes
the encoder and decoder heads as kernel prefixes over the circle,
embedding scalars into S^1 by the inverse stereographic map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..attention import (
    AttentionHeadParams,
    OracleStage,
    PrefixTokens,
    TransformerLayer,
    TransformerStack,
    transformer_eval,
)
from ..bounds import SmoothnessSpec
from ..errors import DomainError, InstanceTooLarge
from ..prefix import TargetFunction, synthesize_prefix
from .encoding import (
    DigitConfig,
    SequenceSample,
    decode_sequence,
    psi_strided,
)

__all__ = ["Seq2SeqStack", "build_seq2seq_transformer"]

_GAP = 900.0  # logit margin that underflows exp() entirely in doubles


@dataclass(frozen=True)
class _Layout:
    """Slot indices of the stack's state vectors."""

    q: int  # number of virtual positions, T(m+1)

    @property
    def d(self) -> int:
        return 8 + 3 * self.q

    @property
    def z(self) -> slice:  # sphere slot (S^1 embedding of the active scalar)
        return slice(0, 2)

    @property
    def ka(self) -> slice:  # token key block (lambda * anchor)
        return slice(2, 4)

    @property
    def vb(self) -> int:  # token value block (scalar)
        return 4

    @property
    def tag(self) -> slice:  # token tag block (position addressing)
        return slice(5, 5 + self.q)

    @property
    def pay(self) -> slice:  # token payload block (one-hot restoration)
        return slice(5 + self.q, 5 + 2 * self.q)

    @property
    def pc(self) -> int:  # token constant payload
        return 5 + 2 * self.q

    @property
    def oh(self) -> slice:  # state one-hot (virtual position identity)
        return slice(6 + 2 * self.q, 6 + 3 * self.q)

    @property
    def c1(self) -> int:  # state constant 1
        return 6 + 3 * self.q

    @property
    def val(self) -> int:  # state scalar value
        return 7 + 3 * self.q


def _inv_stereographic_2d(u: float) -> np.ndarray:
    s = u * u
    return np.array([2.0 * u / (s + 1.0), (s - 1.0) / (s + 1.0)])


def _chart_u(z: np.ndarray) -> float:
    """Inverse of the circle embedding, clamped to [0, 1]."""
    w = 1.0 - z[1]
    if w < 1e-12:
        return 1.0
    return min(max(z[0] / w, 0.0), 1.0)


def _relaxed_bits(u: float, total: int) -> list[int]:
    """Bit stream of an arbitrary scalar in [0, 1] read as ternary digits.

    The scalar is rounded to the nearest integer mantissa first, so every
    exact aggregate value sits in the interior of its decoding plateau
    (otherwise values with an all-zero digit tail would be jump points,
    decoding differently from one side).  Digits are mapped 2 -> 1, else 0;
    the in-between digit 1 only occurs off the valid aggregate set.
    """
    base = 3**total
    mantissa = min(max(int(round(min(max(u, 0.0), 1.0) * base)), 0), base - 1)
    bits = []
    for _ in range(total):
        mantissa, d = divmod(mantissa, 3)
        bits.append(1 if d == 2 else 0)
    bits.reverse()
    return bits


def _relaxed_decode(u: float, t_len: int, m: int, cfg: DigitConfig) -> np.ndarray:
    """(T, m+1) coordinates decoded from an arbitrary scalar; on valid
    aggregates this agrees with the exact decoder."""
    width = t_len * (m + 1)
    bits = _relaxed_bits(u, width * cfg.digits)
    coords = np.zeros(width)
    for q0 in range(width):
        x = 0.0
        for j in range(cfg.digits - 1, -1, -1):
            x = (x + bits[q0 + j * width]) / 2.0
        coords[q0] = x
    return coords.reshape(t_len, m + 1)


# ---------------------------------------------------------------------------
# MLP stage builders (exact ReLU gating and piecewise-linear lookups)
# ---------------------------------------------------------------------------


def _stage_scale_by_position(lay: _Layout, factors: np.ndarray):
    """Two affine maps with a ReLU between: VAL <- factor[q] * VAL at each
    position, with the factor selected by the position one-hot.

    Gate algebra: ReLU(VAL - 1 + OH_q) equals VAL exactly when OH_q = 1 and
    0 when OH_q = 0, because VAL stays in [0, 1).  One-hot and constant ride
    along on nonnegative lanes.
    """
    q, d = lay.q, lay.d
    hidden = 2 * q + 1
    a1 = np.zeros((hidden, d))
    b1 = np.zeros(hidden)
    for k in range(q):
        a1[k, lay.val] = 1.0
        a1[k, lay.oh.start + k] = 1.0
        b1[k] = -1.0
    for k in range(q):
        a1[q + k, lay.oh.start + k] = 1.0
    a1[2 * q, lay.c1] = 1.0
    a2 = np.zeros((d, hidden))
    b2 = np.zeros(d)
    for k in range(q):
        a2[lay.val, k] = factors[k]
        a2[lay.oh.start + k, q + k] = 1.0
    a2[lay.c1, 2 * q] = 1.0
    return [(a1, b1), (a2, b2)]


def _stage_affine_recover(lay: _Layout, gamma: float):
    """Single affine map undoing the summation layer's one-hot mixing:
    OH <- (OH - 1) / (e^gamma - 1); VAL and C1 pass through."""
    d = lay.d
    a = np.zeros((d, d))
    b = np.zeros(d)
    scale = 1.0 / math.expm1(gamma)
    for k in range(lay.q):
        idx = lay.oh.start + k
        a[idx, idx] = scale
        b[idx] = -scale
    a[lay.val, lay.val] = 1.0
    a[lay.c1, lay.c1] = 1.0
    return [(a, b)]


def _stage_sphere_lookup(lay: _Layout, knots: int = 2048):
    """Piecewise-linear ReLU realization of the circle embedding of VAL.

    Writes the two sphere-slot components of the inverse stereographic map
    of VAL (exact at the knots, chordal in between) while passing VAL, the
    one-hot, and the constant through.
    """
    q, d = lay.q, lay.d
    ts = np.linspace(0.0, 1.0, knots + 1)
    comps = np.array([_inv_stereographic_2d(t) for t in ts])  # (knots+1, 2)
    hidden = knots + q + 2
    a1 = np.zeros((hidden, d))
    b1 = np.zeros(hidden)
    for k in range(knots):
        a1[k, lay.val] = 1.0
        b1[k] = -ts[k]
    for k in range(q):
        a1[knots + k, lay.oh.start + k] = 1.0
    a1[knots + q, lay.c1] = 1.0
    a1[knots + q + 1, lay.val] = 1.0
    a2 = np.zeros((d, hidden))
    b2 = np.zeros(d)
    for c in range(2):
        vals = comps[:, c]
        slopes = np.diff(vals) / np.diff(ts)
        w = np.concatenate([[slopes[0]], np.diff(slopes)])
        a2[lay.z.start + c, :knots] = w
        b2[lay.z.start + c] = vals[0]
    for k in range(q):
        a2[lay.oh.start + k, knots + k] = 1.0
    a2[lay.c1, knots + q] = 1.0
    a2[lay.val, knots + q + 1] = 1.0
    return [(a1, b1), (a2, b2)]


# ---------------------------------------------------------------------------
# Attention layer builders
# ---------------------------------------------------------------------------


def _passthrough_params(lay: _Layout) -> AttentionHeadParams:
    """Every position attends to itself bit-exactly (diagonal one-hot logit
    dominates; the mandatory token and all other logits underflow)."""
    d = lay.d
    h = np.zeros((d, d))
    for k in range(lay.q):
        idx = lay.oh.start + k
        h[idx, idx] = _GAP
    w = np.zeros((d, d))
    for sl in (lay.z, lay.oh):
        for i in range(sl.start, sl.stop):
            w[i, i] = 1.0
    w[lay.c1, lay.c1] = 1.0
    w[lay.val, lay.val] = 1.0
    return AttentionHeadParams(d=d, H=h, W_V=w)


def _dummy_prefix(lay: _Layout) -> PrefixTokens:
    return PrefixTokens(d=lay.d, tokens=np.zeros((1, lay.d)), M=-_GAP, augmented=False)


def _encoder_layer_params(lay: _Layout, lam: float) -> AttentionHeadParams:
    """Layer-1 head: sphere-keyed kernel logits plus position tags; values
    write the token's scalar, one-hot payload, and constant payload."""
    d = lay.d
    h = np.zeros((d, d))
    h[lay.z, lay.ka] = np.eye(2)
    g1 = 2.0 * lam + _GAP
    for k in range(lay.q):
        h[lay.oh.start + k, lay.tag.start + k] = g1
    h[lay.c1, lay.c1] = -(lam + _GAP)
    w = np.zeros((d, d))
    w[lay.val, lay.vb] = 1.0
    for k in range(lay.q):
        w[lay.oh.start + k, lay.pay.start + k] = 1.0
    w[lay.c1, lay.pc] = 1.0
    return AttentionHeadParams(d=d, H=h, W_V=w)


def _encoder_layer_tokens(lay: _Layout, anchors: np.ndarray, values: np.ndarray, lam: float) -> PrefixTokens:
    """One bank of (anchor, value) tokens per virtual position, tagged and
    carrying that position's restoration payload."""
    n = anchors.shape[0]
    tokens = np.zeros((lay.q * n, lay.d))
    for q0 in range(lay.q):
        rows = slice(q0 * n, (q0 + 1) * n)
        tokens[rows, lay.ka] = lam * anchors
        tokens[rows, lay.vb] = values
        tokens[rows, lay.tag.start + q0] = 1.0
        tokens[rows, lay.pay.start + q0] = 1.0
        tokens[rows, lay.pc] = 1.0
    return PrefixTokens(d=lay.d, tokens=tokens, M=-(lam + _GAP), augmented=False)


def _summation_layer(lay: _Layout, gamma: float = 4.0):
    """Layer-2 head: all input-input logits are exactly zero (uniform mix),
    tokens are tagged one per position.  The value matrix is scaled by the
    known softmax denominator so the VAL slot of the output equals the
    plain sum of the per-position values."""
    d = lay.d
    z_total = math.exp(gamma) + 2.0 * lay.q - 1.0
    h = np.zeros((d, d))
    for k in range(lay.q):
        h[lay.oh.start + k, lay.tag.start + k] = gamma
    w = np.zeros((d, d))
    w[lay.val, lay.val] = z_total
    for k in range(lay.q):
        w[lay.oh.start + k, lay.pay.start + k] = z_total
    w[lay.c1, lay.pc] = z_total / (math.exp(gamma) + lay.q - 1.0)
    params = AttentionHeadParams(d=d, H=h, W_V=w)
    tokens = np.zeros((lay.q, d))
    for q0 in range(lay.q):
        tokens[q0, lay.tag.start + q0] = 1.0
        tokens[q0, lay.pay.start + q0] = 1.0
        tokens[q0, lay.pc] = 1.0
    prefix = PrefixTokens(d=d, tokens=tokens, M=-_GAP, augmented=False)
    return params, prefix


def _decoder_layer_params(lay: _Layout, lam: float, elem_positions: list[int]) -> AttentionHeadParams:
    """Layer-(2+i) head: positions of element i are steered to their token
    groups; every other position self-attends and passes through."""
    d = lay.d
    theta = lam + _GAP
    g3 = theta + lam + _GAP
    h = np.zeros((d, d))
    h[lay.z, lay.ka] = np.eye(2)
    for k in range(lay.q):
        idx = lay.oh.start + k
        h[idx, idx] = -theta if k in elem_positions else theta
        h[idx, lay.tag.start + k] = g3
    w = np.zeros((d, d))
    for sl in (lay.z, lay.oh):
        for i in range(sl.start, sl.stop):
            w[i, i] = 1.0
    w[lay.c1, lay.c1] = 1.0
    w[lay.val, lay.val] = 1.0
    w[lay.val, lay.vb] = 1.0
    for k in range(lay.q):
        w[lay.oh.start + k, lay.pay.start + k] = 1.0
    w[lay.c1, lay.pc] = 1.0
    return AttentionHeadParams(d=d, H=h, W_V=w)


def _decoder_layer_tokens(
    lay: _Layout, anchors: np.ndarray, value_bank: dict[int, np.ndarray], lam: float
) -> PrefixTokens:
    """Token groups per virtual position of the layer's element; values are
    the per-coordinate decoder outputs at the anchors."""
    n = anchors.shape[0]
    qs = sorted(value_bank)
    tokens = np.zeros((len(qs) * n, lay.d))
    for idx, q0 in enumerate(qs):
        rows = slice(idx * n, (idx + 1) * n)
        tokens[rows, lay.ka] = lam * anchors
        tokens[rows, lay.vb] = value_bank[q0]
        tokens[rows, lay.tag.start + q0] = 1.0
        tokens[rows, lay.pay.start + q0] = 1.0
        tokens[rows, lay.pc] = 1.0
    return PrefixTokens(d=lay.d, tokens=tokens, M=-(lam + _GAP), augmented=False)


# ---------------------------------------------------------------------------
# Oracle stages (hybrid mode)
# ---------------------------------------------------------------------------


def _psi_oracle(lay: _Layout, t_len: int, m: int, cfg: DigitConfig):
    width = t_len * (m + 1)

    def fn(state):
        out = state.copy()
        q0 = int(np.argmax(state[lay.oh]))
        psi_val = float(psi_strided(float(state[lay.val]), cfg, width))
        out[lay.val] = 3.0 ** (-q0) * psi_val
        return out

    return OracleStage(fn=fn, label="digit-encoder")


def _decoder_oracle(lay: _Layout, f, i0: int, t_len: int, m: int, cfg: DigitConfig):
    def fn(state):
        q0 = int(np.argmax(state[lay.oh]))
        if q0 // (m + 1) != i0:
            return state
        out = state.copy()
        decoded = decode_sequence(float(state[lay.val]), t_len, m, cfg)
        y = np.asarray(f(decoded.elements), dtype=np.float64)
        out[lay.val] = y[i0, q0 % (m + 1)]
        return out

    return OracleStage(fn=fn, label=f"decoder-{i0}")


# ---------------------------------------------------------------------------
# Stack construction and evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Seq2SeqStack:
    """A built T+2-layer stack plus the input/output conventions around it."""

    transformer: TransformerStack
    t_len: int
    m: int
    cfg: DigitConfig
    mode: str
    layout: _Layout

    @property
    def attention_layer_count(self) -> int:
        return self.transformer.attention_layer_count

    def encode_inputs(self, s: SequenceSample) -> np.ndarray:
        """SequenceSample -> (Q, d) state array (the explicit embedding
        stage: scalar chart point or raw scalar, one-hot, constant)."""
        if (s.t_len, s.m) != (self.t_len, self.m):
            raise DomainError("sample shape does not match the built stack")
        lay = self.layout
        flat = s.flat()
        states = np.zeros((lay.q, lay.d))
        for q0 in range(lay.q):
            if self.mode == "full":
                states[q0, lay.z] = _inv_stereographic_2d(float(flat[q0]))
            else:
                states[q0, lay.val] = flat[q0]
            states[q0, lay.oh.start + q0] = 1.0
            states[q0, lay.c1] = 1.0
        return states

    def readout(self, outputs) -> np.ndarray:
        """Per-position scalar values -> (T, m+1) output array."""
        lay = self.layout
        vals = np.array([out[lay.val] for out in outputs])
        return vals.reshape(self.t_len, self.m + 1)

    def evaluate(self, s: SequenceSample) -> np.ndarray:
        return self.readout(transformer_eval(self.transformer, self.encode_inputs(s)))

    def stage_trace(self, s: SequenceSample) -> dict:
        """Per-stage intermediate values (encoder inputs, post-layer states)."""
        states = self.encode_inputs(s)
        trace = {"encoded": states.copy(), "layers": []}
        X = states
        from ..attention import _apply_mlp, classical_head

        for layer in self.transformer.layers:
            X = np.stack(classical_head(X, layer.prefix, layer.params))
            attn = X.copy()
            if layer.mlp:
                X = _apply_mlp(X, layer.mlp, self.transformer.activation)
            trace["layers"].append({"attention": attn, "after_mlp": X.copy()})
        trace["outputs"] = self.readout([X[i] for i in range(X.shape[0])])
        return trace


def _circle_targets(t_len: int, m: int, cfg: DigitConfig, f):
    """Scalar targets on S^1: the strided digit encoder and, per flat
    coordinate, the decoder output as a function of the aggregate."""
    width = t_len * (m + 1)

    def psi_scalar(u: float) -> float:
        return float(psi_strided(u, cfg, width))

    def make_batch(fn):
        def ev(pts):
            out = np.zeros((pts.shape[0], 2))
            for i in range(pts.shape[0]):
                out[i, 0] = fn(_chart_u(pts[i]))
            return out

        return ev

    spec = SmoothnessSpec(L=1.0, C_H=1.0, C_R=1.0, f_sup=1.0)
    psi_target = TargetFunction(m=1, name="digit-encoder", eval_batch=make_batch(psi_scalar), smoothness=spec, sup_estimated=True)

    def decoder_scalar(q0: int):
        i0, p0 = divmod(q0, m + 1)

        def fn(u: float) -> float:
            y = np.asarray(f(_relaxed_decode(u, t_len, m, cfg)), dtype=np.float64)
            return float(y[i0, p0])

        return fn

    decoder_targets = {
        q0: TargetFunction(
            m=1,
            name=f"decoder-{q0}",
            eval_batch=make_batch(decoder_scalar(q0)),
            smoothness=spec,
            sup_estimated=True,
        )
        for q0 in range(width)
    }
    return psi_target, decoder_targets


def build_seq2seq_transformer(
    f,
    t_len: int,
    m: int,
    cfg: DigitConfig,
    n_points: int = 4096,
    lam: float = 2.0e5,
    mode: str = "hybrid",
) -> Seq2SeqStack:
    """Build the T+2 attention-layer stack realizing a sequence function.

    f maps a (T, m+1) coordinate array to a (T, m+1) output array.  In
    hybrid mode the digit encoder and the per-element decoders run as exact
    oracle stages around real attention layers; in full mode they are
    synthesized kernel prefixes over the circle (budget-driven N and
    lambda), capped to small instances.
    """
    if t_len < 1 or m < 0:
        raise DomainError("t_len >= 1 and m >= 0 required")
    if mode not in ("hybrid", "full"):
        raise DomainError(f"mode must be 'hybrid' or 'full', got {mode!r}")
    width = t_len * (m + 1)
    lay = _Layout(q=width)
    if mode == "full" and (t_len > 3 or m > 1 or cfg.digits > 3):
        raise InstanceTooLarge("full mode is capped to T <= 3, m <= 1, digits <= 3")
    if mode == "hybrid" and 3 ** (width * cfg.digits) >= 2**52:
        raise InstanceTooLarge("hybrid mode needs the aggregate to fit the float budget")

    gamma = 4.0
    layers = []
    contraction = np.array([3.0 ** (-(q0 % (m + 1)) - 1) for q0 in range(width)])
    positional = np.array([3.0 * 3.0 ** (-(q0 // (m + 1)) * (m + 1)) for q0 in range(width)])

    if mode == "hybrid":
        # The oracle folds the contraction and positional weights into its
        # exact per-position output.
        mlp1 = [_psi_oracle(lay, t_len, m, cfg)]
        layers.append(TransformerLayer(params=_passthrough_params(lay), prefix=_dummy_prefix(lay), mlp=tuple(mlp1)))
        sum_params, sum_prefix = _summation_layer(lay, gamma)
        layers.append(
            TransformerLayer(params=sum_params, prefix=sum_prefix, mlp=tuple(_stage_affine_recover(lay, gamma)))
        )
        for i0 in range(t_len):
            layers.append(
                TransformerLayer(
                    params=_passthrough_params(lay),
                    prefix=_dummy_prefix(lay),
                    mlp=(_decoder_oracle(lay, f, i0, t_len, m, cfg),),
                )
            )
    else:
        psi_target, decoder_targets = _circle_targets(t_len, m, cfg, f)
        psi_cp = synthesize_prefix(psi_target, n_points, lam)
        anchors = psi_cp.p_alpha
        psi_values = psi_cp.p_beta[:, 0]
        layers.append(
            TransformerLayer(
                params=_encoder_layer_params(lay, lam),
                prefix=_encoder_layer_tokens(lay, anchors, psi_values, lam),
                mlp=tuple(_stage_scale_by_position(lay, contraction) + _stage_scale_by_position(lay, positional)),
            )
        )
        sum_params, sum_prefix = _summation_layer(lay, gamma)
        layers.append(
            TransformerLayer(
                params=sum_params,
                prefix=sum_prefix,
                mlp=tuple(_stage_affine_recover(lay, gamma) + _stage_sphere_lookup(lay)),
            )
        )
        for i0 in range(t_len):
            elem_positions = [i0 * (m + 1) + p0 for p0 in range(m + 1)]
            value_bank = {}
            for q0 in elem_positions:
                cp = synthesize_prefix(decoder_targets[q0], n_points, lam)
                value_bank[q0] = cp.p_beta[:, 0]
            layers.append(
                TransformerLayer(
                    params=_decoder_layer_params(lay, lam, elem_positions),
                    prefix=_decoder_layer_tokens(lay, anchors, value_bank, lam),
                    mlp=(),
                )
            )

    transformer = TransformerStack(
        layers=tuple(layers),
        activation="relu",
        meta={"t_len": t_len, "m": m, "digits": cfg.digits, "mode": mode},
    )
    return Seq2SeqStack(transformer=transformer, t_len=t_len, m=m, cfg=cfg, mode=mode, layout=lay)
