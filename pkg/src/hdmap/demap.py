"""Probability algebra of the demapper.

Representation logits -> symbol log-probabilities (product of per-bit
Bernoullis over each symbol's used mask) -> payload-bit LLRs (stable
LogSumExp marginalization over the supplied bit mapping), plus the
masked pseudo-objective used for training and the two exact AWGN
baselines (hard decision and exact soft LLRs).

Conventions: every LLR is log P(=1) / P(=0); payload LLRs are clamped to
+-LLR_MAX; symbol log-probabilities are not renormalized (LLR ratios are
invariant to a common normalizer).
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .constellation import Constellation
from .representation import RepresentationLayout

#: Output LLR clamp (|LLR| = 40 corresponds to a probability of ~4e-18).
LLR_MAX = 40.0


def logsumexp(x: np.ndarray, axis: int | None = None) -> np.ndarray | float:
    """Stable log(sum(exp(x))); a smooth upper bound of max(x)."""
    x = np.asarray(x, dtype=np.float64)
    if axis is None:
        if x.size == 0:
            return -np.inf
        m = np.max(x)
        if not np.isfinite(m):
            return float(m)
        return float(m + np.log(np.sum(np.exp(x - m))))
    m = np.max(x, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    out = safe + np.log(np.sum(np.exp(x - safe), axis=axis, keepdims=True))
    out = np.where(np.isfinite(m), out, m)
    return np.squeeze(out, axis=axis)


def _table(layout: RepresentationLayout, constellation_id: str) -> kernels.CodeTable:
    cache = getattr(layout, "_kernel_tables", None)
    if cache is None:
        cache = {}
        object.__setattr__(layout, "_kernel_tables", cache)
    tab = cache.get(constellation_id)
    if tab is None:
        sc = layout.per_constellation[constellation_id]
        tab = kernels.prepare_table(sc.code, sc.used)
        cache[constellation_id] = tab
    return tab


def _bitmap(bit_mapping) -> kernels.BitmapTable:
    if isinstance(bit_mapping, kernels.BitmapTable):
        return bit_mapping
    if isinstance(bit_mapping, Constellation):
        return kernels.prepare_bitmap(bit_mapping.bit_matrix())
    if isinstance(bit_mapping, np.ndarray):
        return kernels.prepare_bitmap(bit_mapping)
    bits = np.array([[int(c) for c in s] for s in bit_mapping], dtype=np.uint8)
    return kernels.prepare_bitmap(bits)


def symbol_logprobs_from_repr(
    frame: np.ndarray, layout: RepresentationLayout, constellation_id: str
) -> np.ndarray:
    """log P(s | x) for every symbol from representation logits.

    ``frame`` is one logit vector of length ``layout.total_bits`` or a
    batch of them; the result has one entry (row) per symbol.
    """
    if constellation_id not in layout.per_constellation:
        raise KeyError(f"unknown constellation '{constellation_id}'")
    frame = np.asarray(frame, dtype=np.float64)
    if not np.all(np.isfinite(frame)):
        raise ValueError("representation logits must be finite")
    return kernels.sym_logprobs(frame, _table(layout, constellation_id))


def bit_probs_from_symbols(slp: np.ndarray, bit_mapping, llr_max: float = LLR_MAX) -> np.ndarray:
    """Payload-bit LLRs by marginalizing symbol log-probabilities.

    ``bit_mapping`` may be a constellation, a list of bit strings, a
    (M, B) bit matrix, or a preprocessed table.  Log-probabilities are
    clipped to <= 0 before the LogSumExp split and the output is clamped
    to +-``llr_max`` so one-sided bits stay finite.
    """
    return kernels.bit_llrs(np.asarray(slp, dtype=np.float64), _bitmap(bit_mapping), llr_max)


def pseudo_loss(
    frame: np.ndarray,
    layout: RepresentationLayout,
    constellation_id: str,
    true_symbol,
) -> float | np.ndarray:
    """Masked binary cross-entropy against the true symbol's code.

    Equals -log P(true_symbol | x) under the per-bit Bernoulli product,
    i.e. only the ground-truth term of the full marginalization survives.
    """
    sc = layout.per_constellation[constellation_id]
    frame = np.asarray(frame, dtype=np.float64)
    scalar = frame.ndim == 1 and np.isscalar(true_symbol)
    frame2 = np.atleast_2d(frame)
    syms = np.atleast_1d(np.asarray(true_symbol, dtype=np.int64))
    if np.any(syms < 0) or np.any(syms >= sc.code.shape[0]):
        raise ValueError(f"symbol out of range for '{constellation_id}'")
    if len(syms) == 1 and frame2.shape[0] > 1:
        syms = np.repeat(syms, frame2.shape[0])
    out = kernels.pseudo_loss(frame2, sc.code[syms], sc.used[syms].astype(np.uint8))
    return float(out[0]) if scalar else out


def pseudo_loss_grad(frame: np.ndarray, code: np.ndarray, used: np.ndarray) -> np.ndarray:
    """d pseudo_loss / d logit = used * (sigmoid(logit) - code_bit)."""
    sig = 1.0 / (1.0 + np.exp(-frame))
    return used * (sig - code)


def hard_decision(x, constellation: Constellation) -> int | np.ndarray:
    """Nearest-point (maximum-likelihood) symbol decision under AWGN."""
    out = kernels.hard_decision(x, constellation.points)
    return int(out[0]) if np.isscalar(x) or np.asarray(x).ndim == 0 else out


def exact_awgn_llrs(
    x, constellation: Constellation, noise_var, bit_mapping=None
) -> tuple[np.ndarray, np.ndarray]:
    """Exact posterior (symbol log-probs, payload LLRs) under AWGN.

    This is the gold soft demapper: log P(s|x) = -|x - c_s|^2 / sigma^2
    up to the LogSumExp normalizer, followed by per-bit marginalization
    through ``bit_mapping`` (the constellation's own mapping by default).
    """
    nv = np.asarray(noise_var, dtype=np.float64)
    if np.any(nv <= 0):
        raise ValueError(f"noise variance must be positive, got {noise_var}")
    scalar = np.isscalar(x) or np.asarray(x).ndim == 0
    slp = kernels.awgn_sym_logprobs(x, constellation.points, nv)
    llrs = bit_probs_from_symbols(slp, bit_mapping if bit_mapping is not None else constellation)
    if scalar:
        return slp[0], llrs[0]
    return slp, llrs
