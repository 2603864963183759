"""Hot numeric kernels with a compiled fast path and a NumPy fallback.

The Cython extension ``hdmap.kernels._fast`` is used when it imported
successfully and ``HDMAP_PURE`` is not set in the environment; otherwise
the NumPy reference implementation takes over.  ``BACKEND`` names the
active implementation.  Both produce the same results up to summation
order; ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _ref

_impl = _ref
BACKEND = "numpy"
if not os.environ.get("HDMAP_PURE"):
    try:
        from . import _fast  # type: ignore[attr-defined]

        _impl = _fast
        BACKEND = "cython"
    except ImportError:
        pass


@dataclass(frozen=True, eq=False)
class CodeTable:
    """Preprocessed per-symbol code/mask arrays of one constellation."""

    code: np.ndarray  # (M, R) uint8
    used: np.ndarray  # (M, R) uint8
    ones: np.ndarray  # (M, R) float64: used & code
    zeros: np.ndarray  # (M, R) float64: used & ~code
    indptr: np.ndarray  # (M+1,) int64 CSR over used bits
    indices: np.ndarray  # (nnz,) int64 global bit positions
    bitvals: np.ndarray  # (nnz,) uint8 code bit at each position

    @property
    def num_symbols(self) -> int:
        return self.code.shape[0]

    @property
    def num_bits(self) -> int:
        return self.code.shape[1]


def prepare_table(code: np.ndarray, used: np.ndarray) -> CodeTable:
    code = np.ascontiguousarray(code, dtype=np.uint8)
    used_b = np.ascontiguousarray(used).astype(bool)
    ones = (used_b & (code == 1)).astype(np.float64)
    zeros = (used_b & (code == 0)).astype(np.float64)
    counts = used_b.sum(axis=1)
    indptr = np.zeros(len(code) + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.concatenate([np.flatnonzero(u) for u in used_b]) if len(code) else np.empty(0)
    indices = indices.astype(np.int64)
    bitvals = code[np.repeat(np.arange(len(code)), counts), indices] if indices.size else np.empty(0, np.uint8)
    return CodeTable(code, used_b.astype(np.uint8), ones, zeros, indptr, indices, np.ascontiguousarray(bitvals, dtype=np.uint8))


@dataclass(frozen=True, eq=False)
class BitmapTable:
    """Payload bit mapping preprocessed for per-bit marginalization."""

    bits: np.ndarray  # (M, B) uint8
    ones_indptr: np.ndarray  # (B+1,) int64
    ones_idx: np.ndarray  # symbols with bit = 1, grouped per bit
    zeros_indptr: np.ndarray
    zeros_idx: np.ndarray

    @property
    def num_payload_bits(self) -> int:
        return self.bits.shape[1]


def prepare_bitmap(bits: np.ndarray) -> BitmapTable:
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    m, b = bits.shape
    ones_lists = [np.flatnonzero(bits[:, j]).astype(np.int64) for j in range(b)]
    zeros_lists = [np.flatnonzero(bits[:, j] == 0).astype(np.int64) for j in range(b)]

    def pack(lists):
        indptr = np.zeros(b + 1, dtype=np.int64)
        np.cumsum([len(x) for x in lists], out=indptr[1:])
        idx = np.concatenate(lists) if lists else np.empty(0, np.int64)
        return indptr, idx

    op, oi = pack(ones_lists)
    zp, zi = pack(zeros_lists)
    return BitmapTable(bits, op, oi, zp, zi)


def _as_batch(x: np.ndarray, width: int, dtype) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=dtype)
    squeeze = x.ndim == 1
    x = np.ascontiguousarray(x.reshape(1, -1) if squeeze else x)
    if x.shape[1] != width:
        raise ValueError(f"expected trailing dimension {width}, got {x.shape[1]}")
    return x, squeeze


def sym_logprobs(logits: np.ndarray, table: CodeTable) -> np.ndarray:
    """Log-probability of each symbol as the product of its used-bit Bernoullis."""
    logits, squeeze = _as_batch(logits, table.num_bits, np.float64)
    out = np.empty((logits.shape[0], table.num_symbols), dtype=np.float64)
    _impl.sym_logprobs(logits, table, out)
    return out[0] if squeeze else out


def bit_llrs(slp: np.ndarray, bitmap: BitmapTable, llr_max: float) -> np.ndarray:
    """Payload-bit LLRs from symbol log-probabilities (clipped to <= 0, LSE split)."""
    slp, squeeze = _as_batch(slp, bitmap.bits.shape[0], np.float64)
    out = np.empty((slp.shape[0], bitmap.num_payload_bits), dtype=np.float64)
    _impl.bit_llrs(slp, bitmap, float(llr_max), out)
    return out[0] if squeeze else out


def awgn_sym_logprobs(rx: np.ndarray, points: np.ndarray, noise_var) -> np.ndarray:
    """Normalized log posterior of each symbol under AWGN with uniform priors."""
    rx = np.ascontiguousarray(np.atleast_1d(np.asarray(rx, dtype=np.complex128)))
    points = np.ascontiguousarray(np.asarray(points, dtype=np.complex128))
    nv = np.ascontiguousarray(np.broadcast_to(np.asarray(noise_var, dtype=np.float64), rx.shape))
    if np.any(nv <= 0):
        raise ValueError("noise variance must be positive")
    out = np.empty((rx.shape[0], points.shape[0]), dtype=np.float64)
    _impl.awgn_sym_logprobs(rx, points, nv, out)
    return out


def hard_decision(rx: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Index of the nearest constellation point (lowest index wins ties)."""
    rx = np.ascontiguousarray(np.atleast_1d(np.asarray(rx, dtype=np.complex128)))
    points = np.ascontiguousarray(np.asarray(points, dtype=np.complex128))
    out = np.empty(rx.shape[0], dtype=np.int64)
    _impl.hard_decision(rx, points, out)
    return out


def pseudo_loss(logits: np.ndarray, code: np.ndarray, used: np.ndarray) -> np.ndarray:
    """Per-sample masked binary cross-entropy against a target code."""
    logits = np.ascontiguousarray(np.atleast_2d(np.asarray(logits, dtype=np.float64)))
    code = np.ascontiguousarray(np.atleast_2d(code), dtype=np.uint8)
    used = np.ascontiguousarray(np.atleast_2d(used), dtype=np.uint8)
    if not (logits.shape == code.shape == used.shape):
        raise ValueError("logits, code and used must share one shape")
    out = np.empty(logits.shape[0], dtype=np.float64)
    _impl.pseudo_loss(logits, code, used, out)
    return out
