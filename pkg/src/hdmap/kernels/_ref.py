"""NumPy reference implementation of the hot kernels.

Mirrors the Cython extension's contract; kept dependency-free so the
package always works and so tests can cross-check the compiled path.
"""

from __future__ import annotations

import numpy as np


def logsigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def _lse(x: np.ndarray, axis: int) -> np.ndarray:
    if x.shape[axis] == 0:
        shape = list(x.shape)
        del shape[axis]
        return np.full(shape, -np.inf)
    m = np.max(x, axis=axis, keepdims=True)
    return (m + np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True))).squeeze(axis)


def sym_logprobs(logits, table, out):
    lsp = logsigmoid(logits)
    lsn = logsigmoid(-logits)
    np.matmul(lsp, table.ones.T, out=out)
    out += lsn @ table.zeros.T
    return out


def bit_llrs(slp, bitmap, llr_max, out):
    clipped = np.minimum(slp, 0.0)
    for j in range(bitmap.num_payload_bits):
        ones = bitmap.ones_idx[bitmap.ones_indptr[j] : bitmap.ones_indptr[j + 1]]
        zeros = bitmap.zeros_idx[bitmap.zeros_indptr[j] : bitmap.zeros_indptr[j + 1]]
        out[:, j] = _lse(clipped[:, ones], axis=1) - _lse(clipped[:, zeros], axis=1)
    np.clip(out, -llr_max, llr_max, out=out)
    return out


def awgn_sym_logprobs(rx, points, noise_var, out):
    d2 = np.abs(rx[:, None] - points[None, :]) ** 2
    np.divide(d2, -noise_var[:, None], out=out)
    out -= _lse(out, axis=1)[:, None]
    return out


def hard_decision(rx, points, out):
    # chunked to bound the N x M distance matrix
    step = max(1, 2_000_000 // max(1, len(points)))
    for lo in range(0, len(rx), step):
        d2 = np.abs(rx[lo : lo + step, None] - points[None, :]) ** 2
        out[lo : lo + step] = np.argmin(d2, axis=1)
    return out


def pseudo_loss(logits, code, used, out):
    z = np.where(code == 1, -logits, logits)
    np.sum(np.logaddexp(0.0, z), axis=1, where=used.astype(bool), out=out)
    return out
