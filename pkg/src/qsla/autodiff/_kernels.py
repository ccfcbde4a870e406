"""Compiled inner loops for the 1-D convolution.

The forward kernel accumulates products strictly in (channel, tap) order
per output element (fastmath stays off, so LLVM cannot reassociate or fuse
the arithmetic); the result is bit-identical to a direct scalar summation
in the same order for both float32 and float64. The dx kernel has no
ordering contract and just needs to be fast and deterministic.
"""

from __future__ import annotations

from numba import njit


@njit(cache=True, fastmath=False)
def conv1d_forward(xpad, w, b, out):
    """out[n,f,t] = b[f] + sum_c sum_k w[f,c,k] * xpad[n,c,t+k]."""
    n = xpad.shape[0]
    c_in = xpad.shape[1]
    f = w.shape[0]
    k = w.shape[2]
    length = out.shape[2]
    for ni in range(n):
        for fi in range(f):
            for t in range(length):
                out[ni, fi, t] = b[fi]
            for ci in range(c_in):
                for ki in range(k):
                    wv = w[fi, ci, ki]
                    for t in range(length):
                        out[ni, fi, t] += wv * xpad[ni, ci, t + ki]


@njit(cache=True, fastmath=False)
def conv1d_backward_dx(w, dy, dxpad):
    """dxpad[n,c,t+k] += sum_f w[f,c,k] * dy[n,f,t]."""
    n = dy.shape[0]
    f = dy.shape[1]
    length = dy.shape[2]
    c_in = w.shape[1]
    k = w.shape[2]
    for ni in range(n):
        for ci in range(c_in):
            for fi in range(f):
                for ki in range(k):
                    wv = w[fi, ci, ki]
                    for t in range(length):
                        dxpad[ni, ci, t + ki] += wv * dy[ni, fi, t]
