"""Extended-real arithmetic shared by every module.

Two conventions are used throughout:

* an expectation whose positive and negative parts are both infinite is -inf,
  and more generally any undefined operation (nan) is mapped to -inf;
* the supremum of an empty set is -inf.
"""
import numpy as np

INF = float("inf")
NINF = float("-inf")


def sanitize(x):
    """Replace nan by -inf (the pessimistic convention for inf - inf)."""
    x = np.asarray(x, dtype=float)
    return np.where(np.isnan(x), NINF, x)


def ext_expect(p, v, axis=-1):
    """Expectation of ``v`` under weights ``p`` along ``axis`` with extended reals.

    Entries with zero weight are never evaluated, so infinities off the
    support are harmless. Broadcasts like ``(p * v).sum(axis)``.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    p, v = np.broadcast_arrays(p, v)
    charged = p > 0
    has_pos = np.any(charged & (v == INF), axis=axis)
    has_neg = np.any(charged & (v == NINF), axis=axis)
    finite = np.where(charged & np.isfinite(v), v, 0.0)
    total = np.sum(p * finite, axis=axis)
    out = np.where(has_neg, NINF, np.where(has_pos, INF, total))
    return out if out.ndim else float(out)


def ext_max(v, axis=-1):
    """Maximum along ``axis``; an empty axis gives -inf."""
    v = np.asarray(v, dtype=float)
    if v.shape[axis] == 0:
        out = np.full(np.delete(v.shape, axis if axis >= 0 else v.ndim + axis), NINF)
        return out if out.ndim else float(out)
    out = np.max(v, axis=axis)
    return out if np.ndim(out) else float(out)


def abs_gap(a, b):
    """Elementwise |a - b| where equal infinities count as zero gap."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        gap = np.abs(a - b)
    return np.where(a == b, 0.0, np.where(np.isnan(gap), INF, gap))
