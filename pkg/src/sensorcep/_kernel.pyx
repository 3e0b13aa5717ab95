# cython: language_level=3
"""Compiled rule-matching kernel.

Mirrors _kernel_py exactly; see that module for the CSR layout and operator
codes. Kept branch-for-branch identical so the equivalence property test can
drive both backends with the same inputs.
"""

BACKEND = "compiled"


cdef inline bint _holds(double v, int op, double t) nogil:
    if op == 0:
        return v <= t
    elif op == 1:
        return v > t
    elif op == 2:
        return v < t
    elif op == 3:
        return v >= t
    elif op == 4:
        return v == t
    return v != t


cdef inline int _first_match(const double[::1] values,
                             const int[::1] rule_start,
                             const int[::1] cond_feature,
                             const int[::1] cond_op,
                             const double[::1] cond_threshold) nogil:
    cdef int n_rules = rule_start.shape[0] - 1
    cdef int i, j, lo, hi
    cdef bint ok
    for i in range(n_rules):
        lo = rule_start[i]
        hi = rule_start[i + 1]
        ok = True
        for j in range(lo, hi):
            if not _holds(values[cond_feature[j]], cond_op[j], cond_threshold[j]):
                ok = False
                break
        if ok:
            return i
    return -1


def first_match(const double[::1] values,
                const int[::1] rule_start,
                const int[::1] cond_feature,
                const int[::1] cond_op,
                const double[::1] cond_threshold):
    """Return the index of the first rule whose conditions all hold, else -1."""
    return _first_match(values, rule_start, cond_feature, cond_op, cond_threshold)


def first_match_batch(const double[:, ::1] values,
                      const int[::1] rule_start,
                      const int[::1] cond_feature,
                      const int[::1] cond_op,
                      const double[::1] cond_threshold,
                      int[::1] out):
    """Row-wise first_match over a 2-D value matrix, written into ``out``."""
    cdef Py_ssize_t r
    with nogil:
        for r in range(values.shape[0]):
            out[r] = _first_match(values[r], rule_start, cond_feature,
                                  cond_op, cond_threshold)
