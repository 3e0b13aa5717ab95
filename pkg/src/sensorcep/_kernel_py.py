"""Pure-Python rule-matching kernel.

Same contract as the compiled module: rules are packed in CSR form, where
``rule_start[i]:rule_start[i+1]`` indexes the condition arrays for rule ``i``.
Operator codes: 0 ``<=``, 1 ``>``, 2 ``<``, 3 ``>=``, 4 ``==``, 5 ``!=``.
"""

BACKEND = "pure-python"


def first_match(values, rule_start, cond_feature, cond_op, cond_threshold):
    """Return the index of the first rule whose conditions all hold, else -1.

    Args:
        values: per-feature measurements, indexed by feature id.
        rule_start: CSR offsets, one longer than the rule count.
        cond_feature / cond_op / cond_threshold: flattened conditions.
    """
    n_rules = len(rule_start) - 1
    for i in range(n_rules):
        lo = rule_start[i]
        hi = rule_start[i + 1]
        ok = True
        for j in range(lo, hi):
            v = values[cond_feature[j]]
            t = cond_threshold[j]
            op = cond_op[j]
            if op == 0:
                hold = v <= t
            elif op == 1:
                hold = v > t
            elif op == 2:
                hold = v < t
            elif op == 3:
                hold = v >= t
            elif op == 4:
                hold = v == t
            else:
                hold = v != t
            if not hold:
                ok = False
                break
        if ok:
            return i
    return -1


def first_match_batch(values, rule_start, cond_feature, cond_op, cond_threshold, out):
    """Row-wise first_match over a 2-D value matrix, written into ``out``."""
    for r in range(len(values)):
        out[r] = first_match(values[r], rule_start, cond_feature, cond_op, cond_threshold)
