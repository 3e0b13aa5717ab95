"""Decision-tree induction, rule extraction, and rule evaluation.

Induction is greedy CART over numeric features: at every node the split
maximizing Gini impurity decrease wins, candidate thresholds are midpoints
between consecutive distinct sorted values, and growth stops on purity,
depth, or the sample floor. Ties break to the lowest feature index, then
the lowest threshold, so the same inputs always build the same tree.

Rules extracted from a tree are conjunctions of the edge predicates along
each root-to-leaf path. Rule sets are ordered, first match wins, and are
treated as immutable once built; mutation helpers return a new set with a
bumped version number.
"""

from __future__ import annotations

import re
from array import array
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .ingest import SensorRecord

FEATURE_ORDER = ("temperature", "humidity", "light", "co2", "humidity_ratio", "occupancy")
DEFAULT_FEATURES = ("temperature", "humidity", "light", "co2", "humidity_ratio")

RULE_OPS = ("<=", ">=", "<", ">")


class InductionError(Exception):
    """Induction cannot start: no records or no usable feature."""


class MissingFeatureError(Exception):
    """A rule referenced a feature the event does not carry."""

    def __init__(self, feature: str):
        super().__init__(f"event has no value for feature {feature!r}")
        self.feature = feature


class RuleFormatError(Exception):
    """Rule text that does not parse, with its line number."""


@dataclass(frozen=True)
class InductionParams:
    max_depth: int = 5
    min_samples_split: int = 20
    min_impurity_decrease: float = 1e-4

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")


@dataclass(frozen=True)
class Leaf:
    label: object
    class_counts: dict

    @property
    def is_leaf(self) -> bool:
        return True


@dataclass(frozen=True)
class Split:
    feature: str
    threshold: float
    left: "Split | Leaf"
    right: "Split | Leaf"

    @property
    def is_leaf(self) -> bool:
        return False


@dataclass(frozen=True)
class DecisionTree:
    root: Split | Leaf
    features: tuple[str, ...]
    label_field: str
    params: InductionParams

    def predict(self, record: SensorRecord):
        node = self.root
        while not node.is_leaf:
            value = getattr(record, node.feature)
            if value is None:
                raise MissingFeatureError(node.feature)
            node = node.left if value <= node.threshold else node.right
        return node.label

    def depth(self) -> int:
        def walk(node):
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))
        return walk(self.root)

    def leaf_count(self) -> int:
        def walk(node):
            if node.is_leaf:
                return 1
            return walk(node.left) + walk(node.right)
        return walk(self.root)


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.dot(p, p))


def _best_split(X: np.ndarray, codes: np.ndarray, n_classes: int,
                parent_gini: float) -> tuple[float, int, float] | None:
    """Best (decrease, feature index, threshold) over all candidates, or None.

    Vectorized sweep per feature: sort once, accumulate one-hot class counts,
    and score every boundary between consecutive distinct values. Strict
    improvement comparisons keep the first (lowest feature, lowest threshold)
    candidate on ties.
    """
    n = len(codes)
    best = None
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), codes] = 1.0
    for j in range(X.shape[1]):
        values = X[:, j]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        boundaries = np.nonzero(sv[:-1] < sv[1:])[0]
        if len(boundaries) == 0:
            continue
        cum = np.cumsum(onehot[order], axis=0)
        left = cum[boundaries]
        total = cum[-1]
        right = total - left
        n_left = left.sum(axis=1)
        n_right = right.sum(axis=1)
        gini_left = 1.0 - (left ** 2).sum(axis=1) / (n_left ** 2)
        gini_right = 1.0 - (right ** 2).sum(axis=1) / (n_right ** 2)
        weighted = (n_left * gini_left + n_right * gini_right) / n
        decreases = parent_gini - weighted
        i = int(np.argmax(decreases))
        if best is None or decreases[i] > best[0] + 1e-15:
            b = boundaries[i]
            best = (float(decreases[i]), j, float((sv[b] + sv[b + 1]) / 2.0))
    return best


def induce_tree(records: list[SensorRecord], features=DEFAULT_FEATURES,
                label: str = "occupancy", params: InductionParams = InductionParams()) -> DecisionTree:
    """Grow a CART tree predicting ``label`` from the given numeric features."""
    if not records:
        raise InductionError("no records to induce from")
    features = tuple(features)
    if not features:
        raise InductionError("no usable feature")
    for f in features + (label,):
        if all(getattr(r, f, None) is None for r in records):
            raise InductionError(f"no usable feature: {f!r} has no values")
    try:
        X = np.array([[getattr(r, f) for f in features] for r in records], dtype=np.float64)
    except TypeError:
        raise InductionError("records contain missing feature values; preprocess first") from None
    labels = [getattr(r, label) for r in records]
    classes = sorted(set(labels))
    class_index = {c: i for i, c in enumerate(classes)}
    codes = np.array([class_index[v] for v in labels], dtype=np.intp)

    def counts_of(idx: np.ndarray) -> np.ndarray:
        return np.bincount(codes[idx], minlength=len(classes)).astype(np.float64)

    def majority(counts: np.ndarray):
        return classes[int(np.argmax(counts))]

    def leaf(counts: np.ndarray) -> Leaf:
        return Leaf(majority(counts), {c: int(counts[i]) for i, c in enumerate(classes) if counts[i]})

    def grow(idx: np.ndarray, depth: int):
        counts = counts_of(idx)
        parent_gini = _gini(counts)
        if (parent_gini == 0.0 or depth >= params.max_depth
                or len(idx) < params.min_samples_split):
            return leaf(counts)
        best = _best_split(X[idx], codes[idx], len(classes), parent_gini)
        if best is None or best[0] < params.min_impurity_decrease:
            return leaf(counts)
        _, j, threshold = best
        mask = X[idx, j] <= threshold
        return Split(features[j], threshold,
                     grow(idx[mask], depth + 1),
                     grow(idx[~mask], depth + 1))

    root = grow(np.arange(len(records), dtype=np.intp), 0)
    return DecisionTree(root, features, label, params)


def export_text(tree: DecisionTree) -> str:
    """Indented text rendering of a tree, for docs and train-rules output."""
    lines = []

    def walk(node, indent):
        pad = "  " * indent
        if node.is_leaf:
            counts = ", ".join(f"{k}: {v}" for k, v in sorted(node.class_counts.items(), key=str))
            lines.append(f"{pad}-> {node.label}  [{counts}]")
            return
        lines.append(f"{pad}{node.feature} <= {node.threshold:g}")
        walk(node.left, indent + 1)
        lines.append(f"{pad}{node.feature} > {node.threshold:g}")
        walk(node.right, indent + 1)

    walk(tree.root, 0)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Condition:
    feature: str
    op: str  # one of RULE_OPS
    threshold: float

    def holds(self, value: float) -> bool:
        if self.op == "<=":
            return value <= self.threshold
        if self.op == ">":
            return value > self.threshold
        if self.op == "<":
            return value < self.threshold
        return value >= self.threshold


@dataclass(frozen=True)
class Rule:
    id: str
    conditions: tuple[Condition, ...]
    consequent: object
    priority: int

    def __post_init__(self):
        _check_feasible(self)


def _check_feasible(rule: Rule):
    """Reject rules whose conditions carve out an empty region."""
    bounds: dict[str, list] = {}
    for c in rule.conditions:
        low, high = bounds.setdefault(c.feature, [(-np.inf, True), (np.inf, True)])
        if c.op in (">", ">="):
            candidate = (c.threshold, c.op == ">=")
            if candidate[0] > low[0] or (candidate[0] == low[0] and not candidate[1]):
                bounds[c.feature][0] = candidate
        else:
            candidate = (c.threshold, c.op == "<=")
            if candidate[0] < high[0] or (candidate[0] == high[0] and not candidate[1]):
                bounds[c.feature][1] = candidate
    for feature, ((lo, lo_inc), (hi, hi_inc)) in bounds.items():
        if lo > hi or (lo == hi and not (lo_inc and hi_inc)):
            raise ValueError(f"rule {rule.id}: contradictory conditions on {feature!r}")


@dataclass
class RuleSet:
    """Ordered rules with a version counter; treat instances as immutable."""

    version: int
    rules: tuple[Rule, ...]
    default_label: object = 0
    _compiled: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise ValueError("rule ids must be unique")

    def rule_by_id(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)

    def with_added(self, rule: Rule) -> "RuleSet":
        return RuleSet(self.version + 1, self.rules + (rule,), self.default_label)

    def with_updated(self, rule: Rule) -> "RuleSet":
        if all(r.id != rule.id for r in self.rules):
            raise KeyError(rule.id)
        new_rules = tuple(rule if r.id == rule.id else r for r in self.rules)
        return RuleSet(self.version + 1, new_rules, self.default_label)

    def with_deleted(self, rule_id: str) -> "RuleSet":
        if all(r.id != rule_id for r in self.rules):
            raise KeyError(rule_id)
        new_rules = tuple(r for r in self.rules if r.id != rule_id)
        return RuleSet(self.version + 1, new_rules, self.default_label)

    def compiled(self) -> "_CompiledRules":
        if self._compiled is None:
            self._compiled = _CompiledRules(self)
        return self._compiled


class _CompiledRules:
    """CSR-packed conditions for the matching kernel."""

    def __init__(self, ruleset: RuleSet):
        feature_index = {name: i for i, name in enumerate(FEATURE_ORDER)}
        starts = [0]
        feats: list[int] = []
        ops: list[int] = []
        thresholds: list[float] = []
        for rule in ruleset.rules:
            for c in rule.conditions:
                if c.feature not in feature_index:
                    raise MissingFeatureError(c.feature)
                feats.append(feature_index[c.feature])
                ops.append(kernel.OP_CODES[c.op])
                thresholds.append(c.threshold)
            starts.append(len(feats))
        self.rule_start = np.array(starts, dtype=np.intc)
        self.cond_feature = np.array(feats, dtype=np.intc)
        self.cond_op = np.array(ops, dtype=np.intc)
        self.cond_threshold = np.array(thresholds, dtype=np.float64)
        self.rules = ruleset.rules

    def first_match(self, values) -> int:
        return kernel.first_match(values, self.rule_start, self.cond_feature,
                                  self.cond_op, self.cond_threshold)


def rule_matches(rule: Rule, event: SensorRecord) -> bool:
    """True iff every condition of the rule holds for the event."""
    for c in rule.conditions:
        try:
            value = getattr(event, c.feature)
        except AttributeError:
            raise MissingFeatureError(c.feature) from None
        if value is None:
            raise MissingFeatureError(c.feature)
        if not c.holds(value):
            return False
    return True


def classify(ruleset: RuleSet, event: SensorRecord):
    """(label, fired rule ids) under first-match-wins priority order.

    The fired list carries the id of the winning rule; it is empty when no
    rule matched and the default label was used.
    """
    values = _feature_vector(event)
    if values is not None:
        try:
            compiled = ruleset.compiled()
        except MissingFeatureError:
            compiled = None
        if compiled is not None:
            i = compiled.first_match(values)
            if i < 0:
                return ruleset.default_label, []
            rule = compiled.rules[i]
            return rule.consequent, [rule.id]
    for rule in ruleset.rules:
        if rule_matches(rule, event):
            return rule.consequent, [rule.id]
    return ruleset.default_label, []


def _feature_vector(event: SensorRecord):
    t = event.temperature
    h = event.humidity
    li = event.light
    c = event.co2
    hr = event.humidity_ratio
    o = event.occupancy
    if t is None or h is None or li is None or c is None or hr is None or o is None:
        return None
    return array("d", (t, h, li, c, hr, float(o)))


def extract_rules(tree: DecisionTree, start_version: int = 1) -> RuleSet:
    """One rule per leaf: the conjunction of edge predicates on its path.

    Priority is left-to-right leaf order; the default label is the majority
    label at the root (extracted rules are exhaustive, so it only matters
    for sets edited afterwards).
    """
    rules: list[Rule] = []

    def walk(node, conditions):
        if node.is_leaf:
            rule_id = f"R{len(rules) + 1}"
            rules.append(Rule(rule_id, tuple(conditions), node.label, len(rules) + 1))
            return
        walk(node.left, conditions + [Condition(node.feature, "<=", node.threshold)])
        walk(node.right, conditions + [Condition(node.feature, ">", node.threshold)])

    walk(tree.root, [])
    # root majority: recompute from the union of leaf counts
    totals: dict = {}
    def accumulate(n):
        if n.is_leaf:
            for k, v in n.class_counts.items():
                totals[k] = totals.get(k, 0) + v
        else:
            accumulate(n.left)
            accumulate(n.right)
    accumulate(tree.root)
    default = max(sorted(totals, key=str), key=lambda k: totals[k]) if totals else 0
    return RuleSet(start_version, tuple(rules), default)


_RULE_LINE = re.compile(r"^\s*IF\s+(.+?)\s+THEN\s+(\S+)\s*$", re.IGNORECASE)
_CONDITION = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(<=|>=|<|>)\s*([-+0-9.eE]+)\s*$")


def parse_rules(text: str) -> list[Rule]:
    """Parse `IF <feature> <op> <value> [AND ...] THEN <label>` lines.

    Blank lines and # comments are skipped. Labels: integers stay integers,
    true/false map to 1/0, anything else is kept as a string tag.
    """
    rules = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _RULE_LINE.match(line)
        if not m:
            raise RuleFormatError(f"line {line_number}: expected 'IF ... THEN ...', got {line!r}")
        conditions = []
        for part in re.split(r"\s+AND\s+", m.group(1), flags=re.IGNORECASE):
            cm = _CONDITION.match(part)
            if not cm:
                raise RuleFormatError(f"line {line_number}: bad condition {part!r}")
            feature = cm.group(1)
            if feature not in FEATURE_ORDER:
                raise RuleFormatError(
                    f"line {line_number}: unknown feature {feature!r} (expected one of {FEATURE_ORDER})")
            try:
                threshold = float(cm.group(3))
            except ValueError:
                raise RuleFormatError(f"line {line_number}: bad threshold {cm.group(3)!r}") from None
            conditions.append(Condition(feature, cm.group(2), threshold))
        label_text = m.group(2)
        if re.fullmatch(r"[-+]?\d+", label_text):
            label: object = int(label_text)
        elif label_text.lower() in ("true", "false"):
            label = 1 if label_text.lower() == "true" else 0
        else:
            label = label_text
        rule_id = f"R{len(rules) + 1}"
        try:
            rules.append(Rule(rule_id, tuple(conditions), label, len(rules) + 1))
        except ValueError as exc:
            raise RuleFormatError(f"line {line_number}: {exc}") from None
    return rules


def format_rules(ruleset: RuleSet) -> str:
    """Render rules back to the text format (ids become file order)."""
    lines = []
    for rule in ruleset.rules:
        conds = " AND ".join(f"{c.feature} {c.op} {c.threshold!r}" for c in rule.conditions)
        if not conds:
            conds = f"temperature > {-1e308:g}"
        lines.append(f"IF {conds} THEN {rule.consequent}")
    return "\n".join(lines) + "\n"


def load_rules(path, default_label: object = 0, version: int = 1) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return RuleSet(version, tuple(parse_rules(fh.read())), default_label)
