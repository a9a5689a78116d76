"""Greedy binary CART with exhaustive split search and leaf-donor sampling.

Fitting evaluates every admissible split of every predictor: all change
points of a sorted numeric predictor, all level subsets of a categorical one
(exhaustive up to 12 observed levels, ordered contiguous splits above that).
Impurity is Gini mass for categorical targets and within-node sum of squared
deviations for numeric targets; a split must beat ``complexity`` times the
root impurity.  Synthetic values are drawn uniformly from the donor rows of
the leaf each synthetic row routes to, so over-fitting only adds noise to
the draws rather than invented values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MethodError
from .tabular import Categorical, Column, Dataset, Numeric, VariableKind

MAX_EXHAUSTIVE_LEVELS = 12


@dataclass(frozen=True)
class CartNode:
    # split = ("num", column, threshold) | ("cat", column, left_codes, known_codes, majority_left)
    split: tuple | None
    left: int = -1
    right: int = -1
    leaf_id: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass(frozen=True)
class CartTree:
    target_name: str
    target_kind: VariableKind
    target_values: np.ndarray = field(repr=False)
    nodes: tuple[CartNode, ...] = field(repr=False)
    donor_rows: np.ndarray = field(repr=False)   # training row indices, leaf-major
    leaf_offsets: np.ndarray = field(repr=False)
    leaf_sizes: np.ndarray = field(repr=False)
    min_bucket: int = 5
    complexity: float = 1e-8
    root_impurity: float = 0.0
    warnings: tuple[str, ...] = ()

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_sizes)

    def training_impurity(self) -> float:
        """Total leaf impurity over the training data (0 = perfect fit)."""
        total = 0.0
        for lid in range(self.n_leaves):
            rows = self.donor_rows[
                self.leaf_offsets[lid] : self.leaf_offsets[lid] + self.leaf_sizes[lid]
            ]
            total += _impurity(self.target_values[rows], isinstance(self.target_kind, Categorical))
        return total


def _impurity(values: np.ndarray, categorical: bool) -> float:
    m = len(values)
    if m == 0:
        return 0.0
    if categorical:
        counts = np.bincount(values)
        return float(m - (counts.astype(np.float64) ** 2).sum() / m)
    s = float(values.sum())
    return float((values**2).sum() - s * s / m)


def _numeric_split(x, t, categorical, min_bucket, node_imp, n_levels):
    """Best 'x <= threshold' split; returns (gain, threshold) or None."""
    m = len(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    pos = np.arange(min_bucket, m - min_bucket + 1)
    if pos.size == 0:
        return None
    valid = xs[pos - 1] < xs[pos]
    if not valid.any():
        return None
    if categorical:
        oh = np.zeros((m, n_levels), dtype=np.float64)
        oh[np.arange(m), t[order]] = 1.0
        cum = oh.cumsum(axis=0)
        left_counts = cum[pos - 1]
        total = cum[-1]
        left_n = pos.astype(np.float64)
        right_n = m - left_n
        left_imp = left_n - (left_counts**2).sum(axis=1) / left_n
        right_counts = total - left_counts
        right_imp = right_n - (right_counts**2).sum(axis=1) / right_n
    else:
        ys = t[order]
        cy = ys.cumsum()
        cy2 = (ys**2).cumsum()
        left_n = pos.astype(np.float64)
        right_n = m - left_n
        left_imp = cy2[pos - 1] - cy[pos - 1] ** 2 / left_n
        right_imp = (cy2[-1] - cy2[pos - 1]) - (cy[-1] - cy[pos - 1]) ** 2 / right_n
    gain = np.where(valid, node_imp - left_imp - right_imp, -np.inf)
    best = int(np.argmax(gain))
    if not np.isfinite(gain[best]):
        return None
    threshold = float((xs[pos[best] - 1] + xs[pos[best]]) / 2.0)
    return float(gain[best]), threshold


def _level_stats(codes, t, categorical, n_pred_levels, n_tgt_levels):
    if categorical:
        flat = np.bincount(
            codes * n_tgt_levels + t, minlength=n_pred_levels * n_tgt_levels
        ).astype(np.float64)
        C = flat.reshape(n_pred_levels, n_tgt_levels)
        return C.sum(axis=1), C
    n_l = np.bincount(codes, minlength=n_pred_levels).astype(np.float64)
    s_l = np.bincount(codes, weights=t, minlength=n_pred_levels)
    s2_l = np.bincount(codes, weights=t**2, minlength=n_pred_levels)
    return n_l, np.column_stack([s_l, s2_l])


def _subset_gains(left_n, left_stat, tot_n, tot_stat, categorical, min_bucket, node_imp):
    right_n = tot_n - left_n
    ok = (left_n >= min_bucket) & (right_n >= min_bucket)
    with np.errstate(divide="ignore", invalid="ignore"):
        if categorical:
            li = left_n - (left_stat**2).sum(axis=1) / left_n
            rs = tot_stat - left_stat
            ri = right_n - (rs**2).sum(axis=1) / right_n
        else:
            li = left_stat[:, 1] - left_stat[:, 0] ** 2 / left_n
            ri = (tot_stat[1] - left_stat[:, 1]) - (tot_stat[0] - left_stat[:, 0]) ** 2 / right_n
    return np.where(ok, node_imp - li - ri, -np.inf)


def _categorical_split(codes, t, categorical, min_bucket, node_imp, n_pred_levels, n_tgt_levels):
    """Best level-subset split; returns (gain, left_codes, known_codes, majority_left)."""
    n_l, stat = _level_stats(codes, t, categorical, n_pred_levels, n_tgt_levels)
    obs = np.flatnonzero(n_l > 0)
    k = len(obs)
    if k < 2:
        return None
    m = float(len(codes))
    tot_stat = stat[obs].sum(axis=0)
    if k <= MAX_EXHAUSTIVE_LEVELS:
        # first observed level pinned to the right side halves the search
        n_masks = (1 << (k - 1)) - 1
        masks = (
            (np.arange(1, n_masks + 1)[:, None] >> np.arange(k - 1)) & 1
        ).astype(np.float64)
        rest = obs[1:]
        left_n = masks @ n_l[rest]
        left_stat = masks @ stat[rest]
        gains = _subset_gains(
            left_n, left_stat, m, tot_stat, categorical, min_bucket, node_imp
        )
        best = int(np.argmax(gains))
        if not np.isfinite(gains[best]):
            return None
        chosen = rest[masks[best].astype(bool)]
        gain = float(gains[best])
    else:
        # order levels by target mean (numeric) / first-level share (categorical),
        # then scan contiguous splits only
        score = stat[obs, 0] / n_l[obs]
        order = obs[np.argsort(score, kind="stable")]
        cn = n_l[order].cumsum()
        cstat = stat[order].cumsum(axis=0)
        left_n = cn[:-1]
        gains = _subset_gains(
            left_n, cstat[:-1], m, tot_stat, categorical, min_bucket, node_imp
        )
        best = int(np.argmax(gains))
        if not np.isfinite(gains[best]):
            return None
        chosen = order[: best + 1]
        gain = float(gains[best])
    left_codes = frozenset(int(c) for c in chosen)
    known_codes = frozenset(int(c) for c in obs)
    left_size = float(n_l[list(left_codes)].sum())
    majority_left = left_size >= (m - left_size)
    return gain, left_codes, known_codes, majority_left


def fit_cart(
    target: Column,
    predictors: Dataset | None,
    min_bucket: int = 5,
    complexity: float = 1e-8,
) -> CartTree:
    """Grow a tree by greedy recursive partitioning of the training rows."""
    if target.n_rows == 0:
        raise MethodError(f"cart: target {target.name!r} is empty")
    if target.missing_mask().any():
        raise MethodError(f"cart: target {target.name!r} has missing values")
    categorical = isinstance(target.kind, Categorical)
    t = target.values
    n_tgt_levels = len(target.kind.levels) if categorical else 0
    n = target.n_rows

    pred_cols: list[tuple[str, bool, np.ndarray, int]] = []
    if predictors is not None:
        for col in predictors.columns:
            if isinstance(col.kind, Numeric):
                if np.isnan(col.values).any():
                    raise MethodError(
                        f"cart: predictor {col.name!r} has missing values; expand it "
                        "with a missing indicator first"
                    )
                pred_cols.append((col.name, False, col.values, 0))
            else:
                pred_cols.append((col.name, True, col.values, len(col.kind.levels)))

    root_imp = _impurity(t, categorical)
    gain_floor = complexity * root_imp + 1e-12 * (abs(root_imp) + 1.0)

    nodes: list[list] = []  # [split, left, right, leaf_id]
    leaf_rows: list[np.ndarray] = []
    stack: list[tuple[int, np.ndarray]] = []

    def new_node() -> int:
        nodes.append([None, -1, -1, -1])
        return len(nodes) - 1

    root = new_node()
    stack.append((root, np.arange(n)))
    while stack:
        nid, rows = stack.pop()
        m = len(rows)
        node_imp = _impurity(t[rows], categorical)
        best = None  # (gain, split_tuple, left_mask)
        if m >= 2 * min_bucket and node_imp > gain_floor:
            t_node = t[rows]
            for name, is_cat, values, n_pred_levels in pred_cols:
                v = values[rows]
                if is_cat:
                    res = _categorical_split(
                        v, t_node, categorical, min_bucket, node_imp,
                        n_pred_levels, n_tgt_levels,
                    )
                    if res is not None and res[0] > gain_floor and (
                        best is None or res[0] > best[0]
                    ):
                        gain, left_codes, known, maj = res
                        mask = np.isin(v, np.fromiter(left_codes, dtype=np.int64))
                        best = (gain, ("cat", name, left_codes, known, maj), mask)
                else:
                    res = _numeric_split(
                        v, t_node, categorical, min_bucket, node_imp, n_tgt_levels
                    )
                    if res is not None and res[0] > gain_floor and (
                        best is None or res[0] > best[0]
                    ):
                        gain, thr = res
                        best = (gain, ("num", name, thr), v <= thr)
        if best is None:
            nodes[nid][3] = len(leaf_rows)
            leaf_rows.append(rows)
            continue
        _, split, mask = best
        lid, rid = new_node(), new_node()
        nodes[nid][0] = split
        nodes[nid][1] = lid
        nodes[nid][2] = rid
        stack.append((rid, rows[~mask]))
        stack.append((lid, rows[mask]))

    sizes = np.array([len(r) for r in leaf_rows], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]) if len(sizes) else np.array([], dtype=np.int64)
    donor_rows = (
        np.concatenate(leaf_rows) if leaf_rows else np.array([], dtype=np.int64)
    )
    return CartTree(
        target_name=target.name,
        target_kind=target.kind,
        target_values=t,
        nodes=tuple(CartNode(s, l, r, lf) for s, l, r, lf in nodes),
        donor_rows=donor_rows,
        leaf_offsets=offsets,
        leaf_sizes=sizes,
        min_bucket=min_bucket,
        complexity=complexity,
        root_impurity=root_imp,
    )


def route_rows(tree: CartTree, new_predictors: Dataset | None, n_rows: int | None = None) -> np.ndarray:
    """Leaf id per row of ``new_predictors``; unseen levels go majority-side."""
    if new_predictors is not None and len(new_predictors.columns):
        n = new_predictors.n_rows
    elif n_rows is not None:
        n = n_rows
    else:
        raise MethodError("cart: routing needs predictors or an explicit row count")
    leaf_of = np.empty(n, dtype=np.int64)
    stack = [(0, np.arange(n))]
    while stack:
        nid, rows = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            leaf_of[rows] = node.leaf_id
            continue
        kind = node.split[0]
        colname = node.split[1]
        col = new_predictors.column(colname)
        v = col.values[rows]
        if kind == "num":
            if np.isnan(v).any():
                raise MethodError(
                    f"cart: predictor {colname!r} has missing values at sampling"
                )
            mask = v <= node.split[2]
        else:
            _, _, left_codes, known, majority_left = node.split
            left_arr = np.fromiter(left_codes, dtype=np.int64)
            known_arr = np.fromiter(known, dtype=np.int64)
            in_left = np.isin(v, left_arr)
            unknown = ~np.isin(v, known_arr)
            mask = in_left | (unknown & majority_left)
        stack.append((node.right, rows[~mask]))
        stack.append((node.left, rows[mask]))
    return leaf_of


def cart_sample(
    tree: CartTree,
    new_predictors: Dataset | None,
    rng: np.random.Generator,
    n_rows: int | None = None,
) -> Column:
    """Route each synthetic row down the tree, draw uniformly from its leaf."""
    leaf_of = route_rows(tree, new_predictors, n_rows)
    u = rng.random(len(leaf_of))
    pick = tree.leaf_offsets[leaf_of] + np.floor(
        u * tree.leaf_sizes[leaf_of]
    ).astype(np.int64)
    values = tree.target_values[tree.donor_rows[pick]]
    return Column(tree.target_name, tree.target_kind, values)
