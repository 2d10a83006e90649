"""Shared factories and oracles for randomized tests."""

import numpy as np

from nts import ctl
from nts.network import FeedForwardNetwork, Layer
from nts.partition import PartitionSet
from nts.reach import HyperRectangle


def random_relu_net(rng, max_layers=3, max_width=20, in_dim=None, out_dim=None):
    depth = int(rng.integers(1, max_layers + 1))
    dims = [int(d) for d in rng.integers(1, max_width + 1, size=depth + 1)]
    if in_dim is not None:
        dims[0] = in_dim
    if out_dim is not None:
        dims[-1] = out_dim
    layers = []
    for k in range(depth):
        act = "relu" if k < depth - 1 or rng.random() < 0.5 else "identity"
        layers.append(
            Layer(rng.normal(size=(dims[k + 1], dims[k])), rng.normal(size=dims[k + 1]), act)
        )
    return FeedForwardNetwork(layers)


def random_partition_set(zone, rng, splits=6):
    """Random midpoint-bisection tiling of the zone."""
    boxes = [(zone.lower.copy(), zone.upper.copy())]
    for _ in range(splits):
        i = int(rng.integers(len(boxes)))
        lo, hi = boxes[i]
        k = int(rng.integers(len(lo)))
        if hi[k] - lo[k] <= 1e-9:
            continue
        mid = (lo[k] + hi[k]) / 2.0
        left_hi = hi.copy()
        left_hi[k] = mid
        right_lo = lo.copy()
        right_lo[k] = mid
        boxes[i] = (lo, left_hi)
        boxes.append((right_lo, hi))
    boxes.sort(key=lambda bounds: tuple(bounds[0]))
    return PartitionSet([HyperRectangle(lo, hi) for lo, hi in boxes], zone)


def random_total_graph(rng, max_states=8):
    """Random total edge matrix with 1-based state ids."""
    n = int(rng.integers(2, max_states + 1))
    edges = rng.random((n, n)) < 0.3
    for i in range(n):
        if not edges[i].any():
            edges[i, int(rng.integers(n))] = True
    return tuple(range(1, n + 1)), edges


def random_formula(rng, atoms, depth):
    """Random CTL AST of the given nesting depth."""
    if depth == 0:
        roll = rng.random()
        if roll < 0.7:
            return ctl.Atom(int(rng.choice(atoms)))
        return ctl.Const(bool(rng.random() < 0.5))
    unary = [ctl.Not, ctl.EX, ctl.AX, ctl.EF, ctl.AF, ctl.EG, ctl.AG]
    binary = [ctl.And, ctl.Or, ctl.Implies, ctl.EU, ctl.AU]
    if rng.random() < 0.55:
        cls = unary[int(rng.integers(len(unary)))]
        return cls(random_formula(rng, atoms, depth - 1))
    cls = binary[int(rng.integers(len(binary)))]
    return cls(
        random_formula(rng, atoms, depth - 1), random_formula(rng, atoms, depth - 1)
    )


def oracle_sat(state_ids, succ, formula):
    """CTL truth by brute-force path exploration, unrolled to the lasso bound.

    Temporal operators recurse over explicit paths with a depth budget equal
    to the number of states (memoized per depth); on a finite total graph
    that bound is enough to expose any lasso, so the result matches the
    unbounded semantics.
    """
    states = tuple(state_ids)
    bound = len(states)

    def paths_exist(start, budget, may_stop, may_continue, memo):
        # some path: reach a may_stop state via may_continue states
        key = (start, budget)
        if key in memo:
            return memo[key]
        if start in may_stop:
            result = True
        elif budget == 0 or start not in may_continue:
            result = False
        else:
            result = any(
                paths_exist(t, budget - 1, may_stop, may_continue, memo)
                for t in succ[start]
            )
        memo[key] = result
        return result

    def all_paths(start, budget, must_stop, may_continue, memo):
        # every path: reach a must_stop state via may_continue states
        key = (start, budget)
        if key in memo:
            return memo[key]
        if start in must_stop:
            result = True
        elif budget == 0 or start not in may_continue:
            result = False
        else:
            result = all(
                all_paths(t, budget - 1, must_stop, may_continue, memo)
                for t in succ[start]
            )
        memo[key] = result
        return result

    def forever_exists(start, budget, region, memo):
        # some path staying in region for budget more steps
        key = (start, budget)
        if key in memo:
            return memo[key]
        if start not in region:
            result = False
        elif budget == 0:
            result = True
        else:
            result = any(forever_exists(t, budget - 1, region, memo) for t in succ[start])
        memo[key] = result
        return result

    def forever_all(start, budget, region, memo):
        # every path stays in region for budget more steps
        key = (start, budget)
        if key in memo:
            return memo[key]
        if start not in region:
            result = False
        elif budget == 0:
            result = True
        else:
            result = all(forever_all(t, budget - 1, region, memo) for t in succ[start])
        memo[key] = result
        return result

    def sat(f):
        everything = frozenset(states)
        if isinstance(f, ctl.Atom):
            return frozenset({f.pid}) & everything
        if isinstance(f, ctl.Const):
            return everything if f.value else frozenset()
        if isinstance(f, ctl.Not):
            return everything - sat(f.child)
        if isinstance(f, ctl.And):
            return sat(f.left) & sat(f.right)
        if isinstance(f, ctl.Or):
            return sat(f.left) | sat(f.right)
        if isinstance(f, ctl.Implies):
            return (everything - sat(f.left)) | sat(f.right)
        if isinstance(f, ctl.EX):
            target = sat(f.child)
            return frozenset(s for s in states if any(t in target for t in succ[s]))
        if isinstance(f, ctl.AX):
            target = sat(f.child)
            return frozenset(s for s in states if all(t in target for t in succ[s]))
        if isinstance(f, ctl.EF):
            goal = sat(f.child)
            memo = {}
            return frozenset(
                s for s in states if paths_exist(s, bound, goal, everything, memo)
            )
        if isinstance(f, ctl.AF):
            goal = sat(f.child)
            memo = {}
            return frozenset(
                s for s in states if all_paths(s, bound, goal, everything, memo)
            )
        if isinstance(f, ctl.EG):
            region = sat(f.child)
            memo = {}
            return frozenset(s for s in states if forever_exists(s, bound, region, memo))
        if isinstance(f, ctl.AG):
            region = sat(f.child)
            memo = {}
            return frozenset(s for s in states if forever_all(s, bound, region, memo))
        if isinstance(f, ctl.EU):
            hold, goal = sat(f.left), sat(f.right)
            memo = {}
            return frozenset(s for s in states if paths_exist(s, bound, goal, hold, memo))
        if isinstance(f, ctl.AU):
            hold, goal = sat(f.left), sat(f.right)
            memo = {}
            return frozenset(s for s in states if all_paths(s, bound, goal, hold, memo))
        raise TypeError(f"unexpected node {f!r}")

    return sat(formula)
