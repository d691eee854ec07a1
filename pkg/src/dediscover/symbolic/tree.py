"""Expression trees stored as flat prefix-order node arrays.

A tree is a tuple of :class:`Node` in prefix order; the root is node 0
and the subtree rooted at node ``i`` is the contiguous slice
``nodes[i:subtree_end(i)]``.
"""
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

ARITY = {"+": 2, "-": 2, "*": 2, "/": 2, "sin": 1, "cos": 1, "exp": 1}
BINARY = ("+", "-", "*", "/")
UNARY = ("sin", "cos", "exp")
CLAMP = 1e12
DIV_EPS = 1e-12


class Node(NamedTuple):
    kind: str  # "op", "var" or "const"
    value: object

    @property
    def arity(self):
        return ARITY[self.value] if self.kind == "op" else 0


def op(name):
    return Node("op", name)


def var(index):
    return Node("var", int(index))


def const(value):
    return Node("const", float(value))


@dataclass(frozen=True)
class ExpressionTree:
    """Prefix-encoded expression over variables ``var_names``."""

    nodes: tuple
    var_names: tuple = ("x",)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "var_names", tuple(self.var_names))
        if not self.nodes:
            raise ValueError("empty tree")
        if self.subtree_end(0) != len(self.nodes):
            raise ValueError("node arities do not form a single tree")

    def __len__(self):
        return len(self.nodes)

    @property
    def size(self):
        return len(self.nodes)

    @property
    def depth(self):
        """Number of nodes on the longest root-to-leaf path."""
        best, stack = 0, []
        for node in self.nodes:
            d = stack.pop() + 1 if stack else 1
            best = max(best, d)
            stack.extend([d] * node.arity)
        return best

    def subtree_end(self, start):
        need, i = 1, start
        while need:
            if i >= len(self.nodes):
                raise ValueError("truncated tree")
            need += self.nodes[i].arity - 1
            i += 1
        return i

    def subtree(self, i):
        return ExpressionTree(self.nodes[i:self.subtree_end(i)], self.var_names)

    def replace(self, i, sub_nodes):
        """New tree with the subtree at ``i`` replaced by ``sub_nodes``."""
        end = self.subtree_end(i)
        return ExpressionTree(self.nodes[:i] + tuple(sub_nodes) + self.nodes[end:], self.var_names)

    def is_valid(self, max_depth=None, max_nodes=None, n_vars=None):
        n_vars = len(self.var_names) if n_vars is None else n_vars
        for node in self.nodes:
            if node.kind == "op" and node.value not in ARITY:
                return False
            if node.kind == "var" and not 0 <= node.value < n_vars:
                return False
            if node.kind == "const" and not np.isfinite(node.value):
                return False
        if max_depth is not None and self.depth > max_depth:
            return False
        return max_nodes is None or self.size <= max_nodes

    # -- output ----------------------------------------------------------
    def infix(self, precision=None):
        """Fully parenthesised infix: ``const | var | (e op e) | fn(e)``."""
        def fmt(v):
            return repr(v) if precision is None else f"{v:.{precision}g}"

        stack = []
        for node in reversed(self.nodes):
            if node.kind == "const":
                stack.append(fmt(node.value))
            elif node.kind == "var":
                stack.append(self.var_names[node.value])
            elif node.arity == 1:
                stack.append(f"{node.value}({stack.pop()})")
            else:
                left, right = stack.pop(), stack.pop()
                stack.append(f"({left} {node.value} {right})")
        return stack[0]

    def __str__(self):
        return self.infix()

    def to_json(self):
        return json.dumps({"var_names": list(self.var_names),
                           "nodes": [[n.kind, n.value] for n in self.nodes]})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text) if isinstance(text, str) else text
        return cls(tuple(Node(k, float(v) if k == "const" else (int(v) if k == "var" else v))
                         for k, v in d["nodes"]), tuple(d["var_names"]))


def _columns(tree, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[None, :] if X.size == len(tree.var_names) else X[:, None]
    if X.shape[1] != len(tree.var_names):
        raise ValueError(f"expected {len(tree.var_names)} variables, got {X.shape[1]}")
    return X


def eval_tree(tree, X, return_flags=False):
    """Evaluate on a batch ``X`` of shape ``(n, n_vars)`` (or one point).

    Division by ``|d| < 1e-12`` yields 1.0 and every intermediate value is
    clipped to ``[-1e12, 1e12]``; both events are reported when
    ``return_flags`` is set.
    """
    X = _columns(tree, X)
    n = X.shape[0]
    flags = {"protected_division": False, "clamped": False}
    stack = []
    with np.errstate(all="ignore"):
        for node in reversed(tree.nodes):
            if node.kind == "const":
                val = np.full(n, node.value)
            elif node.kind == "var":
                val = X[:, node.value].copy()
            elif node.arity == 1:
                a = stack.pop()
                val = {"sin": np.sin, "cos": np.cos, "exp": np.exp}[node.value](a)
            else:
                a, b = stack.pop(), stack.pop()
                if node.value == "+":
                    val = a + b
                elif node.value == "-":
                    val = a - b
                elif node.value == "*":
                    val = a * b
                else:
                    small = np.abs(b) < DIV_EPS
                    if small.any():
                        flags["protected_division"] = True
                    val = np.where(small, 1.0, a / np.where(small, 1.0, b))
            if not np.all(np.abs(val) <= CLAMP):
                flags["clamped"] = True
                val = np.clip(np.nan_to_num(val, nan=CLAMP, posinf=CLAMP, neginf=-CLAMP),
                              -CLAMP, CLAMP)
            stack.append(val)
    out = stack[0]
    return (out, flags) if return_flags else out


# ---------------------------------------------------------------------------
# nested form used for symbolic manipulation: ("const", v) | ("var", i) |
# (op, child[, child])
# ---------------------------------------------------------------------------

def to_nested(tree):
    stack = []
    for node in reversed(tree.nodes):
        if node.kind in ("const", "var"):
            stack.append((node.kind, node.value))
        else:
            stack.append((node.value,) + tuple(stack.pop() for _ in range(node.arity)))
    return stack[0]


def from_nested(expr, var_names):
    nodes = []

    def walk(e):
        if e[0] in ("const", "var"):
            nodes.append(Node(e[0], e[1]))
        else:
            nodes.append(op(e[0]))
            for child in e[1:]:
                walk(child)

    walk(expr)
    return ExpressionTree(tuple(nodes), var_names)


def _is_const(e, value=None):
    return e[0] == "const" and (value is None or e[1] == value)


def s_add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return ("const", a[1] + b[1])
    return ("+", a, b)


def s_sub(a, b):
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return ("const", a[1] - b[1])
    if a == b:
        return ("const", 0.0)
    return ("-", a, b)


def s_mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ("const", 0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return ("const", a[1] * b[1])
    return ("*", a, b)


def s_div(a, b):
    if _is_const(a, 0.0):
        return ("const", 0.0)
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and abs(b[1]) >= DIV_EPS:
        return ("const", a[1] / b[1])
    return ("/", a, b)


def s_neg(a):
    return s_mul(("const", -1.0), a)


def _derive(e, i):
    head = e[0]
    if head == "const":
        return ("const", 0.0)
    if head == "var":
        return ("const", 1.0 if e[1] == i else 0.0)
    if head in ("+", "-"):
        da, db = _derive(e[1], i), _derive(e[2], i)
        return s_add(da, db) if head == "+" else s_sub(da, db)
    if head == "*":
        a, b = e[1], e[2]
        return s_add(s_mul(_derive(a, i), b), s_mul(a, _derive(b, i)))
    if head == "/":
        a, b = e[1], e[2]
        num = s_sub(s_mul(_derive(a, i), b), s_mul(a, _derive(b, i)))
        return s_div(num, s_mul(b, b))
    a = e[1]
    da = _derive(a, i)
    if head == "sin":
        return s_mul(("cos", a), da)
    if head == "cos":
        return s_mul(s_neg(("sin", a)), da)
    if head == "exp":
        return s_mul(("exp", a), da)
    raise ValueError(f"no derivative rule for {head!r}")


def differentiate_tree(tree, variable):
    """Symbolic partial derivative with respect to ``variable``.

    ``variable`` is a name from ``tree.var_names`` or its index.  Local
    simplifications applied: ``0·x -> 0``, ``1·x -> x``, ``x ± 0 -> x``,
    ``x - x -> 0`` and constant folding.  So ``d/dx (x*x)`` gives
    ``(x + x)``.
    """
    i = tree.var_names.index(variable) if isinstance(variable, str) else int(variable)
    return from_nested(_derive(to_nested(tree), i), tree.var_names)


def simplify(tree):
    """Re-apply the local simplification rules bottom-up."""
    def walk(e):
        if e[0] in ("const", "var"):
            return e
        kids = [walk(c) for c in e[1:]]
        if e[0] == "+":
            return s_add(*kids)
        if e[0] == "-":
            return s_sub(*kids)
        if e[0] == "*":
            return s_mul(*kids)
        if e[0] == "/":
            return s_div(*kids)
        if kids[0][0] == "const":
            with np.errstate(all="ignore"):
                v = {"sin": np.sin, "cos": np.cos, "exp": np.exp}[e[0]](kids[0][1])
            if np.isfinite(v) and abs(v) <= CLAMP:
                return ("const", float(v))
        return (e[0], kids[0])

    return from_nested(walk(to_nested(tree)), tree.var_names)
