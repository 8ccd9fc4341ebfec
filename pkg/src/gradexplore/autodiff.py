"""A small reverse-mode differentiation tape over numpy arrays.

Every elementary operation appends a record holding its forward function and
its vector-Jacobian product.  Piecewise operations (``where``, ``max``,
``wrap``) freeze the branch taken at record time; :meth:`Tape.replay`
re-executes the records with those branches, and :meth:`Tape.gradient`
sweeps them in reverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass
class _Record:
    out: int
    parents: tuple[int | None, ...]  # None marks a constant operand
    consts: tuple                     # constant operands, aligned with parents
    fwd: Callable
    vjp: Callable


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


class Tape:
    def __init__(self):
        self.values: list = []
        self.records: list[_Record] = []
        self.leaves: list[int] = []

    def _new(self, value) -> "Node":
        self.values.append(value)
        return Node(self, len(self.values) - 1)

    def variable(self, value) -> "Node":
        node = self._new(np.array(value, dtype=float))
        self.leaves.append(node.id)
        return node

    def op(self, fwd: Callable, vjp: Callable, *operands) -> "Node":
        parents, consts, vals = [], [], []
        for o in operands:
            if isinstance(o, Node):
                if o.tape is not self:
                    raise ValueError("operand recorded on a different tape")
                parents.append(o.id)
                consts.append(None)
                vals.append(self.values[o.id])
            else:
                parents.append(None)
                consts.append(o)
                vals.append(o)
        out = self._new(fwd(*vals))
        self.records.append(_Record(out.id, tuple(parents), tuple(consts), fwd, vjp))
        return out

    def _operand_values(self, rec: _Record, values: list) -> list:
        return [values[p] if p is not None else c for p, c in zip(rec.parents, rec.consts)]

    def replay(self, leaf_values: dict[int, np.ndarray] | None = None) -> list:
        """Recompute every node from the leaves with the recorded branches."""
        values = list(self.values)
        for lid, v in (leaf_values or {}).items():
            values[lid] = np.array(v, dtype=float)
        for rec in self.records:
            values[rec.out] = rec.fwd(*self._operand_values(rec, values))
        return values

    def gradient(self, output: "Node", wrt: Sequence["Node"]) -> list[np.ndarray]:
        adj: dict[int, np.ndarray] = {output.id: np.ones_like(np.asarray(self.values[output.id], dtype=float))}
        for rec in reversed(self.records):
            g = adj.pop(rec.out, None)
            if g is None:
                continue
            vals = self._operand_values(rec, self.values)
            grads = rec.vjp(g, self.values[rec.out], *vals)
            for p, gp in zip(rec.parents, grads):
                if p is None or gp is None:
                    continue
                shape = np.shape(self.values[p])
                gp = _unbroadcast(np.asarray(gp, dtype=float), shape)
                adj[p] = adj[p] + gp if p in adj else gp
        return [adj.get(w.id, np.zeros_like(self.values[w.id])) for w in wrt]


class Node:
    __slots__ = ("tape", "id")
    __array_ufunc__ = None  # make ndarray defer to the reflected operators

    def __init__(self, tape: Tape, id_: int):
        self.tape = tape
        self.id = id_

    @property
    def value(self):
        return self.tape.values[self.id]

    @property
    def shape(self):
        return np.shape(self.value)

    def __add__(self, o):
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def __repr__(self):
        return f"Node(id={self.id}, value={self.value!r})"


def _tape_of(*xs) -> Tape:
    for x in xs:
        if isinstance(x, Node):
            return x.tape
    raise TypeError("at least one operand must be a Node")


def add(a, b):
    return _tape_of(a, b).op(np.add, lambda g, out, a, b: (g, g), a, b)


def sub(a, b):
    return _tape_of(a, b).op(np.subtract, lambda g, out, a, b: (g, -g), a, b)


def mul(a, b):
    return _tape_of(a, b).op(np.multiply, lambda g, out, a, b: (g * b, g * a), a, b)


def div(a, b):
    return _tape_of(a, b).op(np.divide, lambda g, out, a, b: (g / b, -g * out / b), a, b)


def neg(a):
    return a.tape.op(np.negative, lambda g, out, a: (-g,), a)


def square(a):
    return a.tape.op(np.square, lambda g, out, a: (2.0 * g * a,), a)


def sqrt(a):
    return a.tape.op(np.sqrt, lambda g, out, a: (g / (2.0 * out),), a)


def exp(a):
    return a.tape.op(np.exp, lambda g, out, a: (g * out,), a)


def cos(a):
    return a.tape.op(np.cos, lambda g, out, a: (-g * np.sin(a),), a)


def sin(a):
    return a.tape.op(np.sin, lambda g, out, a: (g * np.cos(a),), a)


def sum(a, axis=None):  # noqa: A001 - mirrors numpy
    def vjp(g, out, a):
        if axis is None:
            return (np.broadcast_to(g, np.shape(a)).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), np.shape(a)).copy(),)

    return a.tape.op(lambda a: np.sum(a, axis=axis), vjp, a)


def getitem(a, idx):
    def vjp(g, out, a):
        full = np.zeros(np.shape(a))
        np.add.at(full, idx, g)
        return (full,)

    return a.tape.op(lambda a: np.asarray(a)[idx], vjp, a)


def concat(parts: Sequence, axis: int = 0):
    """Concatenate nodes and constant arrays along ``axis``."""
    tape = _tape_of(*parts)
    sizes = [np.shape(p.value if isinstance(p, Node) else p)[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def vjp(g, out, *vals):
        return tuple(np.take(g, range(bounds[k], bounds[k + 1]), axis=axis) for k in range(len(vals)))

    return tape.op(lambda *vals: np.concatenate(vals, axis=axis), vjp, *parts)


def stack(parts: Sequence, axis: int = -1):
    tape = _tape_of(*parts)

    def vjp(g, out, *vals):
        return tuple(np.take(g, k, axis=axis) for k in range(len(vals)))

    return tape.op(lambda *vals: np.stack(vals, axis=axis), vjp, *parts)


def where(cond, a, b):
    """Elementwise branch select; ``cond`` is frozen when recorded."""
    cond = np.asarray(cond, dtype=bool)
    tape = _tape_of(a, b)
    return tape.op(lambda a, b: np.where(cond, a, b),
                   lambda g, out, a, b: (np.where(cond, g, 0.0), np.where(cond, 0.0, g)), a, b)


def amax(a, axis: int = 0):
    """Maximum along ``axis``; the arg-max (first on ties) is the recorded branch."""
    arg = np.expand_dims(np.argmax(a.value, axis=axis), axis)

    def fwd(a):
        return np.take_along_axis(a, arg, axis=axis).squeeze(axis)

    def vjp(g, out, a):
        full = np.zeros(np.shape(a))
        np.put_along_axis(full, arg, np.expand_dims(g, axis), axis=axis)
        return (full,)

    return a.tape.op(fwd, vjp, a)


def wrap(a):
    """Angle reduction to (-pi, pi]; the 2*pi multiple removed is frozen."""
    v = np.asarray(a.value, dtype=float)
    shift = 2 * math.pi * np.ceil((v - math.pi) / (2 * math.pi))
    return sub(a, shift)
