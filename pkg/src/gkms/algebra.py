"""Convolution *-algebra of a finite groupoid and its regular representations.

For a finite groupoid ``C_c(G)`` is already complete, so it coincides with the
reduced C*-algebra; elements are stored as dense coefficient vectors over the
arrows.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.linalg

from .errors import ParentMismatch, UnknownUnit
from .groupoid import Groupoid

LINEAR_TOL = 1e-10
NORM_TOL = 1e-8


class AlgebraElement:
    """A function on the arrows of ``parent``.

    ``f * h`` is convolution when ``h`` is an element and scaling when it is a
    number; ``f.star()`` is the involution.
    """

    __slots__ = ("parent", "coeffs")

    def __init__(self, parent: Groupoid, coeffs):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (len(parent.arrows),):
            raise ValueError("coefficient vector does not match the arrow set")
        self.parent = parent
        self.coeffs = coeffs

    @classmethod
    def zero(cls, g: Groupoid) -> "AlgebraElement":
        return cls(g, np.zeros(len(g.arrows), dtype=complex))

    @classmethod
    def delta(cls, g: Groupoid, arrow, weight: complex = 1.0) -> "AlgebraElement":
        f = cls.zero(g)
        f.coeffs[g.arrow_index(arrow)] = weight
        return f

    @classmethod
    def unit(cls, g: Groupoid) -> "AlgebraElement":
        f = cls.zero(g)
        f.coeffs[g.unit_idx] = 1.0
        return f

    @classmethod
    def from_mapping(cls, g: Groupoid, coeffs: Mapping) -> "AlgebraElement":
        f = cls.zero(g)
        for a, v in coeffs.items():
            f.coeffs[g.arrow_index(a)] += v
        return f

    @classmethod
    def diagonal(cls, g: Groupoid, potential) -> "AlgebraElement":
        """``sum_x p(x) delta_{unit(x)}``; potential is a mapping or unit-ordered array."""
        if isinstance(potential, Mapping):
            potential = [potential[x] for x in g.units]
        f = cls.zero(g)
        f.coeffs[g.unit_idx] = np.asarray(potential, dtype=complex)
        return f

    def __getitem__(self, arrow) -> complex:
        return complex(self.coeffs[self.parent.arrow_index(arrow)])

    def as_dict(self, tol: float = 0.0) -> dict:
        return {a: complex(v) for a, v in zip(self.parent.arrows, self.coeffs) if abs(v) > tol}

    def _check(self, other):
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        if other.parent is not self.parent:
            raise ParentMismatch("elements live on different groupoids")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(self.parent, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return AlgebraElement(self.parent, self.coeffs - other.coeffs)

    def __neg__(self):
        return AlgebraElement(self.parent, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            return convolve(self, other)
        return AlgebraElement(self.parent, self.coeffs * other)

    def __rmul__(self, other):
        return AlgebraElement(self.parent, other * self.coeffs)

    def __truediv__(self, other):
        return AlgebraElement(self.parent, self.coeffs / other)

    def star(self) -> "AlgebraElement":
        return involute(self)

    def distance(self, other) -> float:
        self._check(other)
        return float(np.abs(self.coeffs - other.coeffs).max(initial=0.0))

    def allclose(self, other, tol: float = LINEAR_TOL) -> bool:
        return self.distance(other) <= tol

    def __repr__(self):
        terms = ", ".join(f"{a!r}: {v:.6g}" for a, v in self.as_dict(1e-15).items())
        return f"AlgebraElement({{{terms}}})"


def convolve(f1: AlgebraElement, f2: AlgebraElement) -> AlgebraElement:
    """``(f1*f2)(g) = sum_{h in G^{tgt g}} f1(h) f2(h^{-1} g)``, summed over composable pairs."""
    if f1.parent is not f2.parent:
        raise ParentMismatch("elements live on different groupoids")
    g = f1.parent
    left, right, prod = g.pairs
    out = np.zeros(len(g.arrows), dtype=complex)
    np.add.at(out, prod, f1.coeffs[left] * f2.coeffs[right])
    return AlgebraElement(g, out)


def involute(f: AlgebraElement) -> AlgebraElement:
    """``f*(g) = conj(f(g^{-1}))``."""
    return AlgebraElement(f.parent, np.conj(f.coeffs[f.parent.inv]))


def conditional_expectation(f: AlgebraElement) -> AlgebraElement:
    """Restriction to the unit arrows."""
    out = np.zeros_like(f.coeffs)
    idx = f.parent.unit_idx
    out[idx] = f.coeffs[idx]
    return AlgebraElement(f.parent, out)


@dataclass(frozen=True, eq=False)
class Representation:
    """The left regular representation on ``l^2(G_x)``."""

    groupoid: Groupoid
    base_unit: object
    basis: tuple
    index: np.ndarray  # index[a, b] = arrow index of basis[a] * basis[b]^{-1}

    @property
    def dim(self) -> int:
        return len(self.basis)

    def matrix_of(self, f: AlgebraElement) -> np.ndarray:
        if f.parent is not self.groupoid:
            raise ParentMismatch("element does not belong to this representation's groupoid")
        return f.coeffs[self.index]


def regular_representation(g: Groupoid, x) -> Representation:
    if not g.has_unit(x):
        raise UnknownUnit(f"{x!r} is not a unit")
    basis = g.source_fiber_idx(g.unit_index(x))
    # (pi_x(f) e_b)(a) = f(a b^{-1}); a, b in G_x are always composable that way
    index = g.mul[basis[:, None], g.inv[basis][None, :]]
    return Representation(g, x, tuple(g.arrows[i] for i in basis), index)


def reduced_norm(f: AlgebraElement) -> float:
    g = f.parent
    return max(
        float(np.linalg.norm(regular_representation(g, orb[0]).matrix_of(f), 2))
        for orb in g.orbits()
    )


class MatrixRealization:
    """Faithful block-diagonal picture ``f -> (+)_orbits pi_x(f)``.

    One block per orbit, taken at its representative; the image of the algebra
    is the set of block matrices constant on each fibre of the index map.
    """

    def __init__(self, g: Groupoid):
        self.groupoid = g
        self.orbit_reps = tuple(orb[0] for orb in g.orbits())
        self.blocks = tuple(regular_representation(g, x) for x in self.orbit_reps)
        sizes = [b.dim for b in self.blocks]
        self.offsets = tuple(np.concatenate([[0], np.cumsum(sizes)]).astype(int))
        self.dim = int(self.offsets[-1])
        rows, cols, arr = [], [], []
        for b, off in zip(self.blocks, self.offsets):
            r, c = np.indices(b.index.shape)
            rows.append(r.ravel() + off)
            cols.append(c.ravel() + off)
            arr.append(b.index.ravel())
        self._rows = np.concatenate(rows)
        self._cols = np.concatenate(cols)
        self._arrow_of_entry = np.concatenate(arr)
        self._multiplicity = np.bincount(self._arrow_of_entry, minlength=len(g.arrows))

    @property
    def block_sizes(self) -> tuple:
        return tuple(b.dim for b in self.blocks)

    def embedding(self, f: AlgebraElement) -> np.ndarray:
        if f.parent is not self.groupoid:
            raise ParentMismatch("element does not belong to this realization's groupoid")
        m = np.zeros((self.dim, self.dim), dtype=complex)
        m[self._rows, self._cols] = f.coeffs[self._arrow_of_entry]
        return m

    def pullback(self, m: np.ndarray) -> AlgebraElement:
        """Average the entries over each arrow's positions (orthogonal projection onto the image)."""
        g = self.groupoid
        acc = np.zeros(len(g.arrows), dtype=complex)
        np.add.at(acc, self._arrow_of_entry, m[self._rows, self._cols])
        return AlgebraElement(g, acc / self._multiplicity)

    def image_defect(self, m: np.ndarray) -> float:
        """Distance of ``m`` from the embedded algebra (max entry)."""
        return float(np.abs(m - self.embedding(self.pullback(m))).max(initial=0.0))

    def trace_values(self, density: np.ndarray) -> np.ndarray:
        """``[Tr(density . embedding(delta_g))]_g`` for every arrow in one pass."""
        g = self.groupoid
        out = np.zeros(len(g.arrows), dtype=complex)
        # Tr(D E) = sum_{(r,c)} D[c, r] E[r, c]; E = embedding(delta_g) is 1 on g's positions
        np.add.at(out, self._arrow_of_entry, density[self._cols, self._rows])
        return out

    def block_diag(self, mats) -> np.ndarray:
        return scipy.linalg.block_diag(*mats)


@functools.lru_cache(maxsize=None)
def matrix_realization(g: Groupoid) -> MatrixRealization:
    return MatrixRealization(g)
