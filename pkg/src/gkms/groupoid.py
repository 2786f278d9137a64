"""Finite (discrete, hence étale) groupoids, real cocycles and unit-space measures.

Arrow and unit ids are arbitrary hashables.  Internally everything is indexed by
position: ``units[i]`` / ``arrows[j]``, so the algebra layer can work on dense
numpy vectors.  The declared order of ``units`` is the canonical order, and the
"lowest" unit of an orbit means the first one in that order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import (
    BadInverse,
    BadUnits,
    NonAssociative,
    NotAdditive,
    NotAGroup,
    PartialCompositionGap,
)

TOL = 1e-9

MINIMALITY_NOTE = (
    "finite discrete unit space: an orbit is dense iff it is the whole unit space, "
    "so minimal means a single orbit"
)


class Groupoid:
    """A finite groupoid given by explicit tables.

    The constructor trusts its input; use :func:`validate_groupoid` or one of the
    builders to obtain a checked instance.
    """

    def __init__(self, units, arrows, src, tgt, compose, inverse, unit_arrow, name=""):
        self.name = name
        self.units = tuple(units)
        self.arrows = tuple(arrows)
        self._uidx = {u: i for i, u in enumerate(self.units)}
        self._aidx = {a: i for i, a in enumerate(self.arrows)}
        n = len(self.arrows)
        self.src = np.array([self._uidx[src[a]] for a in self.arrows], dtype=int)
        self.tgt = np.array([self._uidx[tgt[a]] for a in self.arrows], dtype=int)
        self.mul = np.full((n, n), -1, dtype=int)
        for (g, h), k in compose.items():
            self.mul[self._aidx[g], self._aidx[h]] = self._aidx[k]
        self.inv = np.array([self._aidx[inverse[a]] for a in self.arrows], dtype=int)
        self.unit_idx = np.array([self._aidx[unit_arrow[u]] for u in self.units], dtype=int)
        left, right = np.nonzero(self.mul >= 0)
        self.pairs = (left, right, self.mul[left, right])

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<Groupoid{label}: {len(self.units)} units, {len(self.arrows)} arrows>"

    # index helpers
    def arrow_index(self, g) -> int:
        return self._aidx[g]

    def unit_index(self, x) -> int:
        return self._uidx[x]

    def has_unit(self, x) -> bool:
        try:
            return x in self._uidx
        except TypeError:
            return False

    def has_arrow(self, g) -> bool:
        try:
            return g in self._aidx
        except TypeError:
            return False

    # structure maps on ids
    def source(self, g):
        return self.units[self.src[self._aidx[g]]]

    def target(self, g):
        return self.units[self.tgt[self._aidx[g]]]

    def compose(self, g, h):
        """Return ``g*h`` or ``None`` when ``src(g) != tgt(h)``."""
        k = self.mul[self._aidx[g], self._aidx[h]]
        return None if k < 0 else self.arrows[k]

    def inverse(self, g):
        return self.arrows[self.inv[self._aidx[g]]]

    def unit_arrow(self, x):
        return self.arrows[self.unit_idx[self._uidx[x]]]

    def is_unit_arrow(self, g) -> bool:
        i = self._aidx[g]
        return bool(np.any(self.unit_idx == i))

    @property
    def unit_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.arrows), dtype=bool)
        mask[self.unit_idx] = True
        return mask

    @property
    def isotropy_mask(self) -> np.ndarray:
        return self.src == self.tgt

    # fibres
    def range_fiber(self, x):
        i = self._uidx[x]
        return [a for a, t in zip(self.arrows, self.tgt) if t == i]

    def source_fiber(self, x):
        i = self._uidx[x]
        return [a for a, s in zip(self.arrows, self.src) if s == i]

    def isotropy(self, x):
        i = self._uidx[x]
        return [a for a, s, t in zip(self.arrows, self.src, self.tgt) if s == i and t == i]

    def source_fiber_idx(self, i: int) -> np.ndarray:
        return np.nonzero(self.src == i)[0]

    def isotropy_idx(self, i: int) -> np.ndarray:
        return np.nonzero((self.src == i) & (self.tgt == i))[0]

    def orbit_of(self, x):
        i = self._uidx[x]
        members = set(self.src[self.tgt == i].tolist())
        return [u for j, u in enumerate(self.units) if j in members]

    def orbits(self) -> list[list]:
        """Orbits in canonical order, each listed in unit order (representative first)."""
        seen = set()
        result = []
        for x in self.units:
            if x in seen:
                continue
            orb = self.orbit_of(x)
            seen.update(orb)
            result.append(orb)
        return result

    def orbit_labels(self) -> np.ndarray:
        """Orbit number of every unit index."""
        labels = np.empty(len(self.units), dtype=int)
        for k, orb in enumerate(self.orbits()):
            for x in orb:
                labels[self._uidx[x]] = k
        return labels


# ---------------------------------------------------------------------------
# validation and builders


def _as_id(value):
    if isinstance(value, list):
        return tuple(_as_id(v) for v in value)
    return value


def validate_groupoid(raw: Mapping, name: str = "") -> Groupoid:
    """Check a table description and build a :class:`Groupoid`.

    ``raw`` follows the groupoid document layout: ``units``, ``arrows`` as
    ``{"id","src","tgt"}``, ``compose`` as ``{"left","right","result"}`` and
    ``inverse`` as ``{"of","is"}``.  An optional ``unit_arrow`` list of
    ``{"unit","arrow"}`` pins the identities; otherwise the idempotent arrow at
    each unit is used.  The first violated axiom is raised.
    """
    units = [_as_id(u) for u in raw["units"]]
    unit_set = set(units)
    arrows, src, tgt = [], {}, {}
    for rec in raw["arrows"]:
        a = _as_id(rec["id"])
        s, t = _as_id(rec["src"]), _as_id(rec["tgt"])
        if s not in unit_set or t not in unit_set:
            raise BadUnits(f"arrow {a!r} has an endpoint outside the unit space")
        arrows.append(a)
        src[a], tgt[a] = s, t
    arrow_set = set(arrows)

    compose = {}
    for rec in raw["compose"]:
        g, h, k = _as_id(rec["left"]), _as_id(rec["right"]), _as_id(rec["result"])
        for a in (g, h, k):
            if a not in arrow_set:
                raise PartialCompositionGap(f"composition table mentions unknown arrow {a!r}")
        if src[g] != tgt[h]:
            raise PartialCompositionGap(f"compose({g!r},{h!r}) given but src({g!r}) != tgt({h!r})")
        compose[(g, h)] = k
    for g in arrows:
        for h in arrows:
            if src[g] == tgt[h] and (g, h) not in compose:
                raise PartialCompositionGap(f"compose({g!r},{h!r}) missing")

    inverse = {}
    for rec in raw["inverse"]:
        of, is_ = _as_id(rec["of"]), _as_id(rec["is"])
        if of not in arrow_set or is_ not in arrow_set:
            raise BadInverse(f"inverse table mentions unknown arrow ({of!r}, {is_!r})")
        inverse[of] = is_
    for g in arrows:
        if g not in inverse:
            raise BadInverse(f"no inverse given for {g!r}")
        gi = inverse[g]
        if src[gi] != tgt[g] or tgt[gi] != src[g]:
            raise BadInverse(f"inverse of {g!r} does not swap its endpoints")
        if inverse[gi] != g:
            raise BadInverse(f"inverse is not an involution at {g!r}")

    if "unit_arrow" in raw:
        unit_arrow = {_as_id(r["unit"]): _as_id(r["arrow"]) for r in raw["unit_arrow"]}
    else:
        unit_arrow = {}
        for x in units:
            cands = [a for a in arrows if src[a] == x and tgt[a] == x and compose.get((a, a)) == a]
            if len(cands) != 1:
                raise BadUnits(f"unit {x!r} has {len(cands)} idempotent arrows, expected 1")
            unit_arrow[x] = cands[0]
    for x in units:
        e = unit_arrow.get(x)
        if e is None or e not in arrow_set or src[e] != x or tgt[e] != x:
            raise BadUnits(f"unit {x!r} has no identity arrow")
        for g in arrows:
            if tgt[g] == x and compose[(e, g)] != g:
                raise BadUnits(f"{e!r} is not a left identity for {g!r}")
            if src[g] == x and compose[(g, e)] != g:
                raise BadUnits(f"{e!r} is not a right identity for {g!r}")
    for g in arrows:
        gi = inverse[g]
        if compose[(gi, g)] != unit_arrow[src[g]]:
            raise BadUnits(f"inverse({g!r})*{g!r} is {compose[(gi, g)]!r}, not the unit at src")
        if compose[(g, gi)] != unit_arrow[tgt[g]]:
            raise BadUnits(f"{g!r}*inverse({g!r}) is {compose[(g, gi)]!r}, not the unit at tgt")

    for (g, h), gh in compose.items():
        if tgt[gh] != tgt[g] or src[gh] != src[h]:
            raise NonAssociative(f"compose({g!r},{h!r}) = {gh!r} has the wrong endpoints")
    for (g, h), gh in compose.items():
        for k in arrows:
            if src[h] != tgt[k]:
                continue
            left = compose.get((gh, k))
            right = compose.get((g, compose[(h, k)]))
            if left is None or left != right:
                raise NonAssociative(f"({g!r}*{h!r})*{k!r} != {g!r}*({h!r}*{k!r})")

    return Groupoid(units, arrows, src, tgt, compose, inverse, unit_arrow, name=name)


def groupoid_document(g: Groupoid) -> dict:
    """Inverse of :func:`validate_groupoid` (lists stand in for tuple ids in JSON)."""

    def enc(v):
        if isinstance(v, tuple):
            return [enc(x) for x in v]
        return v

    left, right, prod = g.pairs
    return {
        "kind": "groupoid",
        "units": [enc(u) for u in g.units],
        "arrows": [
            {"id": enc(a), "src": enc(g.units[s]), "tgt": enc(g.units[t])}
            for a, s, t in zip(g.arrows, g.src, g.tgt)
        ],
        "compose": [
            {"left": enc(g.arrows[i]), "right": enc(g.arrows[j]), "result": enc(g.arrows[k])}
            for i, j, k in zip(left, right, prod)
        ],
        "inverse": [{"of": enc(a), "is": enc(g.arrows[g.inv[i]])} for i, a in enumerate(g.arrows)],
        "unit_arrow": [{"unit": enc(u), "arrow": enc(g.arrows[g.unit_idx[i]])} for i, u in enumerate(g.units)],
    }


def pair_groupoid(n: int) -> Groupoid:
    """Units ``1..n``, arrows ``(a, b)`` with ``(a,b)(b,c) = (a,c)``."""
    if n < 1:
        raise ValueError("n must be positive")
    units = list(range(1, n + 1))
    arrows = [(a, b) for a in units for b in units]
    src = {(a, b): b for a, b in arrows}
    tgt = {(a, b): a for a, b in arrows}
    compose = {((a, b), (b, c)): (a, c) for a in units for b in units for c in units}
    inverse = {(a, b): (b, a) for a, b in arrows}
    unit_arrow = {a: (a, a) for a in units}
    return Groupoid(units, arrows, src, tgt, compose, inverse, unit_arrow, name=f"pair({n})")


def group_groupoid(cayley: Sequence[Sequence[int]], elements: Sequence[Hashable] | None = None,
                   unit: Hashable = "*", name: str = "") -> Groupoid:
    """The one-unit groupoid of a finite group.

    ``cayley[i][j]`` is the index of ``elements[i]*elements[j]``; elements default
    to ``0..n-1``.
    """
    table = np.asarray(cayley, dtype=int)
    n = table.shape[0]
    if table.shape != (n, n) or n == 0:
        raise NotAGroup("multiplication table must be square and non-empty")
    if table.min() < 0 or table.max() >= n:
        raise NotAGroup("table is not closed")
    elements = list(range(n)) if elements is None else list(elements)
    for i, j, k in itertools.product(range(n), repeat=3):
        if table[table[i, j], k] != table[i, table[j, k]]:
            raise NotAGroup(f"not associative at ({elements[i]!r}, {elements[j]!r}, {elements[k]!r})")
    idents = [e for e in range(n) if np.all(table[e] == np.arange(n)) and np.all(table[:, e] == np.arange(n))]
    if not idents:
        raise NotAGroup("no identity element")
    e = idents[0]
    inverse = {}
    for i in range(n):
        js = np.nonzero(table[i] == e)[0]
        if len(js) == 0 or table[js[0], i] != e:
            raise NotAGroup(f"{elements[i]!r} has no inverse")
        inverse[elements[i]] = elements[js[0]]
    compose = {(elements[i], elements[j]): elements[table[i, j]] for i in range(n) for j in range(n)}
    src = {a: unit for a in elements}
    return Groupoid([unit], elements, src, src, compose, inverse, {unit: elements[e]}, name=name)


def cyclic_table(n: int) -> list[list[int]]:
    return [[(i + j) % n for j in range(n)] for i in range(n)]


def symmetric_group(n: int = 3) -> Groupoid:
    """S_n as a one-unit groupoid; elements are permutation tuples, identity first."""
    perms = list(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    # (p*q)(i) = p(q(i))
    table = [[index[tuple(p[q[i]] for i in range(n))] for q in perms] for p in perms]
    return group_groupoid(table, perms, name=f"S{n}")


def cyclic_group(n: int) -> Groupoid:
    return group_groupoid(cyclic_table(n), name=f"Z{n}")


def disjoint_union(a: Groupoid, b: Groupoid) -> Groupoid:
    """Component-wise union; ids are tagged ``(0, id)`` / ``(1, id)`` only on a clash."""
    clash = bool(set(a.units) & set(b.units)) or bool(set(a.arrows) & set(b.arrows))

    def tag(k):
        return (lambda v: (k, v)) if clash else (lambda v: v)

    units, arrows, src, tgt, compose, inverse, unit_arrow = [], [], {}, {}, {}, {}, {}
    for k, part in enumerate((a, b)):
        t = tag(k)
        units += [t(u) for u in part.units]
        for i, g in enumerate(part.arrows):
            arrows.append(t(g))
            src[t(g)] = t(part.units[part.src[i]])
            tgt[t(g)] = t(part.units[part.tgt[i]])
            inverse[t(g)] = t(part.arrows[part.inv[i]])
        for i, j, p in zip(*part.pairs):
            compose[(t(part.arrows[i]), t(part.arrows[j]))] = t(part.arrows[p])
        for i, u in enumerate(part.units):
            unit_arrow[t(u)] = t(part.arrows[part.unit_idx[i]])
    name = f"{a.name}+{b.name}" if a.name and b.name else ""
    return Groupoid(units, arrows, src, tgt, compose, inverse, unit_arrow, name=name)


@dataclass(frozen=True)
class StructuralReport:
    orbits: list
    isotropy: dict
    is_minimal: bool
    trivially_isotropic_units: list
    is_principal: bool
    note: str = MINIMALITY_NOTE

    def as_dict(self):
        return {
            "orbits": self.orbits,
            "isotropy_orders": {str(x): len(v) for x, v in self.isotropy.items()},
            "is_minimal": self.is_minimal,
            "trivially_isotropic_units": self.trivially_isotropic_units,
            "is_principal": self.is_principal,
            "note": self.note,
        }


def structural_report(g: Groupoid) -> StructuralReport:
    orbits = g.orbits()
    iso = {x: g.isotropy(x) for x in g.units}
    trivial = [x for x in g.units if len(iso[x]) == 1]
    return StructuralReport(
        orbits=orbits,
        isotropy=iso,
        is_minimal=len(orbits) == 1,
        trivially_isotropic_units=trivial,
        is_principal=len(trivial) == len(g.units),
    )


# ---------------------------------------------------------------------------
# cocycles and measures


@dataclass(frozen=True, eq=False)
class Cocycle:
    groupoid: Groupoid
    values: np.ndarray  # indexed like groupoid.arrows

    def __call__(self, g) -> float:
        return float(self.values[self.groupoid.arrow_index(g)])

    def as_dict(self) -> dict:
        return dict(zip(self.groupoid.arrows, self.values.tolist()))


def validate_cocycle(g: Groupoid, values, tol: float = TOL) -> Cocycle:
    """Accepts a mapping arrow id -> real, or an array in arrow order."""
    if isinstance(values, Mapping):
        vec = np.array([float(values[a]) for a in g.arrows])
    else:
        vec = np.asarray(values, dtype=float).copy()
        if vec.shape != (len(g.arrows),):
            raise ValueError("cocycle array has the wrong length")
    left, right, prod = g.pairs
    defect = np.abs(vec[prod] - vec[left] - vec[right])
    if defect.size and defect.max() > tol:
        k = int(np.argmax(defect))
        raise NotAdditive(g.arrows[left[k]], g.arrows[right[k]], float(defect[k]))
    vec.setflags(write=False)
    return Cocycle(g, vec)


def coboundary(g: Groupoid, potential) -> Cocycle:
    """``c(ξ) = p(tgt ξ) - p(src ξ)`` for a potential on units (mapping or unit-ordered array)."""
    if isinstance(potential, Mapping):
        p = np.array([float(potential[x]) for x in g.units])
    else:
        p = np.asarray(potential, dtype=float)
    return validate_cocycle(g, p[g.tgt] - p[g.src])


@dataclass(frozen=True, eq=False)
class UnitMeasure:
    groupoid: Groupoid
    mass: np.ndarray  # indexed like groupoid.units

    def __post_init__(self):
        if np.any(self.mass < 0):
            raise ValueError("measure has negative mass")

    @classmethod
    def from_mapping(cls, g: Groupoid, mass: Mapping) -> "UnitMeasure":
        return cls(g, np.array([float(mass.get(x, 0.0)) for x in g.units]))

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    @property
    def is_probability(self) -> bool:
        return abs(self.total - 1.0) < TOL

    def normalized(self) -> "UnitMeasure":
        return UnitMeasure(self.groupoid, self.mass / self.total)

    def __getitem__(self, x) -> float:
        return float(self.mass[self.groupoid.unit_index(x)])

    def as_dict(self) -> dict:
        return dict(zip(self.groupoid.units, self.mass.tolist()))


def is_conformal(g: Groupoid, c: Cocycle, mu: UnitMeasure, beta: float) -> float:
    """Largest violation of ``mu{src g} = exp(beta c(g)) mu{tgt g}`` over all arrows."""
    viol = mu.mass[g.src] - np.exp(beta * c.values) * mu.mass[g.tgt]
    return float(np.abs(viol).max())


def conformal_measures(g: Groupoid, c: Cocycle, beta: float, tol: float = TOL) -> list[UnitMeasure]:
    """Extremal rays of the cone of ``e^{-beta c}``-quasi-invariant measures.

    One ray per orbit on which the ratio equations are consistent, scaled to
    mass 1 at the orbit representative.
    """
    rays = []
    for orb in g.orbits():
        rep = g.unit_index(orb[0])
        mass = np.zeros(len(g.units))
        into_rep = np.nonzero(g.tgt == rep)[0]
        for a in into_rep:
            mass[g.src[a]] = np.exp(beta * c.values[a])
        mu = UnitMeasure(g, mass)
        members = np.isin(g.tgt, [g.unit_index(x) for x in orb])
        viol = mass[g.src[members]] - np.exp(beta * c.values[members]) * mass[g.tgt[members]]
        if viol.size == 0 or np.abs(viol).max() <= tol * max(1.0, mass.max()):
            rays.append(mu)
    return rays
