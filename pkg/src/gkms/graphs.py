"""Graph C*-algebras at the measure layer: path spaces, the shift, Renault
groupoids of finite local maps, potentials, transfer matrices and critical
inverse temperatures.

Paths are read left to right from their source vertex: ``e1 e2 ...`` with
``tgt(e_i) = src(e_{i+1})``.  Infinite emitters are declared, never
materialized; whatever edges they do list simply take part in the equations.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping

import numpy as np
from scipy.sparse.csgraph import connected_components

from .algebra import AlgebraElement
from .errors import (
    CycleDetected,
    DepthMismatch,
    DepthTooSmall,
    GraphError,
    HorizonExceeded,
    NonPositivePotential,
    NotStronglyConnected,
    UndefinedOnVertex,
)
from .groupoid import Cocycle, Groupoid, validate_cocycle

SOLVE_TOL = 1e-8


@dataclass(frozen=True)
class Edge:
    id: Hashable
    src: Hashable
    tgt: Hashable


class DirectedGraph:
    def __init__(self, vertices: Iterable, edges: Iterable, infinite_emitters: Iterable = ()):
        self.vertices = tuple(vertices)
        if len(set(self.vertices)) != len(self.vertices):
            raise GraphError("duplicate vertex")
        vset = set(self.vertices)
        self.edges = tuple(e if isinstance(e, Edge) else Edge(*e) for e in edges)
        self.edge = {}
        for e in self.edges:
            if e.id in self.edge:
                raise GraphError(f"duplicate edge id {e.id!r}")
            if e.src not in vset or e.tgt not in vset:
                raise GraphError(f"edge {e.id!r} has an unknown endpoint")
            self.edge[e.id] = e
        self.infinite_emitters = frozenset(infinite_emitters)
        if not self.infinite_emitters <= vset:
            raise GraphError("infinite emitter is not a vertex")
        self.out = {v: [e.id for e in self.edges if e.src == v] for v in self.vertices}
        self._vidx = {v: i for i, v in enumerate(self.vertices)}

    def __repr__(self):
        return f"<DirectedGraph: {len(self.vertices)} vertices, {len(self.edges)} edges>"

    def vertex_index(self, v) -> int:
        return self._vidx[v]

    def s(self, e):
        return self.edge[e].src

    def r(self, e):
        return self.edge[e].tgt

    @property
    def sinks(self) -> frozenset:
        return frozenset(v for v in self.vertices if not self.out[v] and v not in self.infinite_emitters)

    @property
    def v_inf(self) -> frozenset:
        return self.sinks | self.infinite_emitters

    def is_sink(self, v) -> bool:
        return v in self.sinks

    def is_infinite_emitter(self, v) -> bool:
        return v in self.infinite_emitters

    def adjacency(self) -> np.ndarray:
        a = np.zeros((len(self.vertices), len(self.vertices)))
        for e in self.edges:
            a[self._vidx[e.src], self._vidx[e.tgt]] += 1
        return a

    def _components(self):
        return connected_components(self.adjacency() > 0, directed=True, connection="strong")

    def cyclic_vertices(self) -> set:
        """Vertices lying on some cycle."""
        n, labels = self._components()
        adj = self.adjacency()
        sizes = np.bincount(labels, minlength=n)
        return {v for i, v in enumerate(self.vertices) if sizes[labels[i]] > 1 or adj[i, i] > 0}

    def is_acyclic(self) -> bool:
        return not self.cyclic_vertices()

    def is_strongly_connected(self) -> bool:
        n, _ = self._components()
        return n == 1 and bool(self.cyclic_vertices())

    def extendable_vertices(self) -> set:
        """Vertices that are the source of at least one infinite path."""
        good = set(self.cyclic_vertices())
        changed = True
        while changed:
            changed = False
            for e in self.edges:
                if e.tgt in good and e.src not in good:
                    good.add(e.src)
                    changed = True
        return good

    def girth(self) -> int | None:
        adj = self.adjacency() > 0
        power = adj.copy()
        for k in range(1, len(self.vertices) + 1):
            if np.any(np.diag(power)):
                return k
            power = (power.astype(int) @ adj.astype(int)) > 0
        return None

    def words(self, length: int, start=None) -> list[tuple]:
        """All edge sequences of the given length (optionally from one vertex)."""
        if length == 0:
            return [()]
        frontier = [(e,) for e in (self.out[start] if start is not None else self.edge)]
        for _ in range(length - 1):
            frontier = [w + (e,) for w in frontier for e in self.out[self.r(w[-1])]]
        return frontier


def graph_from_document(doc: Mapping) -> DirectedGraph:
    return DirectedGraph(
        doc["vertices"],
        [Edge(e["id"], e["src"], e["tgt"]) for e in doc["edges"]],
        doc.get("infinite_emitters", ()),
    )


def graph_document(g: DirectedGraph) -> dict:
    return {
        "kind": "graph",
        "vertices": list(g.vertices),
        "edges": [{"id": e.id, "src": e.src, "tgt": e.tgt} for e in g.edges],
        "infinite_emitters": sorted(g.infinite_emitters, key=str),
    }


# ---------------------------------------------------------------------------
# path space


@dataclass(frozen=True)
class Path:
    """A finite path; length 0 paths are vertices."""

    start: Hashable
    edges: tuple = ()

    def __len__(self):
        return len(self.edges)

    def __str__(self):
        return str(self.start) if not self.edges else ".".join(map(str, self.edges))

    def prefix(self, k: int) -> tuple:
        return self.edges[:k]


@dataclass(frozen=True)
class PeriodicPath:
    """The infinite path ``prefix loop loop ...``; the representation is canonical
    (primitive loop, ``prefix`` empty or not ending like ``loop``)."""

    start: Hashable
    prefix: tuple
    loop: tuple

    def __len__(self):
        raise TypeError("infinite path")

    def __str__(self):
        head = ".".join(map(str, self.prefix))
        return f"{head + '.' if head else ''}({'.'.join(map(str, self.loop))})^inf"

    def prefix_edges(self, k: int) -> tuple:
        out = list(self.prefix[:k])
        i = 0
        while len(out) < k:
            out.append(self.loop[i % len(self.loop)])
            i += 1
        return tuple(out)


def path_key(p) -> tuple:
    if isinstance(p, Path):
        return (0, len(p), str(p))
    return (1, len(p.prefix) + len(p.loop), str(p))


def end_vertex(g: DirectedGraph, p: Path):
    return g.r(p.edges[-1]) if p.edges else p.start


def _is_primitive(word: tuple) -> bool:
    n = len(word)
    return all(word != word[k:] + word[:k] for k in range(1, n) if n % k == 0)


@dataclass
class PathSpace:
    graph: DirectedGraph
    depth: int
    finite_paths: list  # every path of length <= bound
    boundary_paths: list  # Q(G) up to the bound (all of it when complete)
    periodic_points: list  # eventually periodic infinite paths up to the bound
    complete: bool  # True when Omega_G is finite and fully enumerated

    @property
    def points(self) -> list:
        return sorted(self.boundary_paths, key=path_key) + sorted(self.periodic_points, key=path_key)

    def cylinders(self, length: int) -> list[Path]:
        return [p for p in self.finite_paths if len(p) == length]

    def cylinder(self, nu: Path) -> list:
        """Enumerated points of ``Z(nu)``."""
        k = len(nu)
        out = []
        for x in self.points:
            if x.start != nu.start:
                continue
            head = x.prefix(k) if isinstance(x, Path) else x.prefix_edges(k)
            if isinstance(x, Path) and len(x) < k:
                continue
            if head == nu.edges:
                out.append(x)
        return out

    def children(self, nu: Path) -> list[Path]:
        v = end_vertex(self.graph, nu)
        return [Path(nu.start, nu.edges + (e,)) for e in self.graph.out[v]]


def build_path_space(g: DirectedGraph, depth: int) -> PathSpace:
    if depth < 0:
        raise ValueError("depth must be non-negative")
    acyclic = g.is_acyclic()
    bound = depth
    if acyclic:
        bound = max(depth, len(g.vertices))  # no path is longer than |V| - 1
    else:
        girth = g.girth()
        if depth < girth:
            raise DepthTooSmall(f"graph has cycles of length {girth} but depth is {depth}")
    finite = [Path(v) for v in g.vertices]
    layer = finite
    for _ in range(bound):
        layer = [Path(p.start, p.edges + (e,)) for p in layer for e in g.out[end_vertex(g, p)]]
        if not layer:
            break
        finite += layer
    boundary = [p for p in finite if end_vertex(g, p) in g.v_inf]
    periodic = []
    if not acyclic:
        for p in finite:
            if not p.edges or g.r(p.edges[-1]) != p.start or not _is_primitive(p.edges):
                continue
            loop, u = p.edges, p.start
            for q in finite:
                if end_vertex(g, q) != u or len(q) + len(loop) > depth:
                    continue
                if q.edges and q.edges[-1] == loop[-1]:
                    continue
                periodic.append(PeriodicPath(q.start, q.edges, loop))
    finite = [p for p in finite if len(p) <= depth] if not acyclic else finite
    return PathSpace(g, depth, finite, boundary, periodic, complete=acyclic)


def shift(g: DirectedGraph, p):
    """Drop the first edge; a length-one path goes to its range vertex."""
    if isinstance(p, PeriodicPath):
        if p.prefix:
            return PeriodicPath(g.r(p.prefix[0]), p.prefix[1:], p.loop)
        return PeriodicPath(g.r(p.loop[0]), (), p.loop[1:] + p.loop[:1])
    if not p.edges:
        raise UndefinedOnVertex(f"the shift is undefined on the vertex {p.start!r}")
    return Path(g.r(p.edges[0]), p.edges[1:])


# ---------------------------------------------------------------------------
# Renault groupoid of a map with no periodic points


class RenaultGroupoid(Groupoid):
    """``{(x, n-m, y) : phi^n x = phi^m y}`` for a map ``phi`` without cycles.

    ``meet[(x,k,y)] = (n, m)`` with ``n`` minimal records where the forward
    orbits first meet.
    """

    phi: dict
    domain: frozenset
    meet: dict
    forward: dict


def build_renault_groupoid(x_set: Iterable, domain: Iterable, phi: Mapping | Callable) -> RenaultGroupoid:
    points = list(x_set)
    pset = set(points)
    domain = frozenset(domain)
    if not domain <= pset:
        raise GraphError("domain is not contained in X")
    phimap = {x: (phi[x] if isinstance(phi, Mapping) else phi(x)) for x in domain}
    if not set(phimap.values()) <= pset:
        raise GraphError("phi does not map into X")
    forward = {}
    for x in points:
        orbit, seen = [x], {x: 0}
        while orbit[-1] in domain:
            nxt = phimap[orbit[-1]]
            if nxt in seen:
                raise CycleDetected(orbit[seen[nxt]:] + [nxt])
            seen[nxt] = len(orbit)
            orbit.append(nxt)
        forward[x] = orbit
    pos = {x: {z: i for i, z in enumerate(orb)} for x, orb in forward.items()}
    arrows, src, tgt, meet = [], {}, {}, {}
    between = {}
    for x in points:
        for y in points:
            for n, z in enumerate(forward[x]):
                if z in pos[y]:
                    m = pos[y][z]
                    a = (x, n - m, y)
                    arrows.append(a)
                    src[a], tgt[a] = y, x
                    meet[a] = (n, m)
                    between[(x, y)] = a
                    break
    compose = {}
    for (x, k, y) in arrows:
        for z in points:
            b = between.get((y, z))
            if b is not None:
                compose[((x, k, y), b)] = between[(x, z)]
    inverse = {a: between[(a[2], a[0])] for a in arrows}
    unit_arrow = {x: (x, 0, x) for x in points}
    gp = RenaultGroupoid(points, arrows, src, tgt, compose, inverse, unit_arrow, name="renault")
    gp.phi, gp.domain, gp.meet, gp.forward = phimap, domain, meet, forward
    return gp


def cocycle_from_potential(gp: RenaultGroupoid, f: Mapping | Callable) -> Cocycle:
    """``c_F(x, n-m, y) = sum_{i<n} F(phi^i x) - sum_{i<m} F(phi^i y)``.

    The terms from the meeting point on cancel, which is why ``F`` only needs
    to be defined on the domain of ``phi``.
    """
    value = f if callable(f) else f.__getitem__
    vals = np.empty(len(gp.arrows))
    for i, a in enumerate(gp.arrows):
        x, _, y = a
        n, m = gp.meet[a]
        vals[i] = sum(value(z) for z in gp.forward[x][:n]) - sum(value(z) for z in gp.forward[y][:m])
    return validate_cocycle(gp, vals)


def potential_from_cocycle(gp: RenaultGroupoid, c: Cocycle) -> dict:
    """``F(x) = c(x, 1, phi(x))`` on the domain."""
    return {x: c((x, 1, gp.phi[x])) for x in gp.domain}


def graph_groupoid(g: DirectedGraph) -> tuple[RenaultGroupoid, PathSpace]:
    """The groupoid of the shift on ``Omega_G`` for a finite acyclic graph."""
    if not g.is_acyclic():
        cyc = sorted(g.cyclic_vertices(), key=str)
        raise CycleDetected(cyc + cyc[:1])
    space = build_path_space(g, 0)
    points = space.points
    domain = [x for x in points if len(x) > 0]
    return build_renault_groupoid(points, domain, lambda x: shift(g, x)), space


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Potential:
    """``F(x)`` depends on the first ``depth`` edges of ``x`` (fewer for short boundary paths)."""

    depth: int
    table: Mapping

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be positive")

    def word_value(self, word: tuple) -> float:
        try:
            return float(self.table[tuple(word)])
        except KeyError:
            raise GraphError(f"potential is undefined on the word {word!r}") from None

    def __call__(self, x) -> float:
        if isinstance(x, PeriodicPath):
            return self.word_value(x.prefix_edges(self.depth))
        if not x.edges:
            raise UndefinedOnVertex(f"potentials are not evaluated on vertices ({x.start!r})")
        return self.word_value(x.edges[: self.depth])

    @property
    def max_abs(self) -> float:
        return max((abs(float(v)) for v in self.table.values()), default=0.0)

    @property
    def min_value(self) -> float:
        return min(float(v) for v in self.table.values())

    @classmethod
    def from_function(cls, g: DirectedGraph, depth: int, fn: Callable[[tuple], float]) -> "Potential":
        words = g.words(depth)
        # shorter words are needed only for boundary paths ending in V_inf
        for k in range(1, depth):
            words += [w for w in g.words(k) if g.r(w[-1]) in g.v_inf]
        return cls(depth, {w: float(fn(w)) for w in words})

    @classmethod
    def constant(cls, g: DirectedGraph, value: float = 1.0, depth: int = 1) -> "Potential":
        return cls.from_function(g, depth, lambda w: value)


def potential_from_document(doc: Mapping) -> Potential:
    def word(w):
        return tuple(tuple(x) if isinstance(x, list) else x for x in w)

    return Potential(int(doc["depth"]), {word(r["word"]): float(r["value"]) for r in doc["table"]})


def potential_document(f: Potential) -> dict:
    return {"kind": "potential", "depth": f.depth,
            "table": [{"word": list(w), "value": v} for w, v in f.table.items()]}


def higher_block(g: DirectedGraph, f: Potential) -> tuple[DirectedGraph, Potential]:
    """Recode a depth-d potential as a depth-1 potential on the d-block graph.

    Vertices are admissible words of length d-1, edges are words of length d
    running from their first d-1 letters to their last d-1 letters.
    """
    d = f.depth
    if d == 1:
        return g, f
    verts = g.words(d - 1)
    edges = [Edge(w, w[:-1], w[1:]) for w in g.words(d)]
    used = {e.src for e in edges} | {e.tgt for e in edges}
    hb = DirectedGraph([v for v in verts if v in used], edges)
    return hb, Potential(1, {(w,): f.word_value(w) for w in g.words(d)})


# ---------------------------------------------------------------------------
# transfer matrices and conformal cylinder equations


@dataclass(frozen=True)
class TransferMatrix:
    beta: float
    vertices: tuple
    entries: np.ndarray

    def spectral_radius(self) -> float:
        return spectral_radius(self.entries)


def transfer_matrix(g: DirectedGraph, f: Potential, beta: float) -> TransferMatrix:
    """``A(beta)[v, w] = sum_{e: v -> w} exp(-beta F(e))``."""
    if f.depth != 1:
        raise DepthMismatch(f"transfer matrices need a depth-1 potential, got depth {f.depth}")
    a = np.zeros((len(g.vertices), len(g.vertices)))
    for e in g.edges:
        a[g.vertex_index(e.src), g.vertex_index(e.tgt)] += math.exp(-beta * f.word_value((e.id,)))
    return TransferMatrix(beta, g.vertices, a)


def _collatz_wielandt(b: np.ndarray, max_iter: int = 100000, rtol: float = 1e-15):
    x = np.ones(b.shape[0])
    for _ in range(max_iter):
        y = b @ x
        ratio = y / x
        lo, hi = ratio.min(), ratio.max()
        if hi - lo <= rtol * hi:
            return (lo + hi) / 2
        x = y / y.max()
    return None


def _gelfand(a: np.ndarray, k: int = 64) -> float:
    m = a.copy()
    log_scale = 0.0
    steps = int(round(math.log2(k)))
    for _ in range(steps):
        nrm = np.linalg.norm(m, 2)
        if nrm == 0:
            return 0.0
        m = m / nrm
        log_scale = 2 * (log_scale + math.log(nrm))
        m = m @ m
    nrm = np.linalg.norm(m, 2)
    if nrm == 0:
        return 0.0
    return math.exp((log_scale + math.log(nrm)) / k)


def spectral_radius(a: np.ndarray) -> float:
    """Spectral radius of a non-negative matrix.

    Each strongly connected block is handled by power iteration on ``A + I``
    (primitive, same Perron vector) from the all-ones vector, stopping when the
    Collatz-Wielandt bounds meet; a Gelfand estimate ``||A^64||^(1/64)`` is the
    fallback if that stalls.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    n, labels = connected_components(a > 0, directed=True, connection="strong")
    best = 0.0
    for k in range(n):
        idx = np.nonzero(labels == k)[0]
        block = a[np.ix_(idx, idx)]
        if not block.any():
            continue
        rho = _collatz_wielandt(block + np.eye(len(idx)))
        rho = _gelfand(block) if rho is None else rho - 1.0
        best = max(best, rho)
    return float(best)


def _null(b: np.ndarray, atol: float) -> np.ndarray:
    """Orthonormal kernel basis, singular values below ``atol`` counted as zero."""
    if b.shape[0] == 0:
        return np.eye(b.shape[1])
    _, s, vh = np.linalg.svd(b)
    rank = int((s > atol).sum())
    return vh[rank:].conj().T


def _extreme_rays(b: np.ndarray, tol: float = SOLVE_TOL) -> list[np.ndarray]:
    """Extreme rays of ``{y >= 0 : B y = 0}`` by minimal-support enumeration.

    A support carries an extreme ray iff ``B`` restricted to it has a
    one-dimensional kernel spanned by a strictly positive vector; supersets of
    found supports are skipped and supports never exceed ``rank(B) + 1``.
    Thresholds are absolute (scaled by the largest entry) so that a system
    solved to ``|rho - 1| ~ 1e-11`` still registers its kernel.
    """
    nvar = b.shape[1]
    if nvar == 0:
        return []
    atol = tol * max(1.0, float(np.abs(b).max(initial=0.0)))
    if _null(b, atol).shape[1] == 0:
        return []
    rank = nvar - _null(b, atol).shape[1]
    rays, supports = [], []
    for size in range(1, min(nvar, rank + 1) + 1):
        for supp in itertools.combinations(range(nvar), size):
            s = set(supp)
            if any(t <= s for t in supports):
                continue
            ns = _null(b[:, supp], atol)
            if ns.shape[1] != 1:
                continue
            v = ns[:, 0].real
            v = v * np.sign(v[np.argmax(np.abs(v))])
            if v.min() <= tol:
                continue
            y = np.zeros(nvar)
            y[list(supp)] = v
            rays.append(y)
            supports.append(s)
    return rays


@dataclass
class ConformalSolution:
    beta: float
    vertices: tuple
    atom_vertices: tuple
    rays: list  # list of (m, atom) arrays; m indexed by vertices, atom by atom_vertices

    @property
    def is_empty(self) -> bool:
        return not self.rays

    def as_dicts(self) -> list[dict]:
        return [
            {"m": dict(zip(map(str, self.vertices), m.tolist())),
             "atom": dict(zip(map(str, self.atom_vertices), at.tolist()))}
            for m, at in self.rays
        ]


def cylinder_residual(g: DirectedGraph, f: Potential, beta: float, m: np.ndarray, atom: np.ndarray) -> float:
    a = transfer_matrix(g, f, beta).entries
    inf = [v for v in g.vertices if v in g.v_inf]
    full_atom = np.zeros(len(g.vertices))
    for v, x in zip(inf, atom):
        full_atom[g.vertex_index(v)] = x
    return float(np.abs(m - a @ m - full_atom).max())


def cylinder_conformal_solve(g: DirectedGraph, f: Potential, beta: float, tol: float = SOLVE_TOL) -> ConformalSolution:
    """Non-negative solutions of ``m_v = sum_{e in s^-1(v)} exp(-beta F(e)) m_{r(e)} + atom_v``.

    ``m_v`` is the mass of ``Z(v)`` and ``atom_v`` the mass of the point ``v``,
    allowed only for ``v`` in ``V_inf``.  Rays are scaled to ``sum_v m_v = 1``.
    """
    a = transfer_matrix(g, f, beta).entries
    nv = len(g.vertices)
    inf = tuple(v for v in g.vertices if v in g.v_inf)
    e_inf = np.zeros((nv, len(inf)))
    for j, v in enumerate(inf):
        e_inf[g.vertex_index(v), j] = 1.0
    b = np.hstack([np.eye(nv) - a, -e_inf])
    rays = []
    for y in _extreme_rays(b, tol):
        m, at = y[:nv], y[nv:]
        total = m.sum()
        rays.append((m / total, at / total))
    rays.sort(key=lambda r: tuple(-r[1]) + tuple(-r[0]))
    return ConformalSolution(beta, g.vertices, inf, rays)


def critical_beta(g: DirectedGraph, f: Potential, tol: float = 1e-10, max_iter: int = 500) -> float:
    """The unique ``beta`` with ``spectral_radius(A(beta)) = 1``.

    Bracket ``[0, 1]``, doubling the right end until the radius drops below 1,
    then bisection.  Depth > 1 potentials are recoded on the higher-block graph.
    """
    if not g.is_strongly_connected():
        raise NotStronglyConnected("critical_beta needs a strongly connected graph")
    if f.min_value <= 0:
        raise NonPositivePotential("potential must be bounded below by a positive constant")
    hb, f1 = higher_block(g, f)

    def rho(beta):
        return transfer_matrix(hb, f1, beta).spectral_radius()

    lo, hi = 0.0, 1.0
    r_lo = rho(lo)
    if abs(r_lo - 1.0) < tol:
        return 0.0
    if r_lo < 1.0:
        raise GraphError("spectral radius at beta = 0 is below 1")
    while rho(hi) >= 1.0:
        lo, hi = hi, 2 * hi
    for _ in range(max_iter):
        mid = (lo + hi) / 2
        r = rho(mid)
        if abs(r - 1.0) < tol or hi - lo < 1e-15 * max(1.0, hi):
            return mid
        if r > 1.0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


# ---------------------------------------------------------------------------
# local variation


def var_nv(g: DirectedGraph, f: Potential, n: int, v, horizon: int = 64) -> float:
    """``sup |sum_{j<n} F(sigma^j x) - F(sigma^j y)|`` over infinite paths from ``v``
    agreeing on their first ``n`` edges.

    Only the last ``depth - 1`` terms can differ, so the enumeration tracks the
    last ``depth - 1`` edges of the common prefix and then every admissible
    continuation of length ``depth - 1``.
    """
    d = f.depth
    if n < 0:
        raise ValueError("n must be non-negative")
    if n + d > horizon:
        raise HorizonExceeded(f"paths of length {n + d} exceed the horizon {horizon}")
    if d == 1 or n == 0:
        return 0.0
    good = g.extendable_vertices()
    if v not in good:
        return 0.0
    keep = d - 1
    states = {((), v)}
    for _ in range(n):
        states = {
            ((tail + (e,))[-keep:], g.r(e))
            for tail, u in states
            for e in g.out[u]
            if g.r(e) in good
        }
    best = 0.0
    first_term = max(0, n - d + 1)
    for tail, u in states:
        sums = []
        for ext in _extensions(g, u, keep, good):
            full = tail + ext
            offset = len(tail) - n
            sums.append(sum(f.word_value(full[j + offset: j + offset + d]) for j in range(first_term, n)))
        if sums:
            best = max(best, max(sums) - min(sums))
    return float(best)


def _extensions(g: DirectedGraph, u, length: int, good: set) -> list[tuple]:
    words = [((), u)]
    for _ in range(length):
        words = [(w + (e,), g.r(e)) for w, x in words for e in g.out[x] if g.r(e) in good]
    return [w for w, _ in words]


# ---------------------------------------------------------------------------
# Cuntz-Krieger generators inside the groupoid algebra


@dataclass
class PatersonGenerators:
    groupoid: RenaultGroupoid
    space: PathSpace
    S: dict
    P: dict


def paterson_generators(g: DirectedGraph) -> PatersonGenerators:
    """``S_e = 1{(ex, 1, x)}`` and ``P_v = 1{(vx, 0, vx)}`` for a finite acyclic graph."""
    gp, space = graph_groupoid(g)
    S, P = {}, {}
    for e in g.edges:
        s = AlgebraElement.zero(gp)
        for x in space.points:
            if x.start == e.tgt:
                s.coeffs[gp.arrow_index((Path(e.src, (e.id,) + x.edges), 1, x))] = 1.0
        S[e.id] = s
    for v in g.vertices:
        p = AlgebraElement.zero(gp)
        for x in space.points:
            if x.start == v:
                p.coeffs[gp.arrow_index((x, 0, x))] = 1.0
        P[v] = p
    return PatersonGenerators(gp, space, S, P)


def paterson_relations(g: DirectedGraph) -> dict:
    """Residuals (max coefficient) of the graph C*-algebra relations.

    ``projections``: P_v self-adjoint idempotents, mutually orthogonal;
    ``1``: S_e* S_e = P_{r(e)};
    ``2``: every finite sum of S_e S_e* over edges from v is a projection below P_v;
    ``3``: P_v = sum_{e in s^-1(v)} S_e S_e* for v outside V_inf.
    """
    gens = paterson_generators(g)
    S, P = gens.S, gens.P
    res = {"projections": 0.0, "1": 0.0, "2": 0.0, "3": 0.0}
    for v, p in P.items():
        res["projections"] = max(res["projections"], (p * p).distance(p), p.star().distance(p))
        for w, q in P.items():
            if w != v:
                res["projections"] = max(res["projections"], (p * q).distance(AlgebraElement.zero(gens.groupoid)))
    for e, s in S.items():
        res["1"] = max(res["1"], (s.star() * s).distance(P[g.r(e)]))
    for v in g.vertices:
        ranges = [S[e] * S[e].star() for e in g.out[v]]
        for k in range(1, len(ranges) + 1):
            for sub in itertools.combinations(ranges, k):
                q = sub[0]
                for extra in sub[1:]:
                    q = q + extra
                res["2"] = max(res["2"], (q * q).distance(q), (P[v] * q).distance(q))
        if v not in g.v_inf:
            total = AlgebraElement.zero(gens.groupoid)
            for r in ranges:
                total = total + r
            res["3"] = max(res["3"], total.distance(P[v]))
    return res


def cylinder_masses(g: DirectedGraph, space: PathSpace, mass: Mapping) -> tuple[np.ndarray, np.ndarray]:
    """``(mu(Z(v)))_v`` and ``(mu({v}))_{v in V_inf}`` from point masses."""
    m = np.zeros(len(g.vertices))
    for x in space.points:
        m[g.vertex_index(x.start)] += mass.get(x, 0.0)
    inf = [v for v in g.vertices if v in g.v_inf]
    return m, np.array([mass.get(Path(v), 0.0) for v in inf])


# ---------------------------------------------------------------------------
# the b_n sequence used to build a potential on the O_2 graph


@dataclass
class Remark007Report:
    n_max: int
    kappa: float | None
    monotone: bool  # b_n >= b_{n+1} on the computed range
    ratio_gap: list  # (n, 1 - b_{n+1}/b_n) at dyadic checkpoints
    ratio_trend: bool  # the gaps shrink toward 0
    partial_sum: float
    tail_bound: float | None
    mass_ok: bool  # partial sum + tail bound < 1
    power: float
    power_sum: float
    divergence_trend: bool
    divergence_verified: bool = False
    divergence_note: str = "divergence of sum b_n^s for s < 1 cannot be verified in finite time; trend only"
    a_nonnegative: bool = True
    a: np.ndarray = field(default=None, repr=False)
    b: np.ndarray = field(default=None, repr=False)

    def T_cylinder_values(self, k_max: int = 10) -> dict:
        """``T`` is ``a_k`` on the cylinder ``1^(k-1) 0`` (and 0 at ``1^inf``)."""
        return {"1" * (k - 1) + "0": float(self.a[k - 1]) for k in range(1, min(k_max, len(self.a)) + 1)}

    def as_dict(self) -> dict:
        return {
            "n_max": self.n_max, "kappa": self.kappa,
            "a_monotone": self.monotone,
            "b_ratio_gap": self.ratio_gap, "b_ratio_trend": self.ratio_trend,
            "c_partial_sum": self.partial_sum, "c_tail_bound": self.tail_bound, "c_mass_ok": self.mass_ok,
            "d_power": self.power, "d_power_sum": self.power_sum,
            "d_divergence_trend": self.divergence_trend,
            "d_divergence_verified": self.divergence_verified, "d_note": self.divergence_note,
            "a_k_nonnegative": self.a_nonnegative,
            "T_cylinder_values": self.T_cylinder_values(),
        }


def default_b(kappa: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda n: kappa / ((n + 2) * np.log(n + 2) ** 2)


def remark007_sequence(n_max: int, kappa: float = 0.3, b: Callable | None = None,
                       tail_bound: Callable[[int], float] | None = None, power: float = 0.9) -> Remark007Report:
    """Check the four properties of ``b_n`` on ``1..n_max`` and build ``a_k``.

    Default ``b_n = kappa / ((n+2) log(n+2)^2)``; its tail past ``N`` is at most
    ``kappa / log(N+2)`` (integral comparison).  ``KappaTooLarge`` is raised when
    the default sequence fails the mass bound.
    """
    from .errors import KappaTooLarge

    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    default = b is None
    if default:
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        b = default_b(kappa)
        tail_bound = lambda N: kappa / math.log(N + 2)  # noqa: E731
    n = np.arange(1, n_max + 1, dtype=float)
    bn = np.asarray(b(n), dtype=float)
    monotone = bool(np.all(bn[:-1] >= bn[1:]))
    gaps = 1.0 - bn[1:] / bn[:-1]
    checkpoints = [2 ** k for k in range(int(math.log2(n_max - 1)) + 1) if 2 ** k <= n_max - 1]
    gap_list = [(int(c), float(gaps[c - 1])) for c in checkpoints]
    tail_gaps = [abs(gv) for _, gv in gap_list[-4:]]
    ratio_trend = all(x >= y for x, y in zip(tail_gaps, tail_gaps[1:])) and tail_gaps[-1] < 1e-3
    partial = float(bn.sum())
    tail = None if tail_bound is None else float(tail_bound(n_max))
    mass_ok = tail is not None and partial + tail < 1.0
    if default and not mass_ok:
        raise KappaTooLarge(f"sum b_n + tail = {partial + tail:.6g} >= 1 for kappa = {kappa}")
    powered = bn ** power
    psum = float(powered.sum())
    # dyadic block sums of b_n^s: geometric decay means convergence, slow decay a divergent trend
    half, quarter = n_max // 2, n_max // 4
    late = powered[half:].sum()
    early = powered[quarter:half].sum()
    divergence_trend = bool(early > 0 and late / early >= 0.5)
    a = np.empty(n_max)
    a[0] = -math.log(bn[0])
    a[1:] = np.log(bn[:-1]) - np.log(bn[1:])
    return Remark007Report(
        n_max=n_max, kappa=kappa if default else None, monotone=monotone,
        ratio_gap=gap_list, ratio_trend=bool(ratio_trend), partial_sum=partial,
        tail_bound=tail, mass_ok=bool(mass_ok), power=power, power_sum=psum,
        divergence_trend=divergence_trend, a_nonnegative=bool(np.all(a >= 0)), a=a, b=bn,
    )
