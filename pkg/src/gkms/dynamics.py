"""One-parameter automorphism groups on a finite groupoid algebra.

Every continuous one-parameter group on a finite-dimensional C*-algebra is
inner, ``alpha_t = Ad exp(itH)`` with ``H`` self-adjoint in the algebra, so an
action is stored as its Hamiltonian.  Diagonal actions come from cocycles.

Sign convention: the cocycle read off a Hamiltonian is
``c(xi) = (H*delta_xi - delta_xi*H)(xi)``, so ``H = diag(p)`` gives
``c(xi) = p(tgt xi) - p(src xi)``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .algebra import LINEAR_TOL, AlgebraElement, convolve, involute, matrix_realization
from .errors import NotACocycle, NotAdditive, NotSelfAdjoint, PreconditionViolated
from .groupoid import Cocycle, Groupoid, validate_cocycle

T_GRID = (0.1, 1 / np.sqrt(2), np.pi / 3)
EIG_CLUSTER_TOL = 1e-9


class InnerAction:
    """``alpha_t(f) = exp(itH) f exp(-itH)`` computed in the matrix realization."""

    def __init__(self, hamiltonian: AlgebraElement, tol: float = LINEAR_TOL):
        if involute(hamiltonian).distance(hamiltonian) > tol:
            raise NotSelfAdjoint("Hamiltonian is not self-adjoint")
        self.hamiltonian = hamiltonian
        self.groupoid = hamiltonian.parent
        self.realization = matrix_realization(self.groupoid)
        m = self.realization.embedding(hamiltonian)
        self.matrix = (m + m.conj().T) / 2
        self.eigvals, self.eigvecs = np.linalg.eigh(self.matrix)

    def __repr__(self):
        return f"InnerAction({self.hamiltonian!r})"

    def propagator(self, z: complex) -> np.ndarray:
        """``exp(izM)`` for complex ``z``; ``z = -i beta/2`` gives ``exp(beta M / 2)``."""
        v = self.eigvecs
        return (v * np.exp(1j * z * self.eigvals)) @ v.conj().T

    def evolve_matrix(self, z: complex, m: np.ndarray) -> np.ndarray:
        return self.propagator(z) @ m @ self.propagator(-z)

    def evolve(self, z: complex, f: AlgebraElement) -> AlgebraElement:
        """The analytic continuation ``alpha_z(f)``; real ``z`` is the group itself."""
        r = self.realization
        return r.pullback(self.evolve_matrix(z, r.embedding(f)))

    def gibbs(self, beta: float) -> np.ndarray:
        """``exp(-beta M)``."""
        return self.propagator(1j * beta)

    def eigenprojections(self, tol: float = EIG_CLUSTER_TOL):
        """Distinct eigenvalues of ``M`` with their spectral projections."""
        lam, v = self.eigvals, self.eigvecs
        groups, start = [], 0
        for k in range(1, len(lam) + 1):
            if k == len(lam) or lam[k] - lam[k - 1] > tol * max(1.0, abs(lam[k])):
                cols = v[:, start:k]
                groups.append((float(lam[start:k].mean()), cols @ cols.conj().T))
                start = k
        return groups


@dataclass(frozen=True, eq=False)
class DiagonalAction:
    cocycle: Cocycle


def apply_inner(a: InnerAction, t: float, f: AlgebraElement) -> AlgebraElement:
    return a.evolve(t, f)


def apply_diagonal(d: DiagonalAction, t: float, f: AlgebraElement) -> AlgebraElement:
    """Multiply the coefficient at each arrow by ``exp(i t c(xi))``."""
    return AlgebraElement(f.parent, f.coeffs * np.exp(1j * t * d.cocycle.values))


def _unit_indicators(g: Groupoid):
    return [AlgebraElement.delta(g, g.unit_arrow(x)) for x in g.units]


def fixes_units_subalgebra(a: InnerAction, tol: float = LINEAR_TOL) -> bool:
    """``[H, u] = 0`` for every unit indicator ``u``; the generator form of fixing ``C(G^(0))``."""
    h = a.hamiltonian
    return all(
        (convolve(h, u) - convolve(u, h)).distance(AlgebraElement.zero(a.groupoid)) <= tol
        for u in _unit_indicators(a.groupoid)
    )


def preserves_units_subalgebra(a: InnerAction, tol: float = LINEAR_TOL) -> bool:
    """Does ``alpha_t`` map ``C(G^(0))`` into itself for every real ``t``?

    ``alpha_t(u) = sum_w exp(i t w) U_w`` with ``U_w = sum_{l_j - l_k = w} P_j u P_k``;
    since distinct frequencies give independent exponentials, invariance for all
    ``t`` means every ``U_w`` lies in the unit subalgebra.  A few sampled times are
    checked as well in case eigenvalue clustering misjudged a near-degenerate gap.
    """
    g = a.groupoid
    r = a.realization
    off_units = ~g.unit_mask
    projs = a.eigenprojections()
    freqs: dict[int, list] = {}
    keys: list[float] = []
    for lj, pj in projs:
        for lk, pk in projs:
            w = lj - lk
            for n, known in enumerate(keys):
                if abs(known - w) <= EIG_CLUSTER_TOL * max(1.0, abs(w)):
                    freqs[n].append((pj, pk))
                    break
            else:
                keys.append(w)
                freqs[len(keys) - 1] = [(pj, pk)]
    for u in _unit_indicators(g):
        um = r.embedding(u)
        for terms in freqs.values():
            uw = sum(pj @ um @ pk for pj, pk in terms)
            if r.image_defect(uw) > tol or np.abs(r.pullback(uw).coeffs[off_units]).max(initial=0) > tol:
                return False
        for t in T_GRID:
            if np.abs(a.evolve(t, u).coeffs[off_units]).max(initial=0) > tol:
                return False
    return True


def cocycle_candidate(a: InnerAction) -> np.ndarray:
    """``(H*delta_xi - delta_xi*H)(xi)`` for every arrow (complex; real for self-adjoint H)."""
    g = a.groupoid
    h = a.hamiltonian
    out = np.empty(len(g.arrows), dtype=complex)
    for i, xi in enumerate(g.arrows):
        d = AlgebraElement.delta(g, xi)
        out[i] = (convolve(h, d) - convolve(d, h)).coeffs[i]
    return out


def extract_cocycle(a: InnerAction, tol: float = LINEAR_TOL) -> Cocycle:
    """Cocycle whose phases the action would have to apply, read off the exact generator."""
    if not fixes_units_subalgebra(a, tol):
        raise PreconditionViolated("the action does not fix the unit subalgebra")
    cand = cocycle_candidate(a)
    if np.abs(cand.imag).max(initial=0) > tol:
        raise NotACocycle("candidate cocycle has a non-zero imaginary part")
    try:
        return validate_cocycle(a.groupoid, cand.real)
    except NotAdditive as exc:
        raise NotACocycle(str(exc)) from exc


def is_diagonal_action(a: InnerAction, tol: float = LINEAR_TOL) -> Cocycle | None:
    """The cocycle ``c`` with ``alpha_t(delta_xi) = exp(itc(xi)) delta_xi`` if there is one.

    Exactness: the generator must act on every ``delta_xi`` by the real scalar
    ``c(xi)``; with ``M delta = delta (M + c)`` in the realization this is
    equivalent to the phase identity for all ``t``.  The identity is also
    sampled at a few times.
    """
    if not fixes_units_subalgebra(a, tol):
        return None
    try:
        c = extract_cocycle(a, tol)
    except NotACocycle:
        return None
    g = a.groupoid
    h = a.hamiltonian
    for i, xi in enumerate(g.arrows):
        d = AlgebraElement.delta(g, xi)
        comm = convolve(h, d) - convolve(d, h)
        if comm.distance(d * c.values[i]) > tol:
            return None
    diag = DiagonalAction(c)
    for t in T_GRID:
        for xi in g.arrows:
            d = AlgebraElement.delta(g, xi)
            if a.evolve(t, d).distance(apply_diagonal(diag, t, d)) > 1e3 * tol:
                return None
    return c


def potential_of(c: Cocycle) -> np.ndarray:
    """A potential ``p`` on units with ``c = p(tgt) - p(src)``, zero at orbit representatives.

    Finite isotropy groups carry no non-zero real homomorphisms, so every cocycle
    on a finite groupoid is such a coboundary.
    """
    g = c.groupoid
    p = np.zeros(len(g.units))
    for orb in g.orbits():
        rep = g.unit_index(orb[0])
        for k in np.nonzero(g.src == rep)[0]:
            p[g.tgt[k]] = c.values[k]
    return p


@functools.lru_cache(maxsize=None)
def _hamiltonian_cache(c: Cocycle) -> InnerAction:
    return InnerAction(AlgebraElement.diagonal(c.groupoid, potential_of(c)))


def inner_action_of(c: Cocycle) -> InnerAction:
    """The inner action ``Ad exp(itH_c)`` equal to the diagonal action of ``c``."""
    return _hamiltonian_cache(c)
