"""KMS functionals of inner actions on finite groupoid algebras.

A densely defined lower semi-continuous weight on a finite-dimensional
C*-algebra is finite everywhere, so weights are stored as positive functionals
``psi(a) = Tr(D . embedding(a))`` with ``D`` a density in the embedded algebra.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .algebra import LINEAR_TOL, AlgebraElement, MatrixRealization, matrix_realization
from .dynamics import T_GRID, InnerAction, fixes_units_subalgebra, inner_action_of, is_diagonal_action, preserves_units_subalgebra
from .errors import (
    ConditionAViolated,
    ConditionBViolated,
    ConditionCViolated,
    NotAState,
    NotKms,
    SupportViolation,
    ZeroMeasure,
)
from .groupoid import Cocycle, Groupoid, UnitMeasure, is_conformal, structural_report

KMS_TOL = 1e-9
CENTER_SEED = 20240607


class KmsFunctional:
    """Positive functional on the groupoid algebra, optionally tagged with a beta."""

    def __init__(self, realization: MatrixRealization, density: np.ndarray,
                 beta: float | None = None, normalized: bool | None = None):
        self.realization = realization
        self.groupoid = realization.groupoid
        self.density = np.asarray(density, dtype=complex)
        self.beta = beta
        self.values = realization.trace_values(self.density)
        if normalized is None:
            normalized = abs(self.total_mass - 1.0) < KMS_TOL
        self.normalized = normalized

    @classmethod
    def from_values(cls, g: Groupoid, values, beta: float | None = None) -> "KmsFunctional":
        """Functional with prescribed ``psi(delta_g)``.

        ``Tr(emb(delta_h) emb(delta_g)) = |isotropy| [h = g^{-1}]``, so the density
        is ``sum_g psi(delta_g) delta_{g^{-1}} / |isotropy|``.
        """
        r = matrix_realization(g)
        values = np.asarray(values, dtype=complex)
        coeffs = np.zeros(len(g.arrows), dtype=complex)
        coeffs[g.inv] = values / r._multiplicity
        return cls(r, r.embedding(AlgebraElement(g, coeffs)), beta)

    def __call__(self, f: AlgebraElement) -> complex:
        return complex(np.dot(self.values, f.coeffs))

    def value(self, arrow) -> complex:
        return complex(self.values[self.groupoid.arrow_index(arrow)])

    @property
    def total_mass(self) -> float:
        return float(self.values[self.groupoid.unit_idx].real.sum())

    def normalize(self) -> "KmsFunctional":
        return KmsFunctional(self.realization, self.density / self.total_mass, self.beta, True)

    def min_eigenvalue(self) -> float:
        d = (self.density + self.density.conj().T) / 2
        return float(np.linalg.eigvalsh(d).min())

    def distance(self, other: "KmsFunctional") -> float:
        return float(np.abs(self.values - other.values).max())

    def as_dict(self, tol: float = 0.0) -> dict:
        return {a: complex(v) for a, v in zip(self.groupoid.arrows, self.values) if abs(v) > tol}

    def __repr__(self):
        return f"KmsFunctional(beta={self.beta}, mass={self.total_mass:.6g})"


@dataclass
class KmsFamily:
    """All beta-KMS functionals: ``D_z = z exp(-beta M) / Tr(z exp(-beta M))``, ``z >= 0`` central."""

    action: InnerAction
    beta: float
    center_basis: list
    central_projections: list
    extreme_points: list

    def state(self, weights) -> KmsFunctional:
        """Convex combination of the extreme points."""
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
        d = sum(w * e.density for w, e in zip(weights, self.extreme_points))
        return KmsFunctional(self.action.realization, d, self.beta, True)

    def from_central(self, z: AlgebraElement) -> KmsFunctional:
        r = self.action.realization
        d = r.embedding(z) @ self.action.gibbs(self.beta)
        d = d / np.trace(d).real
        return KmsFunctional(r, d, self.beta, True)


def center(g: Groupoid, tol: float = LINEAR_TOL) -> list[AlgebraElement]:
    """Self-adjoint basis of the center, solving ``z*delta_g = delta_g*z`` for all ``g``."""
    n = len(g.arrows)
    left, right, prod = g.pairs
    # commutator z -> [z, delta_g] as an (n*n) x n matrix: rows (g, result arrow)
    rows = []
    for k in range(n):
        m = np.zeros((n, n))
        sel = right == k  # z(left) * delta_k -> prod
        np.add.at(m, (prod[sel], left[sel]), 1.0)
        sel = left == k  # delta_k * z(right) -> prod
        np.add.at(m, (prod[sel], right[sel]), -1.0)
        rows.append(m)
    ns = scipy.linalg.null_space(np.vstack(rows), rcond=tol)
    # the center is a *-subalgebra: real and imaginary parts of z, z* span it
    herm = []
    for col in ns.T:
        z = AlgebraElement(g, col)
        zs = z.star()
        herm.append(((z + zs) / 2).coeffs)
        herm.append(((z - zs) / 2j).coeffs)
    stack = np.array(herm).T
    # z self-adjoint means coefficients satisfy z(g^{-1}) = conj z(g); orthonormalize over R
    real_stack = np.vstack([stack.real, stack.imag])
    q, s, _ = np.linalg.svd(real_stack, full_matrices=False)
    rank = int((s > tol * max(1.0, s[0])).sum())
    basis = q[:, :rank]
    return [AlgebraElement(g, basis[:n, k] + 1j * basis[n:, k]) for k in range(rank)]


def minimal_central_projections(g: Groupoid, basis=None, tol: float = 1e-8,
                                seed: int = CENTER_SEED) -> list[AlgebraElement]:
    """Spectral projections of a generic self-adjoint central element."""
    basis = center(g) if basis is None else basis
    r = matrix_realization(g)
    rng = np.random.default_rng(seed)
    w = rng.uniform(1.0, 2.0, size=len(basis))
    z = sum(wk * r.embedding(b) for wk, b in zip(w, basis))
    lam, v = np.linalg.eigh((z + z.conj().T) / 2)
    projs, start = [], 0
    for k in range(1, len(lam) + 1):
        if k == len(lam) or lam[k] - lam[k - 1] > tol:
            cols = v[:, start:k]
            projs.append(r.pullback(cols @ cols.conj().T))
            start = k
    first = [int(np.argmax(np.abs(p.coeffs) > 1e-9)) for p in projs]
    return [p for _, p in sorted(zip(first, projs), key=lambda t: t[0])]


def kms_set(a: InnerAction, beta: float, seed: int = CENTER_SEED) -> KmsFamily:
    g = a.groupoid
    r = a.realization
    basis = center(g)
    projs = minimal_central_projections(g, basis, seed=seed)
    gibbs = a.gibbs(beta)
    extremes = []
    for p in projs:
        d = r.embedding(p) @ gibbs
        extremes.append(KmsFunctional(r, d / np.trace(d).real, beta, True))
    return KmsFamily(a, beta, basis, projs, extremes)


@dataclass
class KmsCheck:
    residual: float
    basis_residual: float
    cross_residual: float
    invariance_defect: float
    per_element: dict = field(repr=False)

    def __float__(self):
        return self.residual


def verify_kms(w: KmsFunctional, a: InnerAction, beta: float, t_grid=T_GRID) -> KmsCheck:
    """Defect in ``psi(x*y) = psi(alpha_{-i beta/2}(y) alpha_{-i beta/2}(x)*)`` plus invariance.

    The diagonal ``x = y = delta_g`` is the basis criterion; the off-diagonal
    pairs are its polarization, which makes the check complete for all ``a``.
    """
    g = a.groupoid
    r = a.realization
    d = w.density
    half = a.propagator(-0.5j * beta)  # exp(beta M / 2)
    half_inv = a.propagator(0.5j * beta)
    emb = np.array([r.embedding(AlgebraElement.delta(g, x)) for x in g.arrows])
    evo = half[None] @ emb @ half_inv[None]
    # g1[i,j] = Tr(D A_i^* A_j),  g2[i,j] = Tr(D B_j B_i^*)
    g1 = np.einsum("ab,icb,jca->ij", d, emb.conj(), emb)
    g2 = np.einsum("ab,jbc,iac->ij", d, evo, evo.conj())
    diff = np.abs(g1 - g2)
    basis_res = float(np.diag(diff).max(initial=0.0))
    cross_res = float(diff.max(initial=0.0))
    inv = 0.0
    for t in t_grid:
        ut, ut_inv = a.propagator(t), a.propagator(-t)
        moved = r.trace_values(ut_inv @ d @ ut)  # psi(alpha_t(delta_g)) = Tr(U* D U A_g)
        inv = max(inv, float(np.abs(moved - w.values).max()))
    per = {x: float(diff[i, i]) for i, x in enumerate(g.arrows)}
    return KmsCheck(max(cross_res, inv), basis_res, cross_res, inv, per)


def is_diagonal_functional(w: KmsFunctional, tol: float = LINEAR_TOL) -> bool:
    g = w.groupoid
    off = w.values[~g.unit_mask]
    return bool(np.abs(off).max(initial=0.0) <= tol * max(1.0, abs(w.total_mass)))


def weight_from_measure(g: Groupoid, m: UnitMeasure, beta: float | None = None) -> KmsFunctional:
    """``phi_m(a) = sum_x P(a)(x) m{x}``."""
    if m.total <= 0:
        raise ZeroMeasure("the zero measure gives no proper weight")
    values = np.zeros(len(g.arrows), dtype=complex)
    values[g.unit_idx] = m.mass
    return KmsFunctional.from_values(g, values, beta)


# ---------------------------------------------------------------------------
# measure + field-of-states description


@dataclass
class NeshveyevPair:
    """``measure`` with a state ``fields[x][g] = phi_x(u_g)`` on each isotropy group."""

    measure: UnitMeasure
    fields: dict

    def as_dict(self) -> dict:
        return {
            "measure": self.measure.as_dict(),
            "fields": {x: dict(f) for x, f in self.fields.items()},
        }


@dataclass
class PairCheck:
    conformal: float
    invariance: float  # condition b)
    vanishing: float  # condition c)
    state: float
    witness: dict

    @property
    def residual(self) -> float:
        return max(self.conformal, self.invariance, self.vanishing, self.state)


def _positive_units(mu: UnitMeasure, tol: float) -> np.ndarray:
    return mu.mass > tol * max(1.0, mu.mass.max(initial=0.0))


def check_pair(g: Groupoid, pair: NeshveyevPair, c: Cocycle, beta: float, tol: float = KMS_TOL) -> PairCheck:
    """Residuals of conditions a), b), c) and of the state axioms (a.e. means where mu > 0)."""
    mu = pair.measure
    conf = is_conformal(g, c, mu, beta)
    pos = _positive_units(mu, tol)
    inv_res, van_res, state_res = 0.0, 0.0, 0.0
    witness = {}
    for xi, x in enumerate(g.units):
        phi = pair.fields[x]
        iso = g.isotropy(x)
        e = g.unit_arrow(x)
        gram = np.array([[phi[g.compose(a, g.inverse(b))] for b in iso] for a in iso])
        s = max(abs(phi[e] - 1.0), max(0.0, -float(np.linalg.eigvalsh((gram + gram.conj().T) / 2).min())),
                float(np.abs(gram - gram.conj().T).max()))
        if s > state_res:
            state_res, witness["state"] = s, x
        if not pos[xi]:
            continue
        for h in g.source_fiber(x):
            y = g.target(h)
            hinv = g.inverse(h)
            for k in iso:
                conj = g.compose(g.compose(h, k), hinv)
                dev = abs(phi[k] - pair.fields[y][conj])
                if dev > inv_res:
                    inv_res, witness["b"] = dev, (x, k, h)
        for k in iso:
            if abs(c(k)) > tol and abs(phi[k]) > van_res:
                van_res, witness["c"] = abs(phi[k]), (x, k)
    if conf > tol:
        witness["a"] = conf
    return PairCheck(conf, inv_res, van_res, state_res, witness)


def neshveyev_decompose(w: KmsFunctional, c: Cocycle, beta: float, tol: float = KMS_TOL) -> NeshveyevPair:
    g = c.groupoid
    off = np.abs(w.values[~g.isotropy_mask])
    if off.size and off.max() > tol * max(1.0, w.total_mass):
        k = np.nonzero(~g.isotropy_mask)[0][int(np.argmax(off))]
        raise SupportViolation(f"functional is {w.values[k]:.3g} on {g.arrows[k]!r}, outside the isotropy bundle")
    check = verify_kms(w, inner_action_of(c), beta)
    if check.residual > tol:
        raise NotKms(f"not a {beta}-KMS functional for the cocycle's action (residual {check.residual:.3g})")
    mass = w.values[g.unit_idx].real.copy()
    mu = UnitMeasure(g, np.clip(mass, 0.0, None))
    pos = _positive_units(mu, tol)
    fields = {}
    for xi, x in enumerate(g.units):
        iso = g.isotropy(x)
        e = g.unit_arrow(x)
        if pos[xi]:
            fields[x] = {k: w.value(k) / mu.mass[xi] for k in iso}
        else:
            fields[x] = {k: (1.0 + 0j if k == e else 0j) for k in iso}
    return NeshveyevPair(mu, fields)


def neshveyev_reconstruct(g: Groupoid, pair: NeshveyevPair, c: Cocycle, beta: float,
                          tol: float = KMS_TOL) -> KmsFunctional:
    """``psi(delta_g) = mu{x} phi_x(u_g)`` on the isotropy bundle, zero elsewhere."""
    chk = check_pair(g, pair, c, beta, tol)
    if chk.state > tol:
        raise NotAState(f"field at {chk.witness.get('state')!r} is not a state")
    if chk.conformal > tol * max(1.0, pair.measure.mass.max()):
        raise ConditionAViolated(f"measure is not conformal (residual {chk.conformal:.3g})", chk.conformal)
    if chk.invariance > tol:
        raise ConditionBViolated("field is not conjugation invariant", chk.witness.get("b"))
    if chk.vanishing > tol:
        raise ConditionCViolated("field does not vanish where c is non-zero", chk.witness.get("c"))
    values = np.zeros(len(g.arrows), dtype=complex)
    for xi, x in enumerate(g.units):
        for k, v in pair.fields[x].items():
            values[g.arrow_index(k)] = pair.measure.mass[xi] * v
    return KmsFunctional.from_values(g, values, beta)


def diagonalize_kms(w: KmsFunctional, c: Cocycle, beta: float, tol: float = KMS_TOL) -> KmsFunctional:
    """The diagonal KMS functional with the same unit masses (``psi o P``)."""
    pair = neshveyev_decompose(w, c, beta, tol)
    return weight_from_measure(c.groupoid, pair.measure, beta)


# ---------------------------------------------------------------------------
# main equivalence on concrete instances


def diagonal_kms_functional(a: InnerAction, beta: float, family: KmsFamily | None = None,
                            tol: float = KMS_TOL) -> KmsFunctional | None:
    """A diagonal beta-KMS state if one exists (LP over the simplex of extreme points)."""
    family = kms_set(a, beta) if family is None else family
    g = a.groupoid
    off = ~g.unit_mask
    ext = np.array([e.values for e in family.extreme_points]).T  # arrows x extremes
    k = ext.shape[1]
    if not off.any():
        cand = family.state(np.ones(k))
    else:
        a_eq = np.vstack([ext[off].real, ext[off].imag, np.ones((1, k))])
        b_eq = np.concatenate([np.zeros(2 * off.sum()), [1.0]])
        res = scipy.optimize.linprog(np.zeros(k), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * k, method="highs")
        if res.status != 0:
            return None
        cand = family.state(np.clip(res.x, 0, None))
    if not is_diagonal_functional(cand, max(tol, LINEAR_TOL)):
        return None
    if verify_kms(cand, a, beta).residual > tol:
        return None
    return cand


@dataclass
class BatteryReport:
    conditions: dict
    hypotheses: dict
    witnesses: dict
    all_equal: bool
    hypotheses_hold: bool
    divergence: list

    def as_dict(self) -> dict:
        return {
            "conditions": self.conditions,
            "hypotheses": self.hypotheses,
            "hypotheses_hold": self.hypotheses_hold,
            "all_equal": self.all_equal,
            "divergence": self.divergence,
            "witnesses": self.witnesses,
        }


def equivalence_battery(g: Groupoid, a: InnerAction, betas) -> BatteryReport:
    betas = [float(b) for b in betas]
    if not betas or any(b == 0 for b in betas):
        raise ValueError("betas must be non-empty and exclude 0")
    if a.groupoid is not g:
        raise ValueError("action is defined on a different groupoid")
    found = {}
    for b in betas:
        found[b] = diagonal_kms_functional(a, b)
    cocycle = is_diagonal_action(a)
    cond = {
        "1": any(v is not None for v in found.values()),
        "2": all(v is not None for v in found.values()),
        "3": fixes_units_subalgebra(a),
        "4": preserves_units_subalgebra(a),
        "5": cocycle is not None,
    }
    rep = structural_report(g)
    hyp = {
        "has_trivially_isotropic_unit": bool(rep.trivially_isotropic_units),
        "is_minimal": rep.is_minimal,
        "unit_space_totally_disconnected": True,
        "kms_weight_exists": True,
    }
    hold = all(hyp.values())
    equal = len(set(cond.values())) == 1
    if hold and not equal:
        raise AssertionError(f"equivalence fails under its hypotheses: {cond}")
    divergence = [] if equal else [k for k, v in cond.items() if v] + ["|"] + [k for k, v in cond.items() if not v]
    witnesses = {
        "betas_with_diagonal_state": [b for b, v in found.items() if v is not None],
        "diagonal_states": {b: v.as_dict(1e-15) for b, v in found.items() if v is not None},
        "cocycle": None if cocycle is None else cocycle.as_dict(),
    }
    return BatteryReport(cond, hyp, witnesses, equal, hold, divergence)
