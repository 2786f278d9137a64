"""Brute-force references computed without the package's realization code.

Every algebra computation goes through the left regular representation on
l^2(G) (all arrows at once), built here from the multiplication table, and
matrix exponentials come from scipy.linalg.expm.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg


def left_regular(g, coeffs) -> np.ndarray:
    """(L_f xi)(k) = sum_{h k' = k} f(h) xi(k')."""
    n = len(g.arrows)
    m = np.zeros((n, n), dtype=complex)
    for h in range(n):
        for k2 in range(n):
            k = g.mul[h, k2]
            if k >= 0:
                m[k, k2] += coeffs[h]
    return m


def unit_vector(g) -> np.ndarray:
    v = np.zeros(len(g.arrows), dtype=complex)
    v[g.unit_idx] = 1.0
    return v


def _deltas(g):
    n = len(g.arrows)
    return [left_regular(g, np.eye(n)[i]) for i in range(n)]


def kms_extreme_points(g, h_coeffs, beta, tol=1e-8, seed=0):
    """Extreme beta-KMS states as value vectors psi(delta_g).

    Solves psi(a b) = psi(b alpha_{i beta}(a)) on basis elements as a linear system
    in the n values, then splits the solution space with the Radon-Nikodym
    operators G_psi0^{-1} G_psi, which commute.
    """
    n = len(g.arrows)
    one = unit_vector(g)
    L = _deltas(g)
    lh = left_regular(g, h_coeffs)
    ev = scipy.linalg.expm(-beta * lh)
    ev_inv = scipy.linalg.expm(beta * lh)
    rows = []
    for i in range(n):
        ai = ev @ L[i] @ ev_inv  # alpha_{i beta}(delta_i) = e^{-beta H} a e^{beta H}
        for j in range(n):
            ab = L[i] @ L[j] @ one
            ba = L[j] @ ai @ one
            rows.append(ab - ba)
    a = np.array(rows)
    scale = max(1.0, np.abs(ev).max() * np.abs(ev_inv).max())
    _, sv, vh = np.linalg.svd(a)
    rank = int((sv > 1e-10 * scale).sum())
    ker = vh[rank:].conj().T
    k = ker.shape[1]
    rng = np.random.default_rng(seed)

    def gram(v):
        # G[i, j] = psi(delta_i^* delta_j)
        return np.array([[v @ (L[i].conj().T @ L[j] @ one) for j in range(n)] for i in range(n)])

    psi0 = ker @ (rng.normal(size=k) + 1j * rng.normal(size=k))
    psi1 = ker @ (rng.normal(size=k) + 1j * rng.normal(size=k))
    t = np.linalg.solve(gram(psi0), gram(psi1))
    lam, vec = np.linalg.eig(t)
    vinv = np.linalg.inv(vec)
    clusters = []
    for idx in np.argsort(lam.real + 1e-3 * lam.imag):
        for c in clusters:
            if abs(lam[c[0]] - lam[idx]) < 1e-6 * max(1.0, abs(lam[idx])):
                c.append(idx)
                break
        else:
            clusters.append([idx])
    states = []
    for c in clusters:
        e = vec[:, c] @ vinv[c, :]  # left multiplication by a minimal central projection
        z = e @ one
        lz = left_regular(g, z)
        vals = np.array([psi0 @ (lz @ L[i] @ one) for i in range(n)])
        vals = vals / (vals @ one)
        states.append(vals)
    return states


def hausdorff(a, b) -> float:
    if not a and not b:
        return 0.0
    if not a or not b:
        return np.inf
    d = np.array([[np.abs(x - y).max() for y in b] for x in a])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def gibbs_functional_pair(h: np.ndarray, beta: float) -> np.ndarray:
    """Tr(e^{-beta A} .)/Tr(e^{-beta A}) on the matrix units E_ab of M_n, as rho[b, a]."""
    rho = scipy.linalg.expm(-beta * h)
    rho = rho / np.trace(rho)
    return rho.T


def conformal_brute_force(g, c_values, beta):
    """Non-negative kernel of mu(src k) - e^{beta c(k)} mu(tgt k) = 0, one ray per orbit."""
    nu = len(g.units)
    a = np.zeros((len(g.arrows), nu))
    for k in range(len(g.arrows)):
        a[k, g.src[k]] += 1.0
        a[k, g.tgt[k]] -= np.exp(beta * c_values[k])
    ker = scipy.linalg.null_space(a)
    # the kernel splits by orbit; each basis vector restricted to an orbit is a ray
    rays = []
    for orb in g.orbits():
        idx = [g.unit_index(x) for x in orb]
        sub = ker[idx]
        u, s, _ = np.linalg.svd(sub)
        if s.size and s[0] > 1e-9:
            r = np.zeros(nu)
            r[idx] = np.abs(u[:, 0])
            rays.append(r)
    return rays


def critical_beta_oracle(graph) -> float:
    """ln of the Perron eigenvalue of the adjacency matrix (F = 1)."""
    return float(np.log(np.max(np.abs(np.linalg.eigvals(graph.adjacency())))))
