import math

import numpy as np
import pytest

from gkms.errors import (
    CycleDetected,
    DepthMismatch,
    DepthTooSmall,
    HorizonExceeded,
    KappaTooLarge,
    NonPositivePotential,
    NotStronglyConnected,
    UndefinedOnVertex,
)
from gkms.graphs import (
    DirectedGraph,
    Path,
    PeriodicPath,
    Potential,
    build_path_space,
    build_renault_groupoid,
    cocycle_from_potential,
    critical_beta,
    cylinder_conformal_solve,
    cylinder_masses,
    cylinder_residual,
    end_vertex,
    graph_groupoid,
    higher_block,
    paterson_relations,
    potential_from_cocycle,
    remark007_sequence,
    shift,
    spectral_radius,
    transfer_matrix,
    var_nv,
)
from gkms.groupoid import coboundary, conformal_measures, structural_report

from corpus import ACYCLIC_GRAPHS, CYCLIC_GRAPHS, random_strongly_connected
from oracles import critical_beta_oracle

O2 = CYCLIC_GRAPHS["o2"]
VW = ACYCLIC_GRAPHS["vw"]


class TestPathSpace:
    def test_vw(self):
        ps = build_path_space(VW, 0)
        assert sorted(map(str, ps.points)) == ["e", "w"]

    def test_o2(self):
        ps = build_path_space(O2, 3)
        assert ps.boundary_paths == []
        assert len(ps.cylinders(3)) == 8

    def test_declared_emitter(self):
        ps = build_path_space(ACYCLIC_GRAPHS["emitter"], 0)
        assert Path("v") in ps.points

    def test_depth_too_small(self):
        with pytest.raises(DepthTooSmall):
            build_path_space(CYCLIC_GRAPHS["two_cycle"], 1)

    def test_periodic_points_canonical(self):
        ps = build_path_space(CYCLIC_GRAPHS["golden"], 4)
        seen = set()
        for x in ps.periodic_points:
            assert not x.prefix or x.prefix[-1] != x.loop[-1]
            seen.add(x.prefix_edges(12))
        assert len(seen) == len(ps.periodic_points)

    @pytest.mark.parametrize("name", list(ACYCLIC_GRAPHS))
    def test_cylinder_decomposition(self, name):
        g = ACYCLIC_GRAPHS[name]
        ps = build_path_space(g, 0)
        for nu in ps.finite_paths:
            whole = set(ps.cylinder(nu))
            parts = [set(ps.cylinder(child)) for child in ps.children(nu)]
            atom = {nu} if end_vertex(g, nu) in g.v_inf else set()
            union = set().union(*parts) | atom
            assert union == whole
            assert sum(map(len, parts)) + len(atom) == len(whole)

    def test_all_maximal_paths_end_in_v_inf(self):
        for g in ACYCLIC_GRAPHS.values():
            for x in build_path_space(g, 0).points:
                assert end_vertex(g, x) in g.v_inf


class TestShift:
    def test_examples(self):
        assert shift(VW, Path("v", ("e",))) == Path("w")
        g = ACYCLIC_GRAPHS["path3"]
        assert shift(g, Path(0, ("a", "b"))) == Path(1, ("b",))
        with pytest.raises(UndefinedOnVertex):
            shift(VW, Path("w"))

    def test_periodic(self):
        x = PeriodicPath("v", (), ("a", "b"))
        assert shift(O2, x) == PeriodicPath("v", (), ("b", "a"))
        y = PeriodicPath("v", ("b",), ("a",))
        assert shift(O2, y) == PeriodicPath("v", (), ("a",))


class TestRenault:
    def test_vw(self):
        gp, _ = graph_groupoid(VW)
        assert len(gp.units) == 2 and len(gp.arrows) == 4
        assert structural_report(gp).is_principal

    def test_empty_domain(self):
        gp = build_renault_groupoid(["a", "b", "c"], [], {})
        assert len(gp.arrows) == 3 and all(gp.is_unit_arrow(a) for a in gp.arrows)

    def test_fixed_point(self):
        with pytest.raises(CycleDetected) as err:
            build_renault_groupoid(["a", "b"], ["a", "b"], {"a": "b", "b": "b"})
        assert err.value.cycle == ("b", "b")

    def test_cyclic_graph_rejected(self):
        with pytest.raises(CycleDetected):
            graph_groupoid(O2)

    def test_composition_law(self):
        gp = build_renault_groupoid("abcde", "abd", {"a": "b", "b": "c", "d": "c"})
        for (g, h) in zip(*np.nonzero(gp.mul >= 0)):
            x, k, y = gp.arrows[g]
            y2, l, z = gp.arrows[h]
            assert y == y2 and gp.arrows[gp.mul[g, h]] == (x, k + l, z)


class TestCocycleFromPotential:
    def test_zero(self):
        gp, _ = graph_groupoid(VW)
        c = cocycle_from_potential(gp, lambda x: 0.0)
        assert np.all(c.values == 0)

    def test_vw(self):
        gp, _ = graph_groupoid(VW)
        c = cocycle_from_potential(gp, Potential.constant(VW, 1.0))
        assert c((Path("v", ("e",)), 1, Path("w"))) == 1.0

    def test_round_trip(self):
        gp = build_renault_groupoid("abcd", "abd", {"a": "b", "b": "c", "d": "c"})
        rng = np.random.default_rng(0)
        for _ in range(20):
            c = coboundary(gp, rng.normal(size=4))
            f = potential_from_cocycle(gp, c)
            assert np.allclose(cocycle_from_potential(gp, f).values, c.values, atol=1e-12)


class TestTransfer:
    def test_o2(self):
        a = transfer_matrix(O2, Potential.constant(O2), 0.4).entries
        assert a == pytest.approx(np.array([[2 * math.exp(-0.4)]]))

    def test_two_cycle(self):
        g = CYCLIC_GRAPHS["two_cycle"]
        a = transfer_matrix(g, Potential.constant(g), 1.0).entries
        assert np.allclose(a, [[0, math.exp(-1)], [math.exp(-1), 0]])

    def test_beta_zero_counts_edges(self):
        g = ACYCLIC_GRAPHS["parallel"]
        f = Potential(1, {("e",): 3.0, ("f",): -2.0})
        assert np.array_equal(transfer_matrix(g, f, 0.0).entries, g.adjacency())

    def test_depth_mismatch(self):
        with pytest.raises(DepthMismatch):
            transfer_matrix(O2, Potential.constant(O2, depth=2), 1.0)

    def test_strictly_decreasing(self):
        g = CYCLIC_GRAPHS["k3"]
        f = Potential.constant(g, 0.7)
        a1, a2 = transfer_matrix(g, f, 0.5).entries, transfer_matrix(g, f, 0.6).entries
        assert np.all(a2 < a1)


class TestConformal:
    def test_o2(self):
        f = Potential.constant(O2)
        sol = cylinder_conformal_solve(O2, f, math.log(2))
        assert len(sol.rays) == 1 and sol.rays[0][0] == pytest.approx([1.0])
        assert cylinder_conformal_solve(O2, f, 1.0).is_empty

    def test_vw_sink(self):
        f = Potential(1, {("e",): 0.6})
        for beta in (-1.0, 0.0, 2.5):
            (m, atom), = cylinder_conformal_solve(VW, f, beta).rays
            assert m[0] == pytest.approx(math.exp(-beta * 0.6) * m[1])
            assert atom[0] == pytest.approx(m[1])

    def test_emitter_atom_free(self):
        g = ACYCLIC_GRAPHS["emitter_edges"]
        sol = cylinder_conformal_solve(g, Potential.constant(g), 0.5)
        assert len(sol.rays) == 2
        for m, at in sol.rays:
            assert cylinder_residual(g, Potential.constant(g), 0.5, m, at) < 1e-12

    def test_strongly_connected_iff_radius_one(self):
        g = CYCLIC_GRAPHS["golden"]
        f = Potential.constant(g)
        bstar = critical_beta(g, f)
        assert not cylinder_conformal_solve(g, f, bstar).is_empty
        for beta in (bstar - 0.1, bstar + 0.1):
            assert cylinder_conformal_solve(g, f, beta).is_empty

    def test_cross_module(self):
        for g in ACYCLIC_GRAPHS.values():
            f = Potential.from_function(g, 1, lambda w: 0.3 + 0.1 * len(str(w[0])))
            gp, space = graph_groupoid(g)
            c = cocycle_from_potential(gp, f)
            for beta in (-0.7, 1.1):
                ours = cylinder_conformal_solve(g, f, beta).rays
                theirs = [cylinder_masses(g, space, mu.as_dict()) for mu in conformal_measures(gp, c, beta)]
                assert len(ours) == len(theirs)

    def test_mass_identity(self):
        g = ACYCLIC_GRAPHS["diamond"]
        f = Potential.from_function(g, 1, lambda w: {"e1": 0.2, "e2": 1.0, "e3": -0.5, "e4": 0.1}[w[0]])
        gp, space = graph_groupoid(g)
        c = cocycle_from_potential(gp, f)
        (mu,) = conformal_measures(gp, c, 0.8)
        mass = mu.as_dict()
        for nu in space.finite_paths:
            whole = sum(mass[x] for x in space.cylinder(nu))
            rest = sum(mass[x] for ch in space.children(nu) for x in space.cylinder(ch))
            atom = mass.get(nu, 0.0) if end_vertex(g, nu) in g.v_inf else 0.0
            assert whole == pytest.approx(rest + atom, abs=1e-12)


class TestCriticalBeta:
    def test_o2(self):
        assert critical_beta(O2, Potential.constant(O2)) == pytest.approx(math.log(2), abs=1e-9)

    def test_loop(self):
        g = CYCLIC_GRAPHS["loop"]
        assert critical_beta(g, Potential.constant(g)) == 0.0

    def test_k3(self):
        g = CYCLIC_GRAPHS["k3"]
        assert critical_beta(g, Potential.constant(g)) == pytest.approx(math.log(3), abs=1e-9)

    def test_errors(self):
        g = CYCLIC_GRAPHS["loop_tail"]
        with pytest.raises(NotStronglyConnected):
            critical_beta(g, Potential.constant(g))
        with pytest.raises(NonPositivePotential):
            critical_beta(O2, Potential(1, {("a",): 1.0, ("b",): 0.0}))

    def test_scaled_potential(self):
        # F = s scales beta* by 1/s
        for s in (0.5, 2.0, 3.7):
            assert critical_beta(O2, Potential.constant(O2, s)) == pytest.approx(math.log(2) / s, abs=1e-9)

    def test_random_against_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            g = random_strongly_connected(rng)
            f = Potential.constant(g)
            b = critical_beta(g, f)
            assert b == pytest.approx(critical_beta_oracle(g), abs=1e-8)
            assert abs(transfer_matrix(g, f, b).spectral_radius() - 1) < 1e-10

    def test_monotone_across_bracket(self):
        g = CYCLIC_GRAPHS["golden"]
        f = Potential.constant(g)
        b = critical_beta(g, f)
        pts = np.linspace(0, 2 * b + 1, 9)
        rho = [transfer_matrix(g, f, x).spectral_radius() for x in pts]
        assert all(x > y for x, y in zip(rho, rho[1:]))

    def test_higher_block(self):
        f = Potential(2, {(x, y): 1.0 for x in "ab" for y in "ab"})
        assert critical_beta(O2, f) == pytest.approx(math.log(2), abs=1e-9)
        hb, f1 = higher_block(O2, f)
        assert len(hb.vertices) == 2 and len(hb.edges) == 4 and f1.depth == 1

    def test_spectral_radius_matches_eigvals(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            a = rng.random((5, 5)) * (rng.random((5, 5)) < 0.5)
            assert spectral_radius(a) == pytest.approx(np.abs(np.linalg.eigvals(a)).max(), abs=1e-10)


class TestVar:
    def test_depth_one_zero(self):
        for g in list(CYCLIC_GRAPHS.values()):
            f = Potential.from_function(g, 1, lambda w: hash(w) % 7 / 7.0)
            for v in g.vertices:
                assert all(var_nv(g, f, n, v) == 0.0 for n in range(13))

    def test_depth_two_bound(self):
        f = Potential(2, {("a", "a"): 0.0, ("a", "b"): 1.0, ("b", "a"): 1.0, ("b", "b"): 0.0})
        for n in range(1, 8):
            v = var_nv(O2, f, n, "v")
            assert v <= 2 * 1 * f.max_abs
        assert var_nv(O2, f, 3, "v") == 1.0

    def test_constant(self):
        for d in (1, 2, 3):
            f = Potential.constant(CYCLIC_GRAPHS["golden"], 2.5, depth=d)
            assert var_nv(CYCLIC_GRAPHS["golden"], f, 5, "v") == 0.0

    def test_horizon(self):
        with pytest.raises(HorizonExceeded):
            var_nv(O2, Potential.constant(O2, depth=2), 70, "v", horizon=64)

    def test_brute_force(self):
        # explicit enumeration of pairs of long words agreeing on n edges
        rng = np.random.default_rng(3)
        g = CYCLIC_GRAPHS["golden"]
        d = 3
        f = Potential.from_function(g, d, lambda w: float(rng.normal()))
        for n in range(1, 5):
            words = g.words(n + d - 1, "v")
            best = 0.0
            for x in words:
                for y in words:
                    if x[:n] == y[:n]:
                        sx = sum(f.word_value(x[j:j + d]) for j in range(n))
                        sy = sum(f.word_value(y[j:j + d]) for j in range(n))
                        best = max(best, abs(sx - sy))
            assert var_nv(g, f, n, "v") == pytest.approx(best, abs=1e-12)


class TestPaterson:
    @pytest.mark.parametrize("name", list(ACYCLIC_GRAPHS))
    def test_relations(self, name):
        res = paterson_relations(ACYCLIC_GRAPHS[name])
        assert max(res.values()) < 1e-12


class TestRemark007:
    def test_default(self):
        r = remark007_sequence(10 ** 5, 0.3)
        assert r.monotone and r.mass_ok and r.a_nonnegative
        assert r.partial_sum + r.tail_bound < 1
        assert not r.divergence_verified and "cannot be verified" in r.divergence_note
        assert r.divergence_trend

    def test_a_sequence_telescopes(self):
        r = remark007_sequence(1000, 0.3)
        # sum_{k<=n} a_k = -log b_n
        assert np.allclose(np.cumsum(r.a), -np.log(r.b))

    def test_constant_flagged(self):
        r = remark007_sequence(10 ** 4, b=lambda n: np.full_like(n, 1e-3))
        assert not r.mass_ok

    def test_geometric(self):
        r = remark007_sequence(200, b=lambda n: 3.0 ** -n, tail_bound=lambda N: 3.0 ** -N / 2)
        assert r.monotone and r.mass_ok and not r.divergence_trend

    def test_kappa_too_large(self):
        with pytest.raises(KappaTooLarge):
            remark007_sequence(1000, 5.0)


def test_graph_document_round_trip():
    from gkms.graphs import graph_document, graph_from_document

    for g in list(ACYCLIC_GRAPHS.values()) + list(CYCLIC_GRAPHS.values()):
        h = graph_from_document(graph_document(g))
        assert h.edges == g.edges and h.infinite_emitters == g.infinite_emitters


def test_sinks_and_emitters():
    g = DirectedGraph(["a", "b", "c"], [("e", "a", "b")], ["c"])
    assert g.sinks == {"b"} and g.v_inf == {"b", "c"}
