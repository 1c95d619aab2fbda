"""Acceptance suite: one test per criterion, summarised at the end of the run."""
from itertools import permutations

import numpy as np
import pytest

from skewcomplex.annihilating import (
    appendix_product_table,
    build,
    equivalence_check,
    extremal_vector,
    fredholm_report,
    generalized_helmholtz,
    kernel_basis,
    laplacian_mismatch,
    poincare_constant,
    verify_annihilating,
)
from skewcomplex.complexes import (
    cohomology,
    corrupt_complex,
    dual_complex,
    random_complex,
    validate_complex,
)
from skewcomplex.derham import (
    GridDomain3D,
    SimplicialComplexMesh,
    build_derham,
    build_forms_complex,
    dual_grid_dirichlet,
)
from skewcomplex.factorization import (
    EvolutionProblem,
    component_resolvent_recover,
    component_solve,
    direct_resolvent_apply,
    evolve,
    factored_resolvent_apply,
)
from skewcomplex.linmap import LinearMap, project, rank_and_kernel, singular_values

from oracles import cubical_betti, simplicial_betti
from suite import CIRCLE, SEED, TRIANGLE, cavity_grid, random_corrupted, random_valid


def _rel(x, ref):
    scale = np.linalg.norm(ref)
    return np.linalg.norm(x - ref) / scale if scale > 0 else np.linalg.norm(x)


def grid_fixtures():
    ring = np.ones((3, 3, 1), dtype=bool)
    ring[1, 1, 0] = False
    return {
        "box3": GridDomain3D.box(3),
        "cavity3": cavity_grid(),
        "ring": GridDomain3D(ring),
        "single": GridDomain3D.box(1),
        "slab": GridDomain3D.box(4, 2, 1, h=0.5),
    }


def test_criterion_1_complex_iff_annihilating(record_property):
    valid = random_valid(200)
    corrupted = random_corrupted(200)
    assert all(s.length <= 5 and max(s.dims) <= 40 for s in valid)
    disagreements, worst = 0, 0.0
    for spec in valid:
        rep = equivalence_check(spec)
        worst = max(worst, rep.certificate.max_relative())
        assert rep.complex_holds and rep.annihilation_holds
        disagreements += not rep.agree
    record_property("max_valid_residual", worst)
    assert worst <= 1e-12
    for spec, _ in corrupted:
        rep = equivalence_check(spec)
        assert not rep.complex_holds and not rep.annihilation_holds
        disagreements += not rep.agree
    record_property("disagreements", disagreements)
    assert disagreements == 0


def test_criterion_2_product_table():
    valid = [random_complex([4, 6, 6, 3], [3, 3, 2], seed=s, weighted=bool(s % 2))
             for s in range(4)]
    for spec in valid:
        table = appendix_product_table(build(spec), tol=1e-12)
        assert all(table[(k, l)] == [] for k in range(3) for l in range(3) if k != l)
    for bc in ("neumann", "dirichlet"):
        incidence = build_derham(GridDomain3D.box(3), bc)
        table = appendix_product_table(build(incidence), tol=0.0)
        assert all(table[(k, l)] == [] for k in range(3) for l in range(3) if k != l)
    # break a_1 a_0 only: S_1 S_0 lives at block (2, 0), S_0 S_1 at (0, 2)
    bad = corrupt_complex(random_complex([4, 6, 6, 3], [3, 3, 2], seed=9), 1, 0.1)
    table = appendix_product_table(build(bad), tol=1e-12)
    assert table[(1, 0)] == [(2, 0)]
    assert table[(0, 1)] == [(0, 2)]
    for pair in [(0, 2), (2, 0), (1, 2), (2, 1)]:
        assert table[pair] == []
    assert verify_annihilating(build(bad)).verdicts[(1, 0)] is False


def test_criterion_3_helmholtz(record_property):
    rng = np.random.default_rng(SEED + 3)
    complexes = random_valid(20, SEED + 30, 5, 40)
    count, recon, ortho = 0, 0.0, 0.0
    for spec in complexes:
        op = build(spec)
        g = op.space.space
        assert kernel_basis(op).dim == sum(cohomology(spec).dims)
        for _ in range(5):
            x = rng.standard_normal(g.dim)
            comp = generalized_helmholtz(op, x)
            nx = g.norm(x)
            recon = max(recon, g.norm(comp.total() - x) / nx)
            pieces = [comp.kernel] + comp.ranges
            for i in range(len(pieces)):
                for j in range(i + 1, len(pieces)):
                    ortho = max(ortho, abs(g.inner(pieces[i], pieces[j])) / nx**2)
            count += 1
    record_property("reconstruction", recon)
    record_property("orthogonality", ortho)
    assert count == 100
    assert recon <= 1e-10 and ortho <= 1e-10


def test_criterion_4_topology():
    box, cav = GridDomain3D.box(3), cavity_grid()
    expected = {
        (box, "neumann"): [1, 0, 0, 0],
        (box, "dirichlet"): [0, 0, 0, 1],
        (cav, "neumann"): [1, 0, 1, 0],
        (cav, "dirichlet"): [0, 1, 0, 1],
    }
    for (grid, bc), dims in expected.items():
        got = cohomology(build_derham(grid, bc)).dims
        oracle = cubical_betti(grid.cells, relative=(bc == "dirichlet"))
        assert got == dims == oracle
    for tops, dims in [(CIRCLE, [1, 1]), (TRIANGLE, [1, 0, 0])]:
        spec = build_forms_complex(SimplicialComplexMesh.from_top_simplices(tops))
        assert cohomology(spec).dims == dims == simplicial_betti(tops)


def test_criterion_5_generalized_laplacian(instances, record_property):
    worst = 0.0
    for name, spec in instances:
        op = build(spec)
        worst = max(worst, laplacian_mismatch(op))
        assert laplacian_mismatch(op) <= 1e-12, name
        space = op.space.space
        minus_sq = LinearMap(space, space, -(op.sum.matrix @ op.sum.matrix))
        assert rank_and_kernel(minus_sq).kernel.dim == kernel_basis(op).dim, name
    record_property("max_block_mismatch", worst)


def test_criterion_6_poincare_fredholm(instances):
    rng = np.random.default_rng(SEED + 6)
    for name, spec in instances:
        op = build(spec)
        g = op.space.space
        rep = fredholm_report(op)
        assert rep.index == 0 and rep.dims_add_up and rep.orthogonality <= 1e-10, name
        assert rep.rank + rep.dim_ker == g.dim
        if rep.rank == 0:
            continue
        c = poincare_constant(op)
        kern = kernel_basis(op)
        for _ in range(20):
            y = rng.standard_normal(g.dim)
            x = y - project(kern, y)
            assert g.norm(x) <= (1 + 1e-8) * c * g.norm(op.sum(x)), name
        v = extremal_vector(op)
        assert abs(g.norm(v) - c * g.norm(op.sum(v))) <= 1e-8 * g.norm(v), name


def test_criterion_7_factorization(instances, record_property):
    rng = np.random.default_rng(SEED + 7)
    worst = {"factored": 0.0, "recover": 0.0, "order": 0.0}
    for name, spec in instances:
        op = build(spec)
        orders = list(permutations(range(op.length)))[1:]
        for tau in (0.1, 1.0, 10.0):
            for _ in range(50):
                b = rng.standard_normal(op.space.dim)
                direct = direct_resolvent_apply(op, tau, b)
                fact = factored_resolvent_apply(op, tau, b)
                worst["factored"] = max(worst["factored"], _rel(fact, direct))
                for l in range(op.length):
                    ref = component_solve(op, l, tau, b)
                    got = component_resolvent_recover(op, tau, l, b)
                    worst["recover"] = max(worst["recover"], _rel(got, ref))
                for order in orders:
                    other = factored_resolvent_apply(op, tau, b, order=order)
                    worst["order"] = max(worst["order"], _rel(other, fact))
    for key, value in worst.items():
        record_property(key, value)
    assert worst["factored"] <= 1e-10
    assert worst["recover"] <= 1e-10
    assert worst["order"] <= 1e-12


def test_criterion_8_evolution(record_property):
    op = build(build_derham(GridDomain3D.box(4, h=0.25), "dirichlet"))
    g = op.space.space
    u0 = np.random.default_rng(SEED + 8).standard_normal(g.dim)
    u0 /= g.norm(u0)
    cay = evolve(EvolutionProblem(op, u0, 0.01, 1000, "cayley"))
    assert len(cay.energies) == 1001
    drift = np.abs(cay.energies - cay.energies[0]).max()
    record_property("cayley_drift", float(drift))
    assert drift <= 1e-9
    mono = evolve(EvolutionProblem(op, u0, 0.01, 1000, "monolithic-implicit-euler"))
    fact = evolve(EvolutionProblem(op, u0, 0.01, 1000, "factored-implicit-euler"))
    gaps = [_rel(f, m) for f, m in zip(fact.states, mono.states)]
    record_property("euler_gap", float(max(gaps)))
    record_property("euler_final_energy", float(mono.energies[-1]))
    assert max(gaps) <= 1e-9
    for traj in (mono, fact):
        assert np.all(np.diff(traj.energies) <= 0.0)


@pytest.mark.parametrize("name", sorted(grid_fixtures()))
def test_criterion_9_duality(name):
    grid = grid_fixtures()[name]
    neu = build_derham(grid, "neumann")
    dirichlet = build_derham(grid, "dirichlet")
    assert cohomology(neu).dims == cohomology(dual_complex(dirichlet)).dims
    assert cohomology(neu).dims == cohomology(dirichlet).dims[::-1]
    dual = dual_complex(dual_grid_dirichlet(grid))
    assert neu.dims == dual.dims
    for a, b in zip(neu.maps, dual.maps):
        sa, sb = singular_values(a), singular_values(b)
        assert sa.shape == sb.shape
        assert np.abs(sa - sb).max(initial=0.0) <= 1e-10
    assert validate_complex(dual).residuals == [0.0, 0.0]
