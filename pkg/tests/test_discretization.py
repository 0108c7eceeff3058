import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixnl.discretization import (
    QuadratureOptions,
    anorm,
    assemble,
    assemble_gagliardo,
    assemble_mass,
    assemble_stiffness,
    build_mesh,
    dump_matrices,
    extension,
    interpolate,
    kernel_moments,
    neumann_residual,
)
from mixnl.exceptions import AssemblyError, DegenerateMeasureError, DomainError
from mixnl.measure import cns_constant, from_atoms
from oracles import extension_quad, gagliardo_bruteforce


# ------------------------------------------------------------------ mesh


def test_mesh_layout():
    mesh = build_mesh((-1.0, 1.0), 8.0, 16, 6)
    assert mesh.nodes[0] == -8.0 and mesh.nodes[-1] == 8.0
    assert mesh.n_nodes == 16 + 1 + 2 * 6
    inner = mesh.nodes[mesh.interior_dofs]
    assert inner[0] == -1.0 and inner[-1] == 1.0
    np.testing.assert_allclose(np.diff(inner), 2.0 / 16, rtol=1e-13)
    assert mesh.exterior_dofs.size == 12
    assert np.all(np.diff(mesh.nodes) > 0)


def test_auto_grading_matches_interior_width():
    mesh = build_mesh((-1.0, 1.0), 8.0, 64, 16)
    h = 2.0 / 64
    first_left = mesh.nodes[mesh.n_ext] - mesh.nodes[mesh.n_ext - 1]
    first_right = mesh.nodes[mesh.n_ext + 65] - mesh.nodes[mesh.n_ext + 64]
    assert first_left == pytest.approx(h, rel=1e-8)
    assert first_right == pytest.approx(h, rel=1e-8)


def test_fixed_grading_ratio():
    mesh = build_mesh((-1.0, 1.0), 8.0, 8, 5, grading=1.5)
    w = np.diff(mesh.nodes[mesh.n_ext + 8:])
    np.testing.assert_allclose(w[1:] / w[:-1], 1.5, rtol=1e-12)


@pytest.mark.parametrize("kwargs", [
    dict(omega=(1.0, -1.0), R=8, n_in=4, n_ext=2),
    dict(omega=(-1.0, 1.0), R=1.0, n_in=4, n_ext=2),
    dict(omega=(-1.0, 1.0), R=8, n_in=1, n_ext=2),
    dict(omega=(-1.0, 1.0), R=8, n_in=4, n_ext=0),
    dict(omega=(-1.0, 1.0), R=8, n_in=4, n_ext=2, grading=0.5),
])
def test_mesh_errors(kwargs):
    with pytest.raises(DomainError):
        build_mesh(**kwargs)


# ------------------------------------------------------------ local parts


def test_mass_and_stiffness(small_mesh):
    M, K = assemble_mass(small_mesh), assemble_stiffness(small_mesh)
    one = np.ones(small_mesh.n_nodes)
    assert one @ M @ one == pytest.approx(2.0, rel=1e-14)
    x = small_mesh.nodes
    assert x @ M @ x == pytest.approx(2.0 / 3.0, rel=1e-13)  # P1 mass is exact for quadratics
    assert np.abs(K @ one).max() < 1e-12
    assert x @ K @ x == pytest.approx(2.0, rel=1e-13)
    # both live on omega only
    ext = small_mesh.exterior_dofs
    assert np.all(M[np.ix_(ext, ext)] == 0) and np.all(K[np.ix_(ext, ext)] == 0)


# --------------------------------------------------------------- nonlocal


def test_gagliardo_symmetric_psd_constant_kernel(small_ops):
    B = small_ops.B
    np.testing.assert_allclose(B, B.T, atol=0, rtol=0)
    assert np.abs(B @ np.ones(B.shape[0])).max() < 1e-10 * np.abs(B).max()
    ev = np.linalg.eigvalsh(B)
    assert ev.min() > -1e-10 * ev.max()


def test_gagliardo_linear_in_measure(small_mesh):
    a, b = from_atoms([(0.3, 1.0)]), from_atoms([(0.7, 2.5)])
    Bab = assemble_gagliardo(small_mesh, a + b)
    np.testing.assert_allclose(Bab, assemble_gagliardo(small_mesh, a) + assemble_gagliardo(small_mesh, b),
                               rtol=1e-12, atol=1e-14)


def test_zero_measure_gives_zero(small_mesh):
    assert not assemble_gagliardo(small_mesh, from_atoms([])).any()


@pytest.mark.slow
def test_gagliardo_two_atoms_vs_bruteforce():
    mesh = build_mesh((-1.0, 1.0), 3.0, 4, 2)
    mu = from_atoms([(0.3, 1.0), (0.6, 0.5)])
    # the collar is very coarse here, so allow more graded panels than the default
    B = assemble_gagliardo(mesh, mu, QuadratureOptions(near_singular_subdivisions=12))
    ref = gagliardo_bruteforce(mesh.nodes, -1.0, 1.0, mu.atoms, epsrel=1e-10)
    mask = ref != 0
    assert not B[~mask].any()
    np.testing.assert_allclose(B[mask], ref[mask], rtol=1e-6)


def test_gagliardo_quadratic_form_on_linear_function():
    # for u(y) = y, the same-cell and adjacent contributions are closed-form
    # and the whole form equals c/2 * int int_Q |x-y|^(1-2s), computed here by quad
    from scipy import integrate

    s = 0.4
    mesh = build_mesh((-1.0, 1.0), 4.0, 16, 8)
    B = assemble_gagliardo(mesh, from_atoms([(s, 1.0)]))
    u = mesh.nodes.copy()
    val = u @ B @ u

    def inner(x):
        f = lambda y: abs(x - y) ** (1 - 2 * s)
        if -1 <= x <= 1:
            return integrate.quad(f, -4, 4, points=[x], epsrel=1e-13)[0]
        return integrate.quad(f, -1, 1, epsrel=1e-13)[0]

    # nodal values outside [-1, 1] follow y too, so the integrand is exact away from +-R
    ref = 0.5 * cns_constant(1, s) * integrate.quad(inner, -4, 4, points=[-1, 1], epsrel=1e-11, limit=200)[0]
    assert val == pytest.approx(ref, rel=1e-7)


def test_assembly_error_when_panels_capped(small_mesh):
    with pytest.raises(AssemblyError) as info:
        assemble_gagliardo(small_mesh, from_atoms([(0.5, 1.0)]),
                           QuadratureOptions(near_singular_subdivisions=1, far_field_order=2, tol=1e-12))
    assert info.value.worst_pair is not None


@pytest.mark.parametrize("bad", [dict(near_singular_subdivisions=0), dict(far_field_order=1), dict(tol=0.0)])
def test_quadrature_options_validated(bad):
    with pytest.raises(DomainError):
        QuadratureOptions(**bad)


def test_norm_matrix_and_anorm(small_ops):
    mesh = small_ops.mesh
    c = 3.0
    u = np.full(mesh.n_nodes, c)
    assert anorm(u, small_ops) == pytest.approx(c * math.sqrt(2.0), rel=1e-10)


def test_free_dofs_local_only(small_mesh):
    ops = assemble(small_mesh, from_atoms([]), 1.0)
    np.testing.assert_array_equal(ops.free_dofs, small_mesh.interior_dofs)


# -------------------------------------------------------------- exterior


def test_interpolate_limits(small_mesh):
    u = small_mesh.nodes**2
    assert interpolate(small_mesh, u, 0.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        interpolate(small_mesh, u, 9.0)


@pytest.mark.parametrize("x", [-1.5, -3.0, 2.0, 10.0])
@pytest.mark.parametrize("s", [0.2, 0.5, 0.9])
def test_kernel_moments_vs_quad(small_mesh, x, s):
    from scipy import integrate

    y = small_mesh.nodes[small_mesh.interior_dofs]
    u = np.sin(2 * y) + y
    w0, wu = kernel_moments(small_mesh, u, x, s)
    k = lambda t: abs(x - t) ** (-1 - 2 * s)
    ref0 = integrate.quad(k, -1, 1, epsrel=1e-13, epsabs=0)[0]
    refu = integrate.quad(lambda t: np.interp(t, y, u) * k(t), -1, 1, points=list(y[1:-1]), epsrel=1e-12,
                          epsabs=0, limit=200)[0]
    assert w0 == pytest.approx(ref0, rel=1e-11)
    assert wu == pytest.approx(refu, rel=1e-9, abs=1e-13)


@pytest.mark.parametrize("atoms", [[(0.5, 1.0)], [(0.3, 1.0), (0.7, 1.0)], [(0.1, 2.0), (0.95, 0.1)]])
def test_extension_vs_quad_and_residual(small_mesh, atoms):
    mu = from_atoms(atoms)
    y = small_mesh.nodes[small_mesh.interior_dofs]
    pts = np.array([-1.5, -4.0, 3.0])
    ext = extension(y, pts, mu, small_mesh)
    for x, e in zip(pts, ext):
        assert e == pytest.approx(extension_quad(lambda t: t, x, -1.0, 1.0, mu.atoms, cns_constant), rel=1e-10)
        u = np.zeros(small_mesh.n_nodes)
        u[small_mesh.interior_dofs] = y
        assert abs(neumann_residual(u, x, mu, small_mesh, value_at_x=e)) < 1e-12


@given(st.floats(-5.0, 5.0), st.floats(1.05, 30.0), st.booleans())
@settings(max_examples=40, deadline=None)
def test_extension_of_constant(c, dist, left):
    mesh = build_mesh((-1.0, 1.0), 8.0, 8, 2)
    x = -dist if left else dist
    v = extension(np.full(9, c), [x], from_atoms([(0.4, 1.0), (0.6, 3.0)]), mesh)[0]
    assert v == pytest.approx(c, rel=1e-12, abs=1e-12)


def test_extension_needs_measure(small_mesh):
    with pytest.raises(DegenerateMeasureError):
        extension(np.zeros(33), [-2.0], from_atoms([]), small_mesh)


def test_residual_rejects_interior_point(small_mesh):
    with pytest.raises(DomainError):
        neumann_residual(np.zeros(small_mesh.n_nodes), 0.5, from_atoms([(0.5, 1.0)]), small_mesh)


def test_dump_matrices_roundtrip(small_ops, tmp_path):
    paths = dump_matrices(small_ops, tmp_path)
    assert [p.name for p in paths] == ["M.coo", "K.coo", "B.coo"]
    lines = (tmp_path / "B.coo").read_text().splitlines()
    n, m, nnz = map(int, lines[0].lstrip("# ").split())
    assert (n, m) == small_ops.B.shape and nnz == len(lines) - 1
    B = np.zeros((n, m))
    for line in lines[1:]:
        i, j, v = line.split()
        B[int(i), int(j)] = float(v)
    np.testing.assert_array_equal(B, small_ops.B)
