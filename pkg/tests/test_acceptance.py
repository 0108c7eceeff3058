"""Acceptance criteria, one marked group per criterion.

The terminal summary prints ``criterion n: PASS/FAIL`` for each group.
"""

import time

import numpy as np
import pytest

from mixnl.cli import main
from mixnl.config import preset
from mixnl.discretization import anorm, assemble, build_mesh
from mixnl.measure import from_atoms, s_sharp
from mixnl.nonlinearity import check_AR, sv12_check
from mixnl.solvers import (
    Problem,
    energy,
    gradient,
    hessian,
    residual,
    solve_linking,
    solve_mountain_pass,
    verify_linking_geometry,
    verify_mp_geometry,
)
from mixnl.spectra import solve_eigen
from mixnl.worked_examples import appendix_bound
from oracles import analytic_neumann_eigs, directional_fd, gagliardo_bruteforce
from conftest import MEASURES

OMEGA_LEN = 2.0


# 1 ---------------------------------------------------------------------------------


@pytest.mark.criterion(1)
@pytest.mark.parametrize("name", ["cor1", "cor2", "cor3", "cor4"])
def test_first_eigenpair(name):
    t0 = time.perf_counter()
    cfg = preset(name)
    mesh = build_mesh((-1.0, 1.0), 8.0, 128, 32)
    assert (cfg.raw["mesh"]["n_in"], cfg.raw["mesh"]["n_ext"], cfg.raw["mesh"]["collar_R"]) == (128, 32, 8.0)
    mats = assemble(mesh, cfg.measure, cfg.raw["alpha"], cfg.quad)
    eig = solve_eigen(mats, k=4)
    lt = eig.lambdas_tilde
    e1 = eig.vectors[mesh.interior_dofs, 0]
    elapsed = time.perf_counter() - t0
    print(f"{name}: lambda1~={lt[0]:.3e} lambda2~={lt[1]:.6f} e1 spread={np.ptp(e1) / np.abs(e1).max():.2e} t={elapsed:.1f}s")
    assert abs(lt[0]) <= 1e-8 * max(1.0, lt[1])
    assert np.ptp(e1) <= 1e-6 * np.abs(e1).max()
    assert elapsed <= 60.0


# 2 ---------------------------------------------------------------------------------


@pytest.mark.criterion(2)
def test_local_limit_spectrum():
    t0 = time.perf_counter()
    mats = assemble(build_mesh((0.0, 1.0), 8.0, 256, 32), from_atoms([]), 1.0)
    lt = solve_eigen(mats, k=4).lambdas_tilde
    elapsed = time.perf_counter() - t0
    exact = analytic_neumann_eigs(1.0, 4)
    rel = np.abs(lt[1:4] - exact[1:4]) / exact[1:4]
    print(f"local limit: rel errors {rel} t={elapsed:.1f}s")
    assert np.all(rel <= 0.01)
    assert elapsed <= 10.0


# 3 ---------------------------------------------------------------------------------


@pytest.mark.criterion(3)
def test_bruteforce_assembly():
    t0 = time.perf_counter()
    mesh = build_mesh((-1.0, 1.0), 8.0, 8, 4)
    B = assemble(mesh, from_atoms([(0.5, 1.0)]), 0.0).B
    ref = gagliardo_bruteforce(mesh.nodes, -1.0, 1.0, [(0.5, 1.0)])
    elapsed = time.perf_counter() - t0
    zero = ref == 0.0
    np.testing.assert_array_equal(B[zero], 0.0)
    rel = np.abs(B[~zero] - ref[~zero]) / np.abs(ref[~zero])
    print(f"brute force: max rel {rel.max():.2e} over {rel.size} entries t={elapsed:.1f}s")
    assert rel.max() <= 1e-6
    assert elapsed <= 120.0


# 4 ---------------------------------------------------------------------------------


@pytest.mark.criterion(4)
@pytest.mark.parametrize("lam", [0.0, 1.0])
def test_directional_derivatives(delta_ops, cubic, lam):
    pr = Problem(delta_ops, lam, cubic)
    rng = np.random.default_rng(2024)
    worst_I = worst_dI = 0.0
    for _ in range(50):
        u, v = pr.zeros(), pr.zeros()
        u[pr.free] = rng.standard_normal(pr.free.size)
        v[pr.free] = rng.standard_normal(pr.free.size)
        g = gradient(pr, u)
        fd = directional_fd(lambda w: energy(pr, w), u, v)
        worst_I = max(worst_I, abs(g @ v - fd) / abs(fd))
        fd_g = directional_fd(lambda w: gradient(pr, w), u, v)
        hv = hessian(pr, u) @ v
        worst_dI = max(worst_dI, np.linalg.norm(hv - fd_g) / np.linalg.norm(fd_g))
    print(f"lam={lam}: worst rel I {worst_I:.2e}, I' {worst_dI:.2e}")
    assert worst_I <= 1e-6 and worst_dI <= 1e-6


# 5 ---------------------------------------------------------------------------------


@pytest.mark.criterion(5)
@pytest.mark.parametrize("lam", [0.0, 0.5])
@pytest.mark.parametrize("measure", sorted(MEASURES))
def test_constant_and_mountain_pass(acceptance_ops, cubic, measure, lam):
    pr = Problem(acceptance_ops[measure], lam, cubic)
    bound = OMEGA_LEN * (1.0 - lam) ** 2 / 4.0
    const = pr.constant(np.sqrt(1.0 - lam))
    assert residual(pr, const) <= 1e-8
    assert abs(energy(pr, const) - bound) <= 1e-8
    sol = solve_mountain_pass(pr, certificate=verify_mp_geometry(pr))
    print(f"{measure} lam={lam}: level {sol.level:.8f} bound {bound:.8f} residual {sol.residual:.1e}")
    assert sol.residual <= 1e-8
    assert 0.0 < sol.level <= bound + 1e-6


# 6 ---------------------------------------------------------------------------------


@pytest.mark.criterion(6)
def test_linking_at_first_eigenvalue(delta_ops, cubic):
    t0 = time.perf_counter()
    pr = Problem(delta_ops, 1.0, cubic)
    cert = verify_linking_geometry(pr, 1)
    assert cert.beta > 0 and all(v <= 0 for v in cert.face_max.values())
    sol = solve_linking(pr, 1, certificate=cert)
    elapsed = time.perf_counter() - t0
    u_in = sol.u[delta_ops.mesh.interior_dofs]
    print(f"linking: beta {cert.beta:.4f} level {sol.level:.6f} residual {sol.residual:.1e} "
          f"spread {np.ptp(u_in):.3f} t={elapsed:.1f}s")
    assert np.ptp(u_in) > 1e-3
    assert sol.residual <= 1e-8
    assert anorm(sol.u, delta_ops) >= 1e-3
    assert sol.level > 0
    assert elapsed <= 120.0


# 7 ---------------------------------------------------------------------------------


@pytest.mark.criterion(7)
def test_verify_paper_command(tmp_path, capsys):
    t0 = time.perf_counter()
    code = main(["verify-paper", "--out", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    out = capsys.readouterr().out
    assert code == 0, out
    assert "[FAIL]" not in out
    assert abs(appendix_bound(1) - 1.0 / 3.0) <= 1e-8
    assert elapsed <= 30.0


# 8 ---------------------------------------------------------------------------------


@pytest.mark.criterion(8)
def test_ar_and_sv12(cubic):
    rep = check_AR(cubic, s_sharp(from_atoms([(0.5, 1.0)]), 0.0), theta=4.0, r=0.0)
    assert rep.holds, rep.to_dict()
    assert rep.AR3.constants["theta"] == 4.0
    for part in (rep.AR1, rep.AR2, rep.AR3, rep.AR4, rep.AR5):
        assert part.holds
    deltas = [sv12_check(cubic, eps) for eps in (0.1, 1.0, 10.0)]
    print(f"sv12 deltas {deltas}")
    assert all(b <= a for a, b in zip(deltas, deltas[1:]))
