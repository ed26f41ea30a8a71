import numpy as np
import pytest

from pinto.problems import advection_exact, burgers_fd_solve, cole_hopf_solution, get_problem, grf_ic, lid_cavity_solve
from pinto.problems.burgers_fd import InstabilityError, cole_hopf_study, periodic_interp
from pinto.problems.cavity import ConvergenceError
from pinto.problems.conditions import sinusoidal_ic


def test_zero_initial_condition_stays_zero():
    f = burgers_fd_solve(np.zeros(64), 0.01, 1.0, 64, 10)
    assert not np.any(f.values["u"])


@pytest.mark.parametrize("nu", [0.01, 0.05])
def test_cole_hopf_convergence_rate(nu):
    errs, rates = cole_hopf_study(nu=nu)
    assert np.all(rates >= 1.8), (errs, rates)


def test_inviscid_mass_conservation():
    u0 = grf_ic(0, 0, 256).on_grid() * 0.2
    f = burgers_fd_solve(u0, 0.0, 0.2, 256, 4, track_mass=True)
    drift = np.abs(np.diff(f.meta["mass"]))
    assert drift.max() < 1e-10


def test_pure_advection_mode_agrees_with_exact_transport():
    u0 = sinusoidal_ic(0, 0, N=2, n_max=2)
    errs = []
    for nx in (128, 256, 512):
        f = burgers_fd_solve(u0, 0.0, 1.0, nx, 1, mode="advection", beta=0.1)
        errs.append(np.max(np.abs(f.values["u"][:, -1] - advection_exact(f.axes["x"], 1.0, u0, 0.1))))
    assert errs[0] < 0.05 and errs[1] < errs[0] and errs[2] < errs[1]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 0.8)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_instability_is_reported():
    with pytest.raises(InstabilityError, match="dt"):
        burgers_fd_solve(np.sin(2 * np.pi * np.arange(64) / 64) * 5, 0.0, 5.0, 64, 1, cfl=50.0)


def test_periodic_interpolation_wraps():
    f = burgers_fd_solve(lambda x: np.sin(2 * np.pi * x), 0.0, 0.1, 64, 1)
    assert periodic_interp(f, 1.0, 0) == pytest.approx(periodic_interp(f, 0.0, 0), abs=1e-15)


def test_burgers_reference_near_cole_hopf():
    xs = np.linspace(0, 1, 64, endpoint=False)
    f = burgers_fd_solve(lambda x: cole_hopf_solution(x, 0.0, 0.05), 0.05, 0.5, 512, 5)
    assert np.max(np.abs(periodic_interp(f, xs, 5) - cole_hopf_solution(xs, 0.5, 0.05))) < 1e-3


def test_cavity_zero_lid_gives_zero_field():
    f = lid_cavity_solve(0.0, 50.0, 16)
    assert not np.any(f.values["u"]) and not np.any(f.values["v"])


def test_cavity_is_nonlinear():
    a = lid_cavity_solve(1.0, 50.0, 32)
    b = lid_cavity_solve(2.0, 50.0, 32)
    assert np.max(np.abs(b.values["u"] - 2 * a.values["u"])) > 1e-3


def test_cavity_boundary_values():
    f = lid_cavity_solve(1.5, 50.0, 32)
    u = f.values["u"]
    np.testing.assert_array_equal(u[1:-1, -1], 1.5)
    # corner nodes carry the lid value; the rest of the walls are no-slip
    assert not np.any(u[0, :-1]) and not np.any(u[-1, :-1]) and not np.any(u[:, 0])


def test_cavity_nonconvergence_is_reported():
    with pytest.raises(ConvergenceError):
        lid_cavity_solve(1.0, 50.0, 16, max_iter=1, tol=1e-30)


def test_cavity_interior_self_convergence():
    # away from the singular lid corners the two grids agree closely
    coarse = lid_cavity_solve(1.0, 50.0, 64)
    fine = lid_cavity_solve(1.0, 50.0, 128)
    du = np.abs(fine.values["u"][::2, ::2] - coarse.values["u"])
    x = coarse.axes["x"]
    X, Y = np.meshgrid(x, x, indexing="ij")
    far = np.minimum(np.hypot(X, Y - 1), np.hypot(X - 1, Y - 1)) > 0.1
    assert du[far].max() < 0.02


def test_lid_reference_interpolates_oracle():
    pb = get_problem("lid", oracle_n=32)
    cond = pb.family().seen()[0]
    ref = pb.reference(cond, {"x": np.linspace(0, 1, 33), "y": np.linspace(0, 1, 33)})
    direct = lid_cavity_solve(1.0, 50.0, 32)
    np.testing.assert_allclose(ref.values["u"], direct.values["u"], atol=1e-12)
