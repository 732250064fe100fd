"""Fast numerical invariant suite backing the `validate` CLI subcommand.

Each check returns (name, measured, threshold, passed). The full budget
mirrors the acceptance property suite; the quick budget shrinks step counts
to exercise the same code paths in seconds.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from ._kernels import AdiEngine
from .eigensolver import relax_vibrational_basis, solve_bo_curves
from .model import (Grid2D, ModelParams, Wavefunction2D, apply_hamiltonian,
                    build_potential)
from .propagator import propagate_dense_reference
from .pulses import PulseSpec, field_at, intensity_to_field


def _tiny_grid() -> Grid2D:
    return Grid2D(R_min=0.3, R_max=6.0, dR=0.09, x_min=-6.0, x_max=6.0, dx=0.2,
                  absorber_width_R=0.5, absorber_width_x=0.5)


def _random_state(grid, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    return Wavefunction2D(a, grid).normalize()


def run_validation(grid: Grid2D = None, budget: str = "full"):
    """Returns a list of check dicts; all thresholds are fixed here."""
    grid = grid or Grid2D.smoke()
    params = ModelParams()
    V = build_potential(grid, params)
    checks = []

    def record(name, measured, threshold, larger_is_fail=True):
        ok = measured < threshold if larger_is_fail else measured > threshold
        checks.append({"name": name, "measured": float(measured),
                       "threshold": float(threshold), "passed": bool(ok)})

    # hermiticity and parity of the discretized Hamiltonian
    psi = _random_state(grid, 1)
    phi = _random_state(grid, 2)
    for ef, tag in ((0.0, "field_off"), (0.01, "field_on")):
        lhs = phi.inner(apply_hamiltonian(psi, V, params, ef))
        rhs = np.conj(psi.inner(apply_hamiltonian(phi, V, params, ef)))
        record(f"hermiticity_{tag}", abs(lhs - rhs), 1e-10)
    hp = apply_hamiltonian(psi.flip_x(), V, params).amplitudes
    ph = apply_hamiltonian(psi, V, params).flip_x().amplitudes
    record("parity_commutator", float(np.sqrt(np.sum(np.abs(hp - ph) ** 2)
                                              * grid.measure)), 1e-12)
    record("potential_symmetry",
           float(np.max(np.abs(V.values - V.values[:, ::-1]))), 1e-14)

    # relaxation, stationarity, norm conservation
    curves = solve_bo_curves(grid, params)
    basis = relax_vibrational_basis(grid, params, n_states=2, V=V, curves=curves)
    record("ground_state_residual", float(basis.residuals[0]), 1e-5)

    nsteps = 2000 if budget == "quick" else 20000
    eng = AdiEngine(grid, params, V, 0.5j * 0.05)
    psi = basis.states[0].amplitudes.copy()
    worst = 0.0
    for k in range(nsteps):
        eng.step(psi)
        if (k + 1) % 500 == 0:
            worst = max(worst, abs(np.sum(np.abs(psi) ** 2) * grid.measure - 1))
    record(f"norm_conservation_{nsteps}_steps", worst, 1e-8)
    ov = complex(np.vdot(basis.states[0].amplitudes, psi) * grid.measure)
    record("stationary_population_drift", abs(abs(ov) ** 2 - 1.0), 1e-7)
    t_end = nsteps * 0.05
    dphase = (cmath.phase(ov) + basis.energies[0] * t_end + math.pi) % (2 * math.pi) - math.pi
    record("stationary_phase_deviation_rad", abs(dphase), 0.05 * t_end * 1e-3)

    # ADI vs dense Crank-Nicolson on the tiny grid (machinery + convergence)
    tg = _tiny_grid()
    tV = build_potential(tg, params)
    tcurves = solve_bo_curves(tg, params)
    tbasis = relax_vibrational_basis(tg, params, n_states=1, V=tV, curves=tcurves)
    pulse = PulseSpec(E0=intensity_to_field(1e13), omega0=0.009, n_cycles=1)
    dt_ref = 0.00625
    teng = AdiEngine(tg, params, tV, 0.5j * dt_ref)
    pa = tbasis.states[0].amplitudes.copy()
    for k in range(100):
        ef = field_at(pulse, (k + 0.5) * dt_ref)
        teng.step(pa, ef)
    ref = propagate_dense_reference(tbasis.states[0], [pulse], tg, params, tV,
                                    dt=dt_ref, nsteps=100)
    record("adi_vs_dense_cn_100_steps",
           float(np.sqrt(np.sum(np.abs(pa - ref.amplitudes) ** 2) * tg.measure)),
           1e-6)

    # checkpoint round trip
    from . import io as vio
    import tempfile, os
    with tempfile.TemporaryDirectory() as td:
        path = os.path.join(td, "wf.ckpt")
        vio.write_checkpoint(path, basis.states[0])
        back = vio.read_checkpoint(path, grid)
        identical = np.array_equal(back.amplitudes, basis.states[0].amplitudes)
        record("checkpoint_bit_identity", 0.0 if identical else 1.0, 0.5)
    return checks
