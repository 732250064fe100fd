"""Real-time TDSE propagation with population/norm observers.

Peaceman-Rachford ADI splitting of the Crank-Nicolson step: the x half-step
is implicit in T_x + V/2 + x E(t) (the laser term is diagonal in x), the R
half-step in T_R + V/2. The field is evaluated at the mid-step time, making
the full step second-order in dt. With the absorber off the step is exactly
unitary, so norm drift beyond roundoff indicates a numerical problem and
aborts the run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from ._kernels import AdiEngine
from .model import Grid2D, GridMismatchError, ModelParams, PotentialField, Wavefunction2D
from .pulses import field_total, pulses_window


class PropagationError(RuntimeError):
    """Numerical abort (NaN/Inf or norm drift); carries the step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class PropagationConfig:
    dt: float = 0.05
    observe_stride: int = 100
    absorber_on: bool = True
    checkpoint_stride: int = 0   # 0 = no checkpoints
    norm_drift_tol: float = 1e-4

    def __post_init__(self):
        if not 0 < self.dt <= 0.05:
            raise ValueError(f"dt must be in (0, 0.05], got {self.dt}")
        if self.observe_stride < 1:
            raise ValueError("observe_stride must be >= 1")


@dataclass
class TrajectoryResult:
    times: np.ndarray
    populations: np.ndarray      # (n_obs, n_states)
    norm: np.ndarray
    absorbed_norm: np.ndarray
    final_state: Wavefunction2D
    field: np.ndarray = None     # field at observation times

    @property
    def final_populations(self) -> np.ndarray:
        return self.populations[-1]


def project_populations(psi: Wavefunction2D, basis) -> np.ndarray:
    """|<Phi_nu|psi>|^2 for every basis state."""
    if basis.grid != psi.grid:
        raise GridMismatchError("basis and wavefunction grids differ")
    amps = basis.stack  # (n_states, nR, nx)
    ov = np.tensordot(amps.conj(), psi.amplitudes, axes=([1, 2], [0, 1]))
    return np.abs(ov * psi.grid.measure) ** 2


def propagate(psi0: Wavefunction2D, pulses, grid: Grid2D, params: ModelParams,
              basis, cfg: PropagationConfig, V: PotentialField = None,
              t_extra: float = 0.0, checkpoint_sink=None,
              t_window=None, step_range=None) -> TrajectoryResult:
    """Advance psi0 across the union time window of `pulses`.

    Observers run every observe_stride steps: populations |<Phi_nu|psi>|^2,
    norm, and cumulative absorbed norm. t_extra appends field-free time after
    the last pulse. checkpoint_sink(step, psi) is called every
    checkpoint_stride steps when configured. t_window overrides the
    propagation interval; step_range=(k0, k1) runs only those global steps of
    the window's time grid, so a run split at a checkpoint reproduces the
    uninterrupted run bit for bit.
    """
    if basis is not None and basis.grid != psi0.grid:
        raise GridMismatchError("basis and initial state grids differ")
    if V is None:
        from .model import build_potential
        V = build_potential(grid, params)

    if t_window is not None:
        t0, t1 = t_window
    else:
        t0, t1 = pulses_window(pulses) if pulses else (0.0, 0.0)
    t1 += t_extra
    nsteps = max(1, int(np.ceil((t1 - t0) / cfg.dt - 1e-12)))
    k0, k1 = step_range if step_range is not None else (0, nsteps)
    if not 0 <= k0 < k1 <= nsteps:
        raise ValueError(f"step_range {step_range} outside [0, {nsteps}]")
    dt = cfg.dt
    # mid-step field values on the global time grid
    tmid = t0 + dt * (np.arange(nsteps) + 0.5)
    efields = field_total(pulses, tmid) if pulses else np.zeros(nsteps)

    psi = np.ascontiguousarray(psi0.amplitudes, dtype=np.complex128).copy()
    engine = AdiEngine(grid, params, V, 0.5j * dt)
    mask = grid.absorber_mask() if cfg.absorber_on else None
    meas = grid.measure

    def observe(k, absorbed):
        wf = Wavefunction2D(psi, grid)
        pops = project_populations(wf, basis) if basis is not None else np.zeros(0)
        nrm = float(np.sum(np.abs(psi) ** 2) * meas)
        times_.append(t0 + k * dt)
        pop_.append(pops)
        norm_.append(nrm)
        abs_.append(absorbed)
        fld_.append(field_total(pulses, t0 + k * dt) if pulses else 0.0)
        return nrm

    times_, pop_, norm_, abs_, fld_ = [], [], [], [], []
    absorbed = 0.0
    observe(k0, absorbed)
    for k in range(k0, k1):
        engine.step(psi, efields[k])
        if mask is not None:
            before = np.sum(np.abs(psi) ** 2) * meas
            psi *= mask
            absorbed += float(before - np.sum(np.abs(psi) ** 2) * meas)
        step = k + 1
        if cfg.checkpoint_stride and checkpoint_sink is not None \
                and step % cfg.checkpoint_stride == 0:
            checkpoint_sink(step, Wavefunction2D(psi, grid))
        if step % cfg.observe_stride == 0 or step == k1:
            if not np.isfinite(psi[::max(1, psi.shape[0] // 32), ::max(1, psi.shape[1] // 32)]).all():
                raise PropagationError(f"non-finite amplitudes at step {step}", step=step)
            nrm = observe(step, absorbed)
            if not cfg.absorber_on and abs(nrm - 1.0) > cfg.norm_drift_tol:
                raise PropagationError(
                    f"norm drift {nrm - 1.0:+.3e} exceeds {cfg.norm_drift_tol} "
                    f"at step {step}", step=step)

    return TrajectoryResult(
        times=np.asarray(times_),
        populations=np.asarray(pop_),
        norm=np.asarray(norm_),
        absorbed_norm=np.asarray(abs_),
        final_state=Wavefunction2D(psi, grid),
        field=np.asarray(fld_),
    )


def free_phase_evolve(psi: Wavefunction2D, basis, delay: float) -> Wavefunction2D:
    """Field-free evolution inside the bound-state span: exact phases
    e^{-i E_nu delay} applied to the basis projections; the (tiny) residual
    outside the span is kept unchanged."""
    amps = basis.stack
    coeff = np.tensordot(amps.conj(), psi.amplitudes, axes=([1, 2], [0, 1])) * psi.grid.measure
    rot = coeff * np.exp(-1j * basis.energies * delay)
    delta = np.tensordot(rot - coeff, amps, axes=(0, 0))
    return Wavefunction2D(psi.amplitudes + delta, psi.grid)


# --- dense Crank-Nicolson reference (tiny grids only) ---

def propagate_dense_reference(psi0: Wavefunction2D, pulses, grid: Grid2D,
                              params: ModelParams, V: PotentialField,
                              dt: float, nsteps: int, t0: float = 0.0) -> Wavefunction2D:
    """Unsplit 2D Crank-Nicolson via sparse LU; O((nR*nx)^2) memory pressure,
    intended for grids up to ~64x64 as an ADI cross-check."""
    nR, nx = grid.shape
    n = nR * nx
    if n > 64 * 64 * 4:
        raise ValueError("dense reference restricted to tiny grids")
    cx = 0.5 / grid.dx**2
    cR = 0.5 / (params.mu_p * grid.dR**2)
    ex = np.ones(nx)
    eR = np.ones(nR)
    Tx = scipy.sparse.diags([ex[:-1] * -cx, ex * 2 * cx, ex[:-1] * -cx], [-1, 0, 1])
    TR = scipy.sparse.diags([eR[:-1] * -cR, eR * 2 * cR, eR[:-1] * -cR], [-1, 0, 1])
    Ix = scipy.sparse.identity(nx)
    IR = scipy.sparse.identity(nR)
    H0 = scipy.sparse.kron(IR, Tx) + scipy.sparse.kron(TR, Ix) \
        + scipy.sparse.diags(V.values.ravel())
    Xdiag = scipy.sparse.diags(np.tile(grid.x, nR))
    psi = psi0.amplitudes.ravel().astype(np.complex128)
    I = scipy.sparse.identity(n, format="csc")
    cached = {}
    for k in range(nsteps):
        ef = field_total(pulses, t0 + (k + 0.5) * dt) if pulses else 0.0
        key = round(float(ef), 15)
        if key not in cached:
            H = (H0 + ef * Xdiag).tocsc()
            A = (I + 0.5j * dt * H).tocsc()
            B = (I - 0.5j * dt * H).tocsc()
            cached = {key: (scipy.sparse.linalg.splu(A), B)}  # keep last only
        lu, B = cached[key]
        psi = lu.solve(B @ psi)
    return Wavefunction2D(psi.reshape(grid.shape), grid)
