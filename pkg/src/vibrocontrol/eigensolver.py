"""Field-free eigenstates: 2D vibrational basis and 1D Born-Oppenheimer data.

Two layers:

* solve_bo_curves: per internuclear distance R, diagonalize the electronic
  Hamiltonian -1/2 d2/dx2 + V_e(x;R). The lowest even state plus nuclear
  repulsion gives the bound curve E_g, the lowest odd state the dissociative
  curve E_u, and <phi_g|x|phi_u> the transition dipole.

* relax_vibrational_basis: imaginary-time Crank-Nicolson/ADI relaxation of
  the 2D problem. States are seeded with the adiabatic products
  phi_g(x;R) chi_nu(R) (chi_nu from the 1D E_g curve), kept even in x, and
  Gram-Schmidt-orthogonalized against all lower states every step. One
  subspace diagonalization partway through removes the slowly-decaying
  neighbor-state contamination, after which a short polish reaches the
  residual target in a few hundred steps per state.

effective_couplings computes the second-order two-photon constants

    mu2[nu, nu'] = sum_k <nu|D|k> <k|D|nu'> / (E_k - E_nu')

with D = dipole_gu(R), nu states on the E_g curve and the k-sum running over
the box-normalized eigenstates of the E_u-curve Hamiltonian (all energies
here satisfy E_k > E_nu', so no principal value is needed). The diagonal
entries are dynamic Stark coefficients; the off-diagonal one is the
two-photon transfer coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from ._kernels import AdiEngine, project_out
from .model import (Grid2D, ModelParams, PotentialField, Wavefunction2D,
                    apply_hamiltonian, build_potential, expectation_energy)


class RelaxationError(RuntimeError):
    """Imaginary-time relaxation failed to converge; carries last energies."""

    def __init__(self, message, energies=None):
        super().__init__(message)
        self.energies = energies


class CouplingConvergenceError(RuntimeError):
    """k-grid refinement moved a coupling by more than the allowed fraction."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class VibrationalBasis:
    """Orthonormal field-free 2D eigenstates, ordered by energy."""

    states: list                      # of Wavefunction2D
    energies: np.ndarray
    residuals: np.ndarray
    grid: Grid2D
    energy_history: list = field(default_factory=list, repr=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def stack(self) -> np.ndarray:
        """(n_states, nR, nx) array view for fast projections."""
        if not hasattr(self, "_stack") or self._stack.shape[0] != self.n_states:
            self._stack = np.stack([s.amplitudes for s in self.states])
        return self._stack

    def overlap_matrix(self) -> np.ndarray:
        a = self.stack
        meas = self.grid.measure
        return np.tensordot(a.conj(), a, axes=([1, 2], [1, 2])) * meas

    def tail_probability(self, margin: float = 2.0) -> np.ndarray:
        """Probability within `margin` au of the outer grid edges, per state.

        The R_min edge is excluded: the repulsive wall there is physical and
        bound states approach it to within a vibrational amplitude, unlike the
        outer edges whose placement is a box-size choice.
        """
        g = self.grid
        R, x = g.R, g.x
        edge = (R > g.R_max - margin)[:, None] \
            | ((x < g.x_min + margin) | (x > g.x_max - margin))[None, :]
        a = self.stack
        return np.sum(np.abs(a) ** 2 * edge[None, :, :], axis=(1, 2)) * g.measure

    def r_node_counts(self) -> list:
        """Sign changes of the x-integrated amplitude along R, per state."""
        counts = []
        for s in self.states:
            prof = np.real(np.sum(s.amplitudes, axis=1)) * self.grid.dx
            prof = prof[np.abs(prof) > 1e-6 * np.max(np.abs(prof))]
            counts.append(int(np.sum(np.sign(prof[1:]) != np.sign(prof[:-1]))))
        return counts


@dataclass
class BOCurves:
    """Electronic curves and dipole on the R grid; phi arrays are (nR, nx)."""

    R_samples: np.ndarray
    E_g: np.ndarray
    E_u: np.ndarray
    phi_g: np.ndarray
    phi_u: np.ndarray
    dipole_gu: np.ndarray
    degenerate: np.ndarray      # bool flags where E_u - E_g is below resolution
    grid: Grid2D
    params: ModelParams


def solve_bo_curves(grid: Grid2D, params: ModelParams, R_samples=None) -> BOCurves:
    """Electronic eigenpairs per R via tridiagonal diagonalization."""
    R = grid.R if R_samples is None else np.asarray(R_samples, dtype=float)
    if R.min() < grid.R_min - 1e-12 or R.max() > grid.R_max + 1e-12:
        raise ValueError("R_samples outside the grid extent")
    x = grid.x
    nx = x.size
    dx = grid.dx
    off = np.full(nx - 1, -0.5 / dx**2)
    E_g = np.empty(R.size)
    E_u = np.empty(R.size)
    dip = np.empty(R.size)
    phi_g = np.empty((R.size, nx))
    phi_u = np.empty((R.size, nx))
    degenerate = np.zeros(R.size, dtype=bool)
    for i, Ri in enumerate(R):
        Ve = (-1.0 / np.sqrt((x - Ri / 2) ** 2 + params.alpha_e)
              - 1.0 / np.sqrt((x + Ri / 2) ** 2 + params.alpha_e))
        w, v = eigh_tridiagonal(1.0 / dx**2 + Ve, off, select="i", select_range=(0, 1))
        rep = 1.0 / math.sqrt(Ri**2 + params.alpha_p)
        E_g[i] = w[0] + rep
        E_u[i] = w[1] + rep
        if w[1] - w[0] < 1e-12:
            degenerate[i] = True
        g = v[:, 0]
        u = v[:, 1]
        # enforce exact parity and sign conventions
        g = 0.5 * (g + g[::-1])
        u = 0.5 * (u - u[::-1])
        g /= math.sqrt(np.sum(g**2) * dx)
        u /= math.sqrt(np.sum(u**2) * dx)
        if np.sum(g) < 0:
            g = -g
        d = float(np.sum(g * x * u) * dx)
        if d < 0:
            u = -u
            d = -d
        phi_g[i] = g
        phi_u[i] = u
        dip[i] = d
    return BOCurves(R_samples=R, E_g=E_g, E_u=E_u, phi_g=phi_g, phi_u=phi_u,
                    dipole_gu=dip, degenerate=degenerate, grid=grid, params=params)


def curve_levels(curves: BOCurves, params: ModelParams, n_states: int,
                 which: str = "g"):
    """Lowest 1D nuclear-motion eigenpairs on E_g or E_u.

    Returns (energies, states) with states column-normalized so that
    sum |psi|^2 dR = 1.
    """
    E = curves.E_g if which == "g" else curves.E_u
    dR = float(curves.R_samples[1] - curves.R_samples[0])
    n = E.size
    kin = 1.0 / (params.mu_p * dR**2)
    off = np.full(n - 1, -0.5 / (params.mu_p * dR**2))
    w, v = eigh_tridiagonal(kin + E, off, select="i", select_range=(0, n_states - 1))
    return w, v / math.sqrt(dR)


@dataclass
class EffectiveCouplings:
    """Two-photon constants mu2[nu, nu'] and the 1D level energies."""

    nu_list: list
    mu2: np.ndarray            # (len(nu_list), len(nu_list))
    energies: np.ndarray       # 1D E_g-curve levels for nu in nu_list
    refinement_shift: float    # max relative change under k-grid coarsening check

    def value(self, nu, nup) -> float:
        i = self.nu_list.index(nu)
        j = self.nu_list.index(nup)
        return float(self.mu2[i, j])

    def stark_difference(self, nu_i, nu_f) -> float:
        return self.value(nu_i, nu_i) - self.value(nu_f, nu_f)

    def two_level(self, nu_i, nu_f, hermitize: bool = True, symmetrized: bool = True):
        """TwoLevelParams for the (nu_i, nu_f) pair.

        symmetrized averages the two orderings of the off-diagonal coupling
        (they differ through the denominator E_k - E_nu'), which is the value
        that governs hermitized transfer.
        """
        from .twolevel import TwoLevelParams
        mif = self.value(nu_i, nu_f)
        mfi = self.value(nu_f, nu_i)
        coupling = 0.5 * (mif + mfi) if symmetrized else mif
        return TwoLevelParams(
            delta_E=float(self.energies[self.nu_list.index(nu_f)]
                          - self.energies[self.nu_list.index(nu_i)]),
            mu2_if=coupling,
            mu2_ii=self.value(nu_i, nu_i),
            mu2_ff=self.value(nu_f, nu_f),
            hermitize=hermitize,
        )


def effective_couplings(curves: BOCurves, params: ModelParams, nu_list,
                        omega_ref: float = 0.0,
                        refine_tol: float = 0.01) -> EffectiveCouplings:
    """Second-order couplings via the box-discretized E_u continuum.

    omega_ref is reserved for frequency-dependent denominators and ignored
    here (static limit; the carrier is ~2% of the smallest denominator).
    The k-sum is checked by re-evaluating on a half-density k-grid
    (trapezoid over every other state); disagreement beyond refine_tol
    raises CouplingConvergenceError.
    """
    nu_list = list(nu_list)
    n_need = max(nu_list) + 1
    wg, vg = curve_levels(curves, params, n_need, which="g")
    dR = float(curves.R_samples[1] - curves.R_samples[0])
    n = curves.E_g.size
    kin = 1.0 / (params.mu_p * dR**2)
    off = np.full(n - 1, -0.5 / (params.mu_p * dR**2))
    wu, vu = eigh_tridiagonal(kin + curves.E_u, off)
    psik = vu / math.sqrt(dR)
    D = curves.dipole_gu

    # mu_{nu,k} = <psi_nu | D | psi_k>, real symmetric discretization
    # (curve_levels already returns measure-normalized states)
    mu_nk = np.array([(vg[:, nu] * D) @ psik * dR for nu in nu_list])

    def total(weights=None):
        m = np.empty((len(nu_list), len(nu_list)))
        for b, nup in enumerate(nu_list):
            den = wu - wg[nup]
            if np.any(den <= 0):
                raise CouplingConvergenceError(
                    "continuum states below a bound level; two-photon denominators "
                    "must stay positive")
            w = 1.0 / den if weights is None else weights / den
            for a, _ in enumerate(nu_list):
                m[a, b] = np.sum(mu_nk[a] * mu_nk[b] * w)
        return m

    mu2 = total()
    # half-density check: keep every other k-state with doubled weight
    # (trapezoid over a coarser discretization of the same integral)
    wts = np.zeros(wu.size)
    wts[::2] = 2.0
    if wu.size % 2 == 0:
        wts[-1] = wts[-2] / 2 + 1.0 if wts[-2] else 1.0
    mu2_coarse = total(wts)
    scale = np.max(np.abs(mu2))
    shift = float(np.max(np.abs(mu2 - mu2_coarse)) / scale)
    if shift > refine_tol:
        raise CouplingConvergenceError(
            f"k-grid refinement moved couplings by {shift:.2%} > {refine_tol:.0%}",
            report={"mu2": mu2, "mu2_coarse": mu2_coarse, "relative_shift": shift})
    return EffectiveCouplings(nu_list=nu_list, mu2=mu2,
                              energies=wg[nu_list], refinement_shift=shift)


# --- 2D imaginary-time relaxation ---

def _itp_seeds(grid: Grid2D, params: ModelParams, n_states: int, curves: BOCurves):
    wg, vg = curve_levels(curves, params, n_states, which="g")
    seeds = []
    for nu in range(n_states):
        amp = (curves.phi_g * (vg[:, nu] / math.sqrt(grid.dR))[:, None]).astype(np.complex128)
        amp = 0.5 * (amp + amp[:, ::-1])  # keep the sigma_g (even-x) character
        wf = Wavefunction2D(amp, grid).normalize()
        seeds.append(wf)
    return seeds


def relax_vibrational_basis(grid: Grid2D, params: ModelParams, n_states: int = 7,
                            tol: float = 1e-10, tau: float = 0.05,
                            max_steps: int = 40000, V: PotentialField = None,
                            curves: BOCurves = None,
                            residual_tol: float = 5e-6) -> VibrationalBasis:
    """Imaginary-time relaxation of the n_states lowest even-x eigenstates.

    tol is the per-step energy change at which a state counts as converged;
    after that, polish rounds at reduced tau continue until every residual
    ||H psi - E psi|| is below residual_tol (the ADI-split fixed point
    carries an O(tau^2) bias, so the final rounds shrink tau).
    Raises RelaxationError with the last energies if the step budget runs out.
    """
    if not 0 < tau <= 0.05:
        raise ValueError("imaginary time step must be in (0, 0.05]")
    if n_states > 7:
        raise ValueError("n_states capped at 7 (higher states need a larger box)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if V is None:
        V = build_potential(grid, params)
    if curves is None:
        curves = solve_bo_curves(grid, params)

    # two buffer states soak up the slowly-decaying nu+1 contamination of the
    # topmost requested state; they are dropped from the returned basis
    n_relax = min(n_states + 2, 9)
    seeds = _itp_seeds(grid, params, n_relax, curves)
    meas = grid.measure
    check_every = 10
    steps_total = 0

    lower_stack = np.zeros((n_relax, grid.n_R, grid.n_x), np.complex128)
    engines = {}

    def relax_state(psi, n_lower, budget, tau_k, min_steps=0):
        """ITP + per-step Gram-Schmidt against lower_stack[:n_lower] until
        per-step dE < tol (and at least min_steps, so reduced-tau rounds
        actually migrate to the new fixed point). Returns
        (psi, energy, history, steps_used, converged)."""
        if tau_k not in engines:
            engines[tau_k] = AdiEngine(grid, params, V, complex(0.5 * tau_k))
        eng = engines[tau_k]
        hist = []
        e_prev = None
        steps = 0
        while steps < budget:
            for _ in range(check_every):
                eng.step(psi)
                project_out(psi, lower_stack, n_lower, meas)
            steps += check_every
            wf = Wavefunction2D(psi, grid)
            e = expectation_energy(wf, V, params)
            hist.append(e)
            if steps >= min_steps and e_prev is not None \
                    and abs(e - e_prev) / check_every < tol:
                return psi, e, hist, steps, True
            e_prev = e
        return psi, e_prev, hist, steps, False

    # subspace rotation: diagonalize H in span{psi_nu} to shed the
    # slowly-decaying neighbor-state mixing in one stroke
    def rotate(arrays):
        S = np.empty((n_relax, n_relax), dtype=complex)
        Hm = np.empty_like(S)
        hpsis = [apply_hamiltonian(Wavefunction2D(a, grid), V, params).amplitudes
                 for a in arrays]
        for i in range(n_relax):
            for j in range(n_relax):
                S[i, j] = np.vdot(arrays[i], arrays[j]) * meas
                Hm[i, j] = np.vdot(arrays[i], hpsis[j]) * meas
        w, c = eigh(Hm, S)
        new = []
        for k in range(n_relax):
            acc = np.zeros_like(arrays[0])
            for i in range(n_relax):
                acc += c[i, k] * arrays[i]
            acc /= math.sqrt(np.sum(np.abs(acc) ** 2).real * meas)
            new.append(acc)
        return new

    def measure_states(arrays):
        energies = np.empty(len(arrays))
        residuals = np.empty(len(arrays))
        for nu, a in enumerate(arrays):
            wf = Wavefunction2D(a, grid)
            e = expectation_energy(wf, V, params)
            h = apply_hamiltonian(wf, V, params).amplitudes - e * a
            energies[nu] = e
            residuals[nu] = math.sqrt(np.sum(np.abs(h) ** 2).real * meas)
        return energies, residuals

    # pass 1: rough relaxation from the adiabatic seeds
    rough_budget = 400
    arrays = []
    for nu in range(n_relax):
        psi = seeds[nu].amplitudes
        psi, e, hist, used, _ = relax_state(psi, nu, rough_budget, tau)
        steps_total += used
        lower_stack[nu] = psi
        arrays.append(psi)
    arrays = rotate(arrays)
    histories = [[] for _ in range(n_relax)]

    # pass 2: converge the energy criterion at full tau, then shrink tau
    # while the residual floor (O(tau^2) ADI fixed-point bias) is too high
    tau_schedule = [(tau, 0), (tau / 4.0, 200), (tau / 16.0, 200)]
    for tau_k, min_steps in tau_schedule:
        polished = []
        for nu in range(n_relax):
            psi = arrays[nu]
            budget = max_steps - steps_total
            if budget <= 0:
                raise RelaxationError(
                    "imaginary-time step budget exhausted",
                    energies=measure_states(arrays)[0])
            psi, e, hist, used, ok = relax_state(psi, nu, budget, tau_k,
                                                 min_steps)
            steps_total += used
            if not ok:
                raise RelaxationError(
                    f"state {nu} did not reach per-step dE < {tol} within the budget",
                    energies=measure_states(arrays)[0])
            histories[nu].extend(hist)
            lower_stack[nu] = psi
            polished.append(psi)
        arrays = rotate(polished)
        energies, residuals = measure_states(arrays)
        if residuals[:n_states].max() < residual_tol:
            break
    else:
        raise RelaxationError(
            f"residuals {residuals} above {residual_tol} after polish rounds",
            energies=energies)

    order = np.argsort(energies)[:n_states]
    return VibrationalBasis(states=[Wavefunction2D(arrays[i], grid) for i in order],
                            energies=energies[order],
                            residuals=residuals[order],
                            grid=grid,
                            energy_history=[histories[i] for i in order])
