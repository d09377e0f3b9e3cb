"""Unitary dynamics of XXZ chains by spectral decomposition.

Fidelities are probabilities (squared moduli of amplitudes). Time is in
units of inverse energy (hbar = 1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationWarning, ParameterError
from .spinchain import (
    GateState,
    SectorBasis,
    SpectralDecomposition,
    XxzChain,
    build_hamiltonian,
    diagonalize,
    enumerate_sector_basis,
    gate_block_eigens,
    nonresonant_gate_state,
    port_energy,
)

NORM_TOL = 1e-12


@dataclass(frozen=True)
class QuantumState:
    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (len(self.basis),):
            raise ParameterError(
                f"amplitude vector of shape {amps.shape} does not match basis size {len(self.basis)}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1) > NORM_TOL:
            raise ParameterError(f"state norm {norm!r} deviates from 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def product(cls, basis: SectorBasis, spins: int | str) -> "QuantumState":
        amps = np.zeros(len(basis), dtype=complex)
        amps[basis.index(spins)] = 1
        return cls(basis, amps)

    @classmethod
    def superposition(cls, basis: SectorBasis, terms: dict) -> "QuantumState":
        """Normalized sum of ``{spins: amplitude}`` product states."""
        amps = np.zeros(len(basis), dtype=complex)
        for spins, a in terms.items():
            amps[basis.index(spins)] += a
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ParameterError("superposition has zero norm")
        return cls(basis, amps / norm)

    def overlap(self, other: "QuantumState") -> complex:
        if other.basis != self.basis:
            raise ParameterError("states live in different bases")
        return complex(np.vdot(other.amplitudes, self.amplitudes))

    def probability(self, spins: int | str) -> float:
        return float(abs(self.amplitudes[self.basis.index(spins)]) ** 2)

    def site_populations(self) -> np.ndarray:
        """Probability that each site (1..N, as index 0..N-1) carries spin up."""
        return np.abs(self.amplitudes) ** 2 @ self.basis.occupations()


def _check_pair(state: QuantumState, spectral: SpectralDecomposition) -> None:
    if len(spectral) != len(state.basis):
        raise ParameterError("state and spectral decomposition have different dimensions")
    if spectral.basis is not None and spectral.basis != state.basis:
        raise ParameterError("state and spectral decomposition use different bases")


def propagate(spectral: SpectralDecomposition, amplitudes: np.ndarray, times) -> np.ndarray:
    """Amplitudes ``exp(-iHt) psi`` for every ``t`` in ``times``; shape (len(times), dim)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    V = spectral.eigenvectors
    coeffs = V.T @ amplitudes
    phases = np.exp(-1j * np.outer(times, spectral.eigenvalues))
    return (phases * coeffs) @ V.T


def evolve(state: QuantumState, spectral: SpectralDecomposition, t: float) -> QuantumState:
    _check_pair(state, spectral)
    return QuantumState(state.basis, propagate(spectral, state.amplitudes, t)[0])


def expectation(state: QuantumState, matrix: np.ndarray) -> float:
    a = state.amplitudes
    return float(np.real(np.vdot(a, matrix @ a)))


def _scalar_or_array(values: np.ndarray, t):
    return float(values[0]) if np.ndim(t) == 0 else values


def transfer_fidelity(chain: XxzChain, t):
    """Probability that an excitation on site 1 is found on site N after time ``t``."""
    basis = enumerate_sector_basis(chain.n_sites, 1)
    spectral = diagonalize(build_hamiltonian(chain, basis), basis)
    start = QuantumState.product(basis, 1)
    out = propagate(spectral, start.amplitudes, t)[:, basis.index(1 << (chain.n_sites - 1))]
    return _scalar_or_array(np.abs(out) ** 2, t)


def _resolve_gate_state(chain: XxzChain, gate_state: GateState | str | None) -> GateState:
    if gate_state is None:
        return nonresonant_gate_state(chain)
    if isinstance(gate_state, str):
        return gate_block_eigens(chain)[gate_state]
    return gate_state


def control_state(chain: XxzChain, gate_state: GateState | str | None = None) -> QuantumState:
    """Two-excitation state |up, G, dn>: target on the input port, control in gate state G."""
    gate = _resolve_gate_state(chain, gate_state)
    n = chain.n_sites
    if len(gate.vector) != n - 2:
        raise ParameterError("gate vector does not match the chain's gate size")
    basis = enumerate_sector_basis(n, 2)
    terms = {1 | (1 << (k + 1)): a for k, a in enumerate(gate.vector)}
    return QuantumState.superposition(basis, terms)


def blockade_fidelity(chain: XxzChain, gate_state: GateState | str | None, t):
    """Survival probability of |up, G, dn> after time ``t`` (exact two-excitation sector).

    Warns with :class:`ConfigurationWarning` if G is the gate state closest
    to resonance with the ports, where no blockade is expected.
    """
    gate = _resolve_gate_state(chain, gate_state)
    eig = gate_block_eigens(chain)
    e_port = port_energy(chain)
    if abs(gate.energy - e_port) <= np.min(np.abs(eig.energies - e_port)):
        warnings.warn(
            f"control state {gate.label} is the resonant gate level; blockade not expected",
            ConfigurationWarning,
            stacklevel=2,
        )
    psi = control_state(chain, gate)
    spectral = diagonalize(build_hamiltonian(chain, psi.basis), psi.basis)
    out = propagate(spectral, psi.amplitudes, t)
    survival = np.abs(out @ psi.amplitudes.conj()) ** 2
    return _scalar_or_array(survival, t)


def odd_multiple_residuals(gaps: np.ndarray, t: float) -> np.ndarray:
    x = np.asarray(gaps) * t / math.pi
    return np.abs(x - (2 * np.floor(x / 2) + 1))


def perfect_transfer_conditions(spectral: SpectralDecomposition, t: float) -> np.ndarray:
    """Distance of each ``gap * t / pi`` to the nearest odd integer."""
    return odd_multiple_residuals(np.diff(spectral.eigenvalues), t)


def resonant_triplet(eigenvalues: np.ndarray, rtol: float = 1e-12) -> tuple[int, int, int]:
    """Three consecutive levels with the most equal spacing, lowest on ties."""
    w = np.asarray(eigenvalues)
    if len(w) < 3:
        raise ParameterError("need at least three levels")
    gaps = np.diff(w)
    spread = np.abs(np.diff(gaps))
    best = spread.min()
    tie = rtol * max(1.0, float(np.abs(w).max()))
    i = int(np.flatnonzero(spread <= best + tie)[0])
    return i, i + 1, i + 2


@dataclass(frozen=True)
class TransferReport:
    t_out: float
    fidelity: float
    level_gaps: np.ndarray
    resonant_triplet: tuple[int, int, int]


def transfer_report(chain: XxzChain, t_out: float | None = None) -> TransferReport:
    """Transfer summary; ``t_out`` defaults to pi over the mean gap of the resonant triplet."""
    basis = enumerate_sector_basis(chain.n_sites, 1)
    spectral = diagonalize(build_hamiltonian(chain, basis), basis)
    triplet = resonant_triplet(spectral.eigenvalues)
    gaps = np.diff(spectral.eigenvalues)
    if t_out is None:
        mean_gap = 0.5 * (spectral.eigenvalues[triplet[2]] - spectral.eigenvalues[triplet[0]])
        t_out = math.pi / mean_gap
    if not t_out > 0:
        raise ParameterError("t_out must be positive")
    return TransferReport(float(t_out), transfer_fidelity(chain, t_out), gaps, triplet)


@dataclass(frozen=True)
class GateSuperposition:
    """Evolved open/closed gate branches and their target-state probabilities.

    ``open_branch`` (one excitation) and ``closed_branch`` (two excitations)
    each carry amplitude 1/sqrt(2) in the full state.
    """

    open_branch: QuantumState
    closed_branch: QuantumState
    p_transferred: float
    p_blocked: float

    @property
    def branch_probabilities(self) -> tuple[float, float]:
        return self.p_transferred, self.p_blocked


def gate_superposition_evolution(
    chain: XxzChain, t: float, control: GateState | str | None = None
) -> GateSuperposition:
    """Evolve |up>_in (|0>_gate + |1>_gate)/sqrt2 |dn>_out for time ``t``.

    The branches sit in different magnetization sectors and evolve
    independently. Reported probabilities are the squared overlaps of the
    full state with |dn 0 up> and |up 1 dn>.
    """
    if chain.n_sites != 4:
        raise ParameterError("gate superposition evolution is defined for N = 4")
    one = enumerate_sector_basis(4, 1)
    open_start = QuantumState.product(one, 1)
    closed_start = control_state(chain, control)
    open_t = evolve(open_start, diagonalize(build_hamiltonian(chain, one), one), t)
    two = closed_start.basis
    closed_t = evolve(closed_start, diagonalize(build_hamiltonian(chain, two), two), t)
    p_transferred = 0.5 * open_t.probability(0b1000)
    p_blocked = 0.5 * abs(closed_t.overlap(closed_start)) ** 2
    return GateSuperposition(open_t, closed_t, p_transferred, p_blocked)


def gate_level_splitting(chain: XxzChain, label: str | None = None) -> float:
    """Energy of gate state ``label`` minus that of the empty gate |dn dn>.

    Both energies are diagonal entries of the isolated gate Hamiltonian in
    its prediagonalized basis. ``label`` defaults to the control-spin
    (non-resonant) state.
    """
    if chain.n_sites != 4:
        raise ParameterError("gate level splitting is defined for N = 4")
    gate = _resolve_gate_state(chain, label)
    inner = XxzChain(2, chain.couplings[1:2], chain.fields[1:3], chain.delta)
    e_empty = build_hamiltonian(inner, enumerate_sector_basis(2, 0))[0, 0]
    h1 = build_hamiltonian(inner, enumerate_sector_basis(2, 1))
    return float(gate.vector @ h1 @ gate.vector - e_empty)
