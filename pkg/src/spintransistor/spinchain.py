"""XXZ spin-chain Hamiltonians in fixed-magnetization sectors.

Conventions
-----------
* Site ``j`` (1-based) is bit ``j - 1`` of a configuration integer; a set
  bit is spin up and ``sigma_z |up> = +|up>``.
* Sector bases are ordered by ascending configuration integer.
* The Hamiltonian is

      H = sum_j h_j sz_j - 1/2 sum_j J_j (sx_j sx_{j+1} + sy_j sy_{j+1}
                                          + Delta sz_j sz_{j+1})

  so a flip-flop between neighbours ``j, j+1`` has matrix element ``-J_j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

from .errors import ParameterError, SingularityError

MAX_SITES = 20
MAX_DENSE_DIM = 5000

_UP_CHARS = "u↑1+"
_DOWN_CHARS = "d↓0-"


@dataclass(frozen=True)
class SectorBasis:
    """Configurations of ``n_sites`` spins with exactly ``n_up`` up spins."""

    n_sites: int
    n_up: int
    configs: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.configs)

    @cached_property
    def _index(self) -> dict[int, int]:
        return {c: i for i, c in enumerate(self.configs)}

    def index(self, state: int | str) -> int:
        """Position of a configuration, given as an integer or a spin string."""
        config = config_from_string(state) if isinstance(state, str) else state
        try:
            return self._index[config]
        except KeyError:
            raise ParameterError(
                f"configuration {state!r} is not in the (N={self.n_sites}, "
                f"n_up={self.n_up}) sector"
            ) from None

    def __contains__(self, config: int) -> bool:
        return config in self._index

    def label(self, i: int) -> str:
        return config_to_string(self.configs[i], self.n_sites)

    def occupations(self) -> np.ndarray:
        """Matrix ``occ[k, j]`` = 1 if site ``j + 1`` is up in config ``k``."""
        cfg = np.asarray(self.configs, dtype=np.int64)[:, None]
        return ((cfg >> np.arange(self.n_sites)) & 1).astype(float)


def config_from_string(spins: str) -> int:
    """Parse ``"↑↓↓↓"`` (or ``"uddd"``) into a configuration integer, site 1 first."""
    config = 0
    for j, ch in enumerate(spins):
        if ch in _UP_CHARS:
            config |= 1 << j
        elif ch not in _DOWN_CHARS:
            raise ParameterError(f"bad spin character {ch!r} in {spins!r}")
    return config


def config_to_string(config: int, n_sites: int) -> str:
    return "".join("↑" if config >> j & 1 else "↓" for j in range(n_sites))


def enumerate_sector_basis(n_sites: int, n_up: int) -> SectorBasis:
    if not 1 <= n_sites <= MAX_SITES:
        raise ParameterError(f"n_sites must be in [1, {MAX_SITES}], got {n_sites}")
    if not 0 <= n_up <= n_sites:
        raise ParameterError(f"n_up must be in [0, {n_sites}], got {n_up}")
    configs = sorted(sum(1 << j for j in c) for c in combinations(range(n_sites), n_up))
    return SectorBasis(n_sites, n_up, tuple(configs))


@dataclass(frozen=True)
class XxzChain:
    """Parameters of an open XXZ chain.

    ``couplings`` holds J_1..J_{N-1} and ``fields`` holds h_1..h_N. With
    ``symmetric=True`` the mirror symmetry J_j = J_{N-j}, h_j = h_{N+1-j}
    and zero port fields are enforced.
    """

    n_sites: int
    couplings: tuple[float, ...]
    fields: tuple[float, ...]
    delta: float
    symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple(float(j) for j in self.couplings))
        object.__setattr__(self, "fields", tuple(float(h) for h in self.fields))
        object.__setattr__(self, "delta", float(self.delta))
        n = self.n_sites
        if not 2 <= n <= MAX_SITES:
            raise ParameterError(f"n_sites must be in [2, {MAX_SITES}], got {n}")
        if len(self.couplings) != n - 1:
            raise ParameterError(f"need {n - 1} couplings, got {len(self.couplings)}")
        if len(self.fields) != n:
            raise ParameterError(f"need {n} fields, got {len(self.fields)}")
        values = self.couplings + self.fields + (self.delta,)
        if not all(math.isfinite(v) for v in values):
            raise ParameterError("chain parameters must be finite")
        if self.symmetric:
            if self.couplings != self.couplings[::-1]:
                raise ParameterError("symmetric chain requires J_j = J_{N-j}")
            if self.fields != self.fields[::-1]:
                raise ParameterError("symmetric chain requires h_j = h_{N+1-j}")
            if self.fields[0] != 0.0:
                raise ParameterError("symmetric chain requires zero port fields h_1 = h_N = 0")

    @classmethod
    def symmetric_chain(
        cls,
        n_sites: int,
        j1: float,
        j2: float | None = None,
        delta: float = 0.0,
        h: float = 0.0,
        h_prime: float | None = None,
    ) -> "XxzChain":
        """Mirror-symmetric transistor chain: weak port bonds ``j1``, gate bonds ``j2``.

        Gate fields are ``h`` on every inner site, except that ``h_prime``
        (when given) replaces the field on the two outermost gate sites,
        e.g. N=5 gets (0, h', h, h', 0).
        """
        if n_sites < 3:
            raise ParameterError("a transistor chain needs at least 3 sites")
        if n_sites == 3:
            if j2 is not None and j2 != j1:
                raise ParameterError("a symmetric N=3 chain has J_1 = J_2")
            couplings = [j1, j1]
        else:
            j2 = j1 if j2 is None else j2
            couplings = [j1] + [j2] * (n_sites - 3) + [j1]
        gate = [h] * (n_sites - 2)
        if h_prime is not None and n_sites >= 4:
            gate[0] = gate[-1] = h_prime
        return cls(n_sites, tuple(couplings), (0.0, *gate, 0.0), delta, symmetric=True)

    def with_gate_field(self, h: float, h_prime: float | None = None) -> "XxzChain":
        gate = [h] * (self.n_sites - 2)
        if h_prime is not None and self.n_sites >= 4:
            gate[0] = gate[-1] = h_prime
        return replace(self, fields=(self.fields[0], *gate, self.fields[-1]))

    def scaled(self, factor: float) -> "XxzChain":
        return replace(
            self,
            couplings=tuple(factor * j for j in self.couplings),
            fields=tuple(factor * h for h in self.fields),
        )


def _matrix_elements(
    n_sites: int,
    couplings: Sequence,
    fields: Sequence,
    delta,
    basis: SectorBasis,
    exchange_sign: int = 1,
) -> Iterator[tuple[int, int, object]]:
    """Yield ``(row, col, value)`` entries; works for floats and sympy symbols."""
    for row, config in enumerate(basis.configs):
        s = [1 if config >> j & 1 else -1 for j in range(n_sites)]
        terms = [fields[j] * s[j] for j in range(n_sites)]
        terms += [-couplings[j] * delta * s[j] * s[j + 1] / 2 for j in range(n_sites - 1)]
        try:
            # correctly rounded, so mirror-image configs get identical entries
            diag = math.fsum(terms)
        except TypeError:
            diag = sum(terms)
        yield row, row, diag
        for j in range(n_sites - 1):
            if s[j] != s[j + 1]:
                partner = config ^ (0b11 << j)
                yield row, basis.index(partner), -exchange_sign * couplings[j]


def _assemble(chain: XxzChain, basis: SectorBasis, exchange_sign: int) -> np.ndarray:
    if basis.n_sites != chain.n_sites:
        raise ParameterError(
            f"basis has {basis.n_sites} sites but chain has {chain.n_sites}"
        )
    dim = len(basis)
    if dim > MAX_DENSE_DIM:
        raise ParameterError(f"sector dimension {dim} exceeds dense limit {MAX_DENSE_DIM}")
    H = np.zeros((dim, dim))
    for i, j, value in _matrix_elements(
        chain.n_sites, chain.couplings, chain.fields, chain.delta, basis, exchange_sign
    ):
        H[i, j] += value
    return H


def build_hamiltonian(chain: XxzChain, basis: SectorBasis) -> np.ndarray:
    """Dense real-symmetric Hamiltonian of ``chain`` restricted to ``basis``."""
    return _assemble(chain, basis, exchange_sign=1)


def gauge_transformed_hamiltonian(chain: XxzChain, basis: SectorBasis) -> np.ndarray:
    """Hamiltonian with sx sx + sy sy terms sign-flipped.

    This is the form obtained when the strong-coupling wavefunction is built
    from ``|Psi_0|``; it is unitarily equivalent to :func:`build_hamiltonian`
    via a pi rotation about z of every other spin.
    """
    return _assemble(chain, basis, exchange_sign=-1)


def sublattice_rotation(basis: SectorBasis) -> np.ndarray:
    """Diagonal unitary mapping :func:`build_hamiltonian` onto its gauge partner.

    Rotating odd sites by pi about z contributes (-1)^(up spins on odd sites).
    """
    odd_mask = sum(1 << j for j in range(0, basis.n_sites, 2))
    return np.array([(-1.0) ** bin(c & odd_mask).count("1") for c in basis.configs])


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    basis: SectorBasis | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def diagonalize(matrix: np.ndarray, basis: SectorBasis | None = None) -> SpectralDecomposition:
    """Full eigendecomposition of a real symmetric matrix.

    Eigenvalues ascend; each eigenvector is flipped so that its first
    component that is not numerically zero is positive.
    """
    H = np.asarray(matrix, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {H.shape}")
    if basis is not None and len(basis) != H.shape[0]:
        raise ParameterError("matrix dimension does not match basis size")
    w, V = np.linalg.eigh(H)
    for k in range(V.shape[1]):
        col = V[:, k]
        cutoff = 1e-10 * np.abs(col).max()
        first = np.flatnonzero(np.abs(col) > cutoff)[0]
        if col[first] < 0:
            V[:, k] = -col
    w.setflags(write=False)
    V.setflags(write=False)
    return SpectralDecomposition(w, V, basis)


def sector_spectrum(chain: XxzChain, n_up: int) -> SpectralDecomposition:
    basis = enumerate_sector_basis(chain.n_sites, n_up)
    return diagonalize(build_hamiltonian(chain, basis), basis)


def port_energy(chain: XxzChain) -> float:
    """Diagonal energy of the input-port state with one excitation on site 1."""
    basis = enumerate_sector_basis(chain.n_sites, 1)
    return float(build_hamiltonian(chain, basis)[0, 0])


# --- gate prediagonalization -------------------------------------------------


@dataclass(frozen=True)
class GateState:
    label: str
    energy: float
    vector: np.ndarray


@dataclass(frozen=True)
class GateEigens:
    """Single-excitation eigenstates of the isolated gate (sites 2..N-1).

    ``vectors[:, k]`` holds the amplitudes of eigenstate ``labels[k]`` on
    the gate sites in site order; energies ascend.
    """

    labels: tuple[str, ...]
    energies: np.ndarray
    vectors: np.ndarray

    def __getitem__(self, label: str) -> GateState:
        try:
            k = self.labels.index(label)
        except ValueError:
            raise ParameterError(f"unknown gate state {label!r}; have {self.labels}") from None
        return GateState(label, float(self.energies[k]), self.vectors[:, k])

    def __iter__(self) -> Iterator[GateState]:
        return (self[label] for label in self.labels)


def gate_block_eigens(chain: XxzChain) -> GateEigens:
    """Diagonalize the gate block of the one-excitation Hamiltonian.

    N=4 yields G+ = (1, 1)/sqrt2 and G- = (1, -1)/sqrt2 with energies
    J2 Delta / 2 -/+ J2. N=5 yields G-, G0, G+ where G0 = (1, 0, -1)/sqrt2
    and G+ (G-) takes the upper (lower) root.
    """
    n = chain.n_sites
    if n not in (4, 5):
        raise ParameterError(f"gate prediagonalization supports N = 4 or 5, got {n}")
    basis = enumerate_sector_basis(n, 1)
    H = build_hamiltonian(chain, basis)
    gate = slice(1, n - 1)
    spec = diagonalize(H[gate, gate])
    vectors = np.array(spec.eigenvectors)
    energies = np.array(spec.eigenvalues)
    if n == 4:
        labels = tuple("G+" if v[0] * v[1] > 0 else "G-" for v in vectors.T)
    else:
        antisym = int(np.argmin([abs(v[0] + v[2]) - abs(v[0] - v[2]) for v in vectors.T]))
        sym = [k for k in range(3) if k != antisym]
        names = {antisym: "G0", sym[0]: "G-", sym[1]: "G+"}
        labels = tuple(names[k] for k in range(3))
    if len(set(labels)) != len(labels):
        raise ParameterError("gate block is degenerate; labels are ambiguous")
    energies.setflags(write=False)
    vectors.setflags(write=False)
    return GateEigens(labels, energies, vectors)


def nonresonant_gate_state(chain: XxzChain) -> GateState:
    """Gate eigenstate farthest in energy from the port states (control-spin slot)."""
    eig = gate_block_eigens(chain)
    e_port = port_energy(chain)
    k = int(np.argmax(np.abs(eig.energies - e_port)))
    return eig[eig.labels[k]]


def resonant_gate_state(chain: XxzChain) -> GateState:
    eig = gate_block_eigens(chain)
    e_port = port_energy(chain)
    k = int(np.argmin(np.abs(eig.energies - e_port)))
    return eig[eig.labels[k]]


# --- closed forms ------------------------------------------------------------


def resonance_fields(J2: float, delta: float) -> tuple[float, float]:
    """Gate fields ``(h_plus, h_minus)`` tuning G+ or G- onto the N=4 port energy."""
    if not J2 > 0:
        raise ParameterError(f"J2 must be positive, got {J2}")
    return 0.5 * J2 * (1 - delta), -0.5 * J2 * (1 + delta) + 0.0


def resonance_fields_n3(J1: float, delta: float) -> float:
    """Field on the middle site of an N=3 chain giving equidistant levels."""
    if not J1 > 0:
        raise ParameterError(f"J1 must be positive, got {J1}")
    return -0.5 * J1 * delta


def resonance_fields_n5(
    J2: float, delta: float, h: float, via: str = "G0", j1: float = 0.0
) -> tuple[float, str]:
    """Outer-gate field ``h'`` making an N=5 gate level resonant with the ports.

    ``via="G0"`` returns ``-J2 Delta / 2`` for any ``h``. ``via="G+-"``
    returns the root through G+ (when ``h < -J2 Delta``) or G-
    (``h > -J2 Delta``). With the default ``j1=0`` this is the weak-port
    limit; a nonzero ``j1`` keeps the ``J1 Delta`` shift of the middle site.
    """
    if not J2 > 0:
        raise ParameterError(f"J2 must be positive, got {J2}")
    if via == "G0":
        return -0.5 * J2 * delta, "G0"
    if via not in ("G+-", "Gpm"):
        raise ParameterError(f"via must be 'G0' or 'G+-', got {via!r}")
    pivot = h + J2 * delta - 0.5 * j1 * delta
    if pivot == 0:
        raise SingularityError("h = -J2*Delta has no G+/G- resonance")
    h_prime = J2**2 / (2 * pivot) - 0.5 * J2 * delta
    return h_prime, ("G+" if pivot < 0 else "G-")


def closed_form_eigenvalues_n3(j1: float, delta: float, h: float) -> np.ndarray:
    """One-excitation spectrum of the symmetric N=3 chain, ascending."""
    root = math.sqrt(2 * j1**2 + (h + 0.5 * j1 * delta) ** 2)
    return np.array([0.5 * j1 * delta - root, -h, 0.5 * j1 * delta + root])


def closed_form_eigenvalues_n4(j1: float, j2: float, delta: float, h: float) -> np.ndarray:
    """One-excitation spectrum of the symmetric N=4 chain (unsorted, closed-form order)."""
    r_plus = math.sqrt(j1**2 + (h - 0.5 * j2 * (1 - delta)) ** 2)
    r_minus = math.sqrt(j1**2 + (h + 0.5 * j2 * (1 + delta)) ** 2)
    return np.array([
        -0.5 * j2 - h - r_plus,
        0.5 * j2 - h - r_minus,
        -0.5 * j2 - h + r_plus,
        0.5 * j2 - h + r_minus,
    ])


def closed_form_gate_eigenvalues_n5(
    j1: float, j2: float, delta: float, h: float, h_prime: float
) -> dict[str, float]:
    shift = -h_prime + 0.5 * (j2 - j1) * delta
    root = math.sqrt(2 * j2**2 + (h - h_prime + 0.5 * (j2 - j1) * delta) ** 2)
    return {"G-": shift - root, "G0": -h, "G+": shift + root}


def prediagonalized_two_excitation(chain: XxzChain) -> tuple[np.ndarray, tuple[str, ...]]:
    """N=4 two-excitation Hamiltonian in the gate-eigenstate basis.

    Basis order: |up G+ dn>, |up G- dn>, |up dn dn up>, |dn up up dn>,
    |dn G+ up>, |dn G- up>.
    """
    if chain.n_sites != 4:
        raise ParameterError("prediagonalized two-excitation form is defined for N = 4")
    basis = enumerate_sector_basis(4, 2)
    H = build_hamiltonian(chain, basis)
    s = 1 / math.sqrt(2)
    rows = [
        {"↑↑↓↓": s, "↑↓↑↓": s},
        {"↑↑↓↓": s, "↑↓↑↓": -s},
        {"↑↓↓↑": 1.0},
        {"↓↑↑↓": 1.0},
        {"↓↑↓↑": s, "↓↓↑↑": s},
        {"↓↑↓↑": s, "↓↓↑↑": -s},
    ]
    O = np.zeros((6, 6))
    for r, amps in enumerate(rows):
        for spins, a in amps.items():
            O[r, basis.index(spins)] = a
    labels = ("↑G+↓", "↑G-↓", "↑↓↓↑", "↓↑↑↓", "↓G+↑", "↓G-↑")
    return O @ H @ O.T, labels
