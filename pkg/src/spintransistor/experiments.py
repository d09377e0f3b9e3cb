"""Transistor experiments: dynamics traces, noise robustness, blockade vs kappa.

Energies in chains built here are in epsilon (the trap unit) divided by g,
unless a chain is supplied directly. Times are in inverse energy units of
the chain, so ``pi / J1`` is the nominal transfer time.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from . import __version__, kernels
from .atommap import GeometricFactors, TrapSpec, trap_factors
from .dynamics import (
    QuantumState,
    blockade_fidelity,
    control_state,
    propagate,
    transfer_fidelity,
)
from .errors import NumericalError, ParameterError
from .spinchain import (
    XxzChain,
    build_hamiltonian,
    diagonalize,
    enumerate_sector_basis,
    nonresonant_gate_state,
    resonance_fields,
)

FIG1C_RATIO = 17.484
NOISE_PARAMETERS = ("V0", "U", "h")
_TRAP_FIELD = {"V0": "v0", "U": "u"}


def fig1c_chain(j1: float = 1.0, ratio: float = FIG1C_RATIO, delta: float = -1.0, h: float = 0.0) -> XxzChain:
    """N=4 transistor at the reference operating point (preset fig1c)."""
    return XxzChain.symmetric_chain(4, j1, ratio * j1, delta, h)


# --- dynamics traces -----------------------------------------------------------


class DynamicsTrace(NamedTuple):
    t: np.ndarray
    p_in: np.ndarray
    p_out: np.ndarray
    p_gate: np.ndarray


def run_dynamics_trace(chain: XxzChain, gate: str, t_max: float, n_samples: int) -> DynamicsTrace:
    """Spin-up populations of the input port, output port and gate versus time.

    ``gate="open"`` starts from one excitation on the input port with an
    empty gate; ``gate="closed"`` adds the control spin in the non-resonant
    gate eigenstate.
    """
    if gate not in ("open", "closed"):
        raise ParameterError(f"gate must be 'open' or 'closed', got {gate!r}")
    if t_max < 0:
        raise ParameterError("t_max must be non-negative")
    if n_samples < 1:
        raise ParameterError("n_samples must be positive")
    times = np.array([0.0]) if t_max == 0 else np.linspace(0.0, t_max, n_samples)
    if gate == "open":
        basis = enumerate_sector_basis(chain.n_sites, 1)
        start = QuantumState.product(basis, 1)
    else:
        start = control_state(chain)
        basis = start.basis
    spectral = diagonalize(build_hamiltonian(chain, basis), basis)
    amps = propagate(spectral, start.amplitudes, times)
    pops = np.abs(amps) ** 2 @ basis.occupations()
    return DynamicsTrace(times, pops[:, 0], pops[:, -1], pops[:, 1:-1].sum(axis=1))


# --- transistor design ---------------------------------------------------------


@dataclass(frozen=True)
class TransistorDesign:
    """Trap plus mapping settings defining the ideal N=4 transistor."""

    trap: TrapSpec = TrapSpec()
    g: float = 50.0
    kappa: float = 1.0
    field: str = "h_plus"
    quad_points: int = 200
    norm_points: int = 80

    def __post_init__(self):
        if self.field not in ("h_plus", "h_minus"):
            raise ParameterError(f"field must be 'h_plus' or 'h_minus', got {self.field!r}")

    def factors(self, trap: TrapSpec | None = None) -> GeometricFactors:
        return trap_factors(
            trap or self.trap, 4, quad_points=self.quad_points, norm_points=self.norm_points
        )

    def chain_from_alphas(self, alphas: Sequence[float], h: float | None = None) -> XxzChain:
        """Mirror-symmetric chain with |J_j| = alpha_j / g and the gate field ``h``.

        ``h`` defaults to the resonance field of the chain itself.
        """
        a1 = 0.5 * (alphas[0] + alphas[2])
        j1, j2 = a1 / self.g, alphas[1] / self.g
        delta = 1.0 - 2.0 / self.kappa
        if h is None:
            h_plus, h_minus = resonance_fields(j2, delta)
            h = h_plus if self.field == "h_plus" else h_minus
        return XxzChain.symmetric_chain(4, j1, j2, delta, h)


# --- noise robustness ----------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian multiplicative noise on one parameter: A = A0 (1 + sigma * xi)."""

    parameter: str
    relative_sigma: float = 0.0
    n_realizations: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.parameter not in NOISE_PARAMETERS:
            raise ParameterError(f"parameter must be one of {NOISE_PARAMETERS}, got {self.parameter!r}")
        if not self.relative_sigma >= 0:
            raise ParameterError("relative_sigma must be non-negative")
        if self.n_realizations < 1:
            raise ParameterError("n_realizations must be positive")


@dataclass(frozen=True)
class ExperimentRecord:
    config: dict
    fidelities: tuple[float, ...]
    mean: float
    stderr: float
    n_ok: int
    n_failed: int
    n_rejected: int
    provenance: dict = field(default_factory=dict)

    @property
    def relative_sigma(self) -> float:
        return self.config["relative_sigma"]

    def row(self) -> tuple[float, float, float, int]:
        return self.relative_sigma, self.mean, self.stderr, self.n_ok


def draw_factor(seed: int, index: int, sigma: float, positive: bool) -> tuple[float, int]:
    """Multiplier ``1 + sigma * xi`` for realization ``index`` and the rejection count.

    Each realization has its own Philox stream keyed by (seed, index), so
    results do not depend on scheduling. With ``positive`` non-positive
    multipliers are redrawn.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))
    rejected = 0
    while True:
        factor = 1.0 + sigma * rng.standard_normal()
        if not positive or factor > 0:
            return factor, rejected
        rejected += 1


@dataclass(frozen=True)
class _SweepContext:
    spec: NoiseSpec
    design: TransistorDesign
    mode: str
    alphas: tuple[float, ...]
    h0: float
    t_out: float
    slopes: tuple[float, ...] | None


def _realization(ctx: _SweepContext, index: int) -> tuple[float, int]:
    """Fidelity (NaN on solver failure) and rejection count for one realization."""
    spec, design = ctx.spec, ctx.design
    factor, rejected = draw_factor(spec.seed, index, spec.relative_sigma, spec.parameter != "h")
    try:
        if spec.parameter == "h":
            chain = design.chain_from_alphas(ctx.alphas, h=ctx.h0 * factor)
        else:
            key = _TRAP_FIELD[spec.parameter]
            a0 = getattr(design.trap, key)
            if ctx.mode == "resolve":
                alphas = design.factors(design.trap.with_(**{key: a0 * factor})).alphas
            else:
                alphas = tuple(a + s * a0 * (factor - 1) for a, s in zip(ctx.alphas, ctx.slopes))
            chain = design.chain_from_alphas(alphas, h=ctx.h0)
        return float(transfer_fidelity(chain, ctx.t_out)), rejected
    except (NumericalError, ParameterError):
        return math.nan, rejected


def _run_chunk(ctx: _SweepContext, indices: Sequence[int]) -> list[tuple[float, int]]:
    return [_realization(ctx, i) for i in indices]


def _slopes(design: TransistorDesign, parameter: str, step: float = 1e-3) -> tuple[float, ...]:
    key = _TRAP_FIELD[parameter]
    a0 = getattr(design.trap, key)
    up = design.factors(design.trap.with_(**{key: a0 * (1 + step)})).alphas
    dn = design.factors(design.trap.with_(**{key: a0 * (1 - step)})).alphas
    return tuple((u - d) / (2 * step * a0) for u, d in zip(up, dn))


def _summarize(values: list[float]) -> tuple[float, float]:
    arr = np.array(values)
    if np.all(arr == arr[0]):
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def run_noise(
    spec: NoiseSpec,
    design: TransistorDesign | None = None,
    workers: int = 1,
    mode: str = "resolve",
    ideal: GeometricFactors | None = None,
) -> ExperimentRecord:
    """Transfer fidelity at ``t_out = pi / J1`` over noisy realizations.

    ``t_out`` and the gate field stay at their ideal values. For trap
    parameters, ``mode="resolve"`` re-solves the trap per realization while
    ``mode="linear"`` shifts the geometric factors along finite-difference
    slopes. Failed realizations are excluded and counted.
    """
    design = design or TransistorDesign()
    if mode not in ("resolve", "linear"):
        raise ParameterError(f"mode must be 'resolve' or 'linear', got {mode!r}")
    ideal = ideal or design.factors()
    chain0 = design.chain_from_alphas(ideal.alphas)
    j1 = chain0.couplings[0]
    t_out = math.pi / j1
    slopes = None
    if mode == "linear" and spec.parameter != "h" and spec.relative_sigma > 0:
        slopes = _slopes(design, spec.parameter)
    ctx = _SweepContext(spec, design, mode, ideal.alphas, chain0.fields[1], t_out, slopes)

    if spec.relative_sigma == 0:
        f0 = float(transfer_fidelity(chain0, t_out))
        results = [(f0, 0)] * spec.n_realizations
    elif workers > 1:
        chunks = [range(i, spec.n_realizations, workers) for i in range(workers)]
        results = [None] * spec.n_realizations
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk, out in zip(chunks, pool.map(_run_chunk, [ctx] * workers, chunks)):
                for i, r in zip(chunk, out):
                    results[i] = r
    else:
        results = _run_chunk(ctx, range(spec.n_realizations))

    fidelities = tuple(f for f, _ in results)
    ok = [f for f in fidelities if not math.isnan(f)]
    if not ok:
        raise NumericalError("every realization failed")
    mean, stderr = _summarize(ok)
    config = {**asdict(spec), "mode": mode, "g": design.g, "kappa": design.kappa,
              "field": design.field, "trap": design.trap.as_dict(), "t_out": t_out}
    provenance = {
        "seed": spec.seed,
        "rng": "Philox(SeedSequence([seed, index]))",
        "n_grid": design.trap.n_grid,
        "quad_points": design.quad_points,
        "norm_points": design.norm_points,
        "version": __version__,
        "backend": kernels.BACKEND,
    }
    return ExperimentRecord(
        config=config,
        fidelities=fidelities,
        mean=mean,
        stderr=stderr,
        n_ok=len(ok),
        n_failed=len(fidelities) - len(ok),
        n_rejected=sum(r for _, r in results),
        provenance=provenance,
    )


def noise_sweep(
    spec: NoiseSpec,
    sigmas: Sequence[float],
    design: TransistorDesign | None = None,
    workers: int = 1,
    mode: str = "resolve",
) -> list[ExperimentRecord]:
    """One :func:`run_noise` record per relative sigma, sharing the ideal factors and seed."""
    design = design or TransistorDesign()
    ideal = design.factors()
    return [
        run_noise(replace(spec, relative_sigma=float(s)), design, workers, mode, ideal)
        for s in sigmas
    ]


# --- blockade versus interaction strength -------------------------------------


class KappaPoint(NamedTuple):
    kappa: float
    delta: float
    fidelity: float


def kappa_grid(n_points: int = 21) -> np.ndarray:
    """Kappa values giving Delta = linspace(-1, 1, n); Delta = 1 maps to kappa = inf."""
    deltas = np.linspace(-1.0, 1.0, n_points)
    with np.errstate(divide="ignore"):
        return np.where(deltas < 1, 2.0 / (1.0 - deltas), np.inf)


def blockade_vs_kappa(
    kappas: Sequence[float],
    factors: GeometricFactors,
    g: float = 50.0,
    field: str = "h_plus",
) -> list[KappaPoint]:
    """Blockade fidelity at ``t_out = pi / J1`` versus kappa.

    Each point uses the resonance field ``field`` for its own Delta and puts
    the control spin in the non-resonant gate state.
    """
    points = []
    for kappa in kappas:
        design = TransistorDesign(g=g, kappa=float(kappa), field=field)
        chain = design.chain_from_alphas(factors.alphas)
        t_out = math.pi / chain.couplings[0]
        fid = blockade_fidelity(chain, nonresonant_gate_state(chain), t_out)
        points.append(KappaPoint(float(kappa), chain.delta, float(fid)))
    return points


def blockade_asymmetry(points: Sequence[KappaPoint]) -> list[tuple[float, float]]:
    """``(Delta, F(Delta) - F(-Delta))`` for every Delta > 0 whose mirror is on the grid."""
    by_delta = {round(p.delta, 12): p.fidelity for p in points}
    return [
        (d, by_delta[d] - by_delta[-d])
        for d in sorted(by_delta)
        if d > 0 and -d in by_delta
    ]


# --- output --------------------------------------------------------------------


def _flatten(config: dict, prefix: str = ""):
    for key, value in config.items():
        if isinstance(value, dict):
            yield from _flatten(value, f"{prefix}{key}.")
        else:
            yield f"{prefix}{key}", value


def write_csv(path, columns: Sequence[str], rows, config: dict | None = None, units: str = "") -> None:
    """CSV with a ``#`` header echoing ``config`` and a units line."""
    with open(path, "w") as fh:
        for key, value in _flatten(config or {}):
            fh.write(f"# {key} = {value}\n")
        if units:
            fh.write(f"# units: {units}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)
