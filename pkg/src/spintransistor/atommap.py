"""Map strongly interacting atoms in a 1D triple well onto an XXZ chain.

Units: hbar = m = L = 1, so lengths are in L and energies in
epsilon = 1/(m L^2). The trap is a hard-wall box ``[-half_width, half_width]``
containing

    V(x) = -V0 [exp(-a (x - x0)^2) + exp(-a (x + x0)^2)] - U exp(-b x^2).

Geometric factors follow the nearest-neighbour contact construction:
bond ``j`` integrates the squared derivative of the Slater determinant
over the coincidence plane ``x_j = x_{j+1}`` of the ordered sector, divided
by the ordered-sector norm. Only ratios of the factors are scheme
independent; absolute values carry the plane-measure convention used here
(the delta function integrates to one across the full plane).
"""

from __future__ import annotations

import configparser
import csv
import math
import warnings
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from . import kernels
from .errors import (
    AccuracyError,
    ConfigurationWarning,
    ConvergenceError,
    NumericalError,
    ParameterError,
)
from .spinchain import XxzChain

ENERGY_RTOL = 1e-3
MAX_STATES = 12


@dataclass(frozen=True)
class TrapSpec:
    """Triple-well trap in a hard-wall box; defaults are the reference trap (preset fig2)."""

    v0: float = 500.0
    u: float = 200.0
    a: float = 384.0
    b: float = 64.0 / 5.0
    x0: float = 7.0 / 16.0
    half_width: float = 0.5
    n_grid: int = 1000

    def __post_init__(self):
        for name in ("v0", "u", "a", "b", "x0", "half_width"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "n_grid", int(self.n_grid))
        if self.a <= 0 or self.b <= 0:
            raise ParameterError("Gaussian widths a and b must be positive")
        if self.half_width <= 0:
            raise ParameterError("half_width must be positive")
        if abs(self.x0) >= self.half_width:
            raise ParameterError("side-well centres must lie inside the box")
        if self.n_grid < 200:
            raise ParameterError(f"n_grid must be at least 200, got {self.n_grid}")

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        side = np.exp(-self.a * (x - self.x0) ** 2) + np.exp(-self.a * (x + self.x0) ** 2)
        return -self.v0 * side - self.u * np.exp(-self.b * x * x)

    def with_(self, **changes) -> "TrapSpec":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


TRAP_KEYS = {
    "v0": float, "u": float, "a": float, "b": float, "x0": float,
    "half_width": float, "n_grid": int,
}


def parse_number(text: str) -> float:
    """Float or simple fraction such as ``64/5``."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def read_key_values(path: str | Path) -> dict[str, str]:
    """Read a flat ``key = value`` file (``#`` comments, no sections)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str.lower
    text = Path(path).read_text()
    try:
        parser.read_string("[config]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ParameterError(f"malformed config {path}: {exc}") from None
    return dict(parser["config"])


def trap_from_mapping(values: dict) -> TrapSpec:
    kwargs = {}
    for key, raw in values.items():
        if key in TRAP_KEYS:
            try:
                kwargs[key] = TRAP_KEYS[key](parse_number(str(raw)))
            except ValueError:
                raise ParameterError(f"bad value for {key}: {raw!r}") from None
    return TrapSpec(**kwargs)


def read_trap_config(path: str | Path) -> TrapSpec:
    return trap_from_mapping(read_key_values(path))


# --- single-particle problem -------------------------------------------------


@dataclass(frozen=True)
class SingleParticleSpectrum:
    """Lowest eigenpairs on the interior points of a uniform hard-wall grid."""

    x: np.ndarray
    energies: np.ndarray
    orbitals: np.ndarray
    half_width: float

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def n_states(self) -> int:
        return len(self.energies)

    def derivatives(self) -> np.ndarray:
        """Central differences, using the zero wall values at both ends."""
        padded = np.pad(self.orbitals, ((0, 0), (1, 1)))
        return (padded[:, 2:] - padded[:, :-2]) / (2 * self.spacing)

    def overlap_matrix(self) -> np.ndarray:
        return self.orbitals @ self.orbitals.T * self.spacing

    def spline(self) -> CubicSpline:
        xs = np.concatenate(([-self.half_width], self.x, [self.half_width]))
        ys = np.pad(self.orbitals, ((0, 0), (1, 1)))
        return CubicSpline(xs, ys, axis=1)

    def write_csv(self, path: str | Path, header: Sequence[str] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            fh.write("# energies (epsilon): " + " ".join(f"{e:.10g}" for e in self.energies) + "\n")
            writer = csv.writer(fh)
            writer.writerow(["x"] + [f"phi_{k + 1}" for k in range(self.n_states)])
            for i, xi in enumerate(self.x):
                writer.writerow([f"{xi:.10g}"] + [f"{v:.10g}" for v in self.orbitals[:, i]])


def _fd_eigenpairs(potential: Callable, half_width: float, n_grid: int, n_states: int):
    x = np.linspace(-half_width, half_width, n_grid + 2)[1:-1]
    h = x[1] - x[0]
    diag = 1.0 / h**2 + potential(x)
    off = np.full(n_grid - 1, -0.5 / h**2)
    energies, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, n_states - 1))
    orbitals = vecs.T / math.sqrt(h)
    for phi in orbitals:
        first = np.flatnonzero(np.abs(phi) > 1e-3 * np.abs(phi).max())[0]
        if phi[first] < 0:
            phi *= -1
    return x, energies, orbitals


def solve_potential(
    potential: Callable,
    half_width: float,
    n_grid: int,
    n_states: int,
    check_convergence: bool = True,
) -> SingleParticleSpectrum:
    """Lowest ``n_states`` of ``-1/2 d^2/dx^2 + V`` with hard walls at +-half_width.

    Three-point finite differences on ``n_grid`` interior points. With
    ``check_convergence`` the grid is doubled and every energy must agree to
    0.1% (relative to max(|E|, epsilon)).
    """
    if not 1 <= n_states <= MAX_STATES:
        raise ParameterError(f"n_states must be in [1, {MAX_STATES}], got {n_states}")
    if n_grid < 200:
        raise ParameterError(f"n_grid must be at least 200, got {n_grid}")
    x, energies, orbitals = _fd_eigenpairs(potential, half_width, n_grid, n_states)
    if np.any(np.diff(energies) <= 0):
        raise NumericalError(f"energies not strictly increasing: {energies}")
    if check_convergence:
        _, fine, _ = _fd_eigenpairs(potential, half_width, 2 * n_grid + 1, n_states)
        change = np.abs(fine - energies) / np.maximum(np.abs(fine), 1.0)
        if change.max() > ENERGY_RTOL:
            raise ConvergenceError(
                f"energies moved by up to {change.max():.2e} (relative) on grid doubling "
                f"from {n_grid} points; coarse={energies}, fine={fine}"
            )
    return SingleParticleSpectrum(x, energies, orbitals, float(half_width))


def solve_schrodinger_1d(
    trap: TrapSpec, n_states: int, check_convergence: bool = True
) -> SingleParticleSpectrum:
    return solve_potential(trap.potential, trap.half_width, trap.n_grid, n_states, check_convergence)


# --- Slater determinant --------------------------------------------------------


def slater_determinant(
    spectrum: SingleParticleSpectrum, n_particles: int, positions
) -> float | np.ndarray:
    """Normalized Slater determinant of the lowest ``n_particles`` orbitals.

    ``positions`` has shape (..., n_particles); the result integrates to one
    in modulus squared over the whole box. Coincident coordinates give 0.
    """
    if not 1 <= n_particles <= spectrum.n_states:
        raise ParameterError(
            f"n_particles must be in [1, {spectrum.n_states}], got {n_particles}"
        )
    pos = np.asarray(positions, dtype=float)
    if pos.shape[-1] != n_particles:
        raise ParameterError(f"need {n_particles} coordinates per configuration")
    if np.any(np.abs(pos) > spectrum.half_width):
        raise ParameterError("positions must lie inside the box")
    values = spectrum.spline()(pos)[:n_particles]  # (orbital, ..., particle)
    mats = np.moveaxis(values, 0, -2)
    det = np.linalg.det(mats) / math.sqrt(math.factorial(n_particles))
    sorted_pos = np.sort(pos, axis=-1)
    coincident = np.any(np.diff(sorted_pos, axis=-1) == 0, axis=-1)
    det = np.where(coincident, 0.0, det)
    return float(det) if det.ndim == 0 else det


# --- geometric factors -------------------------------------------------------


@dataclass(frozen=True)
class GeometricFactors:
    """Exchange geometric factors alpha_1..alpha_{N-1} with error estimates.

    ``ordered_norm`` is N! times the ordered-sector norm (ideally 1).
    For quadrature the errors are Richardson estimates from a half-resolution
    pass; for Monte Carlo they are standard errors.
    """

    alphas: tuple[float, ...]
    errors: tuple[float, ...]
    n_particles: int
    method: str
    ordered_norm: float
    details: dict = field(default_factory=dict, compare=False)
    spectrum: SingleParticleSpectrum | None = field(default=None, repr=False, compare=False)

    def ratio(self, i: int = 2, j: int = 1) -> tuple[float, float]:
        """``alpha_i / alpha_j`` (1-based) and its propagated error."""
        ai, aj = self.alphas[i - 1], self.alphas[j - 1]
        r = ai / aj
        rel = math.hypot(self.errors[i - 1] / ai, self.errors[j - 1] / aj)
        return r, abs(r) * rel


def _stride_for(n: int, points: int) -> int:
    return max(1, math.ceil(n / points))


def _subgrid(n: int, stride: int) -> slice:
    # centre the sub-sampled points so mirror-image traps see a mirrored grid
    return slice(((n - 1) % stride) // 2, None, stride)


def _quadrature_contacts(phi, dphi, h, n_particles, stride, backend):
    cut = _subgrid(phi.shape[1], stride)
    sub_phi = np.ascontiguousarray(phi[:, cut])
    sub_dphi = np.ascontiguousarray(dphi[:, cut])
    weight = (h * stride) ** (n_particles - 1) / math.factorial(n_particles)
    return np.array([
        weight * kernels.contact_sum(sub_phi, sub_dphi, bond, backend=backend)
        for bond in range(n_particles - 1)
    ])


def _quadrature_norm(phi, h, n_particles, stride, backend):
    sub = np.ascontiguousarray(phi[:, _subgrid(phi.shape[1], stride)])
    total, _ = kernels.ordered_sums(sub, backend=backend)
    return (h * stride) ** n_particles * total / math.factorial(n_particles)


def _mc_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))


class _Proposal:
    """Sorted i.i.d. proposals on the box, uniform or density-weighted.

    The density proposal mixes the mean orbital density (weight 0.9) with
    a uniform floor and is sampled by piecewise-linear inverse CDF, so the
    exact proposal density is piecewise constant on the grid cells.
    """

    def __init__(self, spectrum: SingleParticleSpectrum, n_orbitals: int, kind: str):
        w = spectrum.half_width
        self.lo, self.hi = -w, w
        self.kind = kind
        if kind == "density":
            xs = np.concatenate(([-w], spectrum.x, [w]))
            rho = np.pad(np.mean(spectrum.orbitals[:n_orbitals] ** 2, axis=0), 1)
            rho = 0.9 * rho / trapezoid(rho, xs) + 0.1 / (2 * w)
            cdf = np.concatenate(([0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(xs))))
            cdf /= cdf[-1]
            self.xs, self.cdf = xs, cdf
            self.cell_density = np.diff(cdf) / np.diff(xs)
        elif kind != "uniform":
            raise ParameterError(f"proposal must be 'density' or 'uniform', got {kind!r}")

    def __call__(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map uniforms (m, d) to sorted points and importance weights."""
        d = u.shape[1]
        if self.kind == "uniform":
            pts = self.lo + (self.hi - self.lo) * np.sort(u, axis=1)
            weight = np.full(len(u), (self.hi - self.lo) ** d / math.factorial(d))
            return pts, weight
        pts = np.interp(u, self.cdf, self.xs)
        cells = np.clip(np.searchsorted(self.cdf, u, side="right") - 1, 0, len(self.cell_density) - 1)
        q = np.prod(self.cell_density[cells], axis=1)
        return np.sort(pts, axis=1), 1.0 / (math.factorial(d) * q)


def _mc_integral(integrand, dim, proposal, samples, rng, chunk=200_000):
    """Ordered-simplex integral by stratified sampling of sorted proposals.

    The first uniform coordinate is stratified into samples/2 strata with two
    draws each; the standard error comes from within-stratum differences.
    """
    n_strata = samples // 2
    if n_strata < 1:
        raise ParameterError("need at least two samples")
    total = 0.0
    var = 0.0
    for s0 in range(0, n_strata, chunk // 2):
        s1 = min(n_strata, s0 + chunk // 2)
        strata = np.repeat(np.arange(s0, s1), 2)
        u = rng.random((strata.size, dim))
        u[:, 0] = (strata + u[:, 0]) / n_strata
        pts, weight = proposal(u)
        f = (integrand(pts) * weight).reshape(-1, 2)
        total += f.sum()
        var += (((f[:, 0] - f[:, 1]) ** 2) / 4).sum()
    # the stratified mean has variance sum_s Var(stratum mean) / n_strata^2
    return total / (2 * n_strata), math.sqrt(var) / n_strata


def _mc_factors(spectrum, n_particles, samples, seed, proposal_kind):
    spline = spectrum.spline()
    deriv = spline.derivative()
    proposal = _Proposal(spectrum, n_particles, proposal_kind)
    nfact = math.factorial(n_particles)

    def contact(bond):
        def f(pts):
            y = pts[:, bond]
            cols = [k if k <= bond else k - 1 for k in range(n_particles)]
            M = spline(pts[:, cols])[:n_particles]  # (orbital, m, particle)
            M[:, :, bond] = deriv(y)[:n_particles]
            det = np.linalg.det(np.transpose(M, (1, 0, 2)))
            return det * det / nfact
        return f

    def norm(pts):
        M = spline(pts)[:n_particles]
        det = np.linalg.det(np.transpose(M, (1, 0, 2)))
        return det * det / nfact

    contacts, contact_se = [], []
    for bond in range(n_particles - 1):
        c, se = _mc_integral(contact(bond), n_particles - 1, proposal, samples, _mc_rng(seed, bond))
        contacts.append(c)
        contact_se.append(se)
    nv, nse = _mc_integral(norm, n_particles, proposal, samples, _mc_rng(seed, 1000))
    return np.array(contacts), np.array(contact_se), nv, nse


def geometric_factors(
    spectrum: SingleParticleSpectrum,
    n_particles: int,
    method: str = "quadrature",
    *,
    quad_points: int = 200,
    norm_points: int = 80,
    samples: int = 1_000_000,
    seed: int = 0,
    proposal: str = "density",
    rel_tol: float = 0.02,
    backend: str | None = None,
) -> GeometricFactors:
    """Geometric factors from the ordered-sector contact integrals.

    ``method="quadrature"`` sums the (N-1)-dimensional coincidence-plane
    integrand over a tensor grid of about ``quad_points`` points per axis
    (sub-sampled from the orbital grid) and the N-dimensional norm over
    about ``norm_points``. ``method="monte_carlo"`` uses ``samples`` sorted
    draws per integral from ``proposal`` ("density" importance sampling or
    "uniform") with a Philox stream keyed by ``seed``.
    Raises :class:`AccuracyError` if any relative error exceeds ``rel_tol``.
    """
    if n_particles not in (2, 3, 4):
        raise ParameterError(f"n_particles must be 2, 3 or 4, got {n_particles}")
    if n_particles > spectrum.n_states:
        raise ParameterError("not enough orbitals for the requested particle number")
    phi = spectrum.orbitals[:n_particles]
    h = spectrum.spacing
    nfact = math.factorial(n_particles)

    if method == "quadrature":
        dphi = spectrum.derivatives()[:n_particles]
        stride = _stride_for(len(spectrum.x), quad_points)
        contacts = _quadrature_contacts(phi, dphi, h, n_particles, stride, backend)
        coarse = _quadrature_contacts(phi, dphi, h, n_particles, 2 * stride, backend)
        contact_err = np.abs(contacts - coarse) / 3
        nstride = _stride_for(len(spectrum.x), norm_points)
        norm = _quadrature_norm(phi, h, n_particles, nstride, backend)
        norm_coarse = _quadrature_norm(phi, h, n_particles, 2 * nstride, backend)
        norm_err = abs(norm - norm_coarse) / 3
        details = {"stride": stride, "norm_stride": nstride, "grid_points": len(spectrum.x),
                   "backend": backend or kernels.BACKEND}
    elif method == "monte_carlo":
        if samples < 1_000_000:
            warnings.warn("fewer than 1e6 Monte Carlo samples", ConfigurationWarning, stacklevel=2)
        contacts, contact_err, norm, norm_err = _mc_factors(
            spectrum, n_particles, samples, seed, proposal
        )
        details = {"samples": samples, "seed": seed, "rng": "Philox", "proposal": proposal}
    else:
        raise ParameterError(f"method must be 'quadrature' or 'monte_carlo', got {method!r}")

    if norm <= 0:
        raise NumericalError("ordered-sector norm vanished")
    alphas = contacts / norm
    rel = np.hypot(contact_err / np.abs(contacts), norm_err / norm)
    errors = np.abs(alphas) * rel
    if np.any(rel > rel_tol):
        raise AccuracyError(
            f"relative errors {rel} exceed {rel_tol}; refine the grid or add samples"
        )
    details["contacts"] = tuple(float(c) for c in contacts)
    details["norm_error"] = float(norm_err * nfact)
    return GeometricFactors(
        alphas=tuple(float(a) for a in alphas),
        errors=tuple(float(e) for e in errors),
        n_particles=n_particles,
        method=method,
        ordered_norm=float(norm * nfact),
        details=details,
        spectrum=spectrum,
    )


def ordered_field_average(
    spectrum: SingleParticleSpectrum,
    n_particles: int,
    profile: Callable,
    norm_points: int = 80,
    backend: str | None = None,
) -> np.ndarray:
    """Average of ``profile(x_j)`` over the ordered sector, weighted by |Psi_0|^2, j = 1..N."""
    stride = _stride_for(len(spectrum.x), norm_points)
    cut = _subgrid(len(spectrum.x), stride)
    phi = np.ascontiguousarray(spectrum.orbitals[:n_particles, cut])
    B = np.asarray(profile(spectrum.x[cut]), dtype=float)
    total, sums = kernels.ordered_sums(phi, B, backend=backend)
    return sums / total


def top_hat_field(amplitude: float, half_width: float, center: float = 0.0) -> Callable:
    """Field profile ``amplitude`` on ``|x - center| < half_width``, zero elsewhere."""
    def profile(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x - center) < half_width, amplitude, 0.0)
    return profile


def effective_chain(
    factors: GeometricFactors,
    g: float,
    kappa: float,
    B: Callable | None = None,
    gate_fields: float | Sequence[float] | None = None,
    positive_couplings: bool = False,
    symmetrize: bool = False,
) -> XxzChain:
    """XXZ chain with J_j = -alpha_j / g and Delta = 1 - 2/kappa.

    Fields come from the ordered-sector average of ``B`` (carrying the same
    1/g prefactor as the couplings) or, without ``B``, from ``gate_fields``
    on sites 2..N-1 with zero port fields. ``positive_couplings`` emits
    ``alpha_j / g`` instead; ``symmetrize`` averages mirror-image bonds.
    """
    if not kappa > 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if not g > 0:
        raise ParameterError(f"g must be positive, got {g}")
    if g < 5:
        warnings.warn(f"g = {g} is not in the strong-coupling regime g >> 1",
                      ConfigurationWarning, stacklevel=2)
    n = factors.n_particles
    alphas = np.array(factors.alphas)
    if symmetrize:
        alphas = 0.5 * (alphas + alphas[::-1])
    sign = 1.0 if positive_couplings else -1.0
    couplings = tuple(sign * alphas / g)
    delta = 1.0 - 2.0 / kappa
    if B is not None:
        if factors.spectrum is None:
            raise ParameterError("field averages need the single-particle spectrum")
        fields = tuple(ordered_field_average(factors.spectrum, n, B) / g)
    else:
        if gate_fields is None:
            gate = [0.0] * (n - 2)
        elif np.ndim(gate_fields) == 0:
            gate = [float(gate_fields)] * (n - 2)
        else:
            gate = [float(v) for v in gate_fields]
            if len(gate) != n - 2:
                raise ParameterError(f"need {n - 2} gate fields")
        fields = (0.0, *gate, 0.0)
    symmetric = symmetrize and fields == fields[::-1] and fields[0] == 0.0
    return XxzChain(n, couplings, fields, delta, symmetric=symmetric)


def trap_factors(
    trap: TrapSpec,
    n_particles: int = 4,
    method: str = "quadrature",
    check_convergence: bool = True,
    **kwargs,
) -> GeometricFactors:
    spectrum = solve_schrodinger_1d(trap, n_particles, check_convergence=check_convergence)
    return geometric_factors(spectrum, n_particles, method, **kwargs)


class SweepPoint(NamedTuple):
    value: float
    ratio: float
    error: float
    message: str | None = None


_SWEEP_PARAMS = {"v0": "v0", "u": "u"}


def coupling_ratio_sweep(
    base: TrapSpec, parameter: str, values: Sequence[float], n_particles: int = 4, **kwargs
) -> list[SweepPoint]:
    """J2/J1 along a sweep of ``V0`` or ``U``; failed points get NaN and a message."""
    key = _SWEEP_PARAMS.get(parameter.lower())
    if key is None:
        raise ParameterError(f"sweep parameter must be V0 or U, got {parameter!r}")
    points = []
    for value in values:
        try:
            factors = trap_factors(base.with_(**{key: float(value)}), n_particles, **kwargs)
            ratio, err = factors.ratio(2, 1)
            points.append(SweepPoint(float(value), ratio, err))
        except (NumericalError, ParameterError) as exc:
            points.append(SweepPoint(float(value), math.nan, math.nan, str(exc)))
    return points
