"""Noise channels: quench ensembles, square-wave drives and particle loss.

Ensemble members are piecewise-constant generator schedules over the full
encoded index set (ancilla pair + chain); the ancilla rows of every member
are exactly zero.  Ensembles are deterministic functions of their parameters
and seed: parameter boxes are discretized on uniform grids and site disorder
is drawn from counter-based Philox streams keyed by (seed, member index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .fgs import CovarianceMatrix, QuadraticGenerator
from .kitaev import ChainParams, build_generator

__all__ = [
    "GeneratorSchedule",
    "PerturbationEnsemble",
    "DriveSpec",
    "LindbladSpec",
    "with_ancilla",
    "quench_ensemble",
    "square_wave_drive",
    "schedule_orthogonal",
    "lindblad_evolve",
    "lindblad_fixed_point",
]


def with_ancilla(gen: QuadraticGenerator) -> QuadraticGenerator:
    """Embed a chain generator into the encoded index set (ancilla rows zero)."""
    n = gen.data.shape[0]
    out = np.zeros((n + 2, n + 2))
    out[2:, 2:] = gen.data
    return QuadraticGenerator(out)


@dataclass(frozen=True)
class GeneratorSchedule:
    """Piecewise-constant generator sequence, optionally periodic.

    ``segments`` is an ordered tuple of (generator, duration); the last
    duration of a non-periodic schedule may be inf.  ``rotation(t)`` is the
    orthogonal matrix propagating covariance matrices from 0 to t.
    """

    segments: tuple[tuple[QuadraticGenerator, float], ...]
    periodic: bool = False
    period: float | None = None

    def __post_init__(self):
        if not self.segments:
            raise ValueError("schedule needs at least one segment")
        durs = [d for _, d in self.segments]
        if any(not d > 0 for d in durs):
            raise ValueError("segment durations must be positive")
        dims = {g.data.shape[0] for g, _ in self.segments}
        if len(dims) != 1:
            raise ValueError("all segments must share one dimension")
        if self.periodic:
            if self.period is None or not math.isclose(sum(durs), self.period,
                                                       rel_tol=0.0, abs_tol=1e-12):
                raise ValueError("periodic schedule durations must sum to the period")
        elif any(math.isinf(d) for d in durs[:-1]):
            raise ValueError("only the final segment may be unbounded")

    @property
    def dim(self) -> int:
        return self.segments[0][0].data.shape[0]

    @cached_property
    def _period_schur(self):
        p = self._walk(self.period)
        # one-period propagator is orthogonal (normal), so its complex Schur
        # form is diagonal and powers are cheap and stable
        t, z = sla.schur(p, output="complex")
        return np.diag(t), z

    def _walk(self, t: float) -> np.ndarray:
        out = np.eye(self.dim)
        remaining = t
        for gen, dur in self.segments:
            if remaining <= 0:
                break
            step = min(remaining, dur)
            out = gen.rotation(step) @ out
            remaining -= step
        if remaining > 1e-12 * max(t, 1.0):
            raise ValueError(f"schedule of finite length exhausted before t={t}")
        return out

    def rotation(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError("schedule rotations are defined for t >= 0")
        if t == 0.0:
            return np.eye(self.dim)
        if not self.periodic:
            return self._walk(t)
        cycles, rest = divmod(t, self.period)
        cycles = int(cycles)
        out = self._walk(rest) if rest > 0 else np.eye(self.dim)
        if cycles:
            ev, z = self._period_schur
            powered = (z * ev ** cycles) @ z.conj().T
            out = out @ np.real(powered)
        return out

    def generator_at(self, t: float) -> QuadraticGenerator:
        """Active segment generator at time t (right-continuous at boundaries)."""
        if t < 0:
            raise ValueError("schedules start at t = 0")
        rest = t % self.period if self.periodic else t
        for gen, dur in self.segments:
            if rest < dur:
                return gen
            rest -= dur
        return self.segments[-1][0]

    def breakpoints(self, t_a: float, t_b: float) -> list[float]:
        """Segment switching times strictly inside (t_a, t_b)."""
        if len(self.segments) == 1 and not self.periodic:
            return []
        marks = np.cumsum([d for _, d in self.segments])
        out = []
        if self.periodic:
            k0 = int(np.floor(t_a / self.period))
            k1 = int(np.ceil(t_b / self.period)) + 1
            for cyc in range(k0, k1):
                for m in marks:
                    v = cyc * self.period + float(m)
                    if t_a < v < t_b:
                        out.append(v)
        else:
            for m in marks:
                if np.isfinite(m) and t_a < float(m) < t_b:
                    out.append(float(m))
        return sorted(out)


def schedule_orthogonal(schedule: GeneratorSchedule, t: float) -> np.ndarray:
    """Time-ordered propagator of a schedule acting on covariance matrices."""
    return schedule.rotation(t)


@dataclass(frozen=True)
class PerturbationEnsemble:
    """Uniformly weighted collection of generator schedules."""

    members: tuple[GeneratorSchedule, ...]
    seed: int
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        dims = {m.dim for m in self.members}
        if len(dims) != 1:
            raise ValueError("ensemble members must share one dimension")

    @property
    def n_members(self) -> int:
        return len(self.members)

    @property
    def dim(self) -> int:
        return self.members[0].dim


def _constant_schedule(gen: QuadraticGenerator) -> GeneratorSchedule:
    return GeneratorSchedule(segments=((gen, math.inf),))


def quench_ensemble(params0: ChainParams, mu_minus: float, mu_plus: float,
                    nd: int, seed: int = 0) -> PerturbationEnsemble:
    """Sudden chemical-potential quenches on the closed uniform grid [mu-, mu+]."""
    if nd < 1:
        raise ValueError("need at least one realization")
    if mu_minus > mu_plus:
        raise ValueError("mu_minus must not exceed mu_plus")
    grid = np.linspace(mu_minus, mu_plus, nd)
    members = []
    for mu in grid:
        p = ChainParams(N=params0.N, mu=float(mu), delta=params0.delta,
                        J=params0.J, site_mu=params0.site_mu)
        members.append(_constant_schedule(with_ancilla(build_generator(p))))
    desc = {"kind": "quench", "mu_minus": mu_minus, "mu_plus": mu_plus,
            "nd": nd, "params0": params0.to_dict()}
    return PerturbationEnsemble(tuple(members), seed, desc)


@dataclass(frozen=True)
class DriveSpec:
    """Square-wave drive box: members alternate H(mu_bar +- dmu_j, delta_bar +- ddelta_j).

    ``dmu``/``ddelta`` are half-ranges of the uniform member grid; ``disorder``
    is the half-range of per-site potential offsets, drawn independently for
    the two half-periods of each member and held fixed over all periods.
    """

    N: int
    omega: float
    mu_bar: float
    delta_bar: float
    dmu: float = 0.0
    ddelta: float = 0.0
    disorder: float = 0.0
    nd: int = 1
    J: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("drive frequency must be positive")
        if self.nd < 1:
            raise ValueError("need at least one realization")


def _grid_shape(nd: int, two_dim: bool) -> tuple[int, int]:
    if not two_dim:
        return nd, 1
    n1 = int(math.isqrt(nd))
    while n1 > 1 and nd % n1:
        n1 -= 1
    return n1, nd // n1


def square_wave_drive(spec: DriveSpec) -> PerturbationEnsemble:
    """Two-segment periodic ensemble over the (dmu, ddelta) box, plus optional disorder."""
    half = 1.0 / (2.0 * spec.omega)
    two_dim = spec.dmu > 0 and spec.ddelta > 0
    n1, n2 = _grid_shape(spec.nd, two_dim)
    if two_dim:
        dmu_grid = np.linspace(-spec.dmu, spec.dmu, n1)
        dde_grid = np.linspace(-spec.ddelta, spec.ddelta, n2)
        boxes = [(dm, dd) for dm in dmu_grid for dd in dde_grid]
    elif spec.dmu > 0:
        boxes = [(dm, 0.0) for dm in np.linspace(-spec.dmu, spec.dmu, spec.nd)]
    elif spec.ddelta > 0:
        boxes = [(0.0, dd) for dd in np.linspace(-spec.ddelta, spec.ddelta, spec.nd)]
    else:
        boxes = [(0.0, 0.0)] * spec.nd

    members = []
    for j, (dm, dd) in enumerate(boxes):
        if spec.disorder > 0:
            rng = np.random.Generator(np.random.Philox(key=(spec.seed, j)))
            site_a = tuple(rng.uniform(-spec.disorder, spec.disorder, spec.N))
            site_b = tuple(rng.uniform(-spec.disorder, spec.disorder, spec.N))
        else:
            site_a = site_b = None
        p_hi = ChainParams(N=spec.N, mu=spec.mu_bar + dm, delta=spec.delta_bar + dd,
                           J=spec.J, site_mu=site_a)
        p_lo = ChainParams(N=spec.N, mu=spec.mu_bar - dm, delta=spec.delta_bar - dd,
                           J=spec.J, site_mu=site_b)
        g_hi = with_ancilla(build_generator(p_hi))
        g_lo = with_ancilla(build_generator(p_lo))
        members.append(GeneratorSchedule(segments=((g_hi, half), (g_lo, half)),
                                         periodic=True, period=2 * half))
    desc = {"kind": "square-wave", "omega": spec.omega, "mu_bar": spec.mu_bar,
            "delta_bar": spec.delta_bar, "dmu": spec.dmu, "ddelta": spec.ddelta,
            "disorder": spec.disorder, "nd": spec.nd, "N": spec.N, "J": spec.J}
    return PerturbationEnsemble(tuple(members), spec.seed, desc)


@dataclass(frozen=True)
class LindbladSpec:
    """Chain Hamiltonian plus uniform single-site particle loss at rate >= 0."""

    h0: QuadraticGenerator
    loss_rate: float

    def __post_init__(self):
        if self.loss_rate < 0:
            raise ValueError("loss rate must be non-negative")

    @property
    def sites(self) -> int:
        return self.h0.modes


def _loss_matrices(spec: LindbladSpec, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Drift A and inhomogeneity B of dG/dt = A G + G A^T + B.

    Loss acts on the trailing ``2 * sites`` indices; a leading ancilla pair,
    when present, is left untouched.
    """
    n_chain = 2 * spec.sites
    if dim not in (n_chain, n_chain + 2):
        raise ValueError("state dimension does not match the Lindblad generator")
    off = dim - n_chain
    a = np.zeros((dim, dim))
    a[off:, off:] = spec.h0.data
    b = np.zeros((dim, dim))
    for s in range(spec.sites):
        i = off + 2 * s
        a[i, i] -= spec.loss_rate / 2.0
        a[i + 1, i + 1] -= spec.loss_rate / 2.0
        b[i, i + 1] = -spec.loss_rate
        b[i + 1, i] = spec.loss_rate
    return a, b


def lindblad_evolve(cm0: CovarianceMatrix, spec: LindbladSpec,
                    t_grid) -> list[CovarianceMatrix]:
    """Exact affine-flow integration of the loss equation on a time grid.

    Uses the block-exponential of [[A, B], [0, -A^T]]: the top-left block is
    the homogeneous propagator F(dt), the top-right block gives the
    accumulated inhomogeneity, and G(t+dt) = F G F^T + Phi F^T.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("time grid must be ascending and start at 0")
    dim = cm0.data.shape[0]
    a, b = _loss_matrices(spec, dim)
    block = np.zeros((2 * dim, 2 * dim))
    block[:dim, :dim] = a
    block[:dim, dim:] = b
    block[dim:, dim:] = -a.T

    out = [cm0]
    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    g = cm0.data
    for dt in np.diff(t_grid):
        key = round(float(dt), 15)
        if key not in cache:
            e = sla.expm(block * dt)
            cache[key] = (e[:dim, :dim], e[:dim, dim:])
        f, phi = cache[key]
        g = f @ g @ f.T + phi @ f.T
        g = (g - g.T) / 2.0
        smax = float(np.linalg.norm(g, 2))
        if smax > 1.0 + 1e-6:
            raise RuntimeError(f"integration instability: singular value {smax}")
        if smax > 1.0:
            g = g / smax
        out.append(CovarianceMatrix(g))
    return out


def lindblad_fixed_point(spec: LindbladSpec) -> CovarianceMatrix:
    """Unique chain steady state: solves A G + G A^T = -B on the chain block."""
    if not spec.loss_rate > 0:
        raise ValueError("fixed point requires a positive loss rate")
    dim = 2 * spec.sites
    a, b = _loss_matrices(spec, dim)
    g = sla.solve_continuous_lyapunov(a, -b)
    g = (g - g.T) / 2.0
    residual = float(np.max(np.abs(a @ g + g @ a.T + b)))
    assert residual <= 1e-10, f"Lyapunov residual {residual:.2e}"
    return CovarianceMatrix(g)
