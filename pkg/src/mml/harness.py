"""Sweep execution, memory-time extraction and scaling fits.

A scenario run produces one fidelity-curve file per (N, N_d) cell plus a JSON
sidecar with the fully resolved configuration; cells execute independently
(optionally in a process pool) and one failing cell is reported without
aborting the rest.  Everything is deterministic given the configuration and
seed.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import channels, kitaev, recovery
from .config import ScenarioConfig
from .curves import FidelityCurve, emit_curve
from .oracle import prior_knowledge_experiment

logger = logging.getLogger(__name__)

__all__ = [
    "MemoryTime",
    "ExtrapolationResult",
    "ScalingFit",
    "CellFailure",
    "run_scenario",
    "run_cell",
    "memory_time",
    "extrapolate_nd",
    "scaling_fit",
    "curve_until_crossing",
]


def _time_grid(spec) -> np.ndarray:
    grid = np.linspace(spec.start, spec.stop, spec.count)
    if grid[0] != 0.0:
        grid = np.concatenate([[0.0], grid])
    return grid


def _build_ensemble(cfg: ScenarioConfig, n: int, nd: int) -> channels.PerturbationEnsemble:
    params0 = kitaev.ChainParams(N=n, mu=cfg.mu0, delta=cfg.delta0, J=cfg.j_scale)
    if cfg.kind in ("quench", "thermal-quench", "diagnostics"):
        if cfg.kind == "diagnostics":
            mu_j, mu_k = cfg.diag_pair
            ens = channels.quench_ensemble(params0, mu_j, mu_k, 2, seed=cfg.seed)
        else:
            ens = channels.quench_ensemble(params0, cfg.mu_minus, cfg.mu_plus, nd,
                                           seed=cfg.seed)
        return ens
    if cfg.kind == "swap-drive":
        half_span = (cfg.mu_plus - cfg.mu_minus) / 2.0
        spec = channels.DriveSpec(
            N=n, omega=cfg.omega or 2.0, mu_bar=(cfg.mu_plus + cfg.mu_minus) / 2.0,
            delta_bar=cfg.delta0, dmu=half_span, ddelta=0.0,
            disorder=cfg.disorder, nd=nd, J=cfg.j_scale, seed=cfg.seed)
        return channels.square_wave_drive(spec)
    if cfg.kind == "square-wave-drive":
        spec = channels.DriveSpec(
            N=n, omega=cfg.omega, mu_bar=cfg.mu_bar, delta_bar=cfg.delta_bar,
            dmu=cfg.dmu, ddelta=cfg.ddelta, disorder=cfg.disorder,
            nd=nd, J=cfg.j_scale, seed=cfg.seed)
        return channels.square_wave_drive(spec)
    raise ValueError(f"no ensemble for scenario kind {cfg.kind!r}")


def _unitary_mixture_cell(cfg: ScenarioConfig, n: int, nd: int,
                          grid: np.ndarray) -> FidelityCurve:
    params0 = kitaev.ChainParams(N=n, mu=cfg.mu0, delta=cfg.delta0, J=cfg.j_scale)
    ens = _build_ensemble(cfg, n, nd)
    zpair = kitaev.encode_pair(params0, "z", np.inf)
    xpair = kitaev.encode_pair(params0, "x", np.inf)
    grams = recovery.gram_matrices(ens, zpair, grid)
    f_opt = np.empty(grid.size)
    gaps = np.empty(grid.size)
    for i, gp in enumerate(grams):
        f_opt[i], gaps[i] = recovery.optimal_fidelity_detailed(gp)
    f_gauss = np.array([
        recovery.gaussian_fidelity(*recovery.ensemble_average_cm(ens, xpair, t))
        for t in grid])
    return FidelityCurve(times=grid, n_sites=n, n_members=nd, seed=cfg.seed,
                         scenario_id=cfg.scenario_id,
                         f_opt=np.clip(f_opt, None, 1.0 + 1e-10),
                         f_gauss=np.clip(f_gauss, None, 1.0 + 1e-10),
                         meta={"crosscheck_gap_max": float(gaps.max())})


def _thermal_cell(cfg: ScenarioConfig, n: int, nd: int, grid: np.ndarray) -> FidelityCurve:
    params0 = kitaev.ChainParams(N=n, mu=cfg.mu0, delta=cfg.delta0, J=cfg.j_scale)
    ens = _build_ensemble(cfg, n, nd)
    pair = kitaev.encode_pair(params0, "x", cfg.beta)
    f_upper = np.array([recovery.thermal_upper_bound(ens, pair, t) for t in grid])
    f_gauss = np.array([
        recovery.gaussian_fidelity(*recovery.ensemble_average_cm(ens, pair, t))
        for t in grid])
    return FidelityCurve(times=grid, n_sites=n, n_members=nd, seed=cfg.seed,
                         scenario_id=cfg.scenario_id, f_upper=f_upper,
                         f_gauss=np.clip(f_gauss, None, 1.0 + 1e-10),
                         meta={"factor_two": True, "beta": cfg.beta})


def _lindblad_cell(cfg: ScenarioConfig, n: int, nd: int, grid: np.ndarray) -> FidelityCurve:
    params0 = kitaev.ChainParams(N=n, mu=cfg.mu0, delta=cfg.delta0, J=cfg.j_scale)
    gen = kitaev.build_generator(params0)
    lspec = channels.LindbladSpec(h0=gen, loss_rate=cfg.loss_rate)
    pair = kitaev.encode_pair(params0, "x", np.inf)
    evo_p = channels.lindblad_evolve(pair.gamma_plus, lspec, grid)
    evo_m = channels.lindblad_evolve(pair.gamma_minus, lspec, grid)
    lows = np.empty(grid.size)
    ups = np.empty(grid.size)
    for i, (cp, cm) in enumerate(zip(evo_p, evo_m)):
        lows[i], ups[i] = recovery.lindblad_bounds(cp, cm)
    return FidelityCurve(times=grid, n_sites=n, n_members=nd, seed=cfg.seed,
                         scenario_id=cfg.scenario_id, f_lower=lows, f_upper=ups,
                         meta={"loss_rate": cfg.loss_rate})


def run_cell(cfg: ScenarioConfig, n: int, nd: int) -> FidelityCurve:
    """One (N, N_d) sweep cell, honoring auto-extension of the horizon."""
    grid = _time_grid(cfg.time_grid)
    builder = {
        "quench": _unitary_mixture_cell,
        "swap-drive": _unitary_mixture_cell,
        "square-wave-drive": _unitary_mixture_cell,
        "thermal-quench": _thermal_cell,
        "lindblad": _lindblad_cell,
    }.get(cfg.kind)
    if builder is None:
        raise ValueError(f"run_cell does not handle scenario kind {cfg.kind!r}")
    f0 = cfg.time_grid.auto_extend_f0
    if f0 is None or cfg.kind not in ("quench", "swap-drive", "square-wave-drive"):
        return builder(cfg, n, nd, grid)
    return curve_until_crossing(lambda g: builder(cfg, n, nd, g), grid, f0,
                                cfg.time_grid.max_stop)


def curve_until_crossing(builder, grid: np.ndarray, f0: float,
                         max_stop: float) -> FidelityCurve:
    """Re-run a cell on doubled horizons until its f_opt crosses f0."""
    while True:
        curve = builder(grid)
        if curve.f_opt is not None and np.any(curve.f_opt < f0):
            return curve
        stop = grid[-1] * 2.0
        if stop > max_stop:
            return curve
        step = grid[1] - grid[0]
        grid = np.arange(0.0, stop + step / 2, step)


@dataclass(frozen=True)
class CellFailure:
    n: int
    nd: int
    error: str


def _cell_task(args):
    cfg, n, nd = args
    t0 = time.perf_counter()
    curve = run_cell(cfg, n, nd)
    return curve, time.perf_counter() - t0


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None
                 ) -> tuple[list[Path], list[CellFailure]]:
    """Execute a scenario sweep and write one curve file per cell.

    Returns (written paths, failures); a failing cell never aborts the rest.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "diagnostics":
        return _run_diagnostics(cfg, out)
    if cfg.kind == "prior-knowledge":
        return _run_prior(cfg, out)

    cells = [(cfg, n, nd) for n in cfg.n_list for nd in cfg.nd_list]
    paths: list[Path] = []
    failures: list[CellFailure] = []

    def handle(cell, outcome):
        _, n, nd = cell
        if isinstance(outcome, Exception):
            logger.error("cell N=%d N_d=%d failed: %s", n, nd, outcome)
            failures.append(CellFailure(n, nd, f"{type(outcome).__name__}: {outcome}"))
            return
        curve, elapsed = outcome
        stem = f"{cfg.scenario_id}_N{n}_Nd{nd}"
        path = emit_curve(curve, out / f"{stem}.csv")
        sidecar = dict(cfg.resolved(), cell={"N": n, "N_d": nd}, curve_meta=curve.meta)
        (out / f"{stem}.meta.json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        logger.info("cell N=%d N_d=%d done in %.1fs -> %s", n, nd, elapsed, path)
        paths.append(path)

    if cfg.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [(cell, pool.submit(_cell_task, cell)) for cell in cells]
            for cell, fut in futures:
                try:
                    handle(cell, fut.result())
                except Exception as exc:  # noqa: BLE001 - isolation boundary
                    handle(cell, exc)
    else:
        for cell in cells:
            try:
                handle(cell, _cell_task(cell))
            except Exception as exc:  # noqa: BLE001 - isolation boundary
                handle(cell, exc)
    return paths, failures


def _run_diagnostics(cfg: ScenarioConfig, out: Path):
    paths: list[Path] = []
    failures: list[CellFailure] = []
    rows = ["N,j,k,t,x_abs,trace_magnitude,flagged,sv_index,sv_value"]
    for n in cfg.n_list:
        try:
            params0 = kitaev.ChainParams(N=n, mu=cfg.mu0, delta=cfg.delta0, J=cfg.j_scale)
            ens = _build_ensemble(cfg, n, 2)
            zpair = kitaev.encode_pair(params0, "z", np.inf)
            res = recovery.condition_diagnostic(ens, zpair, cfg.diag_time, 0, 1)
            svs = res.singular_values if res.singular_values is not None else []
            base = f"{n},0,1,{cfg.diag_time!r},{res.x_abs!r},{res.trace_magnitude!r},{int(res.flagged)}"
            if len(svs):
                for i, sv in enumerate(svs):
                    rows.append(f"{base},{i},{float(sv)!r}")
            else:
                rows.append(f"{base},,")
        except Exception as exc:  # noqa: BLE001 - isolation boundary
            logger.error("diagnostics N=%d failed: %s", n, exc)
            failures.append(CellFailure(n, 2, f"{type(exc).__name__}: {exc}"))
    path = out / f"{cfg.scenario_id}_diag.csv"
    path.write_text("\n".join(rows) + "\n")
    (out / f"{cfg.scenario_id}_diag.meta.json").write_text(
        json.dumps(cfg.resolved(), indent=2, sort_keys=True) + "\n")
    paths.append(path)
    return paths, failures


def _run_prior(cfg: ScenarioConfig, out: Path):
    paths: list[Path] = []
    failures: list[CellFailure] = []
    rows = ["instance,N,t,epsilon,p,lhs,bound,ok"]
    rng = np.random.default_rng(cfg.seed)
    for n in cfg.n_list:
        params = kitaev.ChainParams(N=n, mu=cfg.mu0, delta=cfg.delta0, J=cfg.j_scale)
        for inst in range(cfg.prior_instances):
            try:
                t = float(rng.uniform(0.5, 1.0) * cfg.prior_time)
                rep = prior_knowledge_experiment(cfg.prior_i1, cfg.prior_i2, params,
                                                 t, nd=max(cfg.nd_list),
                                                 seed=cfg.seed + inst)
                rows.append(f"{inst},{n},{t!r},{rep.epsilon!r},{rep.p!r},"
                            f"{rep.lhs!r},{rep.bound!r},{int(rep.ok)}")
                if not rep.ok:
                    failures.append(CellFailure(n, inst, "bound violated"))
            except Exception as exc:  # noqa: BLE001 - isolation boundary
                failures.append(CellFailure(n, inst, f"{type(exc).__name__}: {exc}"))
    path = out / f"{cfg.scenario_id}_prior.csv"
    path.write_text("\n".join(rows) + "\n")
    (out / f"{cfg.scenario_id}_prior.meta.json").write_text(
        json.dumps(cfg.resolved(), indent=2, sort_keys=True) + "\n")
    paths.append(path)
    return paths, failures


@dataclass(frozen=True)
class MemoryTime:
    """First threshold crossing of a fidelity curve, from a smoothing fit."""

    t0: float | None
    f0: float
    beyond_horizon: bool
    horizon: float
    degree: int
    window: float
    residual: float
    sensitivity: dict
    fallback: bool = False

    def to_row(self, n: int) -> str:
        t0 = "" if self.t0 is None else repr(self.t0)
        return (f"{n},{self.f0!r},{t0},{self.horizon!r},{int(self.beyond_horizon)},"
                f"{self.degree},{self.residual!r}")


TABLE_HEADER = "N,F0,t0,horizon,beyond_horizon,degree,residual"


def _fit_first_root(times, values, f0, degree):
    poly = np.polynomial.Polynomial.fit(times, values, degree)
    resid = float(np.sqrt(np.mean((poly(times) - values) ** 2)))
    roots = (poly - f0).roots()
    real = roots[np.abs(roots.imag) < 1e-8 * max(1.0, np.abs(roots.real).max())].real
    real = real[(real >= times[0]) & (real <= times[-1] * 1.0 + 1e-12)]
    if real.size == 0:
        return None, resid
    return float(np.min(real)), resid


def memory_time(curve: FidelityCurve, f0: float, degree: int = 6,
                window_margin: float = 0.2) -> MemoryTime:
    """Time at which the smoothed optimal fidelity first crosses f0.

    The raw curve is fit with a least-squares polynomial over the window
    from zero to the first raw crossing plus a 20 percent margin, which
    suppresses fast oscillations; the crossing is the first root of the fit.
    Sensitivity of the root to the polynomial degree is reported rather than
    hidden.
    """
    if curve.f_opt is None:
        raise ValueError("memory time needs the optimal-fidelity column")
    if not (2.0 / 3.0 < f0 < 1.0):
        raise ValueError("threshold must lie in (2/3, 1)")
    times, values = curve.times, curve.f_opt
    below = np.flatnonzero(values < f0)
    horizon = float(times[-1])
    if below.size == 0:
        return MemoryTime(None, f0, True, horizon, degree, horizon, 0.0, {})
    t_raw = float(times[below[0]])
    window = min(horizon, t_raw * (1.0 + window_margin)) if t_raw > 0 else horizon
    mask = times <= window
    if mask.sum() < degree + 2:
        mask = np.ones_like(mask, dtype=bool)
        window = horizon
    t0, resid = _fit_first_root(times[mask], values[mask], f0, degree)
    sensitivity = {}
    for d in (4, 5, 6, 7, 8):
        if mask.sum() >= d + 2:
            alt, _ = _fit_first_root(times[mask], values[mask], f0, d)
            if alt is not None:
                sensitivity[d] = alt
    fallback = t0 is None
    if fallback:
        # fit misses the crossing (flat window): linear interpolation of the raw samples
        i = below[0]
        if i == 0:
            t0 = float(times[0])
        else:
            t_lo, t_hi = times[i - 1], times[i]
            v_lo, v_hi = values[i - 1], values[i]
            t0 = float(t_lo + (f0 - v_lo) * (t_hi - t_lo) / (v_hi - v_lo))
    return MemoryTime(t0, f0, False, horizon, degree, float(window), resid,
                      sensitivity, fallback)


@dataclass(frozen=True)
class ExtrapolationResult:
    limit: float
    mode: str
    diagnostic: float


def extrapolate_nd(values, kind: str = "gauss") -> ExtrapolationResult:
    """Infinite-ensemble limit from a series of (N_d, fidelity) points.

    Gaussian fidelities scale linearly in 1/N_d, so the limit is the linear
    intercept; optimal fidelities converge without a known functional form,
    so the largest-N_d value is returned with the spread of the two largest
    entries as a convergence diagnostic.
    """
    pts = sorted((int(nd), float(f)) for nd, f in values)
    if len(pts) < 3:
        raise ValueError("extrapolation needs at least three ensemble sizes")
    if len({nd for nd, _ in pts}) < 3:
        raise ValueError("extrapolation needs three distinct ensemble sizes")
    nds = np.array([nd for nd, _ in pts], dtype=float)
    fs = np.array([f for _, f in pts])
    if kind == "gauss":
        slope, intercept = np.polyfit(1.0 / nds, fs, 1)
        resid = float(np.max(np.abs(intercept + slope / nds - fs)))
        return ExtrapolationResult(float(intercept), "1/Nd-linear", resid)
    if kind == "opt":
        spread = float(abs(fs[-1] - fs[-2]))
        return ExtrapolationResult(float(fs[-1]), "empirical-convergence", spread)
    raise ValueError(f"unknown extrapolation kind {kind!r}")


@dataclass(frozen=True)
class ScalingFit:
    rate: float
    prefactor: float
    r_squared: float
    n_used: int


def scaling_fit(rows) -> ScalingFit:
    """Least-squares fit of log t0 = log A + c N over a memory-time table."""
    rows = list(rows)
    clean = [(int(n), float(t0)) for n, t0 in rows
             if t0 is not None and np.isfinite(t0) and t0 > 0]
    dropped = len(rows) - len(clean)
    if dropped:
        logger.warning("scaling fit dropped %d rows without finite memory time", dropped)
    if len(clean) < 4:
        raise ValueError("scaling fit needs at least four finite memory times")
    ns = np.array([n for n, _ in clean], dtype=float)
    logt = np.log([t for _, t in clean])
    slope, intercept = np.polyfit(ns, logt, 1)
    pred = intercept + slope * ns
    ss_res = float(np.sum((logt - pred) ** 2))
    ss_tot = float(np.sum((logt - logt.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(float(slope), float(np.exp(intercept)), r2, len(clean))
