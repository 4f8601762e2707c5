"""Scenario configuration: TOML schema, validation and resolved dumps.

All physical values are in units of the hopping scale J (energies) and 1/J
(times).  See the README for the full schema; unknown sections or keys are
rejected so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

SCENARIO_KINDS = (
    "quench",
    "swap-drive",
    "square-wave-drive",
    "thermal-quench",
    "lindblad",
    "diagnostics",
    "prior-knowledge",
)


class ConfigError(ValueError):
    """Raised for malformed or inconsistent scenario files."""


@dataclass(frozen=True)
class TimeGridSpec:
    start: float
    stop: float
    count: int
    auto_extend_f0: float | None = None
    max_stop: float = 4096.0

    def __post_init__(self):
        if self.count < 2:
            raise ConfigError("time grid needs at least two points")
        if not (self.stop > self.start >= 0.0):
            raise ConfigError("time grid must satisfy 0 <= start < stop")
        if self.auto_extend_f0 is not None and not (2.0 / 3.0 < self.auto_extend_f0 < 1.0):
            raise ConfigError("auto-extension threshold must lie in (2/3, 1)")


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    scenario_id: str
    seed: int
    output_dir: str
    n_list: tuple[int, ...]
    nd_list: tuple[int, ...]
    time_grid: TimeGridSpec
    mu0: float = 0.0
    delta0: float = 1.0
    j_scale: float = 1.0
    mu_minus: float | None = None
    mu_plus: float | None = None
    beta: float | None = None
    loss_rate: float | None = None
    omega: float | None = None
    mu_bar: float | None = None
    delta_bar: float | None = None
    dmu: float = 0.0
    ddelta: float = 0.0
    disorder: float = 0.0
    diag_pair: tuple[float, float] | None = None
    diag_time: float = 5.0
    prior_i1: tuple[float, float] | None = None
    prior_i2: tuple[float, float] | None = None
    prior_time: float = 5.0
    prior_instances: int = 10
    workers: int = 1
    fit_degree: int = 6
    window_margin: float = 0.2

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        if not self.n_list or any(n < 2 for n in self.n_list):
            raise ConfigError("need chain sizes N >= 2")
        if not self.nd_list or any(nd < 1 for nd in self.nd_list):
            raise ConfigError("need realization counts N_d >= 1")
        if self.workers < 1:
            raise ConfigError("worker count must be positive")
        needs_interval = self.kind in ("quench", "swap-drive", "thermal-quench")
        if needs_interval and (self.mu_minus is None or self.mu_plus is None):
            raise ConfigError(f"{self.kind} scenarios need ensemble.mu_minus/mu_plus")
        if self.kind == "thermal-quench" and not (self.beta and self.beta > 0):
            raise ConfigError("thermal-quench scenarios need thermal.beta > 0")
        if self.kind == "lindblad" and (self.loss_rate is None or self.loss_rate < 0):
            raise ConfigError("lindblad scenarios need lindblad.loss_rate >= 0")
        if self.kind == "square-wave-drive":
            if not (self.omega and self.omega > 0):
                raise ConfigError("drive scenarios need drive.omega > 0")
            if self.mu_bar is None or self.delta_bar is None:
                raise ConfigError("drive scenarios need drive.mu_bar and drive.delta_bar")
        if self.kind == "diagnostics" and self.diag_pair is None:
            raise ConfigError("diagnostics scenarios need diagnostics.mu_pair")
        if self.kind == "prior-knowledge":
            if self.prior_i1 is None or self.prior_i2 is None:
                raise ConfigError("prior-knowledge scenarios need prior.i1 and prior.i2")
            lo1, hi1 = self.prior_i1
            lo2, hi2 = self.prior_i2
            if not (lo1 <= lo2 <= hi2 <= hi1):
                raise ConfigError("prior.i2 must be contained in prior.i1")

    def resolved(self) -> dict:
        out = asdict(self)
        out["time_grid"] = asdict(self.time_grid)
        return out


_KNOWN_SECTIONS = {"scenario", "chain", "ensemble", "time_grid", "thermal",
                   "lindblad", "drive", "diagnostics", "prior", "sweep", "fit"}


def _get(section: dict, key: str, default=None, required=False, where=""):
    if key in section:
        return section.pop(key)
    if required:
        raise ConfigError(f"missing required key {key!r} in [{where}]")
    return default


def _reject_leftovers(section: dict, where: str):
    if section:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(section)}")


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    unknown = set(raw) - _KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")

    sc = dict(raw.get("scenario", {}))
    chain = dict(raw.get("chain", {}))
    ens = dict(raw.get("ensemble", {}))
    tg = dict(raw.get("time_grid", {}))
    thermal = dict(raw.get("thermal", {}))
    lind = dict(raw.get("lindblad", {}))
    drive = dict(raw.get("drive", {}))
    diag = dict(raw.get("diagnostics", {}))
    prior = dict(raw.get("prior", {}))
    sweep = dict(raw.get("sweep", {}))
    fit = dict(raw.get("fit", {}))

    kind = _get(sc, "kind", required=True, where="scenario")
    grid = TimeGridSpec(
        start=float(_get(tg, "start", 0.0)),
        stop=float(_get(tg, "stop", required=(kind not in ("prior-knowledge",)), where="time_grid") or 1.0),
        count=int(_get(tg, "count", 2 if kind == "prior-knowledge" else None,
                       required=(kind not in ("prior-knowledge",)), where="time_grid")),
        auto_extend_f0=(lambda v: float(v) if v is not None else None)(_get(tg, "auto_extend_f0")),
        max_stop=float(_get(tg, "max_stop", 4096.0)),
    )
    diag_pair = _get(diag, "mu_pair")
    cfg = ScenarioConfig(
        kind=str(kind),
        scenario_id=str(_get(sc, "id", path.stem)),
        seed=int(_get(sc, "seed", 0)),
        output_dir=str(_get(sc, "output_dir", "out")),
        n_list=tuple(int(n) for n in _get(sweep, "n", required=True, where="sweep")),
        nd_list=tuple(int(n) for n in _get(ens, "nd", [1])),
        time_grid=grid,
        mu0=float(_get(chain, "mu0", 0.0)),
        delta0=float(_get(chain, "delta0", 1.0)),
        j_scale=float(_get(chain, "J", 1.0)),
        mu_minus=(lambda v: float(v) if v is not None else None)(_get(ens, "mu_minus")),
        mu_plus=(lambda v: float(v) if v is not None else None)(_get(ens, "mu_plus")),
        beta=(lambda v: float(v) if v is not None else None)(_get(thermal, "beta")),
        loss_rate=(lambda v: float(v) if v is not None else None)(_get(lind, "loss_rate")),
        omega=(lambda v: float(v) if v is not None else None)(_get(drive, "omega")),
        mu_bar=(lambda v: float(v) if v is not None else None)(_get(drive, "mu_bar")),
        delta_bar=(lambda v: float(v) if v is not None else None)(_get(drive, "delta_bar")),
        dmu=float(_get(drive, "dmu", 0.0)),
        ddelta=float(_get(drive, "ddelta", 0.0)),
        disorder=float(_get(drive, "disorder", 0.0)),
        diag_pair=tuple(float(v) for v in diag_pair) if diag_pair is not None else None,
        diag_time=float(_get(diag, "t", 5.0)),
        prior_i1=(lambda v: tuple(float(x) for x in v) if v else None)(_get(prior, "i1")),
        prior_i2=(lambda v: tuple(float(x) for x in v) if v else None)(_get(prior, "i2")),
        prior_time=float(_get(prior, "t", 5.0)),
        prior_instances=int(_get(prior, "instances", 10)),
        workers=int(_get(sweep, "workers", 1)),
        fit_degree=int(_get(fit, "degree", 6)),
        window_margin=float(_get(fit, "window_margin", 0.2)),
    )
    for section, name in ((sc, "scenario"), (chain, "chain"), (ens, "ensemble"),
                          (tg, "time_grid"), (thermal, "thermal"), (lind, "lindblad"),
                          (drive, "drive"), (diag, "diagnostics"), (prior, "prior"),
                          (sweep, "sweep"), (fit, "fit")):
        _reject_leftovers(section, name)
    return cfg


def dump_resolved(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.resolved(), indent=2, sort_keys=True) + "\n")
