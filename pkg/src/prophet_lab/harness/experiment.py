"""Experiment configs, competitive-ratio reports and instance suites.

Monte Carlo work is split into fixed chunks of ``CHUNK`` samples.  Chunk
``r`` draws from ``substream(seed, r)`` and chunk statistics are merged in
chunk order, so results do not depend on how many workers run the chunks.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..allocation import optimal_allocation
from ..errors import CapacityError, ParameterError, ProphetLabError, ValidationError
from ..mechanisms import (
    as_prices,
    balanced_prices_xos,
    expected_opt,
    expected_welfare_exact,
    posted_price_outcome,
    single_item_price,
)
from ..rsg import IRSG, expected_alg_exact, mirror_samples
from ..stats import RunningStats, substream
from ..valuations import Instance
from .io import ParseError, load_instance, load_irsg, read_json

MECHANISMS = ("single-item", "balanced-xos", "correa-cristi", "custom-prices")
MODES = ("exact", "monte-carlo")
FORMATS = ("csv", "json")
CHUNK = 10_000
RATIO_TOL = 1e-9
UNDEFINED = "undefined"
INFINITE = "inf"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an instance, a mechanism and an evaluation mode.

    ``prices`` is used by ``custom-prices`` and ``irsg`` (a file path) by
    ``correa-cristi``.  ``extra`` keeps any further keys of the config file
    for subcommands that need them.
    """

    instance: Path
    mechanism: str = "single-item"
    mode: str = "exact"
    samples: int = 100_000
    seed: int = 0
    out: Path | None = None
    format: str = "json"
    prices: tuple[float, ...] | None = None
    irsg: Path | None = None
    order: tuple[int, ...] | None = None
    check_class: str | None = None
    workers: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValidationError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.format not in FORMATS:
            raise ValidationError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.mode == "monte-carlo" and self.samples < 1:
            raise ParameterError("monte-carlo mode needs samples >= 1")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        if not Path(self.instance).is_file():
            raise ValidationError(f"instance file {self.instance} does not exist")
        if self.irsg is not None and not Path(self.irsg).is_file():
            raise ValidationError(f"irsg file {self.irsg} does not exist")
        if self.mechanism == "custom-prices" and self.prices is None:
            raise ValidationError("custom-prices needs a 'prices' list")
        if self.mechanism == "correa-cristi" and self.irsg is None:
            raise ValidationError("correa-cristi needs an 'irsg' file")


_KNOWN = {"instance", "mechanism", "mode", "samples", "seed", "out", "format", "prices",
          "irsg", "order", "check_class", "workers"}


def config_from_dict(data: Any, base: Path | None = None, **overrides) -> ExperimentConfig:
    """Build a config; relative paths resolve against ``base``.  ``None`` overrides are ignored."""
    if not isinstance(data, dict):
        raise ParseError("config: expected an object")
    base = Path(".") if base is None else Path(base)

    def path(key):
        value = data.get(key)
        if value is None:
            return None
        if not isinstance(value, str):
            raise ParseError(f"config.{key}: expected a path string")
        p = Path(value)
        return p if p.is_absolute() else base / p

    if "instance" not in data:
        raise ParseError("config.instance: missing field")
    kwargs = {k: data[k] for k in ("mechanism", "mode", "samples", "seed", "format", "check_class",
                                   "workers") if k in data}
    for k in ("samples", "seed", "workers"):
        if k in kwargs and (not isinstance(kwargs[k], int) or isinstance(kwargs[k], bool)):
            raise ParseError(f"config.{k}: expected an integer")
    if "prices" in data:
        kwargs["prices"] = tuple(float(p) for p in data["prices"])
    if "order" in data:
        kwargs["order"] = tuple(int(i) for i in data["order"])
    kwargs["extra"] = {k: v for k, v in data.items() if k not in _KNOWN}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(instance=path("instance"), out=path("out"), irsg=path("irsg"), **kwargs)


def load_config(path, **overrides) -> ExperimentConfig:
    path = Path(path)
    return config_from_dict(read_json(path), path.parent, **overrides)


@dataclass(frozen=True)
class Report:
    """Expected welfare of OPT and of one mechanism, with their ratio.

    Half-widths are 95% normal-approximation intervals and are ``None`` in
    exact mode.  ``wall_time`` is informational and left out of
    :meth:`to_dict` so serialized reports are reproducible.
    """

    instance: str
    mechanism: str
    mode: str
    seed: int
    samples: int | None
    e_opt: float
    e_alg: float
    revenue: float
    utility: float
    e_opt_half_width: float | None = None
    e_alg_half_width: float | None = None
    revenue_half_width: float | None = None
    utility_half_width: float | None = None
    wall_time: float = 0.0

    @property
    def ratio(self) -> float | str:
        """``E[OPT] / E[ALG]``, or a marker when ``E[ALG] = 0``."""
        if self.e_alg > 0:
            return self.e_opt / self.e_alg
        return UNDEFINED if self.e_opt == 0 else INFINITE

    def to_dict(self) -> dict:
        return {
            "instance": self.instance,
            "mechanism": self.mechanism,
            "mode": self.mode,
            "seed": self.seed,
            "samples": self.samples,
            "e_opt": self.e_opt,
            "e_alg": self.e_alg,
            "ratio": self.ratio,
            "revenue": self.revenue,
            "utility": self.utility,
            "e_opt_half_width": self.e_opt_half_width,
            "e_alg_half_width": self.e_alg_half_width,
            "revenue_half_width": self.revenue_half_width,
            "utility_half_width": self.utility_half_width,
        }


REPORT_COLUMNS = (
    "instance", "mechanism", "mode", "seed", "samples", "e_opt", "e_alg", "ratio", "revenue",
    "utility", "e_opt_half_width", "e_alg_half_width", "revenue_half_width", "utility_half_width",
)
SUITE_COLUMNS = REPORT_COLUMNS + ("error",)


def mechanism_prices(inst: Instance, cfg: ExperimentConfig) -> np.ndarray:
    if cfg.mechanism == "single-item":
        return single_item_price(inst)
    if cfg.mechanism == "balanced-xos":
        return balanced_prices_xos(inst)
    if cfg.mechanism == "custom-prices":
        return as_prices(cfg.prices, inst.m)
    raise ValidationError(f"{cfg.mechanism} does not post prices")


def _sample_profiles(inst: Instance, rng: np.random.Generator, size: int) -> np.ndarray:
    """``(size, n)`` support indices, drawn bidder by bidder."""
    cols = []
    for d in inst.bidders:
        k = np.searchsorted(np.cumsum(d.probs), rng.random(size), side="right")
        cols.append(np.minimum(k, d.size - 1))
    return np.stack(cols, axis=1)


class _ProfileCache:
    """Per-profile OPT and mechanism outcomes, keyed by support indices."""

    def __init__(self, inst: Instance, prices: np.ndarray | None, order):
        self.inst, self.prices, self.order = inst, prices, order
        self.opt: dict[tuple, float] = {}
        self.mech: dict[tuple, tuple[float, float, float]] = {}

    def _vals(self, key):
        return tuple(d.support[k][1] for d, k in zip(self.inst.bidders, key))

    def opt_of(self, key) -> float:
        if key not in self.opt:
            self.opt[key] = optimal_allocation(self._vals(key)).value
        return self.opt[key]

    def mech_of(self, key) -> tuple[float, float, float]:
        if key not in self.mech:
            tr = posted_price_outcome(self._vals(key), self.prices, self.order, key)
            self.mech[key] = (tr.welfare, tr.revenue, tr.utility)
        return self.mech[key]


def _chunk_sizes(samples: int) -> list[int]:
    full, rest = divmod(samples, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def _mc_chunk(inst: Instance, cfg: ExperimentConfig, prices, g: IRSG | None, r: int,
              size: int) -> tuple[RunningStats, ...]:
    rng = substream(cfg.seed, r)
    cache = _ProfileCache(inst, prices, cfg.order)
    opt_keys = [tuple(int(k) for k in row) for row in _sample_profiles(inst, rng, size)]
    opt = RunningStats.of([cache.opt_of(k) for k in opt_keys])
    if g is not None:
        alg, _ = mirror_samples(inst, g, size, rng, cfg.order)
        zero = RunningStats.of(np.zeros(size))
        return opt, RunningStats.of(alg), zero, RunningStats.of(alg)
    keys = [tuple(int(k) for k in row) for row in _sample_profiles(inst, rng, size)]
    out = np.array([cache.mech_of(k) for k in keys])
    return opt, RunningStats.of(out[:, 0]), RunningStats.of(out[:, 1]), RunningStats.of(out[:, 2])


def _map(fn, jobs, workers: int) -> list:
    if workers == 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda j: fn(*j), jobs))


def estimate_ratio(cfg: ExperimentConfig, inst: Instance | None = None) -> Report:
    """Exact or Monte Carlo ``E[OPT]`` and ``E[ALG]`` for the configured mechanism.

    Monte Carlo mode draws OPT profiles and mechanism runs from the same
    per-chunk stream, OPT first.  The Correa-Cristi mechanism posts no prices,
    so its revenue is zero and its utility equals its welfare.
    """
    start = time.perf_counter()
    inst = load_instance(cfg.instance, cfg.check_class) if inst is None else inst
    g = load_irsg(cfg.irsg, inst) if cfg.mechanism == "correa-cristi" else None
    prices = None if g is not None else mechanism_prices(inst, cfg)
    name = str(cfg.instance)
    if cfg.mode == "exact":
        try:
            e_opt = expected_opt(inst)
            if g is not None:
                w = expected_alg_exact(inst, g, cfg.order)
                r, u = 0.0, w
            else:
                w, r, u = expected_welfare_exact(inst, prices, cfg.order)
        except CapacityError as exc:
            raise CapacityError(f"{exc}; use monte-carlo mode") from exc
        return Report(name, cfg.mechanism, cfg.mode, cfg.seed, None, float(e_opt), float(w),
                      float(r), float(u), wall_time=time.perf_counter() - start)
    jobs = [(inst, cfg, prices, g, r, size) for r, size in enumerate(_chunk_sizes(cfg.samples))]
    parts = _map(_mc_chunk, jobs, cfg.workers)
    acc = [RunningStats()] * 4
    for part in parts:
        acc = [a.merge(b) for a, b in zip(acc, part)]
    opt, alg, rev, utl = acc
    return Report(name, cfg.mechanism, cfg.mode, cfg.seed, cfg.samples, opt.mean, alg.mean, rev.mean,
                  utl.mean, opt.half_width, alg.half_width, rev.half_width, utl.half_width,
                  wall_time=time.perf_counter() - start)


def _opt_chunk(inst: Instance, seed: int, r: int, size: int) -> RunningStats:
    cache = _ProfileCache(inst, None, None)
    keys = _sample_profiles(inst, substream(seed, r), size)
    return RunningStats.of([cache.opt_of(tuple(int(k) for k in row)) for row in keys])


def estimate_opt_mc(cfg: ExperimentConfig, inst: Instance | None = None) -> RunningStats:
    """Monte Carlo ``E[OPT]`` alone.

    Uses the same draws as the OPT column of :func:`estimate_ratio`, so the
    two agree for equal seeds.
    """
    inst = load_instance(cfg.instance, cfg.check_class) if inst is None else inst
    jobs = [(inst, cfg.seed, r, size) for r, size in enumerate(_chunk_sizes(cfg.samples))]
    acc = RunningStats()
    for part in _map(_opt_chunk, jobs, cfg.workers):
        acc = acc.merge(part)
    return acc


def format_value(x: Any) -> str:
    """Locale-free CSV cell: ``repr`` floats, empty for ``None``."""
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()


def run_suite(paths: Sequence, defaults: ExperimentConfig | dict | None = None,
              mechanisms: Sequence[str] = ("single-item",), base: Path | None = None) -> str:
    """One CSV row per (instance, mechanism); failures go in the ``error`` column."""
    if not paths:
        raise ValidationError("suite needs at least one instance")
    rows = []
    for p in paths:
        for mech in mechanisms:
            row: dict = {"instance": str(p), "mechanism": mech}
            try:
                if isinstance(defaults, ExperimentConfig):
                    cfg = replace(defaults, instance=Path(p), mechanism=mech)
                else:
                    data = dict(defaults or {}, instance=str(p), mechanism=mech)
                    cfg = config_from_dict(data, base)
                row.update(estimate_ratio(cfg).to_dict())
                row["error"] = ""
            except (ProphetLabError, OSError) as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return to_csv(rows, SUITE_COLUMNS)


__all__ = [
    "estimate_opt_mc",
    "CHUNK", "ExperimentConfig", "FORMATS", "INFINITE", "MECHANISMS", "MODES", "REPORT_COLUMNS",
    "RATIO_TOL", "Report", "SUITE_COLUMNS", "UNDEFINED", "config_from_dict", "estimate_ratio",
    "format_value", "load_config", "mechanism_prices", "run_suite", "to_csv",
]
