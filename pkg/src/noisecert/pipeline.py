"""Sweep orchestration: certificate, transfer, fixed point, bootstrap, Lyapunov exponent.

One :class:`ResultRow` is produced per noise amplitude.  A failing amplitude
becomes a row with ``verdict="failed"`` and a diagnostic message; the sweep
continues with the next one.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

from .certification import certify_density
from .contraction import ContractionCertificate, TransferFailedError, certify_contraction, coarse_fine_transfer
from .dynamics import MapModel, builtin_map, load_map
from .interval import Interval
from .noise import NoiseKernel
from .observables import ObservableSpec, e_ladder, estimate_lyapunov
from .ulam import assemble_cached

log = logging.getLogger(__name__)

__all__ = ["ConfigError", "ExperimentConfig", "ResultRow", "load_config", "run_sweep", "run_one", "emit",
           "read_json_rows"]


class ConfigError(ValueError):
    """Invalid or unloadable experiment configuration."""


@dataclass
class ExperimentConfig:
    """Parameters of a sweep over noise amplitudes.

    Grid sizes are base-2 logarithms of the number of cells.  ``log2_delta_contr``
    is the first grid tried for the contraction certificate; when the transfer to
    the fine grid fails it is refined up to ``max_log2_delta_contr`` (default:
    two octaves finer, capped at the fine grid).
    """

    map: str = "bz"
    map_params: dict = field(default_factory=dict)
    map_file: str | None = None
    xi: list = field(default_factory=list)
    log2_delta: int = 16
    log2_delta_contr: int = 11
    max_log2_delta_contr: int | None = None
    log2_delta_est: int = 10
    target_alpha: float = 0.5
    tol: float = 1e-13
    e_r_max: float = 2.0**-6
    e_r_min: float = 2.0**-16
    out_dir: str = "results"
    workers: int = 1
    cache_dir: str | None = None

    def validate(self) -> None:
        if not self.xi:
            raise ConfigError("the xi list is empty")
        if any(not (0.0 < float(x) <= 1.0) for x in self.xi):
            raise ConfigError("noise amplitudes must lie in (0, 1]")
        if not (self.log2_delta_contr <= self.log2_delta and self.log2_delta_est <= self.log2_delta):
            raise ConfigError("contraction and estimate grids must be coarser than the fine grid")
        top = self.max_log2_delta_contr
        if top is not None and not (self.log2_delta_contr <= top <= self.log2_delta):
            raise ConfigError("max_log2_delta_contr must lie between log2_delta_contr and log2_delta")
        if not (0.0 < self.target_alpha < 1.0):
            raise ConfigError("target_alpha must lie in (0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    def model(self) -> MapModel:
        if self.map_file:
            return load_map(self.map_file)
        try:
            return builtin_map(self.map, **self.map_params)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path: str | None = None, **overrides) -> ExperimentConfig:
    """Read a TOML or JSON document and apply non-``None`` overrides."""
    data: dict = {}
    if path:
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            if path.endswith(".json"):
                data = json.loads(raw)
            else:
                try:
                    import tomllib
                except ImportError:  # Python < 3.11
                    import tomli as tomllib

                data = tomllib.loads(raw.decode())
        except Exception as exc:  # noqa: BLE001 - any parse failure is a config error
            raise ConfigError(f"cannot parse config {path}: {exc}") from None
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None and v != ()})
    if "xi" in data:
        data["xi"] = [float(x) for x in data["xi"]]
    cfg = ExperimentConfig(**data)
    cfg.validate()
    return cfg


@dataclass
class ResultRow:
    """One row of the results table (field order is the CSV column order)."""

    xi: float
    delta_contr: str = ""
    alpha_contr: float = math.nan
    n_contr: int = 0
    delta: str = ""
    alpha: float = math.nan
    sum_Ci: float = math.nan
    a_priori_err: float = math.nan
    delta_est: str = ""
    refined_err: float = math.nan
    lyapunov_lo: float = math.nan
    lyapunov_hi: float = math.nan
    verdict: str = "failed"
    wall_clock: float = 0.0
    diagnostics: str = ""
    provenance: dict = field(default_factory=dict)

    CSV_FIELDS = ("xi", "delta_contr", "alpha_contr", "n_contr", "delta", "alpha", "sum_Ci", "a_priori_err",
                  "delta_est", "refined_err", "lyapunov_lo", "lyapunov_hi", "verdict", "wall_clock")

    @property
    def lyapunov(self) -> Interval:
        return Interval(self.lyapunov_lo, self.lyapunov_hi)

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("xi", "alpha_contr", "alpha", "sum_Ci", "a_priori_err", "refined_err", "lyapunov_lo",
                    "lyapunov_hi", "wall_clock"):
            d[key] = repr(float(d[key]))
        return d

    @staticmethod
    def from_json(d: dict) -> "ResultRow":
        d = dict(d)
        for key in ("xi", "alpha_contr", "alpha", "sum_Ci", "a_priori_err", "refined_err", "lyapunov_lo",
                    "lyapunov_hi", "wall_clock"):
            d[key] = float(d[key])
        return ResultRow(**d)


def _cert_cache_path(cache_dir: str | None, m: MapModel, k: int, xi: float, alpha: float) -> str | None:
    if not cache_dir:
        return None
    return os.path.join(cache_dir, f"cert-{m.content_hash()}-k{k}-xi{xi!r}-a{alpha!r}.json")


def _coarse_certificate(m: MapModel, k: int, xi: float, cfg: ExperimentConfig) -> ContractionCertificate:
    path = _cert_cache_path(cfg.cache_dir, m, k, xi, cfg.target_alpha)
    if path and os.path.exists(path):
        with open(path) as fh:
            return ContractionCertificate.from_dict(json.load(fh))
    op = assemble_cached(m, k, cfg.cache_dir)
    cert = certify_contraction(op, NoiseKernel(xi), target_alpha=cfg.target_alpha, workers=cfg.workers)
    if path:
        os.makedirs(cfg.cache_dir, exist_ok=True)
        cert.save(path)
    return cert


def run_one(m: MapModel, xi: float, cfg: ExperimentConfig, spec: ObservableSpec | None = None) -> ResultRow:
    """Full pipeline for one noise amplitude; exceptions propagate."""
    t0 = time.perf_counter()
    k = 2**cfg.log2_delta
    kernel = NoiseKernel(xi)
    top = cfg.max_log2_delta_contr
    if top is None:
        top = min(cfg.log2_delta_contr + 2, cfg.log2_delta)
    attempts = []
    fine = coarse = None
    for lc in range(cfg.log2_delta_contr, top + 1):
        coarse = _coarse_certificate(m, 2**lc, xi, cfg)
        if lc == cfg.log2_delta:
            fine = coarse
            break
        try:
            fine = coarse_fine_transfer(coarse, k, kernel, cfg.target_alpha)
            break
        except TransferFailedError as exc:
            attempts.append({"log2_delta_contr": lc, "transferred_alpha": repr(exc.value)})
            log.info("transfer from 2^-%d failed (%.3g); refining the contraction grid", lc, exc.value)
    if fine is None:
        raise TransferFailedError(f"no contraction grid up to 2^-{top} transfers to k={k}", math.inf)
    op = assemble_cached(m, k, cfg.cache_dir)
    dens = certify_density(m, op, kernel, fine, k_est=2**cfg.log2_delta_est, tol=cfg.tol)
    spec = spec or ObservableSpec.for_map(m)
    lam = estimate_lyapunov(dens, spec, e_ladder(spec, cfg.e_r_max, cfg.e_r_min))
    b = dens.budget
    return ResultRow(
        xi=xi,
        delta_contr=f"2^-{int(math.log2(coarse.k))}",
        alpha_contr=coarse.alpha,
        n_contr=coarse.n_bar,
        delta=f"2^-{cfg.log2_delta}",
        alpha=fine.alpha,
        sum_Ci=fine.sum_Ci,
        a_priori_err=float(b.a_priori),
        delta_est=f"2^-{cfg.log2_delta_est}",
        refined_err=float(b.final_l1),
        lyapunov_lo=lam.lam.lo,
        lyapunov_hi=lam.lam.hi,
        verdict=lam.verdict,
        wall_clock=time.perf_counter() - t0,
        diagnostics="; ".join(f"transfer from {a['log2_delta_contr']} gave {a['transferred_alpha']}"
                              for a in attempts),
        provenance={"map": m.identifier, "map_hash": m.content_hash(),
                    "coarse_certificate": coarse.to_dict(), "fine_certificate": fine.to_dict(),
                    "density": dens.report(), "lyapunov": lam.to_dict(), "escalation": attempts},
    )


def run_sweep(cfg: ExperimentConfig, on_row=None) -> list[ResultRow]:
    """Run every amplitude of ``cfg.xi``; rows are passed to ``on_row`` as they finish."""
    cfg.validate()
    m = cfg.model()
    spec = ObservableSpec.for_map(m)
    rows = []
    for xi in cfg.xi:
        t0 = time.perf_counter()
        try:
            row = run_one(m, float(xi), cfg, spec)
        except Exception as exc:  # noqa: BLE001 - failure isolation per amplitude
            log.warning("xi=%g failed: %s", xi, exc)
            row = ResultRow(xi=float(xi), verdict="failed", wall_clock=time.perf_counter() - t0,
                            diagnostics=f"{type(exc).__name__}: {exc}")
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows


def emit(rows: list[ResultRow], fmt: str, path: str) -> str:
    """Write ``rows`` as ``csv``, ``json`` or ``plotdata`` (``xi lam_lo lam_hi``, sorted by xi)."""
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(ResultRow.CSV_FIELDS)
            for r in rows:
                w.writerow([repr(v) if isinstance(v, float) else v
                            for v in (getattr(r, name) for name in ResultRow.CSV_FIELDS)])
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump([r.to_json() for r in rows], fh, indent=1)
    elif fmt == "plotdata":
        with open(path, "w") as fh:
            fh.write("# xi lambda_lo lambda_hi\n")
            for r in sorted(rows, key=lambda r: r.xi):
                if r.verdict != "failed":
                    fh.write(f"{r.xi!r} {r.lyapunov_lo!r} {r.lyapunov_hi!r}\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def read_json_rows(path: str) -> list[ResultRow]:
    with open(path) as fh:
        return [ResultRow.from_json(d) for d in json.load(fh)]
