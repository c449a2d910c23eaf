"""Named verification experiments and the file-producing runner.

Each experiment composes the simulation modules into Monte Carlo samples and
turns them into :class:`~hplab.stats.TestReport` verdicts.  ``run`` writes

``manifest.json``
    config echo, package version, seed layout, flagged replicates, wall
    clock, SHA-256 digests of the other files.
``reports.json``
    list of serialised test reports.
``samples.csv``
    ``replicate_id,statistic_name,value,flagged``
``paths.csv``
    ``replicate_id,t,component_index,value``
``density.csv``
    ``x,pdf,cdf`` (density-eval only).

Replicates are processed in chunks of ``chunk`` on ``threads`` workers.  Every
replicate owns its substreams, so outputs do not depend on either setting.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from . import __version__
from .convergence import det_identity_study, explicit_solution_study
from .errors import ConfigError
from .functionals import (
    TailPolicy,
    bougerol_integral,
    bougerol_integral_infinite,
    dufresne_integral,
    scalar_bougerol_functional,
)
from .measures import Density1D
from .rng import ROLE_SHIFT, Role, replicate_streams, substream
from .sde import (
    ModelParams,
    PathGrid,
    simulate_exp_bm,
    simulate_hp_diffusion,
    simulate_scalar,
    simulate_singular_log,
)
from .stats import EmpiricalSample, TestReport, ks_one_sample, ks_two_sample, lyapunov_slope

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "EXPERIMENTS",
    "list_experiments",
    "execute",
    "run",
    "replay",
    "EXIT_PASS",
    "EXIT_FAIL",
    "EXIT_USAGE",
    "EXIT_NUMERICAL",
]

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3
CSV_SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    """Flat experiment configuration; ``None`` fields take the experiment's defaults."""

    experiment: str
    N: int | None = None
    s_re: float | None = None
    s_im: float | None = None
    nu: float | None = None
    mu: float | None = None
    T: float | None = None
    h: float | None = None
    replicates: int | None = None
    seed: int = 7
    tail_eps: float | None = None
    tail_block: float | None = None
    tail_max_T: float | None = None
    init_h: float | None = None
    burn_in: float | None = None
    coarse_steps: int | None = None
    levels: int | None = None
    x_min: float | None = None
    x_max: float | None = None
    x_points: int | None = None
    n_paths: int = 0
    alpha: float = 0.001
    threads: int = 1
    chunk: int = 500
    out: str = "hp-lab-out"

    @classmethod
    def field_types(cls) -> dict[str, type]:
        hints = {"int": int, "float": float, "str": str}
        out = {}
        for f in dataclasses.fields(cls):
            base = str(f.type).split("|")[0].strip()
            out[f.name] = hints[base]
        return out

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        types = cls.field_types()
        kwargs = {}
        for key, raw in data.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            if raw is None or raw == "":
                kwargs[key] = None
                continue
            try:
                if types[key] is int:
                    value = int(float(raw)) if isinstance(raw, str) and "e" in raw.lower() else int(raw)
                    if float(raw) != value:
                        raise ValueError(raw)
                else:
                    value = types[key](raw)
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {key}: {raw!r}") from None
            kwargs[key] = value
        if "experiment" not in kwargs or kwargs["experiment"] is None:
            raise ConfigError("config must name an experiment")
        cfg = cls(**kwargs)
        return cfg.resolved()

    @classmethod
    def parse_text(cls, text: str) -> dict:
        """``key = value`` lines; ``#`` starts a comment."""
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            data[key] = value
        return data

    @classmethod
    def load(cls, path: str | Path | None, overrides: list[str] | tuple = ()) -> "ExperimentConfig":
        data = {}
        if path is not None:
            try:
                data = cls.parse_text(Path(path).read_text())
            except OSError as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from None
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            key, value = item.split("=", 1)
            data[key.strip()] = value.strip()
        env_threads = os.environ.get("HP_LAB_THREADS")
        if env_threads:
            data["threads"] = env_threads
        return cls.from_mapping(data)

    def resolved(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; see `hp-lab list`")
        entry = EXPERIMENTS[self.experiment]
        values = dataclasses.asdict(self)
        for key, default in entry.defaults.items():
            if values.get(key) is None:
                values[key] = default
        cfg = ExperimentConfig(**values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        entry = EXPERIMENTS[self.experiment]
        if self.h is not None and not self.h > 0:
            raise ConfigError(f"h must be positive, got {self.h}")
        if self.init_h is not None and not self.init_h > 0:
            raise ConfigError(f"init_h must be positive, got {self.init_h}")
        if self.T is not None and not self.T > 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.N is not None and self.N < 1:
            raise ConfigError("N must be >= 1")
        if entry.statistical and (self.replicates is None or self.replicates < entry.min_replicates):
            raise ConfigError(f"{self.experiment} needs replicates >= {entry.min_replicates}")
        if entry.infinite_horizon and self.s_re is not None and not self.s_re > -0.5:
            raise ConfigError("infinite-horizon experiments need s_re > -1/2")
        if entry.infinite_horizon and self.nu is not None and not self.nu > 0:
            raise ConfigError("infinite-horizon experiments need nu > 0")
        if self.threads < 1 or self.chunk < 1:
            raise ConfigError("threads and chunk must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.burn_in is not None and not 0 <= self.burn_in < 1:
            raise ConfigError("burn_in is a fraction in [0, 1)")

    def to_mapping(self) -> dict:
        return dataclasses.asdict(self)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_mapping().items() if v is not None)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.N, self.s_re, self.s_im)

    def grid(self, T: float | None = None, h: float | None = None) -> PathGrid:
        return PathGrid.from_step(T if T is not None else self.T, h if h is not None else self.h)

    def tail_policy(self, base: TailPolicy) -> TailPolicy:
        return TailPolicy(
            self.tail_eps if self.tail_eps is not None else base.eps,
            self.tail_block if self.tail_block is not None else base.block,
            self.tail_max_T if self.tail_max_T is not None else base.max_T,
        )


@dataclass
class ExperimentResult:
    reports: list[TestReport]
    samples: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    paths: list[tuple[int, np.ndarray, np.ndarray]] = field(default_factory=list)
    tables: dict[str, tuple[list[str], np.ndarray]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def flagged(self) -> dict[str, list[int]]:
        return {k: np.flatnonzero(f).tolist() for k, (_, f) in self.samples.items() if np.any(f)}


@dataclass(frozen=True)
class Experiment:
    name: str
    statement: str
    func: Callable[[ExperimentConfig], ExperimentResult]
    defaults: dict
    statistical: bool = True
    infinite_horizon: bool = False
    min_replicates: int = 100


# -- replicate scheduling --------------------------------------------------------


def map_replicates(cfg: ExperimentConfig, fn: Callable[[range], dict], n: int | None = None) -> dict:
    """Apply ``fn`` to consecutive chunks of replicate ids and concatenate the outputs."""
    n = cfg.replicates if n is None else n
    chunks = [range(i, min(i + cfg.chunk, n)) for i in range(0, n, cfg.chunk)]
    if cfg.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def _streams(cfg, ids, role):
    return replicate_streams(cfg.seed, ids, role)


def _sample(cfg, name, values, flags=None) -> EmpiricalSample:
    return EmpiricalSample.from_raw(values, name, cfg.params_fp, cfg.seed, flags)


def _threshold_report(name: str, statistic: float, ok: bool, cfg, **metadata) -> TestReport:
    """Report for a deterministic threshold rule rather than a hypothesis test."""
    rep = TestReport(name, float(statistic), None, (cfg.replicates or 0,), cfg.alpha, cfg.seed, cfg.params_fp, name)
    rep.metadata.update(metadata, rule_passed=bool(ok))
    return rep


def _spectral_stats(X: np.ndarray) -> dict[str, np.ndarray]:
    lam = np.linalg.eigvalsh(X)
    return {
        "lambda_min": lam[:, 0],
        "lambda_max": lam[:, -1],
        "trace": lam.sum(axis=1),
        "det": lam.prod(axis=1),
    }


# -- experiments -------------------------------------------------------------------


def _scalar_bougerol(cfg: ExperimentConfig) -> ExperimentResult:
    grid = cfg.grid()

    def chunk(ids):
        ito = scalar_bougerol_functional(0.0, 0.0, grid, _streams(cfg, ids, Role.BETA), _streams(cfg, ids, Role.GAMMA))
        beta_T = np.sqrt(grid.T) * np.array([substream(cfg.seed, i, Role.INDEPENDENT).normals() for i in ids])
        return {"sinh_beta": np.sinh(beta_T), "ito_integral": ito}

    out = map_replicates(cfg, chunk)
    a = _sample(cfg, "sinh_beta", out["sinh_beta"])
    b = _sample(cfg, "ito_integral", out["ito_integral"])
    reports = [
        ks_two_sample(a, b, cfg.alpha),
        ks_one_sample(b, lambda x: ndtr(np.arcsinh(x) / np.sqrt(grid.T)), cfg.alpha),
    ]
    reports[1].label = "ito_integral vs law of sinh(beta_T)"
    zeros = np.zeros(cfg.replicates, bool)
    return ExperimentResult(reports, {k: (v, zeros) for k, v in out.items()})


def _pearson4(cfg: ExperimentConfig) -> ExperimentResult:
    policy = cfg.tail_policy(TailPolicy.for_scalar(cfg.nu))

    def chunk(ids):
        res = scalar_bougerol_functional(
            cfg.nu, cfg.mu, policy, _streams(cfg, ids, Role.BETA), _streams(cfg, ids, Role.GAMMA), h=cfg.h
        )
        return {"functional": res.value, "flag": ~res.converged}

    out = map_replicates(cfg, chunk)
    dens = Density1D("pearson4", (cfg.nu, cfg.mu))
    s = _sample(cfg, "functional", out["functional"], out["flag"])
    rep = ks_one_sample(s, dens.cdf, cfg.alpha)
    rep.metadata["n_flagged"] = s.n_flagged
    return ExperimentResult([rep], {"functional": (out["functional"], out["flag"])})


def _dufresne(cfg: ExperimentConfig) -> ExperimentResult:
    # With unit-variance complex noise, |M_t|^2 = exp(2 b_{t/2} - 2 nu_m t) for a
    # standard real BM b.  Time change u = t/2 gives a_matrix(nu_m) = 2 a(2 nu_m),
    # so the scalar functional at drift nu is a_matrix(nu/2) / 2.
    if not cfg.nu > 0:
        raise ConfigError("dufresne needs nu > 0")
    params = ModelParams.from_drifts(1, cfg.nu / 2)
    policy = cfg.tail_policy(TailPolicy.for_params(params))

    def chunk(ids):
        res = dufresne_integral(params, policy, _streams(cfg, ids, Role.W), h=cfg.h)
        return {"a_inf": 0.5 * res.value[:, 0, 0].real, "flag": ~res.converged}

    out = map_replicates(cfg, chunk)
    xi = 1.0 / (2.0 * out["a_inf"])
    s = _sample(cfg, "one_over_2a", xi, out["flag"])
    rep = ks_one_sample(s, Density1D("gamma", (cfg.nu,)).cdf, cfg.alpha)
    rep.metadata["n_flagged"] = s.n_flagged
    return ExperimentResult([rep], {"a_inf": (out["a_inf"], out["flag"]), "one_over_2a": (xi, out["flag"])})


def _matrix_bougerol(cfg: ExperimentConfig) -> ExperimentResult:
    params, grid = cfg.params, cfg.grid()
    N = params.N

    def chunk(ids):
        X = simulate_hp_diffusion(
            params, np.zeros((N, N)), grid, _streams(cfg, ids, Role.GAMMA_MATRIX), save_every=grid.steps
        ).terminal
        Y = bougerol_integral(params, grid, _streams(cfg, ids, Role.W), _streams(cfg, ids, Role.B))
        out = {f"diffusion_{k}": v for k, v in _spectral_stats(X).items()}
        out.update({f"integral_{k}": v for k, v in _spectral_stats(Y).items()})
        return out

    out = map_replicates(cfg, chunk)
    names = ["lambda_min", "lambda_max", "trace", "det"] if N > 1 else ["lambda_max"]
    reports = [
        ks_two_sample(_sample(cfg, f"diffusion_{k}", out[f"diffusion_{k}"]), _sample(cfg, f"integral_{k}", out[f"integral_{k}"]), cfg.alpha)
        for k in names
    ]
    zeros = np.zeros(cfg.replicates, bool)
    return ExperimentResult(reports, {k: (v, zeros) for k, v in out.items()})


def _infinite_batch(cfg, params, ids, role_W, role_B, policy, h):
    res = bougerol_integral_infinite(params, policy, h, _streams(cfg, ids, role_W), _streams(cfg, ids, role_B))
    return res.value, ~res.converged


def _hua_pickrell(cfg: ExperimentConfig) -> ExperimentResult:
    params = cfg.params
    policy = cfg.tail_policy(TailPolicy.for_params(params))
    mirror = ModelParams(params.N, params.s_re, -params.s_im)

    def chunk(ids):
        X, flag = _infinite_batch(cfg, params, ids, Role.W, Role.B, policy, cfg.h)
        out = {f"limit_{k}": v for k, v in _spectral_stats(X).items()}
        out["flag"] = flag
        if params.N > 1:
            Xm, flag_m = _infinite_batch(cfg, mirror, ids, Role.W2, Role.B2, policy, cfg.h)
            out.update({f"mirror_{k}": v for k, v in _spectral_stats(Xm).items()})
            out["flag_mirror"] = flag_m
        return out

    out = map_replicates(cfg, chunk)
    flag = out["flag"]
    samples = {k: (v, flag) for k, v in out.items() if k.startswith("limit_")}
    reports = []
    if params.N == 1:
        dens = Density1D("hp_eigen_1d", (params.s_re, params.s_im))
        s = _sample(cfg, "limit_lambda_max", out["limit_lambda_max"], flag)
        reports.append(ks_one_sample(s, dens.cdf, cfg.alpha))
        reports[-1].metadata["n_flagged"] = s.n_flagged
    else:
        fm = out["flag_mirror"]
        samples.update({k: (v, fm) for k, v in out.items() if k.startswith("mirror_")})
        pairs = [("lambda_max", "lambda_min"), ("trace", "trace")]
        for mine, theirs in pairs:
            a = _sample(cfg, f"limit_{mine}", out[f"limit_{mine}"], flag)
            b = _sample(cfg, f"-mirror_{theirs}", -out[f"mirror_{theirs}"], fm)
            reports.append(ks_two_sample(a, b, cfg.alpha))
    return ExperimentResult(reports, samples)


def _invariance(cfg: ExperimentConfig) -> ExperimentResult:
    params, grid = cfg.params, cfg.grid()
    N = params.N
    policy = cfg.tail_policy(TailPolicy.for_params(params))
    m = Density1D("reversible_m", (params.s_re, params.s_im, N))
    n_paths = min(cfg.n_paths, cfg.replicates)
    stride = max(1, grid.steps // 64)

    def chunk(ids):
        X0, flag = _infinite_batch(cfg, params, ids, Role.W, Role.B, policy, cfg.init_h)
        X = simulate_hp_diffusion(params, X0, grid, _streams(cfg, ids, Role.GAMMA_MATRIX), save_every=grid.steps)
        w0 = m.ppf(np.array([substream(cfg.seed, i, Role.INIT).uniforms() for i in ids]))
        w = simulate_scalar("pearson_1d", params, w0, grid, _streams(cfg, ids, Role.BETA), save_every=stride)
        s0, s1 = _spectral_stats(X0), _spectral_stats(X.terminal)
        out = {
            "initial_lambda_max": s0["lambda_max"],
            "final_lambda_max": s1["lambda_max"],
            "initial_trace": s0["trace"],
            "final_trace": s1["trace"],
            "initial_w": w0,
            "final_w": w.terminal,
            "flag": flag,
        }
        keep = [j for j, i in enumerate(ids) if i < n_paths]
        out["w_paths"] = w.states[keep]
        out["w_path_ids"] = np.array([ids[j] for j in keep], dtype=int)
        return out

    out = map_replicates(cfg, chunk)
    flag = out["flag"]
    reports = []
    for k in ("lambda_max", "trace"):
        a = _sample(cfg, f"initial_{k}", out[f"initial_{k}"], flag)
        b = _sample(cfg, f"final_{k}", out[f"final_{k}"], flag)
        reports.append(ks_two_sample(a, b, cfg.alpha))
    reports.append(ks_two_sample(_sample(cfg, "initial_w", out["initial_w"]), _sample(cfg, "final_w", out["final_w"]), cfg.alpha))
    times = grid.times[::stride]
    if times[-1] != grid.T:
        times = np.append(times, grid.T)
    paths = [(int(i), times, p[:, None]) for i, p in zip(out["w_path_ids"], out["w_paths"])]
    zeros = np.zeros(cfg.replicates, bool)
    samples = {k: (out[k], flag if "lambda" in k or "trace" in k else zeros) for k in out if k.startswith(("initial", "final"))}
    return ExperimentResult(reports, samples, paths)


def _time_reversal(cfg: ExperimentConfig) -> ExperimentResult:
    params, grid = cfg.params, cfg.grid()
    if grid.steps % 2:
        raise ConfigError("time-reversal needs an even number of steps")
    half = grid.steps // 2

    def log_top(A):
        return np.log(np.linalg.eigvalsh(A @ np.conj(np.swapaxes(A, -1, -2)))[:, -1])

    def chunk(ids):
        fwd = simulate_exp_bm(params, 1, grid, _streams(cfg, ids, Role.W), save_every=half).states
        MT_inv = np.linalg.inv(fwd[:, 2])
        rev_half, rev_T = MT_inv @ fwd[:, 1], MT_inv
        ind = simulate_exp_bm(params, -1, grid, _streams(cfg, ids, Role.INDEPENDENT), save_every=half).states
        return {
            "reversed_half": log_top(rev_half),
            "independent_half": log_top(ind[:, 1]),
            "reversed_T": log_top(rev_T),
            "independent_T": log_top(ind[:, 2]),
        }

    out = map_replicates(cfg, chunk)
    reports = [
        ks_two_sample(_sample(cfg, f"reversed_{k}", out[f"reversed_{k}"]), _sample(cfg, f"independent_{k}", out[f"independent_{k}"]), cfg.alpha)
        for k in ("half", "T")
    ]
    zeros = np.zeros(cfg.replicates, bool)
    return ExperimentResult(reports, {k: (v, zeros) for k, v in out.items()})


def _lyapunov(cfg: ExperimentConfig) -> ExperimentResult:
    params, grid = cfg.params, cfg.grid()

    def chunk(ids):
        tr = simulate_singular_log(params, grid, _streams(cfg, ids, Role.BETA))
        return {"top": tr.states[:, :, -1]}

    top = map_replicates(cfg, chunk)["top"]
    times = grid.times
    slope, (lo, hi) = lyapunov_slope(times, top, cfg.burn_in)
    half = 0.5 * (hi - lo)
    bound = -2 * params.nu + params.N - 1
    ok = abs(slope - bound) <= half if params.N == 1 else slope <= bound + half
    rep = _threshold_report(
        "lyapunov_slope", slope, ok, cfg, ci95=[lo, hi], bound=bound, equality=params.N == 1
    )
    per = np.array([np.polyfit(times[times >= cfg.burn_in * grid.T], p[times >= cfg.burn_in * grid.T], 1)[0] for p in top])
    paths = [(i, times, top[i][:, None]) for i in range(min(cfg.n_paths, top.shape[0]))]
    return ExperimentResult([rep], {"slope": (per, np.zeros(per.size, bool))}, paths)


def _explicit_solution(cfg: ExperimentConfig) -> ExperimentResult:
    params = cfg.params
    N = params.N
    ids = range(cfg.replicates)
    study, cov = explicit_solution_study(
        params, np.zeros((N, N)), cfg.T, cfg.coarse_steps, cfg.levels, _streams(cfg, ids, Role.W), _streams(cfg, ids, Role.B)
    )
    det = det_identity_study(params, cfg.T, cfg.coarse_steps, cfg.levels, _streams(cfg, ids, Role.INDEPENDENT))
    zc, zp = cov.max_z()
    reports = [
        _threshold_report("explicit_gap_slope", study.slope, study.slope >= 0.4, cfg, h=study.h.tolist(), errors=study.errors.tolist()),
        _threshold_report("det_identity_slope", det.slope, det.slope >= 0.4, cfg, h=det.h.tolist(), errors=det.errors.tolist()),
        _threshold_report("gamma_covariation_conj_max_z", zc, zc <= 3, cfg, n_increments=cov.n),
        _threshold_report("gamma_covariation_plain_max_z", zp, zp <= 3, cfg, n_increments=cov.n),
    ]
    zeros = np.zeros(cfg.replicates, bool)
    samples = {"terminal_gap_finest": (study.per_replicate[-1], zeros), "det_error_finest": (det.per_replicate[-1], zeros)}
    return ExperimentResult(reports, samples)


def _density_eval(cfg: ExperimentConfig) -> ExperimentResult:
    params = cfg.params
    if params.N == 1:
        dens = Density1D("hp_eigen_1d", (params.s_re, params.s_im))
    else:
        dens = Density1D("reversible_m", (params.s_re, params.s_im, params.N))
    x = np.linspace(cfg.x_min, cfg.x_max, cfg.x_points)
    pdf, cdf = dens.pdf(x), dens.cdf(x)
    total, _ = integrate.quad(lambda t: float(dens.pdf(t)), -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12, limit=500)
    reports = [_threshold_report("normalization_error", abs(total - 1), abs(total - 1) <= 1e-8, cfg, density=repr(dens))]
    if params.N == 1 and params.s_re == 0 and params.s_im == 0:
        err = float(np.max(np.abs(pdf - 1 / (np.pi * (1 + x * x)))))
        reports.append(_threshold_report("cauchy_max_abs_error", err, err <= 1e-8, cfg))
    return ExperimentResult(reports, tables={"density.csv": (["x", "pdf", "cdf"], np.column_stack([x, pdf, cdf]))})


EXPERIMENTS: dict[str, Experiment] = {
    e.name: e
    for e in [
        Experiment(
            "scalar-bougerol",
            "sinh(beta_t) and the Ito integral of exp(beta) against an independent BM share one law",
            _scalar_bougerol,
            dict(T=1.0, h=2.0**-12, replicates=20000),
        ),
        Experiment(
            "pearson4-functional",
            "int_0^inf exp(beta_t - nu t) d(gamma_t - mu t) has the Pearson type IV density",
            _pearson4,
            dict(nu=1.0, mu=0.0, h=2.0**-8, replicates=10000),
            infinite_horizon=True,
        ),
        Experiment(
            "dufresne",
            "int_0^inf exp(2 beta_t - 2 nu t) dt equals 1/(2 xi) with xi ~ Gamma(nu)",
            _dufresne,
            dict(nu=1.0, h=2.0**-8, replicates=10000),
            infinite_horizon=True,
        ),
        Experiment(
            "matrix-bougerol",
            "Hua-Pickrell diffusion from 0 at time t equals the finite-time matrix integral in law",
            _matrix_bougerol,
            dict(N=2, s_re=0.5, s_im=0.5, T=1.0, h=2.0**-12, replicates=5000),
        ),
        Experiment(
            "hua-pickrell-limit",
            "the infinite-horizon matrix integral is Hua-Pickrell distributed",
            _hua_pickrell,
            dict(N=1, s_re=0.0, s_im=0.0, h=2.0**-8, replicates=10000),
            infinite_horizon=True,
        ),
        Experiment(
            "invariance",
            "the Hua-Pickrell law is invariant for the matrix diffusion; m_s^(N) is reversible for the 1D spectral diffusion",
            _invariance,
            dict(N=2, s_re=0.0, s_im=0.0, T=1.0, h=2.0**-12, init_h=2.0**-7, replicates=5000),
            infinite_horizon=True,
        ),
        Experiment(
            "time-reversal",
            "M_T^{-1} M_{T-t} is distributed as the process with negated drift",
            _time_reversal,
            dict(N=2, s_re=0.0, s_im=0.0, T=1.0, h=2.0**-10, replicates=5000),
        ),
        Experiment(
            "lyapunov",
            "top log squared singular value of M^(-nu) grows at most at rate -2 nu + N - 1",
            _lyapunov,
            dict(N=2, s_re=0.0, s_im=0.0, T=20.0, h=20.0 / 4096, replicates=50, burn_in=0.25),
            min_replicates=20,
        ),
        Experiment(
            "explicit-solution",
            "closed-form conjugated integral solves the Hua-Pickrell diffusion; determinant identity of M",
            _explicit_solution,
            dict(N=2, s_re=0.5, s_im=0.5, T=1.0, coarse_steps=64, levels=6, replicates=200),
            min_replicates=20,
        ),
        Experiment(
            "density-eval",
            "normalised one-dimensional Hua-Pickrell / reversible densities on a grid",
            _density_eval,
            dict(N=1, s_re=0.0, s_im=0.0, x_min=-10.0, x_max=10.0, x_points=201),
            statistical=False,
        ),
    ]
}


def _params_fp(self: ExperimentConfig) -> str:
    if self.N is None or self.s_re is None:
        return f"nu={self.nu!r},mu={self.mu!r}"
    return self.params.fingerprint()


ExperimentConfig.params_fp = property(_params_fp)


def list_experiments() -> list[dict]:
    """One row per experiment: name, verified statement, default parameters."""
    return [
        {"experiment": e.name, "statement": e.statement, "defaults": dict(e.defaults)}
        for e in EXPERIMENTS.values()
    ]


def execute(cfg: ExperimentConfig) -> ExperimentResult:
    """Run an experiment in memory without writing files."""
    return EXPERIMENTS[cfg.experiment].func(cfg)


# -- file output ------------------------------------------------------------------


def _fmt(v) -> str:
    return repr(float(v))


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _samples_csv(result: ExperimentResult) -> str:
    rows = []
    for name, (values, flags) in result.samples.items():
        for i, (v, f) in enumerate(zip(values, flags)):
            rows.append((i, name, _fmt(v), int(bool(f))))
    return _csv_text(["replicate_id", "statistic_name", "value", "flagged"], rows)


def _paths_csv(result: ExperimentResult) -> str:
    rows = []
    for rid, times, values in result.paths:
        for t, row in zip(times, values):
            for c, v in enumerate(row):
                rows.append((rid, _fmt(t), c, _fmt(v)))
    return _csv_text(["replicate_id", "t", "component_index", "value"], rows)


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def seed_layout(cfg: ExperimentConfig) -> dict:
    return {
        "generator": "Philox-4x64-10, key = (seed, stream_id)",
        "normals": "inverse normal CDF of 53-bit uniforms on (0, 1)",
        "stream_id": f"(role << {ROLE_SHIFT}) | replicate_id",
        "roles": {k: v for k, v in vars(Role).items() if not k.startswith("_")},
        "seed": cfg.seed,
        "chunk": cfg.chunk,
    }


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> tuple[dict, ExperimentResult]:
    """Run ``cfg`` and write manifest, reports and CSV files into ``out_dir``."""
    out = Path(out_dir if out_dir is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = execute(cfg)
    wall = time.perf_counter() - start
    files = {
        "reports.json": json.dumps([r.to_dict() for r in result.reports], indent=2, sort_keys=True) + "\n",
        "samples.csv": _samples_csv(result),
        "paths.csv": _paths_csv(result),
    }
    for name, (header, table) in result.tables.items():
        files[name] = _csv_text(header, [[_fmt(v) for v in row] for row in table])
    for name, text in files.items():
        (out / name).write_text(text)
    manifest = {
        "config": cfg.to_mapping(),
        "code_version": __version__,
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "seed_layout": seed_layout(cfg),
        "flagged_replicates": result.flagged(),
        "wall_clock_seconds": wall,
        "passed": result.passed,
        "digests": {name: _sha256(text) for name, text in files.items()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest, result


def replay(manifest_path: str | Path, out_dir: str | Path | None = None) -> tuple[bool, dict, dict]:
    """Re-run a manifest's config and compare output digests.

    Returns ``(identical, old_digests, new_digests)``.
    """
    manifest_path = Path(manifest_path)
    try:
        old = json.loads(manifest_path.read_text())
        cfg = ExperimentConfig.from_mapping(old["config"])
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read manifest {manifest_path}: {exc}") from None
    out = Path(out_dir) if out_dir is not None else manifest_path.parent / "replay"
    new, _ = run(cfg, out)
    return new["digests"] == old["digests"], old["digests"], new["digests"]
