"""Reproducible Monte Carlo benchmarks of solver error against the bounds.

A trial draws a random structured truth, a fresh Gaussian operator and a
noise realization from a stream derived only from (base_seed, trial_index),
runs the unstructured and structured solvers on the same data, and records
squared errors alongside the matching Cramer-Rao bounds. Sweeps repeat this
over a grid of one experiment parameter and aggregate per grid point.

Because every trial owns its seed, results are independent of execution
order and of how many worker threads run them.
"""

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import crb, sensing, structures
from .als import SolverOptions, als_structured, als_unstructured
from .errors import DomainError

__all__ = [
    "ExperimentConfig",
    "TrialResult",
    "SweepPoint",
    "SweepResult",
    "CSV_HEADER",
    "sigma_for_smnr",
    "run_trial",
    "aggregate_srer",
    "sweep",
    "persist",
    "load_sweep_csv",
    "config_to_dict",
    "config_from_dict",
    "sweep_config_from_dict",
]

_STRUCTURES = ("unstructured", "hankel", "toeplitz", "psd")
_GENERATORS = (structures.PRONY_ON_NOISE, structures.UNIT_CIRCLE_POLES)

CSV_HEADER = (
    "sweep_param,value,srer_unstr_db,srer_str_db,bound_unstr_db,bound_str_db,"
    "trials_ok,trials_failed,crb_invalid"
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment cell: problem size, sampling regime, noise level.

    The rank is r = round(lambda_rel * min(n, p)) and the measurement count
    m = ceil(rho * n * p); undersampling (m < n*p) is enforced unless
    allow_full_sampling is set (tests use that to build square systems).
    """

    n: int
    p: int
    lambda_rel: float
    rho: float
    smnr_db: float
    structure: str = "unstructured"
    trials: int = 100
    base_seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    generator_method: str = structures.PRONY_ON_NOISE
    compute_crb: bool = True
    allow_full_sampling: bool = False

    @property
    def rank(self):
        return int(round(self.lambda_rel * min(self.n, self.p)))

    @property
    def num_measurements(self):
        # ceil with a guard against binary representation fuzz, so e.g.
        # rho = 0.1 on a 630-entry matrix yields 63 and not 64
        raw = self.rho * self.n * self.p
        nearest = round(raw)
        if abs(raw - nearest) <= 1e-9 * max(1.0, abs(raw)):
            return int(nearest)
        return int(math.ceil(raw))

    def validate(self):
        problems = []
        if self.n < 1 or self.p < 1:
            problems.append(f"n={self.n}, p={self.p}: dimensions must be positive")
        if not 0.0 < self.lambda_rel <= 1.0:
            problems.append(f"lambda_rel={self.lambda_rel}: must lie in (0, 1]")
        elif self.rank < 1:
            problems.append(f"lambda_rel={self.lambda_rel}: implied rank is zero")
        if not 0.0 < self.rho <= 1.0:
            problems.append(f"rho={self.rho}: must lie in (0, 1]")
        elif self.num_measurements >= self.n * self.p and not self.allow_full_sampling:
            problems.append(
                f"rho={self.rho}: m={self.num_measurements} is not below n*p={self.n * self.p}"
            )
        if math.isnan(self.smnr_db) or self.smnr_db == -math.inf:
            problems.append(f"smnr_db={self.smnr_db}: must be a real level or +inf for noiseless")
        if self.structure not in _STRUCTURES:
            problems.append(f"structure={self.structure!r}: expected one of {_STRUCTURES}")
        elif self.structure == "psd" and self.n != self.p:
            problems.append("structure=psd requires n == p")
        if self.trials < 1:
            problems.append(f"trials={self.trials}: must be positive")
        if self.generator_method not in _GENERATORS:
            problems.append(
                f"generator_method={self.generator_method!r}: expected one of {_GENERATORS}"
            )
        if problems:
            raise DomainError("; ".join(problems))
        return self


@dataclass(frozen=True)
class TrialResult:
    """Everything recorded about one Monte Carlo trial."""

    seed: tuple
    signal_energy: float
    err_unstructured: float
    err_structured: float | None
    crb_unstructured: crb.CrbResult | None
    crb_structured: crb.CrbResult | None
    iterations_unstructured: int
    iterations_structured: int | None
    residual_unstructured: float
    residual_structured: float | None
    failed: bool = False
    failure_reason: str = ""

    @classmethod
    def failure(cls, seed, reason):
        return cls(
            seed=seed,
            signal_energy=math.nan,
            err_unstructured=math.nan,
            err_structured=None,
            crb_unstructured=None,
            crb_structured=None,
            iterations_unstructured=0,
            iterations_structured=None,
            residual_unstructured=math.nan,
            residual_structured=None,
            failed=True,
            failure_reason=reason,
        )


def sigma_for_smnr(signal_energy, m, smnr_db):
    """Noise variance hitting a target signal-to-measurement-noise ratio.

    SMNR = E||X||_F^2 / E||noise||^2 = energy / (m sigma^2), so
    sigma^2 = energy / (m 10^(smnr_db/10)). An infinite smnr_db returns 0
    (noiseless).
    """
    if not signal_energy > 0:
        raise DomainError("signal energy must be positive")
    if m < 1:
        raise DomainError("number of measurements must be positive")
    if smnr_db == math.inf:
        return 0.0
    return signal_energy / (m * 10.0 ** (smnr_db / 10.0))


def _trial_rng(base_seed, trial_index):
    """Independent per-trial stream from a fixed hash of (base_seed, index)."""
    return np.random.default_rng(
        np.random.SeedSequence((base_seed & 0xFFFFFFFFFFFFFFFF, trial_index))
    )


def _generate_truth(config, rng):
    """Draw the ground-truth matrix plus whatever parametrizes it exactly."""
    n, p, r = config.n, config.p, config.rank
    if config.structure == "hankel":
        x, params = structures.generate_hankel_lowrank(
            n, p, r, method=config.generator_method, rng=rng
        )
        return x, params, None
    if config.structure == "toeplitz":
        # A Toeplitz matrix is a Hankel matrix with its columns reversed,
        # and the flip preserves rank.
        x, _ = structures.generate_hankel_lowrank(
            n, p, r, method=config.generator_method, rng=rng
        )
        return x[:, ::-1].copy(), None, None
    if config.structure == "psd":
        x, m_factor = structures.generate_psd_lowrank(n, r, rng=rng)
        return x, None, m_factor
    left = rng.standard_normal((n, r))
    right = rng.standard_normal((r, p))
    return left @ right, None, None


_STRUCTURE_SPECS = {
    "hankel": structures.HANKEL,
    "toeplitz": structures.TOEPLITZ,
    "psd": structures.PSD,
}


def run_trial(config, trial_index):
    """Run one seeded trial of the configured experiment.

    Generation or bound failures mark the trial failed rather than aborting
    the sweep; solver behaviour is deterministic given (base_seed, index).
    """
    config.validate()
    seed = (config.base_seed, trial_index)
    rng = _trial_rng(config.base_seed, trial_index)
    try:
        x, hankel_params, psd_factor = _generate_truth(config, rng)
        energy = float(np.sum(x * x))
        op = sensing.make_gaussian_operator(config.n, config.p, config.num_measurements, rng)
        sigma2 = sigma_for_smnr(energy, config.num_measurements, config.smnr_db)
        noise = sensing.IidGaussian(sigma2)
        y = sensing.measure(op, x, noise, rng)

        unstr = als_unstructured(op, y, config.rank, config.solver)
        err_unstr = float(np.sum((x - unstr.estimate) ** 2))

        err_str = None
        iters_str = None
        resid_str = None
        if config.structure != "unstructured":
            spec = _STRUCTURE_SPECS[config.structure]
            strep = als_structured(op, y, config.rank, spec, config.solver)
            err_str = float(np.sum((x - strep.estimate) ** 2))
            iters_str = strep.iterations
            resid_str = min(strep.residual_history)

        crb_unstr = None
        crb_str = None
        if config.compute_crb and sigma2 > 0.0:
            crb_unstr = crb.crb_unstructured(op, noise, x, config.rank)
            if config.structure == "hankel":
                crb_str = crb.crb_hankel(op, noise, hankel_params, config.n, config.p)
            elif config.structure == "psd":
                crb_str = crb.crb_psd(op, noise, psd_factor)
    except DomainError as exc:
        return TrialResult.failure(seed, str(exc))

    return TrialResult(
        seed=seed,
        signal_energy=energy,
        err_unstructured=err_unstr,
        err_structured=err_str,
        crb_unstructured=crb_unstr,
        crb_structured=crb_str,
        iterations_unstructured=unstr.iterations,
        iterations_structured=iters_str,
        residual_unstructured=min(unstr.residual_history),
        residual_structured=resid_str,
    )


def aggregate_srer(trials, which="unstructured"):
    """Aggregate SRER in dB: 10 log10(sum energies / sum squared errors)."""
    if which not in ("unstructured", "structured"):
        raise DomainError(f"unknown error column {which!r}")
    pairs = []
    for t in trials:
        if t.failed:
            continue
        err = t.err_unstructured if which == "unstructured" else t.err_structured
        if err is None:
            continue
        pairs.append((t.signal_energy, err))
    if not pairs:
        raise DomainError("no successful trials to aggregate")
    energy = sum(e for e, _ in pairs)
    error = sum(r for _, r in pairs)
    if error == 0.0:
        return math.inf
    return 10.0 * math.log10(energy / error)


@dataclass(frozen=True)
class SweepPoint:
    """Aggregates for one value of the swept parameter."""

    value: float
    srer_unstructured_db: float
    srer_structured_db: float | None
    bound_unstructured_db: float | None
    bound_structured_db: float | None
    trials_ok: int
    trials_failed: int
    crb_invalid_unstructured: int
    crb_invalid_structured: int

    @property
    def crb_invalid(self):
        return self.crb_invalid_unstructured + self.crb_invalid_structured


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    points: list[SweepPoint]
    config: ExperimentConfig


_SWEEP_FIELDS = {"smnr": "smnr_db", "rho": "rho", "lambda": "lambda_rel"}


def _bound_db(trials, attr):
    """SRER bound over trials whose CRB exists, or None when none do."""
    pairs = [
        (t.signal_energy, getattr(t, attr).value)
        for t in trials
        if not t.failed and getattr(t, attr) is not None and getattr(t, attr).valid
    ]
    if not pairs:
        return None
    return crb.crb_to_srer_bound([c for _, c in pairs], [e for e, _ in pairs])


def _aggregate_point(cfg, value, trials):
    ok = [t for t in trials if not t.failed]
    try:
        srer_unstr = aggregate_srer(trials, "unstructured")
    except DomainError:
        srer_unstr = math.nan
    srer_str = None
    if cfg.structure != "unstructured":
        try:
            srer_str = aggregate_srer(trials, "structured")
        except DomainError:
            srer_str = math.nan
    invalid_unstr = sum(
        1 for t in ok if t.crb_unstructured is not None and not t.crb_unstructured.valid
    )
    invalid_str = sum(
        1 for t in ok if t.crb_structured is not None and not t.crb_structured.valid
    )
    return SweepPoint(
        value=value,
        srer_unstructured_db=srer_unstr,
        srer_structured_db=srer_str,
        bound_unstructured_db=_bound_db(trials, "crb_unstructured"),
        bound_structured_db=_bound_db(trials, "crb_structured"),
        trials_ok=len(ok),
        trials_failed=len(trials) - len(ok),
        crb_invalid_unstructured=invalid_unstr,
        crb_invalid_structured=invalid_str,
    )


def _run_trials(cfg, threads):
    indices = range(cfg.trials)
    if threads == 1:
        return [run_trial(cfg, i) for i in indices]
    workers = threads if threads else (os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: run_trial(cfg, i), indices))


def sweep(config, parameter, values, threads=None):
    """Run the experiment at each value of one parameter.

    parameter is "smnr", "rho" or "lambda"; values replace the matching
    config field point by point. Results are aggregated in trial order, so
    the outcome is byte-for-byte independent of the thread count.
    """
    if parameter not in _SWEEP_FIELDS:
        raise DomainError(f"unknown sweep parameter {parameter!r}, expected one of "
                          f"{tuple(_SWEEP_FIELDS)}")
    values = [float(v) for v in values]
    if not values:
        raise DomainError("sweep needs at least one value")
    points = []
    for value in values:
        cfg = dataclasses.replace(config, **{_SWEEP_FIELDS[parameter]: value})
        cfg.validate()
        trials = _run_trials(cfg, threads)
        points.append(_aggregate_point(cfg, value, trials))
    return SweepResult(parameter, points, config)


def _fmt(x):
    if x is None:
        return ""
    return f"{x:.17g}"


def persist(result, path):
    """Write a sweep to CSV plus a JSON sidecar with the full configuration.

    The sidecar lands next to the CSV with suffix .meta.json and records the
    resolved base config, the sweep grid and the code version.
    """
    path = Path(path)
    lines = [CSV_HEADER]
    for pt in result.points:
        lines.append(",".join([
            result.parameter,
            _fmt(pt.value),
            _fmt(pt.srer_unstructured_db),
            _fmt(pt.srer_structured_db),
            _fmt(pt.bound_unstructured_db),
            _fmt(pt.bound_structured_db),
            str(pt.trials_ok),
            str(pt.trials_failed),
            str(pt.crb_invalid),
        ]))
    meta = {
        "config": config_to_dict(result.config),
        "sweep": {"parameter": result.parameter, "values": [pt.value for pt in result.points]},
        "code_version": _code_version(),
    }
    try:
        path.write_text("\n".join(lines) + "\n")
        path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"writing sweep results to {path}: {exc}") from exc
    return path


def _code_version():
    from . import __version__

    return __version__


def _parse_opt(s):
    return None if s == "" else float(s)


def load_sweep_csv(path):
    """Read back a persisted sweep, checking the exact header."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"reading sweep results from {path}: {exc}") from exc
    if not rows or ",".join(rows[0]) != CSV_HEADER:
        raise DomainError(f"{path}: not a sweep results file (bad header)")
    out = []
    for row in rows[1:]:
        if len(row) != len(CSV_HEADER.split(",")):
            raise DomainError(f"{path}: malformed row {row!r}")
        out.append({
            "sweep_param": row[0],
            "value": float(row[1]),
            "srer_unstr_db": _parse_opt(row[2]),
            "srer_str_db": _parse_opt(row[3]),
            "bound_unstr_db": _parse_opt(row[4]),
            "bound_str_db": _parse_opt(row[5]),
            "trials_ok": int(row[6]),
            "trials_failed": int(row[7]),
            "crb_invalid": int(row[8]),
        })
    return out


def config_to_dict(config):
    d = dataclasses.asdict(config)
    if math.isinf(config.smnr_db):
        d["smnr_db"] = "inf"
    return d


_CONFIG_REQUIRED = {"n": int, "p": int, "lambda_rel": (int, float), "rho": (int, float),
                    "smnr_db": (int, float, str), "structure": str, "trials": int,
                    "base_seed": int}
_CONFIG_OPTIONAL = {"solver": dict, "generator_method": str, "compute_crb": bool,
                    "allow_full_sampling": bool}
_SOLVER_FIELDS = {"max_iters": int, "rel_tol": (int, float), "final_project": bool}


def _check_fields(doc, required, optional, what):
    unknown = sorted(set(doc) - set(required) - set(optional))
    if unknown:
        raise DomainError(f"{what}: unknown fields {unknown}")
    missing = sorted(set(required) - set(doc))
    if missing:
        raise DomainError(f"{what}: missing required fields {missing}")
    bad = []
    for name, types in {**required, **optional}.items():
        if name not in doc:
            continue
        allowed = types if isinstance(types, tuple) else (types,)
        # bool is an int subclass, so reject it separately where a number
        # is expected
        if isinstance(doc[name], bool) and bool not in allowed:
            bad.append(name)
        elif not isinstance(doc[name], allowed):
            bad.append(name)
    if bad:
        raise DomainError(f"{what}: fields with invalid types {sorted(bad)}")


def _parse_smnr(v):
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        raise DomainError(f"smnr_db={v!r}: expected a number or 'inf'")
    return float(v)


def config_from_dict(doc, what="config"):
    """Build a validated ExperimentConfig from a plain dict (JSON document)."""
    if not isinstance(doc, dict):
        raise DomainError(f"{what}: expected an object")
    _check_fields(doc, _CONFIG_REQUIRED, _CONFIG_OPTIONAL, what)
    solver_doc = doc.get("solver", {})
    if not isinstance(solver_doc, dict):
        raise DomainError(f"{what}: solver must be an object")
    unknown = sorted(set(solver_doc) - set(_SOLVER_FIELDS))
    if unknown:
        raise DomainError(f"{what}: unknown solver fields {unknown}")
    solver = SolverOptions(**solver_doc)
    cfg = ExperimentConfig(
        n=int(doc["n"]),
        p=int(doc["p"]),
        lambda_rel=float(doc["lambda_rel"]),
        rho=float(doc["rho"]),
        smnr_db=_parse_smnr(doc["smnr_db"]),
        structure=str(doc["structure"]),
        trials=int(doc["trials"]),
        base_seed=int(doc["base_seed"]),
        solver=solver,
        generator_method=str(doc.get("generator_method", structures.PRONY_ON_NOISE)),
        compute_crb=bool(doc.get("compute_crb", True)),
        allow_full_sampling=bool(doc.get("allow_full_sampling", False)),
    )
    return cfg.validate()


def sweep_config_from_dict(doc, what="sweep config"):
    """Split a sweep document into (ExperimentConfig, parameter, values)."""
    if not isinstance(doc, dict):
        raise DomainError(f"{what}: expected an object")
    if "sweep" not in doc:
        raise DomainError(f"{what}: missing required field 'sweep'")
    sweep_doc = doc["sweep"]
    if not isinstance(sweep_doc, dict):
        raise DomainError(f"{what}: sweep must be an object")
    unknown = sorted(set(sweep_doc) - {"parameter", "values"})
    if unknown:
        raise DomainError(f"{what}: unknown sweep fields {unknown}")
    if "parameter" not in sweep_doc or "values" not in sweep_doc:
        raise DomainError(f"{what}: sweep needs 'parameter' and 'values'")
    parameter = sweep_doc["parameter"]
    if parameter not in _SWEEP_FIELDS:
        raise DomainError(
            f"{what}: sweep parameter {parameter!r} not one of {tuple(_SWEEP_FIELDS)}"
        )
    values = sweep_doc["values"]
    if not isinstance(values, list) or not values:
        raise DomainError(f"{what}: sweep values must be a nonempty list")
    base = {k: v for k, v in doc.items() if k != "sweep"}
    config = config_from_dict(base, what)
    return config, parameter, [float(v) for v in values]
