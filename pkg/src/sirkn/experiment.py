"""Monte Carlo batches, lambda sweeps, estimators and persistence.

This layer turns the two engines into reproducible phase-transition
evidence: it derives one RNG stream per (grid point, replication) from the
master seed, so results are independent of worker count and scheduling; it
computes the order-parameter estimators with confidence intervals; and it
attaches the analytic references (the critical rate, the subcritical mean
bound, the exact and limiting no-spread probabilities) that the tests check
the simulations against.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import stats as spstats

from . import seeding
from .distributions import (DistSpec, ROLE_RECOVERY, ROLE_WEIGHT, as_mixture,
                            critical_lambda, expect_self_over_self_plus,
                            expect_self_over_self_plus_vec, format_dist, mean,
                            moments, parse_dist, quantile, validate_spec)
from .dynamics import SimParams, gillespie_run
from .environment import Environment
from .errors import ParamViolation, SirknError
from .meanfield import classic_specs, final_size_fixed_point
from .percolation import percolation_final_size

ENGINE_DYNAMIC = "dynamic"
ENGINE_PERCOLATION = "percolation"
MEASURE_ANNEALED = "annealed"
MEASURE_QUENCHED = "quenched"
UNITS_ABSOLUTE = "absolute"
UNITS_LAMBDA_C = "lambda_c"

_TAG_ENV = 0x454E56
_TAG_RUN = 0x52554E
_TAG_NOSPREAD = 0x4E53

VERSION = "0.1.0"


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class ExperimentConfig:
    xi_spec: DistSpec
    rho_spec: DistSpec
    n_grid: Tuple[int, ...]
    lambda_grid: Tuple[float, ...]
    replications: int
    engine: str = ENGINE_PERCOLATION
    measure: str = MEASURE_ANNEALED
    epsilon: float = 0.05
    confidence: float = 0.95
    lambda_units: str = UNITS_ABSOLUTE
    master_seed: int = 0

    def __post_init__(self):
        validate_config(self)


def validate_config(config: ExperimentConfig) -> ExperimentConfig:
    validate_spec(config.xi_spec)
    validate_spec(config.rho_spec)
    if config.xi_spec.role != ROLE_RECOVERY:
        raise ParamViolation("xi_spec must have role=recovery")
    if config.rho_spec.role != ROLE_WEIGHT:
        raise ParamViolation("rho_spec must have role=weight")
    if not config.n_grid:
        raise ParamViolation("n_grid must be non-empty")
    if not config.lambda_grid:
        raise ParamViolation("lambda_grid must be non-empty")
    for n in config.n_grid:
        if n < 1:
            raise ParamViolation(f"n must satisfy n >= 1 (got {n})")
    for lam in config.lambda_grid:
        if lam < 0:
            raise ParamViolation(f"lambda must satisfy lambda >= 0 (got {lam})")
    if config.replications < 1:
        raise ParamViolation(
            f"replications must satisfy replications >= 1 (got {config.replications})")
    if not 0.0 < config.epsilon < 1.0:
        raise ParamViolation(f"epsilon must lie in (0, 1) (got {config.epsilon})")
    if not 0.0 < config.confidence < 1.0:
        raise ParamViolation(
            f"confidence must lie in (0, 1) (got {config.confidence})")
    if config.engine not in (ENGINE_DYNAMIC, ENGINE_PERCOLATION):
        raise ParamViolation(f"engine must be dynamic|percolation (got {config.engine!r})")
    if config.measure not in (MEASURE_ANNEALED, MEASURE_QUENCHED):
        raise ParamViolation(f"measure must be annealed|quenched (got {config.measure!r})")
    if config.lambda_units not in (UNITS_ABSOLUTE, UNITS_LAMBDA_C):
        raise ParamViolation(
            f"lambda_units must be absolute|lambda_c (got {config.lambda_units!r})")
    return config


def config_lambda_c(config: ExperimentConfig) -> float:
    return critical_lambda(moments(config.rho_spec, config.xi_spec))


def resolved_lambda_grid(config: ExperimentConfig) -> Tuple[float, ...]:
    """Absolute infection rates; multiples of lambda_c are resolved here."""
    if config.lambda_units == UNITS_ABSOLUTE:
        return tuple(float(l) for l in config.lambda_grid)
    lc = config_lambda_c(config)
    return tuple(float(l) * lc for l in config.lambda_grid)


def config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "xi_spec": format_dist(config.xi_spec),
        "rho_spec": format_dist(config.rho_spec),
        "n_grid": list(config.n_grid),
        "lambda_grid": list(config.lambda_grid),
        "lambda_units": config.lambda_units,
        "replications": config.replications,
        "engine": config.engine,
        "measure": config.measure,
        "epsilon": config.epsilon,
        "confidence": config.confidence,
        "master_seed": config.master_seed,
    }


def config_hash(config: ExperimentConfig) -> str:
    canon = json.dumps(config_to_dict(config), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


_LIST_FIELDS = {"n_grid", "lambda_grid"}
_INT_FIELDS = {"replications", "master_seed"}
_FLOAT_FIELDS = {"epsilon", "confidence"}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the plain-text key = value config document."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamViolation(f"config line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key in ("xi_spec", "rho_spec", "engine", "measure", "lambda_units"):
            values[key] = val
        elif key in _LIST_FIELDS:
            items = [v.strip() for v in val.split(",") if v.strip()]
            values[key] = items
        elif key in _INT_FIELDS:
            values[key] = int(val)
        elif key in _FLOAT_FIELDS:
            values[key] = float(val)
        else:
            raise ParamViolation(f"config line {lineno}: unknown field {key!r}")
    return config_from_dict(values)


def config_from_dict(values: dict) -> ExperimentConfig:
    missing = [k for k in ("xi_spec", "rho_spec", "n_grid", "lambda_grid",
                           "replications") if k not in values]
    if missing:
        raise ParamViolation(f"config missing required fields: {', '.join(missing)}")
    xi = values["xi_spec"]
    rho = values["rho_spec"]
    config = ExperimentConfig(
        xi_spec=xi if isinstance(xi, DistSpec) else parse_dist(str(xi), ROLE_RECOVERY),
        rho_spec=rho if isinstance(rho, DistSpec) else parse_dist(str(rho), ROLE_WEIGHT),
        n_grid=tuple(int(v) for v in values["n_grid"]),
        lambda_grid=tuple(float(v) for v in values["lambda_grid"]),
        replications=int(values["replications"]),
        engine=values.get("engine", ENGINE_PERCOLATION),
        measure=values.get("measure", MEASURE_ANNEALED),
        epsilon=float(values.get("epsilon", 0.05)),
        confidence=float(values.get("confidence", 0.95)),
        lambda_units=values.get("lambda_units", UNITS_ABSOLUTE),
        master_seed=int(values.get("master_seed", 0)),
    )
    return validate_config(config)


def config_from_file(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())


# ---------------------------------------------------------------------------
# Interval statistics


def wilson_interval(successes: int, trials: int, level: float) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ParamViolation(f"trials must satisfy trials >= 1 (got {trials})")
    if not 0 <= successes <= trials:
        raise ParamViolation(
            f"successes must lie in [0, trials] (got {successes}/{trials})")
    if not 0.0 < level < 1.0:
        raise ParamViolation(f"level must lie in (0, 1) (got {level})")
    z = float(spstats.norm.ppf(0.5 + 0.5 * level))
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


def mean_interval(samples: np.ndarray, level: float) -> Tuple[float, float, float]:
    """(mean, lo, hi) with a normal-approximation CI."""
    samples = np.asarray(samples, dtype=float)
    m = float(samples.mean())
    if samples.size < 2:
        return m, m, m
    z = float(spstats.norm.ppf(0.5 + 0.5 * level))
    half = z * float(samples.std(ddof=1)) / math.sqrt(samples.size)
    return m, m - half, m + half


def chi_square_two_sample(a: np.ndarray, b: np.ndarray,
                          min_pooled: int = 10) -> Tuple[float, int, float]:
    """Two-sample chi-square on integer-valued samples.

    Buckets are the pooled distinct values, merged (in value order) until
    each pooled bucket holds at least `min_pooled` observations.  Returns
    (statistic, dof, p_value); degenerate bucketings return p = 1.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    values = np.union1d(a, b)
    ca = np.array([(a == v).sum() for v in values], dtype=float)
    cb = np.array([(b == v).sum() for v in values], dtype=float)
    pooled = ca + cb
    # merge adjacent buckets until every pooled count is large enough
    ma, mb = [], []
    acc_a = acc_b = 0.0
    for k in range(len(values)):
        acc_a += ca[k]
        acc_b += cb[k]
        if acc_a + acc_b >= min_pooled:
            ma.append(acc_a)
            mb.append(acc_b)
            acc_a = acc_b = 0.0
    if acc_a + acc_b > 0:
        if ma:
            ma[-1] += acc_a
            mb[-1] += acc_b
        else:
            ma, mb = [acc_a], [acc_b]
    ma = np.array(ma)
    mb = np.array(mb)
    if len(ma) < 2:
        return 0.0, 0, 1.0
    na, nb = ma.sum(), mb.sum()
    pooled = ma + mb
    ea = pooled * na / (na + nb)
    eb = pooled * nb / (na + nb)
    stat = float((((ma - ea) ** 2) / ea).sum() + (((mb - eb) ** 2) / eb).sum())
    dof = len(ma) - 1
    return stat, dof, float(spstats.chi2.sf(stat, dof))


# ---------------------------------------------------------------------------
# Replication streams and batch collection


def _env_seed(master_seed: int, grid_index: int, rep: int, measure: str) -> int:
    if measure == MEASURE_QUENCHED:
        return seeding.derive_key(master_seed, _TAG_ENV)
    return seeding.derive_key(master_seed, _TAG_ENV, grid_index, rep)


def _run_seed(master_seed: int, grid_index: int, rep: int) -> int:
    return seeding.derive_key(master_seed, _TAG_RUN, grid_index, rep)


def _collect_range(config: ExperimentConfig, n: int, lam: float,
                   grid_index: int, start: int, stop: int):
    out = np.zeros(stop - start, dtype=np.uint32)
    failures = 0
    env = None
    for rep in range(start, stop):
        env_seed = _env_seed(config.master_seed, grid_index, rep, config.measure)
        if env is None or env.seed != env_seed:
            env = Environment(n, env_seed, config.xi_spec, config.rho_spec)
        run_seed = _run_seed(config.master_seed, grid_index, rep)
        try:
            if config.engine == ENGINE_PERCOLATION:
                out[rep - start] = percolation_final_size(env, lam, run_seed).r_infinity
            else:
                out[rep - start] = gillespie_run(
                    env, SimParams(lam=lam, run_seed=run_seed)).r_infinity
        except SirknError:
            failures += 1
    return out, failures


def _worker(payload):
    config_dict, n, lam, grid_index, start, stop = payload
    config = config_from_dict(config_dict)
    return _collect_range(config, n, lam, grid_index, start, stop)


def collect_final_sizes(config: ExperimentConfig, n: int, lam: float,
                        grid_index: int = 0, jobs: int = 1
                        ) -> Tuple[np.ndarray, int]:
    """Final sizes for every replication of one (n, lambda) grid point.

    Stream ids depend only on (master_seed, grid_index, replication), so the
    output is byte-identical for every `jobs` value.
    """
    validate_config(config)
    reps = config.replications
    if jobs <= 1 or reps < 64:
        return _collect_range(config, n, lam, grid_index, 0, reps)
    bounds = np.linspace(0, reps, jobs + 1, dtype=int)
    payloads = [(config_to_dict(config), n, lam, grid_index, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
    chunks = []
    failures = 0
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        for arr, fails in pool.map(_worker, payloads):
            chunks.append(arr)
            failures += fails
    return np.concatenate(chunks), failures


# ---------------------------------------------------------------------------
# No-spread probability: exact / analytic references


def no_spread_limit(xi_spec: DistSpec, rho_spec: DistSpec, lam: float) -> float:
    """Large-n limit of P(the initial infective infects nobody)."""
    return expect_self_over_self_plus(xi_spec, lam * mean(rho_spec))


def _spec_key_parts(spec: DistSpec):
    text = format_dist(spec)
    return [len(text)] + [ord(ch) for ch in text]


def no_spread_finite_n(xi_spec: DistSpec, rho_spec: DistSpec, lam: float,
                       n: int) -> float:
    """E[: xi / (xi + (lam/n) * sum of n-1 weights) :] over the environment.

    Exact (binomial convolution) when the weight law is purely atomic;
    otherwise a deterministic Monte Carlo average over environment draws
    with standard error below 5e-5.
    """
    if n < 1:
        raise ParamViolation(f"n must satisfy n >= 1 (got {n})")
    if n == 1 or lam == 0.0:
        return 1.0
    mix = as_mixture(rho_spec)
    if all(comp[0] == "atom" for _, comp in mix):
        return _no_spread_exact_atoms(xi_spec, mix, lam / n, n)
    return _no_spread_mc(xi_spec, rho_spec, lam, n)


def _no_spread_exact_atoms(xi_spec, mix, c, n):
    if len(mix) == 1:
        s_values = np.array([mix[0][1][1] * (n - 1)], dtype=float)
        weights = np.array([1.0])
    else:
        (p1, (_, v1)), (_, (_, v2)) = mix  # two_point: k draws land on v1
        k = np.arange(n)
        weights = spstats.binom.pmf(k, n - 1, p1)
        s_values = k * v1 + (n - 1 - k) * v2
    vals = expect_self_over_self_plus_vec(xi_spec, c * s_values)
    return float(np.dot(weights, vals))


def _no_spread_mc(xi_spec, rho_spec, lam, n, target_se=5e-5):
    key = seeding.derive_key(_TAG_NOSPREAD, n,
                             int.from_bytes(struct.pack("<d", lam), "little"),
                             *_spec_key_parts(xi_spec), *_spec_key_parts(rho_spec))
    rng = seeding.stream(key)
    c = lam / n
    max_samples = int(min(1_000_000, max(20_000, 3e8 / (n - 1))))
    chunk = max(1, min(20_000, int(4e6 / (n - 1))))
    total = 0
    acc = 0.0
    acc_sq = 0.0
    while total < max_samples:
        u = rng.random((chunk, n - 1))
        s = np.asarray(quantile(rho_spec, u)).sum(axis=1)
        vals = expect_self_over_self_plus_vec(xi_spec, c * s)
        acc += float(vals.sum())
        acc_sq += float((vals * vals).sum())
        total += chunk
        if total >= 20_000:
            var = max(acc_sq / total - (acc / total) ** 2, 0.0)
            if math.sqrt(var / total) < target_se:
                break
    return acc / total


class NoSpreadEstimate(NamedTuple):
    estimate: float
    ci: Tuple[float, float]
    finite_n_analytic: float
    limit_analytic: float


def estimate_p_no_spread(config: ExperimentConfig, n: int, lam: float,
                         grid_index: int = 0, jobs: int = 1) -> NoSpreadEstimate:
    """Monte Carlo P(final size = 1) with its analytic references."""
    samples, _ = collect_final_sizes(config, n, lam, grid_index, jobs)
    hits = int((samples == 1).sum())
    ci = wilson_interval(hits, len(samples), config.confidence)
    return NoSpreadEstimate(
        estimate=hits / len(samples),
        ci=ci,
        finite_n_analytic=no_spread_finite_n(config.xi_spec, config.rho_spec, lam, n),
        limit_analytic=no_spread_limit(config.xi_spec, config.rho_spec, lam),
    )


# ---------------------------------------------------------------------------
# Batch statistics and sweeps


@dataclass
class BatchStats:
    n: int
    lam: float
    lam_over_lambda_c: float
    replications: int
    failures: int
    mean_r_inf: float
    mean_ci: Tuple[float, float]
    mean_final_fraction: float
    mean_final_fraction_ci: Tuple[float, float]
    exceed_probability: float
    exceed_ci: Tuple[float, float]
    p_no_spread: float
    p_no_spread_ci: Tuple[float, float]
    lambda_c: float
    subcritical_mean_bound: Optional[float]
    no_spread_finite_n: float
    no_spread_limit: float

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "lambda": self.lam,
            "lambda_over_lambda_c": self.lam_over_lambda_c,
            "replications": self.replications,
            "failures": self.failures,
            "mean_r_inf": self.mean_r_inf,
            "mean_ci": list(self.mean_ci),
            "mean_final_fraction": self.mean_final_fraction,
            "mean_final_fraction_ci": list(self.mean_final_fraction_ci),
            "exceed_probability": self.exceed_probability,
            "exceed_ci": list(self.exceed_ci),
            "p_no_spread": self.p_no_spread,
            "p_no_spread_ci": list(self.p_no_spread_ci),
            "lambda_c": self.lambda_c,
            "subcritical_mean_bound": self.subcritical_mean_bound,
            "no_spread_finite_n": self.no_spread_finite_n,
            "no_spread_limit": self.no_spread_limit,
        }
        return d


def batch_stats_from_samples(config: ExperimentConfig, n: int, lam: float,
                             samples: np.ndarray, failures: int) -> BatchStats:
    lc = config_lambda_c(config)
    level = config.confidence
    mean_r, lo, hi = mean_interval(samples, level)
    exceed_hits = int((samples >= config.epsilon * n).sum())
    no_spread_hits = int((samples == 1).sum())
    return BatchStats(
        n=n,
        lam=lam,
        lam_over_lambda_c=lam / lc,
        replications=len(samples),
        failures=failures,
        mean_r_inf=mean_r,
        mean_ci=(lo, hi),
        mean_final_fraction=mean_r / n,
        mean_final_fraction_ci=(lo / n, hi / n),
        exceed_probability=exceed_hits / len(samples),
        exceed_ci=wilson_interval(exceed_hits, len(samples), level),
        p_no_spread=no_spread_hits / len(samples),
        p_no_spread_ci=wilson_interval(no_spread_hits, len(samples), level),
        lambda_c=lc,
        subcritical_mean_bound=(lc / (lc - lam)) if lam < lc else None,
        no_spread_finite_n=no_spread_finite_n(config.xi_spec, config.rho_spec, lam, n),
        no_spread_limit=no_spread_limit(config.xi_spec, config.rho_spec, lam),
    )


def run_batch(config: ExperimentConfig, n: int, lam: float,
              grid_index: int = 0, jobs: int = 1,
              return_samples: bool = False):
    """All estimators for one (n, lambda) grid point.

    Annealed mode draws a fresh environment per replication; quenched mode
    fixes one environment from the master seed and varies only run seeds.
    """
    samples, failures = collect_final_sizes(config, n, lam, grid_index, jobs)
    stats = batch_stats_from_samples(config, n, lam, samples, failures)
    if return_samples:
        return stats, samples
    return stats


@dataclass
class SweepResult:
    config: ExperimentConfig
    lambda_c: float
    resolved_lambdas: Tuple[float, ...]
    rows: List[BatchStats]
    supercritical_witnesses: List[dict]
    subcritical_checks: List[dict]
    # large-n final-size reference per lambda; only the classic constant
    # unit-rate model has one
    mean_field_reference: List[dict] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)


def sweep(config: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """Full (lambda, n) grid of batches plus the theorem-shaped summaries.

    For each supercritical lambda the witnessed pair is (c, b) =
    (epsilon, min over the n grid of the exceedance probability); for each
    subcritical lambda the exceedance probabilities are checked to be
    nonincreasing along the sorted n grid.
    """
    validate_config(config)
    lc = config_lambda_c(config)
    lambdas = resolved_lambda_grid(config)
    rows: List[BatchStats] = []
    grid_index = 0
    for lam in lambdas:
        for n in config.n_grid:
            rows.append(run_batch(config, n, lam, grid_index=grid_index, jobs=jobs))
            grid_index += 1
    witnesses = []
    subchecks = []
    for lam in sorted(set(lambdas)):
        lam_rows = sorted((r for r in rows if r.lam == lam), key=lambda r: r.n)
        if lam > lc:
            witnesses.append({
                "lambda": lam,
                "c": config.epsilon,
                "b": min(r.exceed_probability for r in lam_rows),
            })
        elif lam < lc:
            probs = [r.exceed_probability for r in lam_rows]
            subchecks.append({
                "lambda": lam,
                "exceed_nonincreasing": all(q <= p for p, q in zip(probs, probs[1:])),
            })
    mean_field = []
    if classic_specs(config.xi_spec, config.rho_spec):
        for lam in sorted(set(lambdas)):
            fp = final_size_fixed_point(lam, 1.0, 0.0)
            mean_field.append({"lambda": lam, "final_size_fraction": fp.value,
                               "bracketed": fp.bracketed})
    return SweepResult(
        config=config,
        lambda_c=lc,
        resolved_lambdas=lambdas,
        rows=rows,
        supercritical_witnesses=witnesses,
        subcritical_checks=subchecks,
        mean_field_reference=mean_field,
        provenance={
            "config_hash": config_hash(config),
            "master_seed": config.master_seed,
            "engine": config.engine,
            "version": VERSION,
        },
    )


# ---------------------------------------------------------------------------
# Persistence

SWEEP_CSV_COLUMNS = ("n", "lambda", "lambda_over_lambda_c", "mean_r_inf",
                     "ci_lo", "ci_hi", "exceed_prob", "exceed_lo", "exceed_hi",
                     "p_no_spread", "analytic_no_spread", "bound_eq34")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def sweep_csv_text(result: SweepResult) -> str:
    lines = [",".join(SWEEP_CSV_COLUMNS)]
    for r in result.rows:
        lines.append(",".join([
            _fmt(r.n), _fmt(r.lam), _fmt(r.lam_over_lambda_c), _fmt(r.mean_r_inf),
            _fmt(r.mean_ci[0]), _fmt(r.mean_ci[1]), _fmt(r.exceed_probability),
            _fmt(r.exceed_ci[0]), _fmt(r.exceed_ci[1]), _fmt(r.p_no_spread),
            _fmt(r.no_spread_finite_n), _fmt(r.subcritical_mean_bound),
        ]))
    return "\n".join(lines) + "\n"


def sweep_to_dict(result: SweepResult) -> dict:
    return {
        "config": config_to_dict(result.config),
        "lambda_c": result.lambda_c,
        "resolved_lambdas": list(result.resolved_lambdas),
        "rows": [r.to_dict() for r in result.rows],
        "supercritical_witnesses": result.supercritical_witnesses,
        "subcritical_checks": result.subcritical_checks,
        "mean_field_reference": result.mean_field_reference,
        "provenance": result.provenance,
    }


def write_sweep(result: SweepResult, outdir) -> Tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "sweep.csv"
    json_path = outdir / "sweep.json"
    csv_path.write_text(sweep_csv_text(result))
    json_path.write_text(json.dumps(sweep_to_dict(result), sort_keys=True,
                                    indent=2) + "\n")
    return csv_path, json_path
