"""Construction of admissible ideal attention maps and numerical
certification of the two divergence statements they support.

An ideal map assigns, per key column, at least ``rho`` to every critical
query (edit and effect indices) and at least ``1 - epsilon`` of total mass
to the critical set.  Certification then checks, column by column:

(1) the divergence gap KL(A*||A) - KL(A*||A_esa) dominates
    delta * (|edit| * rho - 1), which is nonnegative exactly when
    rho >= 1/|edit|;
(2) against the exact hard limit the divergence is infinite whenever the
    ideal keeps positive auxiliary mass, while finite-surrogate divergences
    grow along an increasing surrogate grid and the effects-sensitive
    divergence stays under |queries| * log(1/beta) with
    beta = min_ij A_ij of the standard map.

Note the existence constraint: entry floors on the critical set force
(|edit| + |effect|) * rho <= 1 - epsilon, so rho >= 1/|edit| is attainable
only with an empty effect set, epsilon = 0 and rho = 1/|edit| exactly.
Constructors therefore enforce feasibility, while the rho >= 1/|edit|
hypothesis is surfaced as :attr:`IdealSpec.hypothesis_satisfied` and
checked by callers that certify statement (1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .attention import (
    EsaConfig,
    RegionPartition,
    compute_delta,
    esa_attention,
    hard_attention_limit,
    hard_attention_surrogate,
    standard_attention,
)
from .errors import DomainError, ShapeError
from .numerics import kl_divergence, validate_logits

GAP_TOL = 1e-9
LOWER_BOUND_TOL = 1e-12
STEP_NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class IdealSpec:
    """Parameters (rho, epsilon) plus the region partition that together
    define the admissible ideal maps.

    Feasibility requires (|edit| + |effect|) * rho <= 1 - epsilon and
    epsilon < rho; violations raise :class:`DomainError` naming the
    inequality.  ``require_hypothesis=True`` additionally insists on
    rho >= 1/|edit| at construction time.
    """

    rho: float
    epsilon: float
    partition: RegionPartition
    require_hypothesis: bool = False

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise DomainError(f"rho in (0, 1) violated: rho = {self.rho}")
        if not 0.0 <= self.epsilon < 1.0:
            raise DomainError(f"epsilon in [0, 1) violated: epsilon = {self.epsilon}")
        if self.epsilon >= self.rho:
            raise DomainError(f"epsilon < rho violated: {self.epsilon} >= {self.rho}")
        n_crit = len(self.critical)
        if n_crit * self.rho > 1.0 - self.epsilon + 1e-15:
            raise DomainError(
                "(|edit| + |effect|) * rho <= 1 - epsilon violated: "
                f"{n_crit} * {self.rho} > {1.0 - self.epsilon}"
            )
        if self.require_hypothesis and not self.hypothesis_satisfied:
            raise DomainError(
                "rho >= 1/|edit| violated: "
                f"{self.rho} < {1.0 / len(self.partition.edit)}"
            )

    @property
    def critical(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.partition.edit) | set(self.partition.effect)))

    @property
    def hypothesis_satisfied(self) -> bool:
        """Whether rho >= 1/|edit| holds (the statement-(1) hypothesis)."""
        return self.rho * len(self.partition.edit) >= 1.0 - LOWER_BOUND_TOL


@dataclass(frozen=True)
class IdealAttention:
    """Sampled ideal map: one probability column per key, the spec it was
    drawn from, and the per-column mass on auxiliary indices."""

    columns: np.ndarray
    spec: IdealSpec
    aux_mass: np.ndarray


def check_ideal_conditions(columns, spec: IdealSpec, tol: float = 1e-12) -> list[str]:
    """Independent checker for the three admissibility conditions.

    Deliberately written as plain loops with compensated sums so it shares
    no code path with :func:`sample_ideal`.  Returns human-readable
    violation strings; an empty list means every column passes.
    """
    arr = np.asarray(columns, dtype=np.float64)
    part = spec.partition
    if arr.shape != (part.n_queries, part.n_keys):
        raise ShapeError(f"columns shape {arr.shape} does not match partition")
    violations = []
    critical = set(spec.critical)
    for j in range(part.n_keys):
        col = arr[:, j]
        for i in part.edit:
            if col[i] < spec.rho - tol:
                violations.append(f"column {j}: edit entry {i} = {col[i]!r} < rho")
        for i in part.effect:
            if col[i] < spec.rho - tol:
                violations.append(f"column {j}: effect entry {i} = {col[i]!r} < rho")
        crit_mass = math.fsum(col[i] for i in sorted(critical))
        if crit_mass < 1.0 - spec.epsilon - tol:
            violations.append(f"column {j}: critical mass {crit_mass!r} < 1 - epsilon")
        total = math.fsum(col.tolist())
        if abs(total - 1.0) > tol:
            violations.append(f"column {j}: sums to {total!r}")
        if any(v < -tol for v in col):
            violations.append(f"column {j}: negative entry")
    return violations


def sample_ideal(spec: IdealSpec, seed: int) -> IdealAttention:
    """Draw an admissible ideal map, deterministically in ``seed``.

    Per column: critical mass m is uniform on [1 - epsilon, 1] (forced to 1
    when there are no ``other`` indices to carry the remainder), spread over
    the critical set as rho plus a Dirichlet-weighted share of the surplus
    m - |critical| * rho, and the remaining 1 - m is spread uniformly at
    random over the ``other`` simplex.  The three admissibility conditions
    are re-verified post hoc by :func:`check_ideal_conditions`.
    """
    rng = np.random.default_rng(seed)
    part = spec.partition
    crit = list(spec.critical)
    other = list(part.other)
    cols = np.zeros((part.n_queries, part.n_keys))
    for j in range(part.n_keys):
        m = rng.uniform(1.0 - spec.epsilon, 1.0) if other else 1.0
        surplus = max(m - len(crit) * spec.rho, 0.0)
        weights = rng.dirichlet(np.ones(len(crit)))
        cols[crit, j] = spec.rho + weights * surplus
        if other:
            share = rng.dirichlet(np.ones(len(other)))
            cols[other, j] = share * (1.0 - m)
    problems = check_ideal_conditions(cols, spec)
    if problems:
        raise RuntimeError("sampled ideal failed its own conditions: " + "; ".join(problems))
    aux_mass = cols[list(part.aux), :].sum(axis=0) if part.aux else np.zeros(part.n_keys)
    return IdealAttention(columns=cols, spec=spec, aux_mass=aux_mass)


@dataclass
class TheoremReport:
    """Per-key certification record.

    ``kl_hard_surrogates`` has one row per surrogate grid value;
    ``verdict_gap_bound`` covers statement (1) and
    ``verdict_hard_divergence`` statement (2); either may be None when only
    the other statement was certified.  Infinite divergences serialize as
    the string ``"inf"``.
    """

    kl_standard: np.ndarray
    kl_esa: np.ndarray
    gap: np.ndarray
    lower_bound: np.ndarray
    delta: np.ndarray
    upper_bound: np.ndarray | None = None
    kl_hard_surrogates: np.ndarray | None = None
    kl_hard_limit: np.ndarray | None = None
    m_grid: tuple[float, ...] | None = None
    verdict_gap_bound: bool | None = None
    verdict_hard_divergence: bool | None = None
    config: dict | None = None

    @property
    def verdicts_all_true(self) -> bool:
        checked = [v for v in (self.verdict_gap_bound, self.verdict_hard_divergence)
                   if v is not None]
        return bool(checked) and all(checked)

    def to_json_dict(self) -> dict:
        def enc(x):
            if x is None:
                return None
            arr = np.asarray(x)
            flat = [("inf" if math.isinf(v) else float(v)) for v in arr.reshape(-1)]
            if arr.ndim == 1:
                return flat
            return [flat[i * arr.shape[1]:(i + 1) * arr.shape[1]] for i in range(arr.shape[0])]

        return {
            "kl_standard": enc(self.kl_standard),
            "kl_esa": enc(self.kl_esa),
            "gap": enc(self.gap),
            "lower_bound": enc(self.lower_bound),
            "delta": enc(self.delta),
            "upper_bound": enc(self.upper_bound),
            "kl_hard_surrogates": enc(self.kl_hard_surrogates),
            "kl_hard_limit": enc(self.kl_hard_limit),
            "m_grid": list(self.m_grid) if self.m_grid is not None else None,
            "verdict_gap_bound": self.verdict_gap_bound,
            "verdict_hard_divergence": self.verdict_hard_divergence,
            "config": self.config,
        }


def _kl_per_key(p_cols: np.ndarray, q_cols: np.ndarray) -> np.ndarray:
    return np.array([kl_divergence(p_cols[:, j], q_cols[:, j])
                     for j in range(p_cols.shape[1])])


def _prepare(ideal: IdealAttention, logits, partition: RegionPartition, config: EsaConfig):
    arr = validate_logits(logits)
    if arr.shape != (partition.n_queries, partition.n_keys):
        raise ShapeError(f"logits shape {arr.shape} does not match partition")
    if ideal.columns.shape != arr.shape:
        raise ShapeError("ideal columns do not match the logits shape")
    if ideal.spec.partition.edit != partition.edit:
        raise DomainError("ideal and partition disagree on the edit set")
    if set(partition.object_keys) != set(range(partition.n_keys)):
        raise DomainError(
            "certification requires the insertion bias on every analysed key column"
        )
    a_std = standard_attention(arr)
    a_esa = esa_attention(arr, partition, config)
    delta = compute_delta(arr, config.alpha_insert, config.std_scope)
    delta_vec = np.broadcast_to(np.asarray(delta, dtype=np.float64),
                                (partition.n_keys,)).copy()
    kl_std = _kl_per_key(ideal.columns, a_std)
    kl_esa = _kl_per_key(ideal.columns, a_esa)
    if np.any(np.isinf(kl_std)) or np.any(np.isinf(kl_esa)):
        raise RuntimeError("infinite divergence against a finite-logit map")
    return arr, a_std, kl_std, kl_esa, delta_vec


def _echo_config(partition: RegionPartition, config: EsaConfig, spec: IdealSpec) -> dict:
    return {
        "alpha_insert": config.alpha_insert,
        "alpha_restore": config.alpha_restore,
        "std_scope": config.std_scope,
        "rho": spec.rho,
        "epsilon": spec.epsilon,
        "n_queries": partition.n_queries,
        "n_keys": partition.n_keys,
        "n_edit": len(partition.edit),
        "n_effect": len(partition.effect),
    }


def verify_statement_1(ideal: IdealAttention, logits, partition: RegionPartition,
                       config: EsaConfig) -> TheoremReport:
    """Certify, per key column, gap >= delta * (|edit| * rho - 1).

    The verdict additionally requires the lower bound itself to be
    nonnegative (within tolerance), which encodes the rho >= 1/|edit|
    hypothesis; with a feasible rho below that threshold the gap inequality
    is still checked but the verdict reports False.
    """
    _, _, kl_std, kl_esa, delta_vec = _prepare(ideal, logits, partition, config)
    gap = kl_std - kl_esa
    lower = delta_vec * (len(partition.edit) * ideal.spec.rho - 1.0)
    verdict = bool(np.all(gap >= lower - GAP_TOL) and np.all(lower >= -LOWER_BOUND_TOL))
    return TheoremReport(
        kl_standard=kl_std, kl_esa=kl_esa, gap=gap, lower_bound=lower,
        delta=delta_vec, verdict_gap_bound=verdict,
        config=_echo_config(partition, config, ideal.spec),
    )


def verify_statement_2(ideal: IdealAttention, logits, partition: RegionPartition,
                       config: EsaConfig, m_grid) -> TheoremReport:
    """Certify the divergence dichotomy against hard modulation.

    Checks (a) strictly increasing surrogate divergences along ``m_grid``,
    (b) an infinite divergence against the exact limit wherever the ideal
    keeps positive auxiliary mass, and (c) the finite upper bound
    |queries| * log(1/beta) on the effects-sensitive divergence.
    """
    grid = tuple(float(m) for m in m_grid)
    if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("m_grid must contain at least two strictly increasing values")
    if np.all(ideal.aux_mass <= 0.0):
        raise DomainError(
            "statement 2 is vacuous: the ideal places no mass on auxiliary queries"
        )
    arr, a_std, kl_std, kl_esa, delta_vec = _prepare(ideal, logits, partition, config)
    surrogates = np.stack([
        _kl_per_key(ideal.columns, hard_attention_surrogate(arr, partition, m))
        for m in grid
    ])
    limit_cols = hard_attention_limit(partition).as_matrix()
    kl_limit = _kl_per_key(ideal.columns, limit_cols)
    beta = float(a_std.min())
    upper = np.full(partition.n_keys, partition.n_queries * math.log(1.0 / beta))
    increasing = bool(np.all(np.diff(surrogates, axis=0) > STEP_NOISE_FLOOR))
    infinite_ok = all(math.isinf(kl_limit[j])
                      for j in range(partition.n_keys) if ideal.aux_mass[j] > 0.0)
    bounded = bool(np.all(kl_esa <= upper + GAP_TOL))
    gap = kl_std - kl_esa
    lower = delta_vec * (len(partition.edit) * ideal.spec.rho - 1.0)
    return TheoremReport(
        kl_standard=kl_std, kl_esa=kl_esa, gap=gap, lower_bound=lower,
        delta=delta_vec, upper_bound=upper, kl_hard_surrogates=surrogates,
        kl_hard_limit=kl_limit, m_grid=grid,
        verdict_hard_divergence=bool(increasing and infinite_ok and bounded),
        config=_echo_config(partition, config, ideal.spec),
    )


def verify_theorem(ideal: IdealAttention, logits, partition: RegionPartition,
                   config: EsaConfig, m_grid) -> TheoremReport:
    """Run both certifications on one instance and merge the records."""
    r1 = verify_statement_1(ideal, logits, partition, config)
    r2 = verify_statement_2(ideal, logits, partition, config, m_grid)
    r2.verdict_gap_bound = r1.verdict_gap_bound
    return r2


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    mean_gap: float
    mean_lower_bound: float
    violations: int


def sweep_alpha(partition: RegionPartition, spec: IdealSpec, alphas, trials: int,
                seed: int, workers: int = 1) -> list[SweepRow]:
    """Mean gap / bound statistics per insertion alpha over seeded trials.

    The same logit and ideal draws are reused across the alpha grid, so the
    table isolates the effect of alpha.  A violation is a (trial, key) pair
    whose gap falls below its lower bound by more than the certification
    tolerance.  Deterministic in ``seed`` and independent of ``workers``.
    """
    alphas = [float(a) for a in alphas]
    if any(a < 0 for a in alphas):
        raise DomainError("alphas must be nonnegative")
    if trials < 1:
        raise DomainError("trials must be at least 1")
    root = np.random.default_rng(seed)
    trial_seeds = root.integers(0, 2 ** 63 - 1, size=(trials, 2))

    def run_trial(t: int):
        rng = np.random.default_rng(int(trial_seeds[t, 0]))
        logits = rng.standard_normal((partition.n_queries, partition.n_keys))
        ideal = sample_ideal(spec, seed=int(trial_seeds[t, 1]))
        out = []
        for a in alphas:
            report = verify_statement_1(
                ideal, logits, partition,
                EsaConfig(alpha_insert=a, alpha_restore=0.0),
            )
            bad = int(np.sum(report.gap < report.lower_bound - GAP_TOL))
            out.append((report.gap, report.lower_bound, bad))
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(run_trial, range(trials)))
    else:
        per_trial = [run_trial(t) for t in range(trials)]

    rows = []
    for idx, a in enumerate(alphas):
        gaps = np.concatenate([per_trial[t][idx][0] for t in range(trials)])
        lowers = np.concatenate([per_trial[t][idx][1] for t in range(trials)])
        violations = sum(per_trial[t][idx][2] for t in range(trials))
        rows.append(SweepRow(alpha=a, mean_gap=float(gaps.mean()),
                             mean_lower_bound=float(lowers.mean()),
                             violations=violations))
    return rows
