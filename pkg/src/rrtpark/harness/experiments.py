"""Monte Carlo drivers for the flux, critical-window, theta, spine and
local-limit experiments.

Every trial draws from its own Philox stream keyed by (master seed,
experiment, grid index, trial index); small trees are simulated in fixed
blocks keyed the same way. Results are therefore independent of how many
worker processes run the blocks.

Note on scale: the separation between the two sides of the critical window
only holds up to ``(log n)^{o(1)}`` factors, which no desk-scale ``n`` can
resolve. The window and theta experiments report trends on each side of the
threshold, never the exponent boundary itself.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
import numpy as np

from .. import _kernels
from ..car_laws import CarLaw, LawSpec, parse_law_spec
from ..exact_kit import root_empty_bound, spine_bound, subcritical_constants
from ..parking_engine import NotReached, psi_sparse, theta
from ..rrt_core import ball, sample_local_limit_ball, sample_recursive_tree
from .runner import binomial_se, block_rng, blocks, mean_se, run_tasks, trial_rng

SMALL_N = 32
SMALL_BLOCK = 20_000
TRIAL_BLOCK = 25
MAX_DENSE = 50_000_000
SPINE_MAX_VERTICES = 50_000_000


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    law: str = "binary:alpha=0.5"
    grid: tuple = ()
    trials: int = 200
    seed: int = 0
    workers: int = 1
    alpha_c: float = 1.0
    p_grid: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.grid:
            g = list(self.grid)
            steps = [b - a for a, b in zip(g, g[1:])]
            if not (all(d > 0 for d in steps) or all(d < 0 for d in steps)):
                raise ValueError("grid must be strictly monotone")
        if any(p < 0 for p in self.p_grid):
            raise ValueError("window exponents p must be nonnegative")

    def to_dict(self) -> dict:
        # worker count is deliberately left out: it must not affect the output
        d = asdict(self)
        d.pop("workers")
        d["grid"] = list(self.grid)
        d["p_grid"] = list(self.p_grid)
        return d


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[dict]
    trials: list[tuple] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _law(cfg: ExperimentConfig) -> LawSpec:
    return parse_law_spec(cfg.law)


# ---------------------------------------------------------------- single trials


def flux_of_tree_size(n: int, law: CarLaw, rng: np.random.Generator) -> int:
    return max(root_visits(n, law, rng) - 1, 0)


def root_visits(n: int, law: CarLaw, rng: np.random.Generator) -> int:
    """Cars visiting the root of a fresh uniform recursive tree of size ``n``."""
    p_car = 1.0 - law.pmf[0]
    if p_car == 0.0:
        return 0
    if p_car * (math.log(n) + 1.0) < 0.05:
        return psi_sparse(n, law, rng)
    if n > MAX_DENSE:
        raise ValueError(f"tree of size {n} too large for dense simulation")
    tree = sample_recursive_tree(n, rng)
    cars = law.sample(rng, n)
    return int(_kernels.park_psi(tree.parent, cars)[0])


def _small_block(seed, name, gi, block, n, lo, hi, pmf):
    """Root visits for trials ``lo..hi-1`` on trees with ``n <= SMALL_N``."""
    rng = block_rng(seed, name, gi, block)
    size = hi - lo
    law = CarLaw(pmf)
    parents = np.empty((size, n), dtype=np.int64)
    parents[:, 0] = -1
    if n > 1:
        parents[:, 1:] = (rng.random((size, n - 1)) * np.arange(1, n)).astype(np.int64)
    cars = law.from_uniforms(rng.random((size, n)))
    return _kernels.park_psi_batch(parents, cars)[:, 0].tolist()


def _large_block(seed, name, gi, n, lo, hi, pmf):
    law = CarLaw(pmf)
    return [root_visits(n, law, trial_rng(seed, name, gi, i)) for i in range(lo, hi)]


def _root_visit_samples(cfg, name, gi, n, law: CarLaw) -> list[int]:
    if n <= SMALL_N:
        tasks = [
            (cfg.seed, name, gi, b, n, lo, hi, law.pmf)
            for b, (lo, hi) in enumerate(blocks(cfg.trials, SMALL_BLOCK))
        ]
        parts = run_tasks(_small_block, tasks, cfg.workers)
    else:
        tasks = [
            (cfg.seed, name, gi, n, lo, hi, law.pmf)
            for lo, hi in blocks(cfg.trials, TRIAL_BLOCK)
        ]
        parts = run_tasks(_large_block, tasks, cfg.workers)
    return [v for part in parts for v in part]


def _flux_summary(psis: list[int]) -> dict:
    psi = np.asarray(psis, dtype=np.int64)
    flux = np.maximum(psi - 1, 0)
    mf, sf = mean_se(flux)
    pos = float(np.mean(flux > 0))
    mp, sp = mean_se(psi)
    return {
        "mean_flux": mf,
        "se_flux": sf,
        "p_flux_pos": pos,
        "se_p_flux_pos": binomial_se(pos, psi.size),
        "mean_psi": mp,
        "se_psi": sp,
    }


# ---------------------------------------------------------------- experiments


def flux_scaling(cfg: ExperimentConfig) -> ExperimentResult:
    """Flux per vertex of uniform recursive trees over a grid of sizes."""
    spec = _law(cfg)
    law = spec.law()
    rows, raw = [], []
    for gi, n in enumerate(int(x) for x in cfg.grid):
        psis = _root_visit_samples(cfg, "sim-flux", gi, n, law)
        s = _flux_summary(psis)
        ratio = np.maximum(np.asarray(psis) - 1, 0) / n
        m, se = mean_se(ratio)
        rows.append(
            {"n": n, "alpha": spec.alpha, "trials": cfg.trials,
             "flux_over_n": m, "se_flux_over_n": se, **s}
        )
        raw.extend((n, i, max(v - 1, 0)) for i, v in enumerate(psis))
    return ExperimentResult(cfg, rows, raw)


def window_alpha(c: float, n: int, p: float) -> float:
    return c * math.log(n) ** (-p)


def critical_window_scan(cfg: ExperimentConfig) -> ExperimentResult:
    """Flux along ``alpha_n = c (log n)^-p`` for each exponent ``p``."""
    spec = _law(cfg)
    fam = spec.family
    rows, raw = [], []
    gi = 0
    for p in cfg.p_grid:
        for n in (int(x) for x in cfg.grid):
            if n < 2:
                raise ValueError("window grid needs n >= 2")
            alpha = window_alpha(cfg.alpha_c, n, p)
            base = {"p": p, "n": n, "alpha": alpha,
                    "threshold_p": 1.0 / fam.beta_star, "trials": cfg.trials}
            if alpha > spec.max_alpha:
                rows.append({**base, "skipped": 1, "mean_flux": math.nan,
                             "se_flux": math.nan, "p_flux_pos": math.nan,
                             "se_p_flux_pos": math.nan, "mean_psi": math.nan,
                             "se_psi": math.nan})
            else:
                psis = _root_visit_samples(cfg, "window", gi, n, spec.law(alpha))
                rows.append({**base, "skipped": 0, **_flux_summary(psis)})
                raw.extend((p, n, i, max(v - 1, 0)) for i, v in enumerate(psis))
            gi += 1
    return ExperimentResult(cfg, rows, raw)


def _theta_block(seed, gi, lo, hi, pmf, C, n_cap):
    law = CarLaw(pmf)
    out = []
    for i in range(lo, hi):
        r = theta(law, C, n_cap, trial_rng(seed, "theta", gi, i))
        out.append(-1 if isinstance(r, NotReached) else int(r))
    return out


def loglog_ratio(theta_value: float, alpha: float) -> float:
    """``log log theta / |log alpha|``; undefined (nan) at ``alpha = 1``."""
    if alpha == 1.0:
        return math.nan
    if theta_value <= 1:
        return -math.inf
    return math.log(math.log(theta_value)) / abs(math.log(alpha))


def theta_scaling(cfg: ExperimentConfig) -> ExperimentResult:
    """First-flux time statistics over a grid of densities."""
    spec = _law(cfg)
    C = int(cfg.params.get("C", 1))
    n_cap = int(cfg.params.get("n_cap", 10_000_000))
    rows, raw = [], []
    for gi, alpha in enumerate(cfg.grid):
        law = spec.law(alpha)
        tasks = [(cfg.seed, gi, lo, hi, law.pmf, C, n_cap)
                 for lo, hi in blocks(cfg.trials, TRIAL_BLOCK)]
        vals = [v for part in run_tasks(_theta_block, tasks, cfg.workers) for v in part]
        raw.extend((alpha, i, v) for i, v in enumerate(vals))
        reached = [v for v in vals if v > 0]
        ordered = sorted(v if v > 0 else math.inf for v in vals)
        med = ordered[(len(ordered) - 1) // 2]
        censored = math.isinf(med)
        ratios = [loglog_ratio(v, alpha) for v in reached]
        finite = [r for r in ratios if math.isfinite(r)]
        mr, sr = mean_se(finite) if finite else (math.nan, math.nan)
        rows.append({
            "alpha": alpha, "C": C, "n_cap": n_cap, "trials": cfg.trials,
            "reached": len(reached),
            "median_theta": math.nan if censored else med,
            "mean_theta": float(np.mean(reached)) if reached else math.nan,
            "median_ratio": math.nan if censored else loglog_ratio(med, alpha),
            "mean_ratio": mr, "se_ratio": sr,
            "median_censored": int(censored),
        })
    return ExperimentResult(cfg, rows, raw)


def _spine_block(seed, name, gi, lo, hi, pmf, K):
    cdf = CarLaw(pmf).cdf
    out = []
    for i in range(lo, hi):
        rng = trial_rng(seed, name, gi, i)
        birth = -np.cumsum(rng.standard_exponential(K + 1))
        empty, size = _kernels.spine_empty_indicators(rng, birth, cdf, SPINE_MAX_VERTICES)
        if size < 0:
            raise RuntimeError("spine sample exceeded the vertex budget")
        out.append(empty.astype(int).tolist())
    return out


def spine_occupancy(cfg: ExperimentConfig) -> ExperimentResult:
    """Chance that spine vertex ``S_k`` of the limit tree ends up empty."""
    spec = _law(cfg)
    law = spec.law()
    K = int(cfg.params.get("K", 10))
    if not 0 <= K <= 20:
        raise ValueError("spine depth K must lie in 0..20")
    tasks = [(cfg.seed, "spine", 0, lo, hi, law.pmf, K)
             for lo, hi in blocks(cfg.trials, 500)]
    ind = np.array([v for part in run_tasks(_spine_block, tasks, cfg.workers) for v in part])
    rows = []
    for k in range(K + 1):
        p = float(ind[:, k].mean())
        rows.append({"k": k, "alpha": spec.alpha, "delta": law.delta,
                     "trials": cfg.trials, "p_empty": p,
                     "se": binomial_se(p, cfg.trials),
                     "bound": spine_bound(law.delta, k)})
    raw = [(i, *row) for i, row in enumerate(ind.tolist())]
    return ExperimentResult(cfg, rows, raw)


def _root_empty_block(seed, gi, lo, hi, pmf, t):
    cdf = CarLaw(pmf).cdf
    birth = np.array([-float(t)])
    out = []
    for i in range(lo, hi):
        rng = trial_rng(seed, "root-empty", gi, i)
        empty, size = _kernels.spine_empty_indicators(rng, birth, cdf, SPINE_MAX_VERTICES)
        if size < 0:
            raise RuntimeError("root-empty sample exceeded the vertex budget")
        out.append(int(empty[0]))
    return out


def root_empty_probability(cfg: ExperimentConfig) -> ExperimentResult:
    """Chance the root of the continuous-time tree of age ``t`` stays empty.

    Trees grow in continuous time and stop as soon as the root is occupied,
    which is exact because occupancy never reverts.
    """
    spec = _law(cfg)
    law = spec.law()
    rows, raw = [], []
    for gi, t in enumerate(cfg.grid):
        if not 0 <= t <= 25:
            raise ValueError("root-empty times must lie in [0, 25]")
        tasks = [(cfg.seed, gi, lo, hi, law.pmf, t)
                 for lo, hi in blocks(cfg.trials, 1000)]
        vals = [v for part in run_tasks(_root_empty_block, tasks, cfg.workers) for v in part]
        p = float(np.mean(vals))
        rows.append({"t": t, "alpha": spec.alpha, "delta": law.delta,
                     "trials": cfg.trials, "p_empty": p,
                     "se": binomial_se(p, cfg.trials),
                     "bound": root_empty_bound(law.delta, t)})
        raw.extend((t, i, v) for i, v in enumerate(vals))
    return ExperimentResult(cfg, rows, raw)


def tree_at_time_root_visits(t: float, law: CarLaw, rng: np.random.Generator) -> int:
    """Root visits on the recursive tree of a Yule process cut at time ``t``.

    Size first (Geometric with success probability e^-t), then a uniform
    recursive tree of that size.
    """
    n = int(rng.geometric(math.exp(-t)))
    return root_visits(n, law, rng)


def _time_block(seed, gi, lo, hi, pmf, t):
    law = CarLaw(pmf)
    return [tree_at_time_root_visits(t, law, trial_rng(seed, "subcritical", gi, i))
            for i in range(lo, hi)]


def subcritical_alpha(c: float, t: float, beta_star: float) -> float:
    """Density with ``alpha^beta_star * t = c / 2``."""
    return (c / (2.0 * t)) ** (1.0 / beta_star)


def subcritical_scan(cfg: ExperimentConfig) -> ExperimentResult:
    """Mean flux of the age-``t`` tree with ``alpha_t`` inside the subcritical regime.

    ``alpha_t`` solves ``alpha^beta* t = c/2`` with ``c = 1/(2C)``; an explicit
    ``alpha`` in the law spec overrides the rule for every grid point.
    """
    spec = _law(cfg)
    fam = spec.family
    _, c = subcritical_constants(fam)
    rows, raw = [], []
    for gi, t in enumerate(cfg.grid):
        alpha = spec.alpha if spec.alpha is not None else subcritical_alpha(c, t, fam.beta_star)
        law = spec.law(alpha)
        tasks = [(cfg.seed, gi, lo, hi, law.pmf, t)
                 for lo, hi in blocks(cfg.trials, 500)]
        psis = [v for part in run_tasks(_time_block, tasks, cfg.workers) for v in part]
        rows.append({"t": t, "alpha": alpha, "trials": cfg.trials, **_flux_summary(psis)})
        raw.extend((t, i, v) for i, v in enumerate(psis))
    return ExperimentResult(cfg, rows, raw)


def _ball_block(seed, gi, lo, hi, n, r, pairs):
    out = []
    for i in range(lo, hi):
        rng = trial_rng(seed, "bs-ball", gi, i)
        tree = sample_recursive_tree(n, rng)
        kids = tree.child_counts()
        us = (rng.random(pairs) * n).astype(np.int64)
        vs = (rng.random(pairs) * n).astype(np.int64)
        for u, v in zip(us.tolist(), vs.tolist()):
            out.append((int(kids[u]), ball(tree, u, r).code, ball(tree, v, r).code))
    return out


def _limit_ball_block(seed, lo, hi, r):
    out = []
    for i in range(lo, hi):
        out.append(sample_local_limit_ball(r, trial_rng(seed, "bs-limit", 0, i)).code)
    return out


def _tv(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def bs_ball_stats(cfg: ExperimentConfig) -> ExperimentResult:
    """Ball statistics around two independent uniform vertices of one tree.

    ``trials`` counts vertex pairs; each tree contributes ``pairs`` of them.
    Reports the children-count law against Geometric(1/2) on {0, 1, ...},
    the ball law against the limit-tree sampler, and the largest gap between
    the joint ball frequency and the product of marginals over the 20 most
    frequent classes.
    """
    n = int(cfg.params.get("n", 100_000))
    r = int(cfg.params.get("r", 1))
    pairs = int(cfg.params.get("pairs", 1000))
    if not 0 <= r <= 3:
        raise ValueError("radius must lie in 0..3")
    if n > 1_000_000:
        raise ValueError("n must be at most 10^6")
    pairs = max(1, min(pairs, cfg.trials))
    n_trees = -(-cfg.trials // pairs)
    tasks = [(cfg.seed, 0, lo, hi, n, r, pairs) for lo, hi in blocks(n_trees, 5)]
    samples = [s for part in run_tasks(_ball_block, tasks, cfg.workers) for s in part]
    samples = samples[: cfg.trials]
    total = len(samples)

    kid_counts = Counter(s[0] for s in samples)
    kid_emp = {k: kid_counts.get(k, 0) / total for k in range(11)}
    kid_ref = {k: 2.0 ** -(k + 1) for k in range(11)}
    tv_kids = _tv(kid_emp, kid_ref)

    limit_tasks = [(cfg.seed, lo, hi, r) for lo, hi in blocks(cfg.trials, 5000)]
    limit = [c for part in run_tasks(_limit_ball_block, limit_tasks, cfg.workers) for c in part]
    lim_counts = Counter(limit)
    ball_counts = Counter(s[1] for s in samples) + Counter(s[2] for s in samples)
    ball_emp = {k: v / (2 * total) for k, v in ball_counts.items()}
    ball_ref = {k: v / len(limit) for k, v in lim_counts.items()}
    tv_ball = _tv(ball_emp, ball_ref)

    fu = Counter(s[1] for s in samples)
    fv = Counter(s[2] for s in samples)
    joint = Counter((s[1], s[2]) for s in samples)
    top = [k for k, _ in sorted(ball_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:20]]
    max_dev = 0.0
    for a in top:
        for b in top:
            dev = abs(joint.get((a, b), 0) / total - fu.get(a, 0) / total * fv.get(b, 0) / total)
            max_dev = max(max_dev, dev)

    rows = []
    for k in range(11):
        rows.append({"kind": "children", "key": str(k), "empirical": kid_emp[k],
                     "reference": kid_ref[k], "abs_diff": abs(kid_emp[k] - kid_ref[k])})
    for code in top:
        e, q = ball_emp.get(code, 0.0), ball_ref.get(code, 0.0)
        rows.append({"kind": "ball", "key": code, "empirical": e,
                     "reference": q, "abs_diff": abs(e - q)})
    rows.append({"kind": "summary", "key": "tv_children_geometric", "empirical": tv_kids,
                 "reference": 0.0, "abs_diff": tv_kids})
    rows.append({"kind": "summary", "key": "tv_ball_limit", "empirical": tv_ball,
                 "reference": 0.0, "abs_diff": tv_ball})
    rows.append({"kind": "summary", "key": "max_joint_minus_product", "empirical": max_dev,
                 "reference": 0.0, "abs_diff": max_dev})
    return ExperimentResult(cfg, rows, [(i, *s) for i, s in enumerate(samples)])


def coupled_alpha_flux(
    n: int, alphas, trials: int, seed: int, law_for=None
) -> list[tuple[float, float]]:
    """Mean flux over an alpha grid with one tree and one set of car uniforms per trial.

    Sharing the uniforms realizes the stochastic order of the family, so the
    flux is nondecreasing in alpha trial by trial.
    """
    from ..car_laws import binary_law

    law_for = law_for or binary_law
    laws = [law_for(a) for a in alphas]
    sums = np.zeros(len(laws))
    for i in range(trials):
        rng = trial_rng(seed, "coupled", 0, i)
        tree = sample_recursive_tree(n, rng)
        u = rng.random(n)
        for j, law in enumerate(laws):
            psi = _kernels.park_psi(tree.parent, law.from_uniforms(u))
            sums[j] += max(int(psi[0]) - 1, 0)
    return [(a, s / trials) for a, s in zip(alphas, sums)]


EXPERIMENTS = {
    "sim-flux": flux_scaling,
    "window": critical_window_scan,
    "theta": theta_scaling,
    "spine": spine_occupancy,
    "root-empty": root_empty_probability,
    "bs-ball": bs_ball_stats,
    "subcritical": subcritical_scan,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    try:
        fn = EXPERIMENTS[cfg.experiment]
    except KeyError:
        raise ValueError(f"unknown experiment {cfg.experiment!r}") from None
    return fn(cfg)

