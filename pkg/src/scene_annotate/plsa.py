"""Latent-topic model over region features, fit by EM.

A corpus is a term matrix n(r_i, f_j): region i's mass on feature bin j.
Training estimates P(f_j|z_k) (what each topic looks like) and P(z_k|r_i)
(what each training region is about) by alternating the posterior computation

    P(z_k | r_i, f_j) = P(z_k|r_i) P(f_j|z_k) / sum_k' P(z_k'|r_i) P(f_j|z_k')

with the reweighted maximum-likelihood updates of both distributions. The
log-likelihood L = sum_ij n(r_i,f_j) log P(r_i,f_j) never decreases across
iterations; region priors P(r_i) equal row mass over total mass and stay
fixed.

Unseen regions enter by folding in: the same EM with P(f|z) frozen, yielding
only a posterior over topics. Mass values may be real (features are
normalized histograms, not integer counts); the updates never need
integrality.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DegenerateRegionError

logger = logging.getLogger(__name__)

_FLOOR = 1e-12

DEFAULT_MAX_ITERS = 500
DEFAULT_TOL = 1e-6
DEFAULT_RESTARTS = 3


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TermMatrix:
    """Region x feature mass matrix. Rows must carry positive total mass."""

    n: np.ndarray
    region_ids: tuple[int, ...] | None = None

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.float64)
        if n.ndim != 2 or n.shape[0] < 1 or n.shape[1] < 1:
            raise ContractViolation("term matrix must be 2-D and non-empty")
        if np.any(n < 0) or not np.all(np.isfinite(n)):
            raise ContractViolation("term weights must be finite and >= 0")
        row_mass = n.sum(axis=1)
        if np.any(row_mass <= 0):
            bad = int(np.argmin(row_mass))
            raise DegenerateRegionError(bad, f"region row {bad} has zero mass")
        ids = self.region_ids
        if ids is not None:
            ids = tuple(int(i) for i in ids)
            if len(ids) != n.shape[0]:
                raise ContractViolation("region_ids length must match row count")
        object.__setattr__(self, "n", _freeze(n))
        object.__setattr__(self, "region_ids", ids)

    @property
    def n_regions(self) -> int:
        return self.n.shape[0]

    @property
    def n_features(self) -> int:
        return self.n.shape[1]


@dataclass(frozen=True, eq=False)
class PlsaModel:
    """Converged parameters plus the training trace and metadata."""

    k: int
    p_f_given_z: np.ndarray  # (K, M), rows sum to 1
    p_z_given_r: np.ndarray  # (N, K), rows sum to 1
    p_r: np.ndarray  # (N,), sums to 1
    loglik_trace: tuple[float, ...]
    seed: int
    iterations: int
    tol: float
    restarts: int = 1
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        pf = np.asarray(self.p_f_given_z, dtype=np.float64)
        pz = np.asarray(self.p_z_given_r, dtype=np.float64)
        pr = np.asarray(self.p_r, dtype=np.float64)
        if pf.shape[0] != self.k or pz.shape[1] != self.k:
            raise ContractViolation("parameter shapes disagree with K")
        if pz.shape[0] != pr.shape[0]:
            raise ContractViolation("region counts disagree between P(z|r) and P(r)")
        for name, mat in (("P(f|z)", pf), ("P(z|r)", pz)):
            if np.any(mat < 0) or np.max(np.abs(mat.sum(axis=1) - 1.0)) > 1e-9:
                raise ContractViolation(f"{name} rows must be distributions")
        if abs(pr.sum() - 1.0) > 1e-9 or np.any(pr < 0):
            raise ContractViolation("P(r) must be a distribution")
        trace = np.asarray(self.loglik_trace, dtype=np.float64)
        if len(trace) and np.any(np.diff(trace) < -1e-9):
            raise ContractViolation("log-likelihood trace must be non-decreasing")
        object.__setattr__(self, "p_f_given_z", _freeze(pf))
        object.__setattr__(self, "p_z_given_r", _freeze(pz))
        object.__setattr__(self, "p_r", _freeze(pr))
        object.__setattr__(self, "loglik_trace", tuple(float(v) for v in trace))

    @property
    def n_regions(self) -> int:
        return self.p_z_given_r.shape[0]

    @property
    def n_features(self) -> int:
        return self.p_f_given_z.shape[1]


@dataclass(frozen=True, eq=False)
class TopicRanking:
    """Posterior over topics plus the descending-probability topic order."""

    posterior: np.ndarray  # (K,), sums to 1
    order: np.ndarray  # (K,) topic ids, best first

    def __post_init__(self):
        object.__setattr__(self, "posterior", _freeze(self.posterior))
        order = np.asarray(self.order, dtype=np.int64).copy()
        order.flags.writeable = False
        object.__setattr__(self, "order", order)

    @property
    def top_topic(self) -> int:
        return int(self.order[0])

    @property
    def top_posterior(self) -> float:
        return float(self.posterior[self.order[0]])


def build_term_matrix(features, scale: float = 1.0, region_ids=None) -> TermMatrix:
    """Stack feature vectors into a term matrix, each row scaled by `scale`."""
    if scale <= 0:
        raise ContractViolation("scale must be positive")
    rows = []
    for idx, feat in enumerate(features):
        vals = np.asarray(feat, dtype=np.float64)
        if vals.sum() <= 0:
            rid = region_ids[idx] if region_ids is not None else idx
            raise DegenerateRegionError(rid, f"feature of region {rid} has zero mass")
        rows.append(scale * vals)
    if not rows:
        raise ContractViolation("term matrix needs at least one region")
    return TermMatrix(np.stack(rows), region_ids)


def _em_run(n, k, max_iters, tol, pf, pz):
    """EM iterations from a given starting point. Returns converged state."""
    row_mass = n.sum(axis=1)
    p_r = row_mass / row_mass.sum()
    trace = [_loglik(n, p_r, pz, pf)]
    iterations = 0
    for _ in range(max_iters):
        # the E-step posterior P(z|r,f) is implicit: both M-step updates
        # reweight by P(z|r)P(f|z)/denom, so only the ratio matrix is
        # materialized; both must read the pre-update parameters
        denom = pz @ pf  # (N, M): P(f|r) mixture
        ratio = n / np.maximum(denom, _FLOOR)
        pf_new = pf * (pz.T @ ratio)  # (K, M)
        pf_new /= np.maximum(pf_new.sum(axis=1, keepdims=True), _FLOOR)
        pz_new = pz * (ratio @ pf.T)
        pz_new /= np.maximum(pz_new.sum(axis=1, keepdims=True), _FLOOR)
        pf, pz = pf_new, pz_new
        iterations += 1
        trace.append(_loglik(n, p_r, pz, pf))
        if abs(trace[-1] - trace[-2]) <= tol * max(abs(trace[-2]), _FLOOR):
            break
    return pf, pz, p_r, trace, iterations


def train(
    matrix: TermMatrix,
    k: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
    init=None,
) -> PlsaModel:
    """Fit a K-topic model by EM with seeded restarts (best likelihood wins).

    `init`, when given as (p_f_given_z, p_z_given_r), replaces the random
    initialization and forces a single run; used to compare trainings from a
    shared starting point.
    """
    if k < 1:
        raise ContractViolation("K must be >= 1")
    n = matrix.n
    warnings = ()
    if k > matrix.n_regions:
        msg = f"K={k} exceeds region count N={matrix.n_regions}; topics may be degenerate"
        logger.warning(msg)
        warnings = (msg,)

    candidates = []
    if init is not None:
        pf0 = np.array(init[0], dtype=np.float64)
        pz0 = np.array(init[1], dtype=np.float64)
        if pf0.shape != (k, matrix.n_features) or pz0.shape != (matrix.n_regions, k):
            raise ContractViolation("init shapes must be (K, M) and (N, K)")
        candidates.append((pf0, pz0))
    else:
        if restarts < 1:
            raise ContractViolation("restarts must be >= 1")
        for child in np.random.SeedSequence(seed).spawn(restarts):
            rng = np.random.default_rng(child)
            pz0 = rng.dirichlet(np.ones(k), size=matrix.n_regions)
            pf0 = rng.dirichlet(np.ones(matrix.n_features), size=k)
            candidates.append((pf0, pz0))

    best = None
    for pf0, pz0 in candidates:
        pf, pz, p_r, trace, iterations = _em_run(n, k, max_iters, tol, pf0, pz0)
        if best is None or trace[-1] > best[3][-1]:
            best = (pf, pz, p_r, trace, iterations)

    pf, pz, p_r, trace, iterations = best
    return PlsaModel(
        k=k,
        p_f_given_z=pf,
        p_z_given_r=pz,
        p_r=p_r,
        loglik_trace=tuple(trace),
        seed=seed,
        iterations=iterations,
        tol=tol,
        restarts=len(candidates),
        warnings=warnings,
    )


def _loglik(n, p_r, pz, pf) -> float:
    joint = p_r[:, None] * (pz @ pf)
    support = n > 0
    if np.any(joint[support] <= 0):
        return float("-inf")
    return float(np.sum(n[support] * np.log(joint[support])))


def log_likelihood(model: PlsaModel, matrix: TermMatrix) -> float:
    """L = sum_ij n(r_i,f_j) log P(r_i,f_j); zero-count cells contribute 0.

    Returns -inf (with a logged diagnostic) if any observed cell has zero
    modeled probability.
    """
    if (matrix.n_regions, matrix.n_features) != (model.n_regions, model.n_features):
        raise ContractViolation("model and matrix dimensions disagree")
    value = _loglik(matrix.n, model.p_r, model.p_z_given_r, model.p_f_given_z)
    if value == float("-inf"):
        logger.warning("observed mass on zero-probability cells; log-likelihood is -inf")
    return value


def fold_in(
    model: PlsaModel,
    feature,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> TopicRanking:
    """Posterior over topics for an unseen region, holding P(f|z) frozen.

    Starts from the uniform posterior (deterministic) and iterates the
    fold-in EM update until the restricted likelihood stabilizes. Ties in
    the final ranking break towards the lower topic id.
    """
    n = np.asarray(feature, dtype=np.float64)
    if n.shape != (model.n_features,):
        raise ContractViolation(
            f"feature length {n.shape} does not match model features {model.n_features}"
        )
    if np.any(n < 0):
        raise ContractViolation("feature mass must be >= 0")
    if n.sum() <= 0:
        raise DegenerateRegionError(None, "cannot fold in a zero-mass feature")

    pf = model.p_f_given_z  # (K, M), read-only
    q = np.full(model.k, 1.0 / model.k)
    prev = _fold_objective(n, q, pf)
    for _ in range(max_iters):
        mix = np.maximum(q @ pf, _FLOOR)  # (M,)
        q = q * (pf @ (n / mix))
        q /= max(q.sum(), _FLOOR)
        cur = _fold_objective(n, q, pf)
        if abs(cur - prev) <= tol * max(abs(prev), _FLOOR):
            break
        prev = cur

    order = np.argsort(-q, kind="stable")
    return TopicRanking(posterior=q, order=order)


def _fold_objective(n, q, pf) -> float:
    mix = q @ pf
    support = n > 0
    if np.any(mix[support] <= 0):
        return float("-inf")
    return float(np.sum(n[support] * np.log(mix[support])))


def assign_topic_categories(model: PlsaModel, categories) -> dict[int, int]:
    """Name topics by majority vote of training regions' argmax topics.

    A topic that wins no region falls back to the soft vote (posterior-mass
    weighted category totals). All ties break towards the lower id.
    """
    categories = np.asarray(categories, dtype=np.int64)
    if categories.shape != (model.n_regions,):
        raise ContractViolation("need one category per training region")
    pz = model.p_z_given_r
    hard = np.argmax(pz, axis=1)  # ties: lowest topic id
    mapping = {}
    cat_ids = np.unique(categories)
    for topic in range(model.k):
        member = categories[hard == topic]
        if len(member):
            counts = {int(c): int((member == c).sum()) for c in np.unique(member)}
            mapping[topic] = max(counts, key=lambda c: (counts[c], -c))
        else:
            soft = [(float(pz[categories == c, topic].sum()), -int(c)) for c in cat_ids]
            mapping[topic] = -max(soft)[1]
    return mapping
