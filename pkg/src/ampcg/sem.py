"""Gaussian linear structural models over chain graphs.

Each node is a linear function of its parents plus an error term; the
errors are jointly Gaussian with a covariance whose concentration matrix
is zero wherever two nodes are not joined by an undirected edge (so the
error covariance is block-diagonal over chain components). The implied
observational distribution, equal-variance rescaling, conditioning,
sampling and population-level conditional-independence checks live here.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .graphs import ChainGraph, chain_components, is_chain_graph
from .separation import all_separations

__all__ = [
    "Dataset",
    "GaussianDistribution",
    "SemParameters",
    "compose_seed",
    "condition",
    "faithful_parameters",
    "gaussian_ci",
    "implied_distribution",
    "random_parameters",
    "rescale_equal_variances",
    "sample",
]

_EIG_TOL = 1e-10


def _as_symmetric(m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.allclose(m, m.T, atol=1e-8):
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (m + m.T)


def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(m)[0])


@dataclass(frozen=True, eq=False)
class GaussianDistribution:
    """Mean vector and positive-definite covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = _as_symmetric(self.cov, "cov")
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        if mean.shape[0] != cov.shape[0]:
            raise ValueError("mean and cov dimensions disagree")
        if _min_eig(cov) <= _EIG_TOL:
            raise ValueError("covariance is not positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def p(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class Dataset:
    """n samples of p variables; column j holds node j."""

    values: np.ndarray
    labels: tuple | None = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1:
            raise ValueError("a dataset needs at least one row")
        if not np.all(np.isfinite(values)):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != values.shape[1]:
                raise ValueError("one label per column required")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class SemParameters:
    """Coefficient matrix plus error covariance tied to a chain graph.

    beta[j, k] is the coefficient of node k in node j's equation and may be
    non-zero only when k is a parent of j. sigma is positive definite and
    its inverse vanishes off the undirected structure, which forces it to
    be block-diagonal over the chain components.
    """

    graph: ChainGraph
    beta: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        p = self.graph.p
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (p, p):
            raise ValueError(f"beta must be {p}x{p}, got {beta.shape}")
        sigma = _as_symmetric(self.sigma, "sigma")
        if sigma.shape != (p, p):
            raise ValueError(f"sigma must be {p}x{p}, got {sigma.shape}")
        for j in range(p):
            allowed = set(self.graph._parents[j])
            for k in range(p):
                if k not in allowed and abs(beta[j, k]) > 1e-12:
                    raise ValueError(f"beta[{j}, {k}] non-zero but {k} is not a parent of {j}")
        if _min_eig(sigma) <= _EIG_TOL:
            raise ValueError("sigma is not positive definite")
        omega = np.linalg.inv(sigma)
        scale = 1.0 + float(np.max(np.abs(omega)))
        for j in range(p):
            for k in range(j + 1, p):
                if (j, k) not in self.graph.undirected and abs(omega[j, k]) > 1e-6 * scale:
                    raise ValueError(
                        f"concentration entry ({j}, {k}) must vanish without an undirected edge"
                    )
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", sigma)

    @property
    def p(self) -> int:
        return self.graph.p


def _signed_uniform(rng: np.random.Generator, lo: float, hi: float, size=None):
    return rng.uniform(lo, hi, size=size) * rng.choice((-1.0, 1.0), size=size)


def random_parameters(g: ChainGraph, coef_range: tuple = (0.3, 1.0), seed=0) -> SemParameters:
    """Draw coefficients and a pattern-respecting error covariance.

    Coefficient magnitudes live in `coef_range` (bounded away from zero so
    that dependences stay numerically visible) with random signs. Each
    component's concentration block gets random entries on its undirected
    edges and a strictly diagonally dominant diagonal, which guarantees
    positive definiteness; inverting the blocks yields sigma.
    """
    lo, hi = float(coef_range[0]), float(coef_range[1])
    if not (0.0 < lo <= hi):
        raise ValueError(f"coef_range must satisfy 0 < lo <= hi, got ({lo}, {hi})")
    if not is_chain_graph(g):
        raise ValueError("parameter generation requires a valid chain graph")
    rng = np.random.default_rng(seed)
    p = g.p
    beta = np.zeros((p, p))
    for j, k in sorted(g.directed):
        beta[k, j] = _signed_uniform(rng, lo, hi)
    sigma = np.zeros((p, p))
    for comp in chain_components(g):
        nodes = sorted(comp)
        m = len(nodes)
        local = {v: i for i, v in enumerate(nodes)}
        omega = np.zeros((m, m))
        for a, b in sorted(g.undirected):
            if a in comp:
                w = _signed_uniform(rng, lo, hi)
                omega[local[a], local[b]] = w
                omega[local[b], local[a]] = w
        slack = rng.uniform(0.5, 1.5, size=m)
        for i in range(m):
            omega[i, i] = np.sum(np.abs(omega[i])) + slack[i]
        block = np.linalg.inv(omega)
        sigma[np.ix_(nodes, nodes)] = 0.5 * (block + block.T)
    return SemParameters(graph=g, beta=beta, sigma=sigma)


def implied_distribution(params: SemParameters) -> GaussianDistribution:
    """Zero-mean Gaussian the structural equations induce on the nodes."""
    p = params.p
    a = np.eye(p) - params.beta
    x = np.linalg.solve(a, params.sigma)
    cov = np.linalg.solve(a, x.T).T
    return GaussianDistribution(mean=np.zeros(p), cov=0.5 * (cov + cov.T))


def rescale_equal_variances(params: SemParameters, sigma2: float = 1.0) -> SemParameters:
    """Rescale every error term so all error variances equal sigma2.

    Error j is scaled by sqrt(sigma2)/sd(error j); the coefficients are
    untouched. A diagonal congruence cannot create or destroy zeros of the
    concentration matrix, so the undirected structure is preserved, and
    positive definiteness survives in both directions.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    d = np.sqrt(sigma2 / np.diag(params.sigma))
    sigma = params.sigma * np.outer(d, d)
    np.fill_diagonal(sigma, sigma2)
    return SemParameters(graph=params.graph, beta=params.beta.copy(), sigma=sigma)


def condition(dist: GaussianDistribution, b: Iterable[int], b_values) -> GaussianDistribution:
    """Distribution of the remaining coordinates given coordinates b.

    Returned coordinates follow the sorted complement of b. The
    conditional covariance does not depend on the observed values, and no
    conditional variance can exceed its marginal counterpart.
    """
    b_idx = sorted({int(x) for x in b})
    p = dist.p
    if not b_idx or len(b_idx) >= p:
        raise ValueError("b must be a non-trivial subset of the coordinates")
    if any(x < 0 or x >= p for x in b_idx):
        raise ValueError("conditioning index out of range")
    vals = np.asarray(b_values, dtype=float).reshape(-1)
    if vals.shape[0] != len(b_idx):
        raise ValueError("one value per conditioned coordinate required")
    a_idx = [x for x in range(p) if x not in set(b_idx)]
    s_aa = dist.cov[np.ix_(a_idx, a_idx)]
    s_ab = dist.cov[np.ix_(a_idx, b_idx)]
    s_bb = dist.cov[np.ix_(b_idx, b_idx)]
    gain = np.linalg.solve(s_bb, s_ab.T).T
    mean = dist.mean[a_idx] + gain @ (vals - dist.mean[b_idx])
    cov = s_aa - gain @ s_ab.T
    return GaussianDistribution(mean=mean, cov=0.5 * (cov + cov.T))


def sample(dist: GaussianDistribution, n: int, seed, labels: tuple | None = None) -> Dataset:
    """n independent draws through a Cholesky factor; deterministic per seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    chol = np.linalg.cholesky(dist.cov)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, dist.p))
    return Dataset(values=dist.mean + z @ chol.T, labels=labels)


def gaussian_ci(cov, j: int, k: int, given: Iterable[int] = (), tol: float = 1e-8) -> bool:
    """True iff nodes j and k are conditionally independent given `given`.

    Decided on the partial correlation read from the precision matrix of
    the relevant marginal block; scale-free, so one tolerance serves all
    covariances. The default suits exact population inputs; finite-sample
    use wants a far looser threshold or a proper test.
    """
    cov = _as_symmetric(cov, "cov")
    cond = sorted({int(x) for x in given})
    if j == k or j in cond or k in cond:
        raise ValueError("query nodes and conditioning set must be disjoint")
    idx = [j, k] + cond
    prec = np.linalg.inv(cov[np.ix_(idx, idx)])
    partial = -prec[0, 1] / np.sqrt(prec[0, 0] * prec[1, 1])
    return bool(abs(partial) < tol)


def faithful_parameters(
    g: ChainGraph,
    coef_range: tuple = (0.3, 1.0),
    seed=0,
    sigma2: float | None = None,
    max_draws: int = 50,
    tol: float = 1e-8,
    cap: int = 6,
) -> tuple[SemParameters, int]:
    """Random parameters whose population distribution is faithful to g.

    Random draws are faithful with probability one, but a finite-precision
    check can still trip on near-cancellations, so violating draws are
    discarded and redrawn rather than assumed away. Separations must always
    map to vanishing partial correlations; a violation there is a bug, not
    bad luck, and raises. Returns the parameters and the number of draws
    used.
    """
    separations = all_separations(g, cap=cap)
    sep_lookup = {(j, k, c) for j, k, c in separations}
    for attempt in range(1, max_draws + 1):
        params = random_parameters(g, coef_range=coef_range, seed=compose_seed(seed, attempt))
        if sigma2 is not None:
            params = rescale_equal_variances(params, sigma2)
        cov = implied_distribution(params).cov
        ok = True
        for j, k in itertools.combinations(range(g.p), 2):
            rest = [x for x in range(g.p) if x != j and x != k]
            for r in range(len(rest) + 1):
                for cond in itertools.combinations(rest, r):
                    sep = (j, k, cond) in sep_lookup
                    ci = gaussian_ci(cov, j, k, cond, tol=tol)
                    if sep and not ci:
                        raise RuntimeError(
                            f"separation ({j}, {k} | {cond}) violated by the implied "
                            "distribution; the model construction is broken"
                        )
                    if ci and not sep:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            return params, attempt
    raise RuntimeError(f"no faithful draw found in {max_draws} attempts")


def compose_seed(seed, *extra) -> list:
    """Derive an independent child seed deterministically from `seed`."""
    base = [int(seed)] if isinstance(seed, (int, np.integer)) else [int(x) for x in seed]
    return base + [int(x) for x in extra]
