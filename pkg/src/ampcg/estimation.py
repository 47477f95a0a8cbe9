"""Maximum-likelihood fitting of chain-graph structural models.

Each chain component is fit by alternating two steps until the parameters
stop moving: a generalized-least-squares regression of the component on
its parents under the current error-covariance estimate (plain least
squares on the first pass), and iterative proportional fitting of the
regression-residual covariance to the component's undirected structure.
Inputs may be a dataset or a covariance matrix directly; feeding the exact
population covariance separates statistical error from algorithmic error.

An optional equal-error-variance mode augments the likelihood with an
escalating quadratic penalty on the spread of the log error variances,
approximating the equality-constrained maximum likelihood. The spread
itself (max minus min log fitted error variance, the `dispersion`) is the
statistic that picks the true graph out of its Markov equivalence class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import optimize

from .graphs import ChainGraph, chain_components, relatives
from .sem import Dataset, SemParameters

__all__ = [
    "ComponentFit",
    "FitConfig",
    "FitResult",
    "IpfResult",
    "dispersion",
    "fit",
    "fit_component",
    "gaussian_average_loglik",
    "ipf",
    "moment_matrix",
    "penalized_score",
]


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the alternating fit.

    equal_variance_penalty is the starting weight of the log-variance
    spread penalty (0 disables the constrained mode); it is multiplied by
    penalty_schedule after each outer round up to penalty_cap.
    """

    max_outer: int = 200
    max_ipf: int = 500
    tol: float = 1e-9
    equal_variance_penalty: float = 0.0
    penalty_schedule: float = 10.0
    penalty_cap: float = 1e6

    def __post_init__(self):
        if self.max_outer < 1 or self.max_ipf < 1:
            raise ValueError("iteration caps must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.equal_variance_penalty < 0:
            raise ValueError("equal_variance_penalty must be >= 0")
        if self.penalty_schedule < 1 or self.penalty_cap <= 0:
            raise ValueError("penalty schedule must be >= 1 with a positive cap")


@dataclass(frozen=True, eq=False)
class IpfResult:
    sigma: np.ndarray
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class ComponentFit:
    nodes: tuple
    predictors: tuple
    beta: np.ndarray  # len(nodes) x len(predictors)
    sigma: np.ndarray  # len(nodes) x len(nodes)
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class FitResult:
    params: SemParameters
    loglik: float
    error_variances: np.ndarray
    iterations: int
    converged: bool
    dispersion: float


def moment_matrix(data_or_cov, p: int) -> tuple[np.ndarray, int | None]:
    """Second-moment matrix and sample size (None for covariance input).

    The model has no intercepts, so dataset input uses the uncentered
    second moment, which is its maximum-likelihood moment estimate.
    """
    if isinstance(data_or_cov, Dataset):
        if data_or_cov.p != p:
            raise ValueError(f"dataset has {data_or_cov.p} columns, graph has {p} nodes")
        v = data_or_cov.values
        return v.T @ v / data_or_cov.n, data_or_cov.n
    s = np.asarray(data_or_cov, dtype=float)
    if s.shape != (p, p):
        raise ValueError(f"covariance must be {p}x{p}, got {s.shape}")
    if not np.allclose(s, s.T, atol=1e-8):
        raise ValueError("covariance must be symmetric")
    return 0.5 * (s + s.T), None


def _maximal_cliques(m: int, edges: Iterable[tuple]) -> list:
    neighbors: dict[int, set] = {i: set() for i in range(m)}
    for a, b in edges:
        neighbors[a].add(b)
        neighbors[b].add(a)
    cliques: list[tuple] = []

    def expand(r: set, p: set, x: set) -> None:
        if not p and not x:
            cliques.append(tuple(sorted(r)))
            return
        pivot = max(p | x, key=lambda v: len(neighbors[v]))
        for v in sorted(p - neighbors[pivot]):
            expand(r | {v}, p & neighbors[v], x & neighbors[v])
            p = p - {v}
            x = x | {v}

    expand(set(), set(range(m)), set())
    return sorted(cliques)


def ipf(s, pattern: Iterable[tuple], cfg: FitConfig | None = None) -> IpfResult:
    """Covariance MLE under a concentration zero pattern, by clique scaling.

    `pattern` lists the allowed off-diagonal pairs (the undirected edges of
    the local graph). Starting from a diagonal concentration matrix, each
    maximal clique's block is updated so the fitted marginal over the
    clique matches `s` exactly; updates never touch entries off the
    pattern, so the zero constraints hold by construction. A complete
    pattern therefore returns `s` itself after one sweep, and an empty
    pattern returns its diagonal.
    """
    cfg = cfg or FitConfig()
    s = np.asarray(s, dtype=float)
    m = s.shape[0]
    if s.shape != (m, m) or not np.allclose(s, s.T, atol=1e-8):
        raise ValueError("ipf input must be a symmetric matrix")
    if float(np.linalg.eigvalsh(s)[0]) <= 0:
        raise np.linalg.LinAlgError("ipf input is not positive definite")
    pattern = [(min(a, b), max(a, b)) for a, b in pattern]
    cliques = _maximal_cliques(m, pattern)
    conc = np.diag(1.0 / np.diag(s))
    sigma = np.diag(np.diag(s)).astype(float)
    all_idx = np.arange(m)
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_ipf + 1):
        prev = sigma
        for clique in cliques:
            ci = np.array(clique)
            bi = np.setdiff1d(all_idx, ci)
            target = np.linalg.inv(s[np.ix_(ci, ci)])
            if bi.size:
                cross = conc[np.ix_(ci, bi)]
                conc[np.ix_(ci, ci)] = target + cross @ np.linalg.solve(
                    conc[np.ix_(bi, bi)], cross.T
                )
            else:
                conc = target
        sigma = np.linalg.inv(conc)
        change = float(np.max(np.abs(sigma - prev))) / max(1.0, float(np.max(np.abs(prev))))
        if change < cfg.tol:
            converged = True
            break
    return IpfResult(sigma=0.5 * (sigma + sigma.T), iterations=sweeps, converged=converged)


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    if new.size == 0:
        return 0.0
    return float(np.max(np.abs(new - old))) / max(1.0, float(np.max(np.abs(old))))


def _gls_coefficients(
    s: np.ndarray,
    y_nodes: list,
    z_nodes: list,
    support: list,
    omega: np.ndarray,
) -> np.ndarray:
    """Solve the weighted normal equations for the supported coefficients.

    Minimizes trace(omega * residual-moment) over coefficient matrices that
    vanish off `support` (pairs of local row/column indices). With identity
    weighting the equations decouple into per-row ordinary least squares.
    """
    b = np.zeros((len(y_nodes), len(z_nodes)))
    if not support:
        return b
    szz = s[np.ix_(z_nodes, z_nodes)]
    syz = s[np.ix_(y_nodes, z_nodes)]
    target = omega @ syz
    f = len(support)
    a = np.empty((f, f))
    rhs = np.empty(f)
    for row, (j, kz) in enumerate(support):
        rhs[row] = target[j, kz]
        for col, (j2, kz2) in enumerate(support):
            a[row, col] = omega[j, j2] * szz[kz2, kz]
    coefs = np.linalg.solve(a, rhs)
    for (j, kz), value in zip(support, coefs):
        b[j, kz] = value
    return b


def _residual_moment(s, y_nodes, z_nodes, b) -> np.ndarray:
    syy = s[np.ix_(y_nodes, y_nodes)]
    if not z_nodes:
        return syy
    syz = s[np.ix_(y_nodes, z_nodes)]
    szz = s[np.ix_(z_nodes, z_nodes)]
    e = syy - b @ syz.T - syz @ b.T + b @ szz @ b.T
    return 0.5 * (e + e.T)


def _component_layout(g: ChainGraph, comp: frozenset):
    y_nodes = sorted(comp)
    z_nodes = sorted(relatives(g, comp, "parents"))
    z_index = {v: i for i, v in enumerate(z_nodes)}
    support = []
    for row, node in enumerate(y_nodes):
        for parent in g._parents[node]:
            support.append((row, z_index[parent]))
    local = {v: i for i, v in enumerate(y_nodes)}
    pattern = [
        (local[a], local[b]) for a, b in g.undirected if a in comp and b in comp
    ]
    return y_nodes, z_nodes, support, pattern


def fit_component(
    data_or_cov,
    g: ChainGraph,
    comp: Iterable[int],
    cfg: FitConfig | None = None,
) -> ComponentFit:
    """Alternating GLS/IPF estimate for one chain component."""
    cfg = cfg or FitConfig()
    comp = frozenset(int(x) for x in comp)
    if comp not in set(chain_components(g)):
        raise ValueError("comp must be a chain component of g")
    s, n = moment_matrix(data_or_cov, g.p)
    y_nodes, z_nodes, support, pattern = _component_layout(g, comp)
    if n is not None and n < len(z_nodes):
        raise ValueError(
            f"{n} samples cannot support {len(z_nodes)} predictors for component {tuple(y_nodes)}"
        )
    if not z_nodes:
        res = ipf(s[np.ix_(y_nodes, y_nodes)], pattern, cfg)
        return ComponentFit(
            nodes=tuple(y_nodes),
            predictors=(),
            beta=np.zeros((len(y_nodes), 0)),
            sigma=res.sigma,
            iterations=res.iterations,
            converged=res.converged,
        )
    b = np.zeros((len(y_nodes), len(z_nodes)))
    sigma = np.eye(len(y_nodes))
    converged = False
    rounds = 0
    for rounds in range(1, cfg.max_outer + 1):
        omega = np.linalg.inv(sigma)
        b_new = _gls_coefficients(s, y_nodes, z_nodes, support, omega)
        res = ipf(_residual_moment(s, y_nodes, z_nodes, b_new), pattern, cfg)
        change = max(_relative_change(b_new, b), _relative_change(res.sigma, sigma))
        b, sigma = b_new, res.sigma
        if change < cfg.tol and res.converged:
            converged = True
            break
    return ComponentFit(
        nodes=tuple(y_nodes),
        predictors=tuple(z_nodes),
        beta=b,
        sigma=sigma,
        iterations=rounds,
        converged=converged,
    )


def gaussian_average_loglik(model_cov: np.ndarray, s: np.ndarray) -> float:
    """Per-sample expected log density of N(0, model_cov) under moments s."""
    p = model_cov.shape[0]
    sign, logdet = np.linalg.slogdet(model_cov)
    if sign <= 0:
        raise np.linalg.LinAlgError("model covariance is not positive definite")
    quad = float(np.trace(np.linalg.solve(model_cov, s)))
    return -0.5 * (p * math.log(2.0 * math.pi) + logdet + quad)


def _scale_objective(d: np.ndarray, blocks: list, lam: float):
    """Penalized profile objective over the log error variances.

    blocks holds (global index array, inverse-correlation * residual-moment
    elementwise) per component; the likelihood part is
    0.5 * (sum d + trace term), the penalty is lam * sum (d - mean(d))^2.
    """
    f = 0.5 * float(np.sum(d))
    grad = np.full(d.shape[0], 0.5)
    for idx, a in blocks:
        dd = d[idx]
        w = np.exp(-0.5 * (dd[:, None] + dd[None, :]))
        t = a * w
        f += 0.5 * float(t.sum())
        grad[idx] -= 0.5 * t.sum(axis=1)
    centered = d - d.mean()
    f += lam * float(centered @ centered)
    grad += 2.0 * lam * centered
    return f, grad


def _equalize_scales(sigma_blocks, residuals, layouts, lam: float, p: int):
    """Re-scale fitted component covariances toward equal log variances."""
    d0 = np.empty(p)
    blocks = []
    corr_blocks = []
    for (y_nodes, _z, _s, _pat), sigma0, resid in zip(layouts, sigma_blocks, residuals):
        idx = np.array(y_nodes)
        sd = np.sqrt(np.diag(sigma0))
        corr = sigma0 / np.outer(sd, sd)
        np.fill_diagonal(corr, 1.0)
        d0[idx] = np.log(np.diag(sigma0))
        blocks.append((idx, np.linalg.inv(corr) * resid))
        corr_blocks.append(corr)
    res = optimize.minimize(
        _scale_objective, d0, args=(blocks, lam), jac=True, method="L-BFGS-B"
    )
    d = res.x
    out = []
    for (y_nodes, _z, _s, _pat), corr in zip(layouts, corr_blocks):
        scale = np.exp(0.5 * d[np.array(y_nodes)])
        out.append(corr * np.outer(scale, scale))
    return out


def fit(data_or_cov, g: ChainGraph, cfg: FitConfig | None = None) -> FitResult:
    """Maximum-likelihood parameters of g's model for the given input.

    Components are fit separately in the unconstrained mode. With
    equal_variance_penalty > 0 the components share an outer loop whose
    covariance step is followed by the penalized log-variance equalization,
    with the penalty weight escalating each round, so the fit approaches
    the equal-variance maximum likelihood.
    """
    cfg = cfg or FitConfig()
    s, n = moment_matrix(data_or_cov, g.p)
    comps = chain_components(g)
    layouts = [_component_layout(g, comp) for comp in comps]
    for y_nodes, z_nodes, _sup, _pat in layouts:
        if n is not None and n < len(z_nodes):
            raise ValueError(
                f"{n} samples cannot support {len(z_nodes)} predictors for component {tuple(y_nodes)}"
            )

    if cfg.equal_variance_penalty == 0.0:
        pieces = [fit_component(s, g, comp, cfg) for comp in comps]
        beta_blocks = [piece.beta for piece in pieces]
        sigma_blocks = [piece.sigma for piece in pieces]
        iterations = max(piece.iterations for piece in pieces)
        converged = all(piece.converged for piece in pieces)
    else:
        beta_blocks = [np.zeros((len(y), len(z))) for y, z, _s, _p in layouts]
        sigma_blocks = [np.eye(len(y)) for y, _z, _s, _p in layouts]
        lam = cfg.equal_variance_penalty
        converged = False
        iterations = 0
        for iterations in range(1, cfg.max_outer + 1):
            new_beta = []
            residuals = []
            raw_sigma = []
            for (y_nodes, z_nodes, support, pattern), sigma_c in zip(layouts, sigma_blocks):
                omega = np.linalg.inv(sigma_c)
                b_c = _gls_coefficients(s, y_nodes, z_nodes, support, omega)
                resid = _residual_moment(s, y_nodes, z_nodes, b_c)
                new_beta.append(b_c)
                residuals.append(resid)
                raw_sigma.append(ipf(resid, pattern, cfg).sigma)
            new_sigma = _equalize_scales(raw_sigma, residuals, layouts, lam, g.p)
            change = max(
                max(
                    (_relative_change(nb, ob) for nb, ob in zip(new_beta, beta_blocks)),
                    default=0.0,
                ),
                max(_relative_change(nb, ob) for nb, ob in zip(new_sigma, sigma_blocks)),
            )
            beta_blocks, sigma_blocks = new_beta, new_sigma
            lam_next = min(lam * cfg.penalty_schedule, cfg.penalty_cap)
            if change < cfg.tol and lam_next == lam:
                converged = True
                break
            lam = lam_next

    beta = np.zeros((g.p, g.p))
    sigma = np.zeros((g.p, g.p))
    for (y_nodes, z_nodes, _sup, _pat), b_c, s_c in zip(layouts, beta_blocks, sigma_blocks):
        if z_nodes:
            beta[np.ix_(y_nodes, z_nodes)] = b_c
        sigma[np.ix_(y_nodes, y_nodes)] = s_c
    params = SemParameters(graph=g, beta=beta, sigma=sigma)
    a = np.eye(g.p) - beta
    x = np.linalg.solve(a, sigma)
    model_cov = np.linalg.solve(a, x.T).T
    loglik = gaussian_average_loglik(0.5 * (model_cov + model_cov.T), s)
    variances = np.diag(sigma).copy()
    spread = float(np.max(np.log(variances)) - np.min(np.log(variances)))
    return FitResult(
        params=params,
        loglik=loglik,
        error_variances=variances,
        iterations=iterations,
        converged=converged,
        dispersion=spread,
    )


def dispersion(fit_result: FitResult) -> float:
    """Spread of the fitted log error variances; zero iff all equal."""
    logs = np.log(fit_result.error_variances)
    return float(np.max(logs) - np.min(logs))


def penalized_score(
    data_or_cov,
    g: ChainGraph,
    cfg: FitConfig | None = None,
    n_eff: float | None = None,
) -> float:
    """Penalized log-likelihood score; higher is better.

    score = n_eff * average log-likelihood - (k / 2) * log(n_eff), with k
    counting every edge plus one shared error variance in the
    equal-variance mode, or every edge plus p free variances otherwise.
    """
    cfg = cfg or FitConfig()
    if isinstance(data_or_cov, Dataset):
        n_eff = data_or_cov.n if n_eff is None else n_eff
    if n_eff is None:
        raise ValueError("covariance input requires an explicit n_eff")
    if n_eff <= 1:
        raise ValueError("n_eff must exceed 1")
    result = fit(data_or_cov, g, cfg)
    k = len(g.directed) + len(g.undirected) + (1 if cfg.equal_variance_penalty > 0 else g.p)
    return float(n_eff * result.loglik - 0.5 * k * math.log(n_eff))
