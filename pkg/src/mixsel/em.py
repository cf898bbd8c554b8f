"""EM for a fixed model and the penalized EM that selects variables.

Both engines share one mask-aware code path: masked cells are stored as 0 and
excluded through 0/1 mask matrices, so with a fully observed dataset the
arithmetic reduces exactly to the complete-data formulas.

The penalized engine maximizes `loglik - nu_m * c` jointly over the relevance
vector and the parameters; `c = ln(n)/2` yields the BIC, `c = 1` the AIC.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import densities as dens
from .data import Dataset, Model, Packed, Parameters

EMPTY_COMPONENT_TOL = 1e-8
WEIGHT_TOL = 1e-12


class EmError(RuntimeError):
    pass


class EmptyComponent(EmError):
    def __init__(self, k: int):
        self.k = k
        super().__init__(f"component {k + 1} received (almost) no mass")


class DegenerateComponent(EmError):
    """A component collapsed onto a variance spike on a relevant continuous
    column (singleton or exact-duplicate class). Handled like an empty
    component: redraw the start, floor as the last resort."""


@dataclass
class EmConfig:
    """Knobs shared by the EM engines.

    ``penalty_c`` is only read by the CLI plumbing; the penalized runner takes
    the penalty constant explicitly. ``empty_component_policy`` is either
    "restart" (redraw the start, up to ``max_redraws``, then floor) or "floor".
    """

    seed: int
    max_iterations: int = 500
    rel_tolerance: float = 1e-6
    n_starts: int = 20
    penalty_c: float | None = None
    empty_component_policy: str = "restart"
    max_redraws: int = 10

    def __post_init__(self):
        if self.max_iterations < 1 or self.n_starts < 1 or self.rel_tolerance <= 0:
            raise ValueError("invalid EM configuration")
        if self.empty_component_policy not in ("restart", "floor"):
            raise ValueError("empty_component_policy must be 'restart' or 'floor'")


@dataclass
class EmResult:
    theta: Parameters
    model: Model
    loglik: float
    objective: float
    fuzzy: np.ndarray
    n_iterations: int
    converged: bool
    traces: list = field(default_factory=list)
    start_index: int = 0
    degenerate: bool = False  # True when only a variance-spike fit was found


# ---------------------------------------------------------------------------
# vectorized building blocks
# ---------------------------------------------------------------------------

def _log_component_matrix(packed: Packed, theta: Parameters, cols: np.ndarray | None = None):
    """(n, g) sums of per-cell log densities over the selected columns.

    ``cols`` is a boolean column selector over the full dataset (None = all).
    Masked cells contribute 0.
    """
    gr = packed.groups
    g = theta.g
    V = np.zeros((packed.n, g))
    if gr.n_cont:
        sel = slice(None) if cols is None else np.flatnonzero(cols[gr.cont])
        Xc, Mc = packed.Xc[:, sel], packed.Mc[:, sel]
        for k in range(g):
            L = dens.normal_logpdf(Xc, theta.mu[k, sel], theta.sigma[k, sel])
            V[:, k] += (L * Mc).sum(axis=1)
    if gr.n_int:
        sel = slice(None) if cols is None else np.flatnonzero(cols[gr.integer])
        Xi, Mi = packed.Xi[:, sel], packed.Mi[:, sel]
        lg = packed.lgam[:, sel].sum(axis=1)
        for k in range(g):
            L = Xi * np.log(theta.rate[k, sel]) - theta.rate[k, sel]
            V[:, k] += (L * Mi).sum(axis=1) - lg
    if gr.n_cat:
        sel = range(gr.n_cat) if cols is None else np.flatnonzero(cols[gr.cat])
        for jj in sel:
            lp = np.log(theta.probs[jj][:, : packed.m[jj]])  # (g, m_j)
            V += lp[:, packed.codes[:, jj]].T * packed.Mq[:, jj][:, None]
    return V


def _suff_stats(packed: Packed, t: np.ndarray):
    """Weighted per-component sufficient statistics of every column."""
    tT = t.T
    return {
        "nk": t.sum(axis=0),
        "Wc": tT @ packed.Mc,
        "S1": tT @ packed.Xc,
        "S2": tT @ packed.Xc2,
        "Wi": tT @ packed.Mi,
        "Si": tT @ packed.Xi,
        "cnt": np.einsum("nk,njh->kjh", t, packed.onehot) if packed.groups.n_cat else
               np.zeros((t.shape[1], 0, 0)),
    }


def _per_class_blocks(packed: Packed, st: dict):
    """Floored per-component MLE blocks; zero-weight cells fall back to the
    global block (they carry no observed information)."""
    Wc, S1, S2 = st["Wc"], st["S1"], st["S2"]
    ok = Wc > WEIGHT_TOL
    Wsafe = np.where(ok, Wc, 1.0)
    mu = np.where(ok, S1 / Wsafe, packed.gmu)
    var = np.where(ok, np.maximum(S2 / Wsafe - mu * mu, 0.0), 0.0)
    sigma = np.where(ok, dens.floor_sigma(np.sqrt(var)), packed.gsig)
    oki = st["Wi"] > WEIGHT_TOL
    rate = np.where(oki, dens.floor_rate(st["Si"] / np.where(oki, st["Wi"], 1.0)),
                    packed.grate)
    if packed.groups.n_cat:
        probs = dens.floor_probs(st["cnt"], packed.level_mask)
    else:
        probs = st["cnt"]
    return mu, sigma, rate, probs


def _weighted_loglik_by_column(packed: Packed, t: np.ndarray, st: dict,
                               mu, sigma, rate, probs):
    """(d,) expected log-likelihood per column at the given per-class blocks,
    i.e. sum over classes and observed cells of t_ik * log f_kj.

    The continuous part is evaluated cell by cell: the sufficient-statistic
    expansion of sum t (x - mu)^2 cancels catastrophically once sigma sits
    on its floor.
    """
    gr = packed.groups
    out = np.zeros(packed.d)
    if gr.n_cont:
        acc = np.zeros(gr.n_cont)
        for k in range(t.shape[1]):
            L = dens.normal_logpdf(packed.Xc, mu[k], sigma[k])
            acc += t[:, k] @ (L * packed.Mc)
        out[gr.cont] = acc
    if gr.n_int:
        terms = st["Si"] * np.log(rate) - st["Wi"] * rate
        out[gr.integer] = terms.sum(axis=0) - packed.glgam
    if gr.n_cat:
        lp = np.log(np.where(packed.level_mask, probs, 1.0))
        out[gr.cat] = (st["cnt"] * lp).sum(axis=(0, 2))
    return out


def _assemble_theta(packed: Packed, tau, omega, mu, sigma, rate, probs) -> Parameters:
    """Install per-class blocks on relevant columns and the shared global
    block everywhere else."""
    gr = packed.groups
    g = len(tau)
    mu, sigma, rate = mu.copy(), sigma.copy(), rate.copy()
    if gr.n_cont:
        shared = omega[gr.cont] == 0
        mu[:, shared] = packed.gmu[shared]
        sigma[:, shared] = packed.gsig[shared]
    if gr.n_int:
        shared = omega[gr.integer] == 0
        rate[:, shared] = packed.grate[shared]
    plist = []
    for jj in range(gr.n_cat):
        mj = int(packed.m[jj])
        p = probs[:, jj, :mj].copy()
        if omega[gr.cat[jj]] == 0:
            p[:] = packed.gprobs[jj, :mj]
        plist.append(p)
    return Parameters(np.asarray(tau, dtype=float), mu, sigma, rate, plist, gr)


def _tau_from_nk(nk: np.ndarray, n: int, policy: str):
    if (nk < EMPTY_COMPONENT_TOL).any():
        if policy == "restart":
            raise EmptyComponent(int(np.argmin(nk)))
        nk = np.maximum(nk, 1e-10)
    return nk / nk.sum() if policy == "floor" else nk / n


def _check_degenerate(packed: Packed, st: dict, sigma, omega, allow_spikes: bool):
    """Reject variance spikes: a relevant continuous column whose per-class
    sigma sits on the floor while the column itself has real spread means the
    component collapsed onto a single point or exact duplicates (the floored
    density there grows without bound as the class shrinks)."""
    if allow_spikes or not packed.groups.n_cont:
        return
    rel = omega[packed.groups.cont] == 1
    spiky = ((sigma <= dens.SIGMA_FLOOR) & (st["Wc"] > WEIGHT_TOL)
             & rel & (packed.gsig > 1e-6))
    if spiky.any():
        raise DegenerateComponent(
            f"variance spike at (component, column) = "
            f"{tuple(int(v) for v in np.argwhere(spiky)[0])}")


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def e_step(dataset: Dataset, model: Model, theta: Parameters) -> np.ndarray:
    """Responsibilities t_ik ∝ tau_k * prod of observed-cell densities,
    computed in log space with max subtraction and row-normalized."""
    packed = dataset.packed()
    V = _log_component_matrix(packed, theta) + np.log(theta.tau)
    V -= V.max(axis=1, keepdims=True)
    t = np.exp(V)
    t /= t.sum(axis=1, keepdims=True)
    return t


def m_step(dataset: Dataset, model: Model, fuzzy: np.ndarray,
           on_empty: str = "restart") -> Parameters:
    """Weighted MLE update: per-class blocks on relevant columns, the shared
    unweighted MLE on irrelevant ones, proportions from the soft counts."""
    packed = dataset.packed()
    st = _suff_stats(packed, fuzzy)
    tau = _tau_from_nk(st["nk"], packed.n, on_empty)
    mu, sigma, rate, probs = _per_class_blocks(packed, st)
    _check_degenerate(packed, st, sigma, model.omega, on_empty == "floor")
    return _assemble_theta(packed, tau, model.omega, mu, sigma, rate, probs)


def observed_loglik(dataset: Dataset, model: Model, theta: Parameters) -> float:
    """Observed-data log-likelihood: irrelevant columns contribute their
    first-component term, relevant ones a stabilized log-sum-exp mixture."""
    packed = dataset.packed()
    omega = model.omega
    shared_cols = omega == 0
    shared = 0.0
    gr = packed.groups
    if shared_cols.any():
        sel = np.flatnonzero(shared_cols[gr.cont])
        if sel.size:
            L = dens.normal_logpdf(packed.Xc[:, sel], theta.mu[0, sel], theta.sigma[0, sel])
            shared += float((L * packed.Mc[:, sel]).sum())
        sel = np.flatnonzero(shared_cols[gr.integer])
        if sel.size:
            L = packed.Xi[:, sel] * np.log(theta.rate[0, sel]) - theta.rate[0, sel]
            shared += float((L * packed.Mi[:, sel]).sum() - packed.glgam[sel].sum())
        for jj in np.flatnonzero(shared_cols[gr.cat]):
            lp = np.log(theta.probs[jj][0, : packed.m[jj]])
            shared += float((lp[packed.codes[:, jj]] * packed.Mq[:, jj]).sum())
    V = _log_component_matrix(packed, theta, cols=omega == 1) + np.log(theta.tau)
    return shared + float(logsumexp(V, axis=1).sum())


def penalized_m_step(dataset: Dataset, g: int, fuzzy: np.ndarray, c: float,
                     on_empty: str = "restart"):
    """Joint update of the relevance vector and the parameters.

    For each column, Delta_j compares the expected log-likelihood of the
    per-class fit against the shared fit minus the extra-parameter cost
    (g-1) * nu_j * c; the column is kept relevant iff Delta_j > 0.

    Returns (omega, Parameters, Delta vector).
    """
    packed = dataset.packed()
    st = _suff_stats(packed, fuzzy)
    tau = _tau_from_nk(st["nk"], packed.n, on_empty)
    mu, sigma, rate, probs = _per_class_blocks(packed, st)
    if g == 1:
        # per-class and shared fits coincide exactly
        delta = np.zeros(packed.d)
    else:
        wll = _weighted_loglik_by_column(packed, fuzzy, st, mu, sigma, rate, probs)
        nu_j = np.array([k.n_free_params for k in dataset.kinds], dtype=float)
        delta = wll - packed.gll - (g - 1.0) * nu_j * c
    omega = (delta > 0).astype(np.int8)
    _check_degenerate(packed, st, sigma, omega, on_empty == "floor")
    theta = _assemble_theta(packed, tau, omega, mu, sigma, rate, probs)
    return omega, theta, delta


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

def _init_theta(packed: Packed, g: int, omega: np.ndarray, rng: np.random.Generator) -> Parameters:
    """Random start: g distinct observations as centers, global scales,
    perturbed global level frequencies; shared columns start at the global
    MLE; uniform proportions."""
    gr = packed.groups
    if packed.n < g:
        raise EmError("need at least g observations")
    centers = rng.choice(packed.n, size=g, replace=False)
    mu = np.where(packed.Mc[centers] > 0, packed.Xc[centers], packed.gmu)
    sigma = np.tile(np.maximum(packed.gsig, 1e-6), (g, 1))
    rate = np.maximum(np.where(packed.Mi[centers] > 0, packed.Xi[centers], packed.grate), 1e-2)
    probs = np.zeros((g, gr.n_cat, packed.m_max))
    if gr.n_cat:
        # unit-scale log-normal perturbations: categorical starts need to be
        # as assertive as the data-point centers are for continuous columns,
        # or category-driven basins are never explored
        noise = rng.standard_normal((g, gr.n_cat, packed.m_max))
        raw = packed.gprobs[None, :, :] * np.exp(noise)
        probs = dens.floor_probs(raw, packed.level_mask)
    tau = np.full(g, 1.0 / g)
    return _assemble_theta(packed, tau, omega, mu, sigma, rate, probs)


def _em_sequence(packed: Packed, theta: Parameters, cfg: EmConfig, policy: str,
                 penalty_c: float | None, omega: np.ndarray, nu_j: np.ndarray | None,
                 allow_spikes: bool = False):
    """One EM run from one start. Returns a dict with the final state.

    ``penalty_c`` None means the model (omega) stays fixed; otherwise omega is
    re-optimized every M step and the objective is penalized.
    """
    g = theta.g
    omega = omega.copy()

    def responsibilities(th):
        # one stabilized pass yields both the posterior and the loglik
        V = _log_component_matrix(packed, th) + np.log(th.tau)
        vmax = V.max(axis=1)
        V -= vmax[:, None]
        np.exp(V, out=V)
        s = V.sum(axis=1)
        V /= s[:, None]
        return V, float((vmax + np.log(s)).sum())

    t, _ = responsibilities(theta)
    prev_obj = -np.inf
    trace = []
    converged = False
    for it in range(1, cfg.max_iterations + 1):
        st = _suff_stats(packed, t)
        tau = _tau_from_nk(st["nk"], packed.n, policy)
        mu, sigma, rate, probs = _per_class_blocks(packed, st)
        if penalty_c is not None and g > 1:
            wll = _weighted_loglik_by_column(packed, t, st, mu, sigma, rate, probs)
            delta = wll - packed.gll - (g - 1.0) * nu_j * penalty_c
            omega = (delta > 0).astype(np.int8)
        elif penalty_c is not None:
            omega = np.zeros(packed.d, dtype=np.int8)
        _check_degenerate(packed, st, sigma, omega, allow_spikes)
        theta = _assemble_theta(packed, tau, omega, mu, sigma, rate, probs)
        t, loglik = responsibilities(theta)
        if penalty_c is None:
            obj = loglik
        else:
            nu_m = (g - 1.0) + float((nu_j * (g * omega + 1.0 - omega)).sum())
            obj = loglik - nu_m * penalty_c
        trace.append(obj)
        if prev_obj > -np.inf and \
                abs(obj - prev_obj) / (abs(prev_obj) + 1.0) < cfg.rel_tolerance:
            converged = True
            break
        prev_obj = obj
    return {
        "theta": theta, "omega": omega, "loglik": loglik, "objective": obj,
        "fuzzy": t, "n_iterations": it, "converged": converged,
        "trace": np.array(trace),
    }


def _run_starts(dataset: Dataset, g: int, omega0, cfg: EmConfig,
                penalty_c: float | None) -> EmResult:
    """Best-of-n-starts driver shared by the plain and penalized engines.

    ``omega0`` is a fixed relevance vector (plain EM) or None (penalized EM,
    Bernoulli(1/2) redraw per start). Empty components follow the configured
    policy (redraw, flooring as the last resort); a start that keeps
    collapsing onto a variance spike is discarded instead, since a floored
    spike is a near-singular fit, not a usable optimum. Only if every start
    degenerates is a single floored run accepted so the call can return.
    """
    packed = dataset.packed()
    nu_j = np.array([k.n_free_params for k in dataset.kinds], dtype=float)
    floor_policy = cfg.empty_component_policy == "floor"
    best = None
    traces = []
    for s in range(cfg.n_starts):
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=[cfg.seed & 0xFFFFFFFFFFFFFFFF, s]))
        res = None
        for attempt in range(cfg.max_redraws + 1):
            omega = omega0 if omega0 is not None else \
                rng.integers(0, 2, size=packed.d).astype(np.int8)
            theta0 = _init_theta(packed, g, omega, rng)
            tau_policy = "floor" if floor_policy or attempt == cfg.max_redraws \
                else "restart"
            try:
                res = _em_sequence(packed, theta0, cfg, tau_policy, penalty_c,
                                   omega, nu_j, allow_spikes=floor_policy)
                break
            except (EmptyComponent, DegenerateComponent):
                res = None
                continue
        if res is None:
            continue
        traces.append(res["trace"])
        if best is None or res["objective"] > best[1]["objective"]:
            best = (s, res)
    if best is None:
        # every start spiked: the landscape is dominated by a degenerate
        # solution; return one floored fit rather than failing the call
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=[cfg.seed & 0xFFFFFFFFFFFFFFFF, cfg.n_starts]))
        omega = omega0 if omega0 is not None else \
            rng.integers(0, 2, size=packed.d).astype(np.int8)
        theta0 = _init_theta(packed, g, omega, rng)
        res = _em_sequence(packed, theta0, cfg, "floor", penalty_c, omega, nu_j,
                           allow_spikes=True)
        traces.append(res["trace"])
        best = (cfg.n_starts, res)
    s, res = best
    model = Model(g, res["omega"] if omega0 is None else omega0)
    rel = model.omega[packed.groups.cont] == 1
    spiky = bool(((res["theta"].sigma <= dens.SIGMA_FLOOR) & rel
                  & (packed.gsig > 1e-6)).any()) if packed.groups.n_cont else False
    return EmResult(theta=res["theta"], model=model, loglik=res["loglik"],
                    objective=res["objective"], fuzzy=res["fuzzy"],
                    n_iterations=res["n_iterations"], converged=res["converged"],
                    traces=traces, start_index=s, degenerate=spiky)


def run_em(dataset: Dataset, model: Model, config: EmConfig) -> EmResult:
    """Maximum-likelihood EM for a fixed model, best of ``n_starts`` starts."""
    if len(model.omega) != dataset.d:
        raise ValueError("omega length must equal d")
    return _run_starts(dataset, model.g, model.omega, config, penalty_c=None)


def run_penalized_em(dataset: Dataset, g: int, c: float, config: EmConfig) -> EmResult:
    """Penalized EM jointly selecting the relevance vector at fixed g.

    With ``c = ln(n)/2`` the final objective equals the BIC of the returned
    model; with ``c = 1`` it equals the AIC.
    """
    if c < 0:
        raise ValueError("penalty must be nonnegative")
    return _run_starts(dataset, g, None, config, penalty_c=float(c))
