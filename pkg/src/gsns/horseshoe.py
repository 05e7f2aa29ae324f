"""Empirical full-horseshoe certificates on a frozen noise path.

For a fixed path, a pair of disjoint closed balls and a set of hitting times
``J``, every word ``s`` in ``{1, 2}^J`` must be realized by some initial point
whose trajectory sits in ball ``s(j)`` at each time ``j * tau``. Candidates
come from a numerical search; every success is re-checked by direct
simulation.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from . import _kernels as K
from .dynamics import GSNS, NoisePath, _check_state, _grid_steps
from .measure import EmpiricalMeasure
from .symbolic import mask_density, mask_from_set

MAX_J = 8


@dataclass(frozen=True)
class BallPair:
    center1: np.ndarray
    center2: np.ndarray
    radius: float

    def __post_init__(self):
        c1 = np.asarray(self.center1, dtype=float)
        c2 = np.asarray(self.center2, dtype=float)
        object.__setattr__(self, "center1", c1)
        object.__setattr__(self, "center2", c2)
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if c1.shape != c2.shape:
            raise ValueError("centers must have the same shape")
        if not np.linalg.norm(c1 - c2) > 2 * self.radius:
            raise ValueError("balls overlap: need |c1 - c2| > 2 radius")

    def center(self, symbol: int) -> np.ndarray:
        if symbol == 1:
            return self.center1
        if symbol == 2:
            return self.center2
        raise ValueError(f"symbol must be 1 or 2, got {symbol}")

    def contains(self, symbol: int, x) -> bool:
        return bool(np.linalg.norm(np.asarray(x) - self.center(symbol)) <= self.radius)

    def to_dict(self) -> dict:
        return {"c1": self.center1.tolist(), "c2": self.center2.tolist(),
                "radius": float(self.radius)}


@dataclass(frozen=True)
class ItinerarySpec:
    J: tuple
    s: tuple
    tau: float = 1.0

    def __post_init__(self):
        J = tuple(int(j) for j in self.J)
        s = tuple(int(x) for x in self.s)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "s", s)
        if any(j < 0 for j in J) or any(b <= a for a, b in zip(J, J[1:])):
            raise ValueError("J must be strictly increasing non-negative integers")
        if len(s) != len(J):
            raise ValueError("word length must equal |J|")
        if any(x not in (1, 2) for x in s):
            raise ValueError("symbols must be 1 or 2")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def word(self) -> str:
        return "".join(map(str, self.s))


@dataclass
class RealizationResult:
    x_s: np.ndarray
    residual: float
    iterations: int
    success: bool
    word: str = ""
    partials: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"s": self.word, "success": self.success, "residual": float(self.residual),
                "iterations": int(self.iterations), "x": [float(v) for v in self.x_s]}


@dataclass
class SearchConfig:
    """Budget and knobs for the itinerary search.

    ``margin`` shrinks the radius the optimizer aims for, so a converged point
    lies strictly inside; the certificate itself always uses the true radius.
    ``retries`` is how many more times a failed word is searched, each time
    with a doubled start budget and a fresh random stream.
    """

    n_starts: int = 64
    max_iter: int = 500
    tol: float = 1e-10
    method: str = "nelder-mead"
    margin: float = 0.01
    perturb_scale: float = 0.1
    prescreen: int = 2000
    seed: int = 0
    retries: int = 0
    attempt: int = 0

    def __post_init__(self):
        if self.method not in ("nelder-mead", "gradient"):
            raise ValueError(f"unknown search method {self.method!r}")
        if self.n_starts < 1 or self.max_iter < 1:
            raise ValueError("n_starts and max_iter must be >= 1")
        if not 0 <= self.margin < 1:
            raise ValueError("margin must lie in [0, 1)")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass
class HorseshoeCertificate:
    balls: BallPair
    J: tuple
    tau: float
    results: dict  # word string -> RealizationResult, lexicographic order
    all_realized: bool
    density: float
    horizon: int
    meta: dict = field(default_factory=dict)

    @property
    def failed_words(self) -> list[str]:
        return [w for w, r in self.results.items() if not r.success]

    def to_dict(self) -> dict:
        return {
            "balls": self.balls.to_dict(),
            "tau": float(self.tau),
            "J": list(self.J),
            "density": float(self.density),
            "horizon": int(self.horizon),
            "words": [r.to_dict() for r in self.results.values()],
            "all_realized": bool(self.all_realized),
        }


# -- ball selection --------------------------------------------------------

def nearest_neighbor_radius(samples, percentile: float = 30.0) -> float:
    X = np.asarray(samples, dtype=float)
    dist, _ = cKDTree(X).query(X, k=2)
    return float(np.percentile(dist[:, 1], percentile))


def propose_balls(measure: EmpiricalMeasure | np.ndarray, radius: float,
                  min_separation: float | None = None, seed: int = 0, k: int = 10,
                  top_fraction: float = 0.2, n_choices: int = 8,
                  max_candidates: int = 1000) -> BallPair:
    """Two high-density stationary samples at distance >= ``min_separation``.

    Local density is ranked by the distance to the ``k``-th nearest neighbor.
    Admissible pairs among the densest ``top_fraction`` of samples are scored
    by the sparser of the two endpoints; the seed picks one of the
    ``n_choices`` best pairs.
    """
    X = measure.samples if isinstance(measure, EmpiricalMeasure) else np.asarray(measure, float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("measure has no samples")
    if min_separation is None:
        min_separation = 4 * radius
    if not min_separation > 2 * radius:
        raise ValueError("min_separation must exceed 2 * radius for disjoint balls")
    kk = min(k, len(X) - 1)
    if kk < 1:
        raise ValueError("need at least two samples")
    dist, _ = cKDTree(X).query(X, k=kk + 1)
    dk = dist[:, kk]
    order = np.lexsort((np.arange(len(X)), dk))  # densest first, index tie-break
    n_top = min(max(2, int(np.ceil(top_fraction * len(X)))), max_candidates, len(X))
    cand = order[:n_top]
    sep = np.linalg.norm(X[cand][:, None, :] - X[cand][None, :, :], axis=2)
    a, b = np.nonzero(np.triu(sep >= min_separation, 1))
    if len(a) == 0:
        a, b = np.nonzero(np.triu(
            np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2) >= min_separation, 1))
        if len(a) == 0:
            raise ValueError("no admissible pair: radius/separation too large for the ensemble")
        ia, ib = a, b
    else:
        ia, ib = cand[a], cand[b]
    score = np.maximum(dk[ia], dk[ib])
    rank = np.lexsort((np.maximum(ia, ib), np.minimum(ia, ib), score))
    pick = rank[np.random.default_rng(seed).integers(min(n_choices, len(rank)))]
    i, j = sorted((int(ia[pick]), int(ib[pick])))
    return BallPair(X[i].copy(), X[j].copy(), float(radius))


# -- residuals -----------------------------------------------------------------

def _hit_steps(spec: ItinerarySpec, dt: float) -> list[int]:
    per = _grid_steps(spec.tau, dt, "tau")
    return [j * per for j in spec.J]


def _states_at(model: GSNS, x0, path: NoisePath | None, steps) -> np.ndarray:
    """States at increasing step counts, in one pass; nan rows after a blow-up."""
    d = model.d
    incr = model._increments(path, steps[-1] if steps else 0)
    q = _check_state(x0, d).copy()
    ys = []
    cur = 0
    for n in steps:
        seg = n - cur
        if seg > 0:
            st, done = K.integrate(q, incr, cur, seg, seg, model._cols, model._amps,
                                   model.config.dt, model._scheme, *model._args, model._diss)
            q = st[-1].copy() if done == seg else np.full(d, np.nan)
            cur = n
        ys.append(q.copy())
    return np.array(ys)


def itinerary_residual(model: GSNS, x0, path: NoisePath | None, spec: ItinerarySpec,
                       balls: BallPair, radius: float | None = None) -> float:
    """``sum_j max(0, |Phi^{j tau}(x0) - c_{s(j)}| - radius)^2``; zero iff all constraints hold."""
    if not spec.J:
        return 0.0
    steps = _hit_steps(spec, model.config.dt)
    if path is not None and steps[-1] > path.n_steps:
        raise ValueError("itinerary horizon exceeds the noise path")
    rho = balls.radius if radius is None else radius
    ys = _states_at(model, x0, path, steps)
    if not np.all(np.isfinite(ys)):
        return float("inf")
    total = 0.0
    for y, sym in zip(ys, spec.s):
        h = np.linalg.norm(y - balls.center(sym)) - rho
        if h > 0:
            total += h * h
    return float(total)


def _residual_and_grad(model, x0, path, spec, balls, rho):
    """Hinge residual and its exact gradient via one adjoint sweep."""
    steps = np.array(_hit_steps(spec, model.config.dt), dtype=np.int64)
    incr = model._increments(path, int(steps[-1]))
    centers = np.array([balls.center(sym) for sym in spec.s])
    f, g, ok = K.hinge_residual_grad(_check_state(x0, model.d), incr, 0, steps, centers,
                                     float(rho), model._cols, model._amps, model.config.dt,
                                     model._scheme, *model._args, model._diss)
    if not ok:
        return float("inf"), np.zeros(model.d)
    return float(f), g


class _Found(Exception):
    def __init__(self, x):
        self.x = x


def _refine(model, x_start, path, spec, balls, cfg: SearchConfig):
    rho = balls.radius * (1 - cfg.margin)
    evals = [0]

    if cfg.method == "gradient":
        def fun(x):
            evals[0] += 1
            f, g = _residual_and_grad(model, x, path, spec, balls, rho)
            if f == 0.0:
                raise _Found(np.array(x, dtype=float))
            return f, g

        try:
            res = minimize(fun, x_start, jac=True, method="L-BFGS-B",
                           options={"maxiter": cfg.max_iter, "ftol": cfg.tol, "gtol": 1e-14})
            return res.x, res.nit
        except _Found as hit:
            return hit.x, evals[0]

    def fun(x):
        evals[0] += 1
        f = itinerary_residual(model, x, path, spec, balls, radius=rho)
        if f == 0.0:
            raise _Found(np.array(x, dtype=float))
        return f

    step = cfg.perturb_scale * balls.radius
    simplex = np.vstack([x_start, x_start + step * np.eye(model.d)])
    try:
        res = minimize(fun, x_start, method="Nelder-Mead",
                       options={"maxiter": cfg.max_iter, "fatol": cfg.tol, "xatol": 1e-12,
                                "initial_simplex": simplex})
        return res.x, res.nit
    except _Found as hit:
        return hit.x, evals[0]


def _word_seed(seed: int, word: str, attempt: int = 0) -> np.random.Generator:
    key = [int(seed), int(word or "0")] + ([int(attempt)] if attempt else [])
    return np.random.default_rng(key)


def _prefix(spec: ItinerarySpec, k: int) -> ItinerarySpec:
    return ItinerarySpec(spec.J[:k], spec.s[:k], spec.tau)


def _profile(model, x, path, spec, balls):
    """``(k, score)``: leading constraints met and the hinge residual on the first ``k + 1``."""
    ys = _states_at(model, x, path, _hit_steps(spec, model.config.dt))
    score, k, counting = 0.0, 0, True
    for y, sym in zip(ys, spec.s):
        if not np.all(np.isfinite(y)):
            return k, float("inf")
        h = np.linalg.norm(y - balls.center(sym)) - balls.radius
        if counting and h <= 0:
            k += 1
            continue
        counting = False
        score = max(h, 0.0) ** 2
        break
    return k, score


def _uniform_ball(rng, center, radius, n):
    u = rng.standard_normal((n, center.shape[0]))
    u /= np.linalg.norm(u, axis=1)[:, None]
    return center + u * radius * rng.random(n)[:, None] ** (1.0 / center.shape[0])


def _best_first(model, spec, balls, path, cfg, pool, hints, rng):
    """Best-first extension of partial solutions.

    A node is a point meeting the first ``k`` constraints; its priority is
    (deepest first, then smallest residual on the first ``k + 1``).
    Expanding a node runs one local refinement on ``k + 1`` constraints.
    Returns ``(x, iterations, partials)`` with ``x`` None when the budget
    runs out; ``partials`` are the refined points that met at least one
    more constraint than their parent.
    """
    n = len(spec.J)
    prefixes = [_prefix(spec, k) for k in range(n + 1)]
    heap, tie = [], itertools.count()

    def push(x):
        k, score = _profile(model, x, path, spec, balls)
        if k == n:
            return x
        heapq.heappush(heap, (-k, score, next(tie), x))
        return None

    partials = []
    for x in list(hints) + list(pool):
        done = push(np.asarray(x, dtype=float))
        if done is not None:
            return done, 0, partials
    iterations = 0
    for _ in range(cfg.n_starts):
        if not heap:
            break
        negk, _, _, x = heapq.heappop(heap)
        k = -negk
        x_ref, nit = _refine(model, x, path, prefixes[k + 1], balls, cfg)
        iterations += int(nit)
        if itinerary_residual(model, x_ref, path, prefixes[k + 1], balls) == 0.0:
            partials.append(x_ref)
            done = push(x_ref)
            if done is not None:
                return done, iterations, partials
    return None, iterations, partials


def realize_itinerary(model: GSNS, spec: ItinerarySpec, balls: BallPair,
                      path: NoisePath | None, search: SearchConfig | None = None,
                      starts=None, hints=()) -> RealizationResult:
    """Multistart search for a point realizing ``spec``; failure is a result, not an error.

    ``starts`` are candidate initial points, typically stationary samples
    ranked by their residual; Gaussian perturbations of them (and, when the
    first hitting time is 0, uniform draws from the first ball) widen the
    pool to ``search.prescreen`` points. ``hints`` are points already known
    to meet some leading constraints, e.g. realizations of words sharing a
    prefix. A start that meets every constraint is returned unchanged.
    Otherwise up to ``search.n_starts`` local refinements are spent on a
    best-first extension of partial solutions. Success is decided by
    re-simulating the best point with the true radius.
    """
    cfg = search or SearchConfig()
    word = spec.word
    base = np.zeros((0, model.d)) if starts is None else np.atleast_2d(np.asarray(starts, float))
    if len(base) == 0:
        base = np.vstack([balls.center(spec.s[0]) if spec.J else np.zeros(model.d)])
    if not spec.J:
        return RealizationResult(base[0].copy(), 0.0, 0, True, word)

    for x in base:
        if itinerary_residual(model, x, path, spec, balls) == 0.0:
            x = np.array(x, dtype=float)
            ok = verify_itinerary(model, x, path, spec, balls)
            return RealizationResult(x, 0.0, 0, ok, word)

    rng = _word_seed(cfg.seed, word, cfg.attempt)
    pool = list(base[: cfg.prescreen])
    n_extra = max(cfg.prescreen - len(pool), 0)
    if spec.J[0] == 0:
        pool.extend(_uniform_ball(rng, balls.center(spec.s[0]), balls.radius, n_extra))
    else:
        for _ in range(n_extra):
            src = base[rng.integers(len(base))]
            pool.append(src + cfg.perturb_scale * balls.radius * rng.standard_normal(model.d))

    found, iterations, partials = _best_first(model, spec, balls, path, cfg, pool, hints, rng)
    if found is not None:
        best_x = np.array(found, dtype=float)
    else:
        res = [itinerary_residual(model, x, path, spec, balls) for x in pool]
        best_x = np.array(pool[int(np.argmin(res))], dtype=float)
    best_r = itinerary_residual(model, best_x, path, spec, balls)
    # independent re-check of the membership constraints
    ok = best_r == 0.0 and verify_itinerary(model, best_x, path, spec, balls)
    return RealizationResult(best_x, best_r, iterations, ok, word, partials)


def verify_itinerary(model: GSNS, x0, path: NoisePath | None, spec: ItinerarySpec,
                     balls: BallPair) -> bool:
    """Direct simulation check that every visit lands in its closed ball."""
    for j, sym in zip(spec.J, spec.s):
        y = model.flow(x0, path, j * spec.tau)
        if not balls.contains(sym, y):
            return False
    return True


def all_words(size: int) -> list[tuple[int, ...]]:
    return list(itertools.product((1, 2), repeat=size))


def ensemble_states(model: GSNS, ensemble, path: NoisePath | None, J, tau: float) -> np.ndarray:
    """States of every ensemble member at times ``j * tau``, shape (M, |J|, d)."""
    per = _grid_steps(tau, model.config.dt, "tau")
    steps = [int(j) * per for j in J]
    return np.array([_states_at(model, x, path, steps) for x in np.atleast_2d(ensemble)])


def rank_starts(positions: np.ndarray, spec: ItinerarySpec, balls: BallPair) -> np.ndarray:
    """Ensemble indices ordered by their residual for ``spec`` (stable)."""
    res = np.zeros(len(positions))
    for t, sym in enumerate(spec.s):
        h = np.linalg.norm(positions[:, t] - balls.center(sym), axis=1) - balls.radius
        res += np.maximum(h, 0.0) ** 2
    return np.argsort(res, kind="stable")


def certify_full_horseshoe(model: GSNS, J, balls: BallPair, path: NoisePath | None,
                           tau: float = 1.0, search: SearchConfig | None = None,
                           ensemble=None, horizon: int | None = None,
                           share_partials: bool = True,
                           stop_on_failure: bool = False) -> HorseshoeCertificate:
    """Search every word in ``{1, 2}^J`` (lexicographic order) on the same path.

    With ``share_partials`` the points found while searching one word are
    offered as hints to the later ones (they may already meet a common
    prefix). With ``stop_on_failure`` the remaining words are skipped after
    the first failure and reported as unrealized.
    """
    J = tuple(int(j) for j in J)
    if len(J) > MAX_J:
        raise ValueError(f"|J| = {len(J)} exceeds the cap of {MAX_J}")
    ItinerarySpec(J, (1,) * len(J), tau)  # validates J and tau
    cfg = search or SearchConfig()
    ens = None if ensemble is None else np.atleast_2d(np.asarray(ensemble, float))
    positions = ensemble_states(model, ens, path, J, tau) if ens is not None and J else None

    results = {}
    hints: list[np.ndarray] = []
    failed = False
    for s in all_words(len(J)):
        spec = ItinerarySpec(J, s, tau)
        if failed and stop_on_failure:
            results[spec.word] = RealizationResult(np.full(model.d, np.nan), float("inf"), 0,
                                                   False, spec.word)
            continue
        starts = ens[rank_starts(positions, spec, balls)] if positions is not None else ens
        res = realize_itinerary(model, spec, balls, path, cfg, starts=starts,
                                hints=hints if share_partials else ())
        for attempt in range(1, cfg.retries + 1):
            if res.success:
                break
            if share_partials:
                hints.extend(res.partials)
            wider = replace(cfg, n_starts=cfg.n_starts * 2**attempt, attempt=attempt)
            res = realize_itinerary(model, spec, balls, path, wider, starts=starts,
                                    hints=hints if share_partials else ())
        results[spec.word] = res
        if share_partials:
            hints.extend(res.partials)
            if res.success:
                hints.append(res.x_s)
        failed = failed or not res.success

    horizon = horizon if horizon is not None else (max(J) + 1 if J else 1)
    density = mask_density(mask_from_set(J, horizon))
    return HorseshoeCertificate(
        balls=balls, J=J, tau=float(tau), results=results,
        all_realized=all(r.success for r in results.values()),
        density=density, horizon=int(horizon),
    )


def restrict_certificate(model: GSNS, cert: HorseshoeCertificate, J_sub, path) -> bool:
    """Re-verify the words on a subset of ``J`` with the points already found."""
    J_sub = tuple(sorted(int(j) for j in J_sub))
    if not set(J_sub) <= set(cert.J):
        raise ValueError("J_sub must be a subset of the certificate's J")
    pos = [cert.J.index(j) for j in J_sub]
    for word, res in cert.results.items():
        if not res.success:
            continue
        s = tuple(int(word[p]) for p in pos)
        if not verify_itinerary(model, res.x_s, path, ItinerarySpec(J_sub, s, cert.tau), cert.balls):
            return False
    return True


def empirical_hitting_times(model: GSNS, ensemble, balls: BallPair, path: NoisePath | None,
                            tau: float, horizon: int, return_counts: bool = False):
    """Times ``j < horizon`` at which both balls hold at least one ensemble member.

    A necessary condition for ``j`` to belong to a certified hitting set.
    """
    ens = np.atleast_2d(np.asarray(ensemble, dtype=float))
    if len(ens) == 0:
        raise ValueError("empty ensemble")
    per = _grid_steps(tau, model.config.dt, "tau")
    n_steps = (int(horizon) - 1) * per
    counts = np.zeros((int(horizon), 2), dtype=np.int64)
    for x in ens:
        if n_steps > 0:
            traj = model.trajectory(x, path, n_steps * model.config.dt, record_every=per)
        else:
            traj = x[None, :]
        for sym in (1, 2):
            inside = np.linalg.norm(traj - balls.center(sym), axis=1) <= balls.radius
            counts[: len(traj), sym - 1] += inside
    times = [j for j in range(int(horizon)) if counts[j, 0] > 0 and counts[j, 1] > 0]
    return (times, counts) if return_counts else times


def transition_scores(positions: np.ndarray, balls: BallPair) -> np.ndarray:
    """Ensemble proxy for how hard each hop between two times is.

    ``positions`` is (M, T, d), the ensemble at times ``0..T-1``. Entry
    ``[j, k]`` is the worst, over the four symbol pairs ``(a, b)``, of the
    smallest ``h_a(x_m(j)) + h_b(x_m(k))`` over members ``m``, where ``h`` is
    the distance outside a ball. Zero means some member makes the hop.
    """
    h = np.stack([np.maximum(np.linalg.norm(positions - balls.center(s), axis=2)
                             - balls.radius, 0.0) for s in (1, 2)], axis=-1)
    T = h.shape[1]
    out = np.zeros((T, T))
    for j in range(T):
        for k in range(j + 1, T):
            worst = 0.0
            for a in range(2):
                for b in range(2):
                    worst = max(worst, float(np.min(h[:, j, a] + h[:, k, b])))
            out[j, k] = worst
    return out


def choose_hitting_set(candidates, size: int, min_spacing: int, scores=None):
    """Pick ``size`` candidate times pairwise at least ``min_spacing`` apart.

    ``scores[j, k]`` is a hop cost (see :func:`transition_scores`); the set
    minimizing its largest consecutive hop cost wins, ties broken
    lexicographically. Without scores the earliest admissible set is
    returned. Returns ``None`` if no admissible set exists.
    """
    cand = sorted(int(c) for c in candidates)
    best, best_cost = None, np.inf
    for combo in itertools.combinations(cand, size):
        if any(b - a < min_spacing for a, b in zip(combo, combo[1:])):
            continue
        if scores is None:
            return combo
        cost = max((scores[a, b] for a, b in zip(combo, combo[1:])), default=0.0)
        if cost < best_cost:
            best, best_cost = combo, cost
    return best


def estimate_top_exponent(model: GSNS, x0, seed: int, t_total: float = 500.0) -> float:
    from .tangent import lyapunov_spectrum

    n = _grid_steps(t_total, model.config.dt, "t_total")
    path = model.sample_noise(n, seed) if model.pattern.forced_components() else None
    return float(lyapunov_spectrum(model, x0, path, p=1, t_total=t_total).exponents[0])


def horseshoe_experiment(cfg, stop_on_failure: bool = False
                         ) -> HorseshoeCertificate:
    """End-to-end certificate from an :class:`~gsns.config.ExperimentConfig`.

    Stationary samples give the radius and the balls; a larger ensemble run
    on the frozen path gives the hitting times and, unless ``J`` is fixed in
    the config, the hitting set with the easiest hops.
    """
    from .measure import sample_stationary

    hs = cfg["horseshoe"]
    model = cfg.model()
    if not model.pattern.forced_components():
        raise ValueError("horseshoe search needs nonzero forcing")
    dt, tau = model.config.dt, hs["tau"]
    s_measure, s_ensemble, s_path, s_lyap = (
        int(v) for v in np.random.SeedSequence(cfg["seed"]).generate_state(4))

    measure = sample_stationary(model, hs["measure_burn_in"], hs["measure_samples"],
                                hs["measure_thin"], s_measure)
    radius = hs["radius"] or nearest_neighbor_radius(measure.samples, hs["percentile"])
    balls = propose_balls(measure, radius, hs["separation_factor"] * radius, hs["ball_seed"])
    n_extra = max(hs["ensemble_size"] - len(measure), 0)
    parts = [measure.samples]
    if n_extra:
        parts.append(sample_stationary(model, hs["measure_burn_in"], n_extra,
                                       hs["ensemble_thin"], s_ensemble).samples)
    ensemble = np.vstack(parts)

    horizon = int(hs["horizon"])
    per = _grid_steps(tau, dt, "tau")
    path = model.sample_noise(horizon * per, s_path)
    meta = {"radius_rule": "given" if hs["radius"] else f"percentile {hs['percentile']}"}
    if hs["J"] is not None:
        J = tuple(hs["J"])
        if J and J[-1] >= horizon:
            raise ValueError(f"J exceeds the horizon {horizon}")
    else:
        positions = ensemble_states(model, ensemble, path, tuple(range(horizon)), tau)
        inside = [np.linalg.norm(positions - balls.center(s), axis=2) <= radius for s in (1, 2)]
        hits = [j for j in range(horizon) if inside[0][:, j].any() and inside[1][:, j].any()]
        spacing = hs["min_spacing"]
        if spacing is None:
            lam = estimate_top_exponent(model, measure.samples[-1], s_lyap)
            spacing = max(1, int(np.ceil(hs["lyapunov_times"] / (max(lam, 1e-12) * tau))))
            meta["top_exponent"] = lam
        meta["hitting_times"] = hits
        meta["min_spacing"] = int(spacing)
        J = choose_hitting_set(hits, hs["j_size"], spacing,
                               transition_scores(positions, balls))
        if J is None:
            raise ValueError("no admissible hitting set: too few hitting times for the spacing")
    search = SearchConfig(n_starts=hs["n_starts"], max_iter=hs["max_iter"], tol=hs["tol"],
                          method=hs["method"], margin=hs["margin"], seed=cfg["seed"],
                          retries=hs["retries"])
    cert = certify_full_horseshoe(model, J, balls, path, tau, search, ensemble=ensemble,
                                  horizon=horizon, stop_on_failure=stop_on_failure)
    cert.meta.update(meta)
    return cert
