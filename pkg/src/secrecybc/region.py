"""Secrecy rate region of the degraded broadcast channel with a wiretapper.

Layers are numbered like receivers.  Layer ``k`` carries receiver ``k``'s
message on the variable ``V_k``: ``V_1 = X`` and ``V_k = U_k`` for
``k >= 2``.  An auxiliary chain ``U_K -> ... -> U_2 -> X`` fixes all the
single-letter quantities, and for each layer

    R_k  <=  I(V_k; Y_k | V_{k+1}) - I(V_k; Z | V_{k+1})

with no conditioning for the top layer ``k = K``.  The wiretapper's share
``I(V_k; Z | V_{k+1})`` (less a slack ``tau``) is the randomization rate
burnt inside each secrecy subcode.

Rates are bits per channel use; tuples are indexed from 0
(``rates[0]`` is receiver 1).
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import rng as _rng
from .channel_model import WIRETAPPER, marginal_channel
from .errors import ValidationError
from .probkit import Distribution, channel_information, conditional_mutual_information

ROW_TOL = 1e-9
MARGIN_TOL = 1e-9


def layer_label(k):
    return "X" if k == 1 else f"U{k}"


@dataclass(frozen=True, eq=False)
class ChainDistribution:
    """Auxiliary chain ``p(u_K) p(u_{K-1}|u_K) ... p(x|u_2)``.

    Parameters
    ----------
    top : array_like
        pmf of the top variable ``V_K`` (``p(x)`` itself when K = 1).
    links : sequence of 2-D arrays
        Conditionals ordered top-down, ``links[0] = p(v_{K-1}|v_K)`` through
        ``links[-1] = p(x|u_2)``.  Empty when K = 1.
    """

    top: np.ndarray
    links: tuple = ()

    def __post_init__(self):
        top = np.array(self.top, dtype=float)
        links = tuple(np.array(l, dtype=float) for l in self.links)
        top.setflags(write=False)
        for l in links:
            l.setflags(write=False)
        object.__setattr__(self, "top", top)
        object.__setattr__(self, "links", links)
        diags = self.problems()
        if diags:
            raise ValidationError("invalid chain: " + "; ".join(diags), diags)

    def problems(self):
        out = []
        if self.top.ndim != 1 or self.top.size == 0:
            return [f"top must be a non-empty vector, got shape {self.top.shape}"]
        if np.any(self.top < 0) or abs(self.top.sum() - 1) > ROW_TOL:
            out.append(f"p({layer_label(self.k_layers)}) is not a pmf")
        prev = self.top.size
        for i, l in enumerate(self.links):
            k = self.k_layers - 1 - i
            name = f"p({layer_label(k)}|{layer_label(k + 1)})"
            if l.ndim != 2 or l.shape[0] != prev:
                out.append(f"{name} must have {prev} rows, got shape {l.shape}")
                break
            if np.any(l < 0) or np.any(np.abs(l.sum(axis=1) - 1) > ROW_TOL):
                out.append(f"{name} is not row stochastic")
            prev = l.shape[1]
        return out

    @property
    def k_layers(self):
        return len(self.links) + 1

    @property
    def sizes(self):
        """Alphabet sizes of ``V_1 = X, V_2, ..., V_K``."""
        out = [self.top.size] + [l.shape[1] for l in self.links]
        return tuple(reversed(out))

    @property
    def emit(self):
        """``p(x|u_2)``, or ``None`` when K = 1."""
        return self.links[-1] if self.links else None

    def conditional(self, k):
        """``p(v_k | v_{k+1})`` for ``1 <= k < K``."""
        return self.links[self.k_layers - 1 - k]

    def marginal(self, k):
        p = self.top
        for j in range(self.k_layers - 1, k - 1, -1):
            p = p @ self.conditional(j)
        return p

    def to_layer_channel(self, k):
        """Single-letter channel ``p(x | v_k)`` implied by the chain."""
        t = np.eye(self.sizes[0])
        for j in range(1, k):
            t = self.conditional(j) @ t
        return t

    @classmethod
    def from_arrays(cls, arrays):
        return cls(arrays[0], tuple(arrays[1:]))

    def arrays(self):
        return [self.top.copy()] + [l.copy() for l in self.links]

    @classmethod
    def uniform(cls, sizes):
        """Uniform chain over alphabet sizes ``(|X|, |U_2|, ..., |U_K|)``."""
        sizes = tuple(sizes)
        top = np.full(sizes[-1], 1.0 / sizes[-1])
        links = [np.full((sizes[k], sizes[k - 1]), 1.0 / sizes[k - 1]) for k in range(len(sizes) - 1, 0, -1)]
        return cls(top, tuple(links))

    @classmethod
    def random(cls, sizes, gen):
        sizes = tuple(sizes)
        top = gen.dirichlet(np.ones(sizes[-1]))
        links = [gen.dirichlet(np.ones(sizes[k - 1]), size=sizes[k]) for k in range(len(sizes) - 1, 0, -1)]
        return cls(top, tuple(links))

    def __eq__(self, other):
        if not isinstance(other, ChainDistribution):
            return NotImplemented
        return (
            np.array_equal(self.top, other.top)
            and len(self.links) == len(other.links)
            and all(np.array_equal(a, b) for a, b in zip(self.links, other.links))
        )

    __hash__ = None


@dataclass(frozen=True)
class RateTuple:
    rates: tuple

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if any(r < 0 for r in rates):
            raise ValidationError(f"rates must be nonnegative, got {rates}")
        object.__setattr__(self, "rates", rates)

    def __len__(self):
        return len(self.rates)

    def __iter__(self):
        return iter(self.rates)

    def __getitem__(self, i):
        return self.rates[i]


@dataclass(frozen=True)
class RandomizationRates:
    rates: tuple
    tau: float = 0.0

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if any(r < 0 for r in rates) or self.tau < 0:
            raise ValidationError(f"randomization rates and tau must be nonnegative, got {rates}, {self.tau}")
        object.__setattr__(self, "rates", rates)

    def __len__(self):
        return len(self.rates)

    def __iter__(self):
        return iter(self.rates)

    def __getitem__(self, i):
        return self.rates[i]


@dataclass(frozen=True, eq=False)
class RegionSample:
    weights: tuple
    rates: RateTuple
    chain: ChainDistribution
    value: float


def _check_pair(chain, spec):
    if chain.k_layers != spec.k_receivers:
        raise ValidationError(f"chain has {chain.k_layers} layers but the channel has {spec.k_receivers} receivers")
    if chain.sizes[0] != spec.x_size:
        raise ValidationError(f"chain emits |X| = {chain.sizes[0]} but the channel input has {spec.x_size} symbols")


def joint_labels(k_receivers):
    K = k_receivers
    return (
        tuple(f"U{k}" for k in range(K, 1, -1))
        + ("X",)
        + tuple(f"Y{k}" for k in range(1, K + 1))
        + ("Z",)
    )


def induced_joint(chain, spec):
    """Full single-letter joint over ``(U_K..U_2, X, Y_1..Y_K, Z)``."""
    spec.require_valid()
    _check_pair(chain, spec)
    mass = chain.top
    for table in list(chain.links) + [spec.base.rows] + [k.rows for k in spec.kernels]:
        mass = mass[..., :, None] * table
    return Distribution(joint_labels(spec.k_receivers), mass)


def rate_expressions(chain, spec, joint=None):
    """Unclamped per-layer secrecy expressions plus their two terms.

    Returns ``(diffs, main, leak)`` with ``main[k-1] = I(V_k;Y_k|V_{k+1})``
    and ``leak[k-1] = I(V_k;Z|V_{k+1})``.
    """
    d = induced_joint(chain, spec) if joint is None else joint
    K = spec.k_receivers
    main, leak = [], []
    for k in range(1, K + 1):
        cond = (layer_label(k + 1),) if k < K else ()
        v = layer_label(k)
        main.append(conditional_mutual_information(d, v, f"Y{k}", cond))
        leak.append(conditional_mutual_information(d, v, "Z", cond))
    diffs = [m - l for m, l in zip(main, leak)]
    return diffs, main, leak


def rate_tuple(chain, spec):
    """Secrecy rate of every layer for ``chain``, each clamped at zero."""
    diffs, _, _ = rate_expressions(chain, spec)
    return RateTuple(tuple(max(r, 0.0) for r in diffs))


def randomization_rates(chain, spec, tau=0.0):
    """Subcode randomization rates ``I(V_k;Z|V_{k+1}) - tau``, clamped at zero."""
    if tau < 0:
        raise ValidationError(f"tau must be nonnegative, got {tau}")
    _, _, leak = rate_expressions(chain, spec)
    return RandomizationRates(tuple(max(l - tau, 0.0) for l in leak), float(tau))


@dataclass(frozen=True)
class LayerCheck:
    layer: int
    bound: float
    used: float
    margin: float
    ok: bool


def check_code_rates(chain, spec, rates, randomization):
    """Superposition decodability of ``R_k + R'_k`` against ``I(V_k;Y_k|V_{k+1})``.

    One :class:`LayerCheck` per layer, with ``margin = bound - used`` in bits.
    """
    _, main, _ = rate_expressions(chain, spec)
    out = []
    for k in range(1, spec.k_receivers + 1):
        used = rates[k - 1] + randomization[k - 1]
        margin = main[k - 1] - used
        out.append(LayerCheck(k, main[k - 1], used, margin, margin >= -MARGIN_TOL))
    return out


class RateEvaluator:
    """Fast secrecy-rate evaluation by small matrix products.

    Computes the same expressions as :func:`rate_expressions` without building
    the full joint; the optimizer calls this thousands of times.
    """

    def __init__(self, spec):
        spec.require_valid()
        self.spec = spec
        self.K = spec.k_receivers
        self.receivers = [marginal_channel(spec, k).rows for k in range(1, self.K + 1)]
        self.wiretap = marginal_channel(spec, WIRETAPPER).rows

    def layer_rates(self, arrays):
        """Unclamped secrecy expression per layer for chain ``arrays`` (top first)."""
        K = self.K
        top, links = arrays[0], arrays[1:]
        cond = {k: links[K - 1 - k] for k in range(1, K)}
        to_x = {1: None}
        t = None
        for k in range(2, K + 1):
            t = cond[k - 1] if t is None else cond[k - 1] @ t
            to_x[k] = t
        parent = {K: None}
        p = top
        for k in range(K - 1, 0, -1):
            parent[k] = p
            p = p @ cond[k]
        out = np.empty(K)
        for k in range(1, K + 1):
            m_main = self.receivers[k - 1] if to_x[k] is None else to_x[k] @ self.receivers[k - 1]
            m_leak = self.wiretap if to_x[k] is None else to_x[k] @ self.wiretap
            if k == K:
                out[k - 1] = channel_information(top, m_main) - channel_information(top, m_leak)
            else:
                rows = cond[k]
                diff = channel_information(rows, m_main) - channel_information(rows, m_leak)
                out[k - 1] = parent[k] @ diff
        return out

    def rates(self, arrays):
        return np.maximum(self.layer_rates(arrays), 0.0)


@dataclass
class OptimizerOptions:
    """Knobs for :func:`maximize_weighted_sum`.

    ``cardinalities`` gives ``(|U_2|, ..., |U_K|)``; the default uses ``|X|``
    for every auxiliary.  ``method`` is ``"ascent"`` (multi-start coordinate
    ascent) or ``"grid"`` (exhaustive simplex lattice with spacing
    ``grid_step``).
    """

    cardinalities: tuple = None
    restarts: int = 8
    grid_step: float = 1.0 / 16
    seed: int = 0
    tolerance: float = 1e-10
    method: str = "ascent"
    max_sweeps: int = 200
    line_points: int = 9
    threads: int = 1
    max_grid_points: int = 2_000_000

    def sizes_for(self, spec):
        K = spec.k_receivers
        if self.cardinalities is None:
            aux = (spec.x_size,) * (K - 1)
        else:
            aux = tuple(int(c) for c in self.cardinalities)
        if len(aux) != K - 1 or any(c < 1 for c in aux):
            raise ValidationError(f"need {K - 1} auxiliary cardinalities >= 1, got {self.cardinalities!r}")
        return (spec.x_size,) + aux

    def check(self):
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if not 0 < self.grid_step <= 1:
            raise ValidationError("grid_step must lie in (0, 1]")
        if abs(round(1 / self.grid_step) - 1 / self.grid_step) > 1e-6:
            raise ValidationError("grid_step must be 1/m for an integer m")
        if self.tolerance < 0 or self.line_points < 3 or self.threads < 1:
            raise ValidationError("tolerance >= 0, line_points >= 3 and threads >= 1 are required")
        if self.method not in ("ascent", "grid"):
            raise ValidationError(f"unknown method {self.method!r}")


def _check_weights(weights, K):
    w = np.asarray(weights, dtype=float)
    if w.shape != (K,) or np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
        raise ValidationError(f"weights must be {K} nonnegative numbers summing to 1, got {weights!r}")
    return w


def _structured_start(sizes):
    # near-deterministic links v -> v mod m, mixed with uniform so no coordinate is pinned
    K = len(sizes)
    top = np.full(sizes[-1], 1.0 / sizes[-1])
    links = []
    for k in range(K - 1, 0, -1):
        rows, cols = sizes[k], sizes[k - 1]
        l = np.full((rows, cols), 0.25 / cols)
        l[np.arange(rows), np.arange(rows) % cols] += 0.75
        links.append(l)
    return [top] + links


def _blocks(arrays):
    out = [(0, None)]
    for a in range(1, len(arrays)):
        out += [(a, r) for r in range(arrays[a].shape[0])]
    return out


def _ascend(objective, arrays, opts):
    value = objective(arrays)
    for _ in range(opts.max_sweeps):
        start = value
        for a, r in _blocks(arrays):
            row = arrays[a] if r is None else arrays[a][r]
            m = row.size
            for i in range(m):
                for j in range(i + 1, m):
                    s = row[i] + row[j]
                    if s <= 0:
                        continue
                    t0 = row[i]

                    def f(t):
                        row[i] = t
                        row[j] = s - t
                        return objective(arrays)

                    ts = np.linspace(0.0, s, opts.line_points)
                    vals = [f(t) for t in ts]
                    best = int(np.argmax(vals))
                    t_best, v_best = ts[best], vals[best]
                    h = s / (opts.line_points - 1)
                    lo, hi = max(0.0, t_best - h), min(s, t_best + h)
                    res = minimize_scalar(lambda t: -f(t), bounds=(lo, hi), method="bounded",
                                          options={"xatol": 1e-10 * max(s, 1e-300)})
                    if -res.fun > v_best:
                        t_best, v_best = float(res.x), float(-res.fun)
                    if v_best > value:
                        f(t_best)
                        value = v_best
                    else:
                        f(t0)
        if value - start <= opts.tolerance:
            break
    return value


def _simplex_lattice(m, steps):
    """All pmfs on ``m`` points with coordinates in multiples of ``1/steps``."""
    pts = []
    for combo in itertools.combinations(range(steps + m - 1), m - 1):
        parts = np.diff((-1,) + combo + (steps + m - 1,)) - 1
        pts.append(parts / steps)
    return pts


def _grid_search(objective, sizes, opts):
    steps = int(round(1 / opts.grid_step))
    K = len(sizes)
    block_sizes = [sizes[-1]] + [sizes[k - 1] for k in range(K - 1, 0, -1) for _ in range(sizes[k])]
    lattices = {m: _simplex_lattice(m, steps) for m in set(block_sizes)}
    total = np.prod([float(len(lattices[m])) for m in block_sizes])
    if total > opts.max_grid_points:
        raise ValidationError(f"grid mode would probe {total:.3g} points (cap {opts.max_grid_points})")
    best_val, best = -np.inf, None
    for combo in itertools.product(*(lattices[m] for m in block_sizes)):
        arrays = [combo[0]]
        pos = 1
        for k in range(K - 1, 0, -1):
            arrays.append(np.array(combo[pos:pos + sizes[k]]))
            pos += sizes[k]
        v = objective(arrays)
        if v > best_val:
            best_val, best = v, [a.copy() for a in arrays]
    return best_val, best


def _one_restart(evaluator, w, sizes, opts, index):
    if index == 0:
        arrays = _structured_start(sizes)
    else:
        gen = _rng.substream(opts.seed, _rng.OPTIMIZER, index)
        arrays = ChainDistribution.random(sizes, gen).arrays()

    def objective(a):
        return float(w @ evaluator.rates(a))

    value = _ascend(objective, arrays, opts)
    return value, arrays


def _tidy(arrays):
    # line searches leave rows summing to 1 up to round-off; clip and renormalise
    out = []
    for a in arrays:
        a = np.clip(a, 0.0, None)
        out.append(a / a.sum(axis=-1, keepdims=True))
    return out


def maximize_weighted_sum(spec, weights, options=None):
    """Best chain found for ``sum_k w_k R_k`` and its rate tuple.

    Deterministic for a fixed ``options.seed``: restart ``i`` always uses the
    same substream, so adding restarts can only raise the reported value.
    """
    opts = options or OptimizerOptions()
    opts.check()
    evaluator = RateEvaluator(spec)
    w = _check_weights(weights, spec.k_receivers)
    sizes = opts.sizes_for(spec)

    if opts.method == "grid":
        value, arrays = _grid_search(lambda a: float(w @ evaluator.rates(a)), sizes, opts)
        results = [(value, arrays)]
    else:
        run = lambda i: _one_restart(evaluator, w, sizes, opts, i)
        if opts.threads > 1:
            with ThreadPoolExecutor(opts.threads) as ex:
                results = list(ex.map(run, range(opts.restarts)))
        else:
            results = [run(i) for i in range(opts.restarts)]

    best_val, best = results[0]
    for v, a in results[1:]:
        if v > best_val:
            best_val, best = v, a
    chain = ChainDistribution.from_arrays(_tidy(best))
    rates = rate_tuple(chain, spec)
    return RegionSample(tuple(float(x) for x in w), rates, chain, float(w @ np.array(rates.rates)))


def trace_boundary(spec, weight_grid, options=None):
    """One :class:`RegionSample` per weight vector, in input order."""
    weight_grid = list(weight_grid)
    if not weight_grid:
        raise ValidationError("weight grid is empty")
    return [maximize_weighted_sum(spec, w, options) for w in weight_grid]


def simplex_weights(k, steps):
    """Weight vectors on the ``k``-simplex lattice with spacing ``1/steps``."""
    if k == 1:
        return [(1.0,)]
    return [tuple(float(x) for x in p) for p in _simplex_lattice(k, steps)]
