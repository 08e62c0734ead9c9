"""Equivocation of the wiretapper, computed exactly or by Monte Carlo.

``R_e(S) = H(W_S | Z^n) / n`` for a single receiver, an adjacent pair
``(k, k+1)`` or the full set.  Posteriors come from exact marginalisation
over every codeword index path under uniform messages and secret indices;
likelihoods are accumulated in the log domain and max-shifted per ``z``.

Reference message rates are ``log2(L_k) / n``: with rounded code sizes the
messages carry exactly ``log2 L_k`` bits.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .channel_model import marginal_channel
from .errors import BudgetExceeded, ValidationError
from .wiretap_sim import (
    DEFAULT_BUDGET,
    TIE_TOL,
    _CHUNK,
    decoding_law,
    encode_batch,
    log_likelihoods,
    log_table,
    transmit_batch,
)


def normalize_subset(subset, k_receivers):
    """Sorted receiver tuple; only singles, adjacent pairs and the full set pass."""
    if isinstance(subset, (int, np.integer)):
        subset = (int(subset),)
    s = tuple(sorted(int(k) for k in subset))
    K = k_receivers
    if not s or len(set(s)) != len(s) or s[0] < 1 or s[-1] > K:
        raise ValidationError(f"receiver subset {subset!r} is not a set of receivers in 1..{K}")
    if len(s) == 1 or s == tuple(range(1, K + 1)):
        return s
    if len(s) == 2 and s[1] == s[0] + 1:
        return s
    raise ValidationError(
        f"subset {s} unsupported: only single receivers, adjacent pairs and the full set have equivocation guarantees"
    )


def message_rates(params):
    """``log2(L_k) / n`` for every layer."""
    return tuple(math.log2(l) / params.n for l in params.message_counts)


def _paths(book):
    """All full index paths: x codewords ``(P, n)`` and messages ``(P, K)``."""
    x = book.flat_words(1).astype(np.int64)
    return x, book.stack_messages(1)


def _group_ids(msgs, subset, L):
    gid = np.zeros(msgs.shape[0], dtype=np.int64)
    for k in subset:
        gid = gid * L[k - 1] + msgs[:, k - 1]
    return gid, math.prod(L[k - 1] for k in subset)


def _posterior_entropies(z, x_words, onehot, logw):
    """``(H(W_S | z) in bits, log p(z) + log P)`` for each row of ``z``."""
    ll = log_likelihoods(x_words, z, logw)
    top = ll.max(axis=1, keepdims=True)
    w = np.exp(ll - top)
    g = w @ onehot
    tot = g.sum(axis=1, keepdims=True)
    q = g / tot
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(q > 0, q * np.log2(q), 0.0).sum(axis=1)
    return h, top[:, 0] + np.log(tot[:, 0])


def _setup(book, spec, subset):
    S = normalize_subset(subset, book.k_layers)
    x_words, msgs = _paths(book)
    gid, G = _group_ids(msgs, S, book.params.message_counts)
    onehot = np.zeros((x_words.shape[0], G))
    onehot[np.arange(len(gid)), gid] = 1.0
    logw = log_table(marginal_channel(spec, "z").rows)
    return S, x_words, onehot, logw


def exact_equivocation(book, spec, subset, budget_cap=DEFAULT_BUDGET):
    """``H(W_S | Z^n) / n`` by enumerating every ``z`` and every index path."""
    S, x_words, onehot, logw = _setup(book, spec, subset)
    n, P = book.n, x_words.shape[0]
    nz = spec.z_size
    work = nz ** n * P
    if work > budget_cap:
        raise BudgetExceeded(f"exact equivocation needs |Z|^n * paths = {nz}^{n} * {P} = {work} (cap {budget_cap})")
    total = 0.0
    rows = nz ** n
    step = max(1, _CHUNK // max(P, 1))
    for lo in range(0, rows, step):
        idx = np.arange(lo, min(rows, lo + step))
        z = np.stack(np.unravel_index(idx, (nz,) * n), axis=1)
        h, logpz = _posterior_entropies(z, x_words, onehot, logw)
        # impossible z carry weight exp(-huge) = 0
        total += float(np.dot(np.exp(logpz - math.log(P)), h))
    return total / n


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    samples: int


def mc_equivocation(book, spec, subset, samples, gen):
    """Monte-Carlo ``H(W_S | Z^n) / n``: exact posterior entropy at sampled ``z``.

    ``z`` is drawn by encoding uniform messages and passing the codeword
    through the full cascade.  ``stderr`` is ``inf`` for a single sample.
    """
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    S, x_words, onehot, logw = _setup(book, spec, subset)
    L = book.params.message_counts
    W = np.stack([gen.integers(l, size=samples) for l in L], axis=1)
    _, _, x = encode_batch(book, W, gen)
    _, z = transmit_batch(x, spec, gen)
    hs = []
    step = max(1, _CHUNK // max(x_words.shape[0], 1))
    for lo in range(0, samples, step):
        h, _ = _posterior_entropies(z[lo:lo + step], x_words, onehot, logw)
        hs.append(h)
    h = np.concatenate(hs) / book.n
    se = float(h.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return Estimate(float(h.mean()), se, samples)


@dataclass(frozen=True, eq=False)
class WiretapDecodeStats:
    layer: int
    mean_error: float
    subcode_errors: np.ndarray
    weights: np.ndarray
    trials: int


def wiretapper_subcode_error(book, spec, k, trials, gen):
    """Genie-aided wiretapper decoding of the secret index ``w'_k``.

    The wiretapper knows ``w_k`` and every ancestor codeword and picks the
    most likely codeword of subcode ``w_k`` under ``p(z | v_k)``, breaking
    ties towards the lowest index.  ``subcode_errors[i]`` is the error rate
    among trials with ``w_k = i`` (NaN if none); the weights are the uniform
    message probabilities ``1 / L_k``.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    K = book.k_layers
    if not 1 <= k <= K:
        raise ValidationError(f"layer must be in 1..{K}")
    L, Lp = book.params.message_counts, book.params.subcode_sizes
    W = np.stack([gen.integers(l, size=trials) for l in L], axis=1)
    secrets, paths, x = encode_batch(book, W, gen)
    _, z = transmit_batch(x, spec, gen)
    logw = log_table(decoding_law(book, spec, k, target="z"))
    prefix = tuple(paths[:, j - 1][:, None] for j in range(K, k, -1))
    own = W[:, k - 1][:, None] * Lp[k - 1] + np.arange(Lp[k - 1])[None, :]
    cands = book.words[k - 1][prefix + (own,)].astype(np.int64)
    scores = logw[cands, z[:, None, :]].sum(axis=-1)
    top = scores.max(axis=1, keepdims=True)
    # lowest index among the scores tied with the best up to round-off
    pick = np.argmax(scores >= top - TIE_TOL * np.maximum(1.0, np.abs(top)), axis=1)
    wrong = pick != secrets[:, k - 1]
    per = np.full(L[k - 1], np.nan)
    for i in range(L[k - 1]):
        sel = W[:, k - 1] == i
        if sel.any():
            per[i] = wrong[sel].mean()
    return WiretapDecodeStats(k, float(wrong.mean()), per, np.full(L[k - 1], 1.0 / L[k - 1]), trials)


@dataclass(frozen=True)
class LeakageEntry:
    subset: tuple
    equivocation: float
    reference: float
    gap: float
    stderr: float
    passed: bool


@dataclass(frozen=True, eq=False)
class EquivocationReport:
    entries: tuple
    method: str
    samples: int = None
    tolerance: float = 0.0
    _by_subset: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_subset.update({e.subset: e for e in self.entries})

    def __getitem__(self, subset):
        return self._by_subset[tuple(subset)]

    @property
    def per_receiver(self):
        return {e.subset[0]: e.equivocation for e in self.entries if len(e.subset) == 1}

    @property
    def pairs(self):
        return {e.subset: e.equivocation for e in self.entries if len(e.subset) == 2}

    @property
    def passed(self):
        return all(e.passed for e in self.entries)


def leakage_report(rates, equivocations, tolerance=0.0, method="exact", samples=None):
    """Leakage gaps ``max(0, sum_{k in S} R_k - R_e(S))`` flagged against ``tolerance``.

    ``equivocations`` maps receiver subsets to a float or an :class:`Estimate`.
    """
    rates = tuple(rates)
    K = len(rates)
    entries = []
    for subset, value in equivocations.items():
        S = normalize_subset(subset, K)
        if isinstance(value, Estimate):
            eq, se = value.value, value.stderr
        else:
            eq, se = float(value), 0.0
        ref = sum(rates[k - 1] for k in S)
        gap = max(0.0, ref - eq)
        entries.append(LeakageEntry(S, eq, ref, gap, se, gap <= tolerance))
    return EquivocationReport(tuple(entries), method, samples, tolerance)


def all_subsets(k_receivers):
    """Every supported subset: singles, adjacent pairs, then the full set."""
    K = k_receivers
    out = [(k,) for k in range(1, K + 1)] + [(k, k + 1) for k in range(1, K)]
    full = tuple(range(1, K + 1))
    if full not in out:
        out.append(full)
    return out


def equivocation_upper_bound(params, subset):
    """``H(W_S) / n`` for uniform messages."""
    S = normalize_subset(subset, params.k_layers)
    return sum(math.log2(params.message_counts[k - 1]) for k in S) / params.n

