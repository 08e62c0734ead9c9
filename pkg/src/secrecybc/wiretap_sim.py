"""Finite-blocklength superposition coding with random code partitioning.

Layer ``k`` of the code has ``N_k = L_k * L'_k`` codewords per ancestor
combination: ``L_k`` message subcodes of ``L'_k`` randomizing codewords
each.  A full codeword index is ``w'' = w * L'_k + w'`` (row-major split).
Messages, secret indices and codeword indices are 0-based.

Codewords of layer ``k`` are stored in an array of shape
``(N_K, N_{K-1}, ..., N_k, n)``; the leading axes are the index path from
the top layer down.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .channel_model import marginal_channel
from .errors import BudgetExceeded, ValidationError

DEFAULT_BUDGET = 1 << 24
LOG_FLOOR = -1e30
TIE_TOL = 1e-9
_CHUNK = 1 << 22


def code_size(n, rate):
    """``ceil(2**(n*rate))`` with a guard against round-off just above an integer."""
    return max(1, math.ceil(2.0 ** (n * rate) - 1e-9))


@dataclass(frozen=True)
class CodeParams:
    """Blocklength, rates and seed of one random code ensemble."""

    n: int
    rates: tuple
    randomization: tuple
    seed: int = 0
    budget_cap: int = DEFAULT_BUDGET

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        rand = tuple(float(r) for r in self.randomization)
        if self.n < 1:
            raise ValidationError(f"blocklength must be >= 1, got {self.n}")
        if len(rates) != len(rand) or not rates:
            raise ValidationError("rates and randomization rates must have the same nonzero length")
        if any(r < 0 for r in rates + rand):
            raise ValidationError("rates must be nonnegative")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "randomization", rand)

    @property
    def k_layers(self):
        return len(self.rates)

    @property
    def message_counts(self):
        return tuple(code_size(self.n, r) for r in self.rates)

    @property
    def subcode_sizes(self):
        return tuple(code_size(self.n, r) for r in self.randomization)

    @property
    def code_sizes(self):
        return tuple(l * lp for l, lp in zip(self.message_counts, self.subcode_sizes))

    def layer_counts(self):
        """Number of stored codewords in each layer (all ancestor combinations)."""
        N = self.code_sizes
        return tuple(math.prod(N[k - 1:]) for k in range(1, self.k_layers + 1))

    def stored_symbols(self):
        return sum(self.layer_counts()) * self.n

    def check_budget(self):
        total = self.stored_symbols()
        if total > self.budget_cap:
            counts = self.layer_counts()
            worst = int(np.argmax(counts)) + 1
            raise BudgetExceeded(
                f"codebook needs {total} stored symbols (cap {self.budget_cap}); "
                f"layer {worst} alone holds N_{worst}*n = {counts[worst - 1]}*{self.n} = "
                f"{counts[worst - 1] * self.n}"
            )


def _dtype_for(size):
    return np.uint8 if size <= 256 else np.int32


@dataclass(frozen=True, eq=False)
class CodebookHierarchy:
    params: CodeParams
    chain: object
    replicate: int
    words: tuple

    @property
    def n(self):
        return self.params.n

    @property
    def k_layers(self):
        return self.params.k_layers

    def split(self, k, index):
        """``(w_k, w'_k)`` of a layer-``k`` codeword index."""
        return divmod(int(index), self.params.subcode_sizes[k - 1])

    def subcode(self, k, message):
        lp = self.params.subcode_sizes[k - 1]
        return range(message * lp, (message + 1) * lp)

    def stacks(self, k):
        """Index paths of all layer-``k`` codewords: shape ``(C_k, K-k+1)``.

        Column ``j`` holds the codeword index of layer ``k + j``; rows follow
        the row-major order of :meth:`flat_words`.
        """
        shape = self.params.code_sizes[k - 1:][::-1]
        grid = np.indices(shape).reshape(len(shape), -1).T
        return grid[:, ::-1]

    def stack_messages(self, k):
        lp = np.array(self.params.subcode_sizes[k - 1:])
        return self.stacks(k) // lp

    def flat_words(self, k):
        return self.words[k - 1].reshape(-1, self.n)

    def ancestor_words(self, k, j):
        """Layer-``j`` codeword (``j >= k``) under every layer-``k`` stack, ``(C_k, n)``."""
        st = self.stacks(k)
        idx = tuple(st[:, jj - k] for jj in range(self.k_layers, j - 1, -1))
        return self.words[j - 1][idx]

    def codeword(self, k, path):
        """Layer-``k`` codeword at ``path`` (indices for layers ``k..K``)."""
        path = tuple(int(p) for p in path)
        return self.words[k - 1][path[::-1]]


def generate_codebooks(chain, params, replicate=0):
    """Draw the nested random codebooks for one ensemble replicate.

    Layer ``K`` is i.i.d. from ``p(u_K)``; each lower layer is drawn
    symbol-by-symbol from the chain conditional given its parent codeword.
    """
    if chain.k_layers != params.k_layers:
        raise ValidationError(f"chain has {chain.k_layers} layers, code has {params.k_layers}")
    params.check_budget()
    K, n, N = params.k_layers, params.n, params.code_sizes
    sizes = chain.sizes
    words = [None] * K
    gen = _rng.substream(params.seed, _rng.CODEBOOK, n, replicate, K)
    top = _rng.sample_rows(gen, chain.top[None, :], np.zeros((N[K - 1], n), dtype=np.int64))
    words[K - 1] = top.astype(_dtype_for(sizes[K - 1]))
    for k in range(K - 1, 0, -1):
        gen = _rng.substream(params.seed, _rng.CODEBOOK, n, replicate, k)
        parent = words[k]
        rows = np.broadcast_to(parent[..., None, :], parent.shape[:-1] + (N[k - 1], n))
        words[k - 1] = _rng.sample_rows(gen, chain.conditional(k), rows).astype(_dtype_for(sizes[k - 1]))
    for w in words:
        w.setflags(write=False)
    return CodebookHierarchy(params, chain, int(replicate), tuple(words))


@dataclass(frozen=True, eq=False)
class TransmissionRecord:
    messages: tuple
    secrets: tuple
    x: np.ndarray
    y: tuple = None
    z: np.ndarray = None


def _check_messages(book, messages):
    L = book.params.message_counts
    messages = np.asarray(messages)
    if messages.shape[-1] != len(L):
        raise ValidationError(f"need {len(L)} messages, got {messages.shape[-1]}")
    if np.any(messages < 0) or np.any(messages >= np.array(L)):
        raise ValidationError(f"messages must lie in 0..L_k-1 with L = {L}")
    return messages


def encode_batch(book, messages, gen):
    """Vectorised encoder: ``messages`` is ``(T, K)``; returns ``(secrets, paths, x)``.

    Secret indices are drawn uniformly, one column per layer from the top
    layer down.
    """
    messages = _check_messages(book, np.atleast_2d(messages))
    Lp = book.params.subcode_sizes
    K = book.k_layers
    secrets = np.empty_like(messages)
    for k in range(K, 0, -1):
        secrets[:, k - 1] = gen.integers(Lp[k - 1], size=messages.shape[0])
    paths = messages * np.array(Lp) + secrets
    x = book.words[0][tuple(paths[:, k - 1] for k in range(K, 0, -1))]
    return secrets, paths, x


def encode(book, messages, gen):
    """Encode one message tuple (``messages[k-1]`` for receiver ``k``)."""
    secrets, _, x = encode_batch(book, [messages], gen)
    return TransmissionRecord(tuple(int(m) for m in messages), tuple(int(s) for s in secrets[0]), x[0])


def transmit_batch(x, spec, gen):
    """Pass codewords (any leading shape) through the cascade; returns ``(ys, z)``."""
    x = np.asarray(x)
    if np.any(x < 0) or np.any(x >= spec.x_size):
        raise ValidationError("channel input outside the X alphabet")
    ys = [_rng.sample_rows(gen, spec.base.rows, x)]
    for kern in spec.kernels[:-1]:
        ys.append(_rng.sample_rows(gen, kern.rows, ys[-1]))
    z = _rng.sample_rows(gen, spec.kernels[-1].rows, ys[-1])
    return ys, z


def transmit(record, spec, gen):
    ys, z = transmit_batch(record.x, spec, gen)
    return TransmissionRecord(record.messages, record.secrets, record.x, tuple(ys), z)


def decoding_law(book, spec, k, target=None):
    """Single-letter ``p(observation | v_k)`` implied by the chain and the channel."""
    target = k if target is None else target
    return book.chain.to_layer_channel(k) @ marginal_channel(spec, target).rows


def log_table(table):
    with np.errstate(divide="ignore"):
        out = np.log(table)
    return np.where(table > 0, out, LOG_FLOOR)


def log_likelihoods(candidates, obs, logw):
    """``out[t, c] = sum_i logw[candidates[c, i], obs[t, i]]``."""
    obs = np.atleast_2d(obs)
    out = np.zeros((obs.shape[0], candidates.shape[0]))
    for a in range(logw.shape[1]):
        out += (obs == a).astype(float) @ logw[candidates, a].T
    return out


def _unique_message(scores, eligible, msgs):
    """Row-wise decision: the top-scoring eligible stack, or -1 rows on ambiguity."""
    masked = np.where(eligible, scores, -np.inf)
    best = np.argmax(masked, axis=1)
    top = masked[np.arange(len(best)), best]
    tied = eligible & (masked >= (top - TIE_TOL * np.maximum(1.0, np.abs(top)))[:, None])
    clash = (msgs[None, :, :] != msgs[best][:, None, :]).any(axis=-1)
    fail = (tied & clash).any(axis=1) | ~eligible.any(axis=1)
    out = msgs[best].copy()
    out[fail] = -1
    return out


def _row_chunks(n_rows, n_cols):
    step = max(1, _CHUNK // max(1, n_cols))
    for lo in range(0, n_rows, step):
        yield slice(lo, min(n_rows, lo + step))


def decode_ml_batch(ys, book, spec, k):
    """Maximum-likelihood stack decoding at receiver ``k``.

    Scores every layer-``k`` codeword stack by the product likelihood of
    ``y_k`` under ``p(y_k | v_k)``.  Returns ``(T, K-k+1)`` message estimates
    ``(w_k, ..., w_K)``; rows are -1 where the best-scoring stacks disagree
    on the messages.
    """
    ys = np.atleast_2d(ys)
    logw = log_table(decoding_law(book, spec, k))
    cands = book.flat_words(k).astype(np.int64)
    msgs = book.stack_messages(k)
    out = np.empty((ys.shape[0], msgs.shape[1]), dtype=np.int64)
    for sl in _row_chunks(ys.shape[0], cands.shape[0]):
        scores = log_likelihoods(cands, ys[sl], logw)
        out[sl] = _unique_message(scores, np.ones_like(scores, dtype=bool), msgs)
    return out


def decode_ml(y, book, spec, k):
    """Decode one received sequence; ``None`` signals decode failure."""
    row = decode_ml_batch(np.asarray(y)[None, :], book, spec, k)[0]
    return None if row[0] < 0 else tuple(int(v) for v in row)


def _subsets(m):
    for r in range(1, m + 1):
        yield from itertools.combinations(range(m), r)


def typical_law(book, spec, k):
    """Joint single-letter pmf over ``(V_K, ..., V_k, Y_k)``."""
    chain = book.chain
    K = book.k_layers
    mass = chain.top
    for j in range(K - 1, k - 1, -1):
        mass = mass[..., :, None] * chain.conditional(j)
    return mass[..., :, None] * decoding_law(book, spec, k)


def decode_typical_batch(ys, book, spec, k, eps):
    """Joint-typicality decoding at receiver ``k``.

    A stack is typical with ``y_k`` when, for every nonempty subset ``S`` of
    ``(V_K, ..., V_k, Y_k)``, the empirical ``-(1/n) log2 p(s)`` is strictly
    within ``eps`` of ``H(S)``.  Decoding fails unless all typical stacks
    carry the same messages.
    """
    if eps < 0:
        raise ValidationError("eps must be nonnegative")
    ys = np.atleast_2d(ys)
    n, K = book.n, book.k_layers
    law = typical_law(book, spec, k)
    m = law.ndim
    y_axis = m - 1
    layer_words = {axis: book.ancestor_words(k, K - axis).astype(np.int64) for axis in range(m - 1)}
    msgs = book.stack_messages(k)
    C = msgs.shape[0]
    out = np.empty((ys.shape[0], msgs.shape[1]), dtype=np.int64)
    subsets = list(_subsets(m))
    tables = {}
    for s in subsets:
        drop = tuple(a for a in range(m) if a not in s)
        p = law.sum(axis=drop) if drop else law
        nz = p[p > 0]
        tables[s] = (log_table(p) / np.log(2), -float(np.dot(nz, np.log2(nz))))
    for sl in _row_chunks(ys.shape[0], C):
        y = ys[sl]
        ok = np.ones((y.shape[0], C), dtype=bool)
        for s in subsets:
            logp, h = tables[s]
            vs = [a for a in s if a != y_axis]
            if y_axis not in s:
                emp = -logp[tuple(layer_words[a] for a in vs)].sum(axis=1) / n
                ok &= (np.abs(emp - h) < eps)[None, :]
            elif not vs:
                emp = -logp[y].sum(axis=1) / n
                ok &= (np.abs(emp - h) < eps)[:, None]
            else:
                flat = logp.reshape(-1, logp.shape[-1]) if len(vs) > 1 else logp
                if len(vs) > 1:
                    cand = np.ravel_multi_index(tuple(layer_words[a] for a in vs), logp.shape[:-1])
                else:
                    cand = layer_words[vs[0]]
                emp = -log_likelihoods(cand, y, flat) / n
                ok &= np.abs(emp - h) < eps
        out[sl] = _unique_message(np.zeros(ok.shape), ok, msgs)
    return out


def decode_typical(y, book, spec, k, eps):
    row = decode_typical_batch(np.asarray(y)[None, :], book, spec, k, eps)[0]
    return None if row[0] < 0 else tuple(int(v) for v in row)


@dataclass(frozen=True, eq=False)
class SimResult:
    """Random-coding error statistics.

    ``per_codebook[m, k-1]`` is receiver ``k``'s error rate on replicate
    ``m``; ``errors`` are pooled counts over ``trials * codebooks`` draws.
    """

    errors: tuple
    trials: int
    codebooks: int
    per_codebook: np.ndarray

    @property
    def rates(self):
        total = self.trials * self.codebooks
        return tuple(e / total for e in self.errors)

    @property
    def half_widths(self):
        """95% normal-approximation half-widths of the pooled rates."""
        total = self.trials * self.codebooks
        return tuple(1.96 * math.sqrt(p * (1 - p) / total) for p in self.rates)

    def medians(self):
        return tuple(float(v) for v in np.median(self.per_codebook, axis=0))


def run_replicate(spec, chain, params, trials, replicate, decoder="ml", eps=None):
    """Error rates of one codebook replicate at every receiver."""
    book = generate_codebooks(chain, params, replicate)
    K = params.k_layers
    msg_gen = _rng.substream(params.seed, _rng.TRIALS, params.n, replicate, 0)
    sec_gen = _rng.substream(params.seed, _rng.TRIALS, params.n, replicate, 1)
    ch_gen = _rng.substream(params.seed, _rng.TRIALS, params.n, replicate, 2)
    L = params.message_counts
    W = np.stack([msg_gen.integers(L[k], size=trials) for k in range(K)], axis=1)
    _, _, x = encode_batch(book, W, sec_gen)
    ys, _ = transmit_batch(x, spec, ch_gen)
    errs = np.empty(K, dtype=np.int64)
    for k in range(1, K + 1):
        if decoder == "ml":
            est = decode_ml_batch(ys[k - 1], book, spec, k)
        elif decoder == "typical":
            est = decode_typical_batch(ys[k - 1], book, spec, k, eps)
        else:
            raise ValidationError(f"unknown decoder {decoder!r}")
        errs[k - 1] = int(np.count_nonzero((est[:, 0] < 0) | (est[:, 0] != W[:, k - 1])))
    return errs


def estimate_error_prob(spec, chain, params, trials, codebooks, decoder="ml", eps=None, threads=1):
    """Random-coding average error probability per receiver.

    Each of ``codebooks`` replicates is drawn from its own substream and
    decoded on ``trials`` uniform message draws.  Results do not depend on
    ``threads``.
    """
    if trials < 1 or codebooks < 1:
        raise ValidationError("trials and codebooks must be >= 1")
    if decoder == "typical" and (eps is None or eps < 0):
        raise ValidationError("typicality decoding needs eps >= 0")
    spec.require_valid()
    params.check_budget()
    run = lambda m: run_replicate(spec, chain, params, trials, m, decoder, eps)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            counts = list(ex.map(run, range(codebooks)))
    else:
        counts = [run(m) for m in range(codebooks)]
    counts = np.array(counts)
    return SimResult(tuple(int(c) for c in counts.sum(axis=0)), trials, codebooks, counts / trials)
