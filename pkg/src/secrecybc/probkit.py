"""Dense discrete distributions and information measures (base 2).

A :class:`Distribution` is an immutable table over the product of a few
small, 0-based integer alphabets, one axis per labelled variable.  All
measures are in bits, with the convention ``0 log 0 = 0``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InconsistencyError, InvalidDistribution, LabelError

MASS_TOL = 1e-9
MI_FLOOR = -1e-9


@dataclass(frozen=True, eq=False)
class Distribution:
    """Joint pmf over labelled discrete variables.

    Parameters
    ----------
    labels : sequence of str
        Variable names, one per axis of ``mass``.
    mass : array_like
        Nonnegative table whose total is 1 within ``1e-9``.
    """

    labels: tuple
    mass: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        mass = np.array(self.mass, dtype=float)
        if len(set(labels)) != len(labels):
            raise LabelError(f"repeated labels in {labels}")
        if mass.ndim != len(labels):
            raise InvalidDistribution(
                f"table has {mass.ndim} axes but {len(labels)} labels were given"
            )
        if not np.all(np.isfinite(mass)):
            raise InvalidDistribution("table contains non-finite entries")
        if np.any(mass < 0):
            raise InvalidDistribution(f"negative mass {mass.min():.3g}")
        total = mass.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidDistribution(f"total mass {total!r} is not 1")
        mass.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "mass", mass)

    @property
    def cardinalities(self):
        return self.mass.shape

    def axis(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown variable {label!r}; have {self.labels}") from None

    def __eq__(self, other):
        if not isinstance(other, Distribution):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.mass, other.mass)

    __hash__ = None


def _as_labels(v):
    if isinstance(v, str):
        return (v,)
    return tuple(v)


def _plogp_sum(p):
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > 0]
    return -float(np.dot(nz, np.log2(nz)))


def entropy(d):
    """Joint entropy of all variables of ``d`` in bits."""
    return max(_plogp_sum(d.mass), 0.0)


def marginal(d, keep):
    """Sum ``d`` down to the variables in ``keep`` (original axis order kept)."""
    keep = set(_as_labels(keep))
    for name in keep:
        d.axis(name)
    drop = tuple(i for i, name in enumerate(d.labels) if name not in keep)
    labels = tuple(name for name in d.labels if name in keep)
    mass = d.mass.sum(axis=drop) if drop else d.mass
    return Distribution(labels, mass)


def _joint_entropy(d, names):
    if not names:
        return 0.0
    return entropy(marginal(d, names))


def _clamp(value, what):
    if value < MI_FLOOR:
        raise InconsistencyError(f"{what} = {value!r} bits is negative beyond float noise")
    return max(value, 0.0)


def _check_disjoint(d, *groups):
    seen = set()
    for group in groups:
        for name in group:
            d.axis(name)
            if name in seen:
                raise LabelError(f"variable {name!r} appears in more than one argument")
            seen.add(name)


def mutual_information(d, a, b):
    """I(A;B) in bits; ``a`` and ``b`` are labels or label groups."""
    a, b = _as_labels(a), _as_labels(b)
    _check_disjoint(d, a, b)
    value = _joint_entropy(d, a) + _joint_entropy(d, b) - _joint_entropy(d, a + b)
    return _clamp(value, f"I({a};{b})")


def conditional_mutual_information(d, a, b, c=()):
    """I(A;B|C) in bits.

    Evaluated as ``H(A,C) + H(B,C) - H(A,B,C) - H(C)``, which equals
    ``sum_c p(c) I(A;B|C=c)``.  An empty ``c`` gives plain mutual information.
    """
    a, b, c = _as_labels(a), _as_labels(b), _as_labels(c)
    _check_disjoint(d, a, b, c)
    value = (
        _joint_entropy(d, a + c)
        + _joint_entropy(d, b + c)
        - _joint_entropy(d, a + b + c)
        - _joint_entropy(d, c)
    )
    return _clamp(value, f"I({a};{b}|{c})")


def binary_entropy(p):
    """H2(p) in bits, vectorised over ``p``."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    h = np.where((p <= 0) | (p >= 1), 0.0, h)
    return float(h) if h.ndim == 0 else h


def row_entropies(table):
    """Entropy in bits of every row of a 2-D stochastic table."""
    table = np.asarray(table, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(table > 0, np.log2(np.where(table > 0, table, 1.0)), 0.0)
    return -(table * logs).sum(axis=-1)


def channel_information(inputs, channel):
    """I(input; output) for each row of ``inputs`` through ``channel``.

    ``inputs`` has shape ``(..., m)`` (each row a pmf on the channel input),
    ``channel`` shape ``(m, r)``.  Unclamped: callers decide about noise.
    """
    inputs = np.asarray(inputs, dtype=float)
    out = inputs @ channel
    return row_entropies(out) - inputs @ row_entropies(channel)
