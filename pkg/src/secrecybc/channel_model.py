"""Physically degraded K-receiver broadcast channels with a wiretapper.

A :class:`DegradedBcSpec` is a base channel ``X -> Y1`` followed by ``K``
kernels ``Y1 -> Y2 -> ... -> YK -> Z``.  Building the channel by cascade
makes the degradation chain hold by construction.

Receivers are numbered from 1 (strongest) to K (weakest); the wiretapper is
addressed with the string ``"z"`` (or :data:`WIRETAPPER`).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

ROW_TOL = 1e-9
WIRETAPPER = "z"


@dataclass(frozen=True, eq=False)
class DiscreteChannel:
    """Transition table ``rows[x, y] = p(y | x)``.

    Construction only insists on a finite 2-D table; stochasticity is checked
    by :func:`validate` (or :meth:`problems`) so that malformed channels can
    still be reported on.
    """

    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or 0 in rows.shape:
            raise ValidationError(f"channel table must be a non-empty 2-D array, got shape {rows.shape}")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def input_size(self):
        return self.rows.shape[0]

    @property
    def output_size(self):
        return self.rows.shape[1]

    def problems(self, where="channel"):
        out = []
        if not np.all(np.isfinite(self.rows)):
            out.append(f"{where}: non-finite entries")
            return out
        for i, row in enumerate(self.rows):
            if np.any(row < 0):
                out.append(f"{where} row {i}: negative entry {row.min():.9g}")
            s = row.sum()
            if abs(s - 1.0) > ROW_TOL:
                out.append(f"{where} row {i}: sums to {s:.9g}, expected 1")
        return out

    def __eq__(self, other):
        if not isinstance(other, DiscreteChannel):
            return NotImplemented
        return np.array_equal(self.rows, other.rows)

    __hash__ = None


def identity(m):
    return DiscreteChannel(np.eye(m))


def bsc(p):
    """Binary symmetric channel with crossover ``p``."""
    return DiscreteChannel([[1 - p, p], [p, 1 - p]])


def constant(m, out):
    """Channel whose every row is the pmf ``out`` (output independent of input)."""
    return DiscreteChannel(np.tile(np.asarray(out, dtype=float), (m, 1)))


def compose(a, b):
    """Cascade ``a`` then ``b``; the result's table is the matrix product."""
    if a.output_size != b.input_size:
        raise ValidationError(
            f"cannot compose: first channel has {a.output_size} outputs, "
            f"second has {b.input_size} inputs"
        )
    return DiscreteChannel(a.rows @ b.rows)


@dataclass(frozen=True, eq=False)
class DegradedBcSpec:
    """Base channel plus degradation kernels.

    ``kernels[k-1]`` maps ``Y_k`` to ``Y_{k+1}`` for ``k < K`` and the last
    kernel maps ``Y_K`` to the wiretapper output ``Z``.
    """

    k_receivers: int
    base: DiscreteChannel
    kernels: tuple
    name: str = ""
    description: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(self.kernels))

    @classmethod
    def cascade(cls, base, kernels, **kw):
        """Build from a base and kernels, inferring K; raise if invalid."""
        spec = cls(len(kernels), _as_channel(base), tuple(_as_channel(k) for k in kernels), **kw)
        spec.require_valid()
        return spec

    @property
    def x_size(self):
        return self.base.input_size

    @property
    def y_sizes(self):
        sizes = [self.base.output_size]
        sizes += [k.output_size for k in self.kernels[: self.k_receivers - 1]]
        return tuple(sizes)

    @property
    def z_size(self):
        return self.kernels[-1].output_size

    def require_valid(self):
        diags = validate(self)
        if diags:
            raise ValidationError("invalid channel spec: " + "; ".join(diags), diags)
        return self

    def __eq__(self, other):
        if not isinstance(other, DegradedBcSpec):
            return NotImplemented
        return (
            self.k_receivers == other.k_receivers
            and self.base == other.base
            and len(self.kernels) == len(other.kernels)
            and all(a == b for a, b in zip(self.kernels, other.kernels))
            and self.name == other.name
            and self.description == other.description
        )

    __hash__ = None


def _as_channel(c):
    return c if isinstance(c, DiscreteChannel) else DiscreteChannel(c)


def _stage_name(i, k):
    # stage 0 is the base; stage i >= 1 is kernel i-1
    if i == 0:
        return "base (X->Y1)"
    j = i - 1
    target = f"Y{i + 1}" if i < k else "Z"
    return f"kernel {j} (Y{i}->{target})"


def validate(spec):
    """Return a list of human-readable problems; empty means well formed."""
    diags = []
    k = spec.k_receivers
    if not isinstance(k, (int, np.integer)) or k < 1:
        diags.append(f"K must be a positive integer, got {k!r}")
    elif len(spec.kernels) != k:
        diags.append(f"expected {k} kernels (last maps Y{k}->Z), got {len(spec.kernels)}")
    kk = len(spec.kernels)
    stages = (spec.base,) + spec.kernels
    for i, stage in enumerate(stages):
        diags.extend(stage.problems(_stage_name(i, kk)))
    for i in range(len(stages) - 1):
        a, b = stages[i], stages[i + 1]
        if a.output_size != b.input_size:
            diags.append(
                f"dimension mismatch: {_stage_name(i, kk)} has {a.output_size} outputs "
                f"but {_stage_name(i + 1, kk)} has {b.input_size} inputs"
            )
    return diags


def marginal_channel(spec, target):
    """Channel from X to receiver ``target`` (1..K) or to the wiretapper.

    Receiver ``k`` sees the base composed with the first ``k-1`` kernels; the
    wiretapper sees all ``K`` kernels.
    """
    k = spec.k_receivers
    if target == WIRETAPPER:
        depth = k
    elif isinstance(target, (int, np.integer)) and not isinstance(target, bool) and 1 <= target <= k:
        depth = int(target) - 1
    else:
        raise ValueError(f"target must be 1..{k} or {WIRETAPPER!r}, got {target!r}")
    cached = spec._cache.get(depth)
    if cached is not None:
        return cached
    ch = spec.base
    for kern in spec.kernels[:depth]:
        ch = compose(ch, kern)
    spec._cache[depth] = ch
    return ch


def targets(spec):
    """All observation targets in degradation order: 1..K then the wiretapper."""
    return list(range(1, spec.k_receivers + 1)) + [WIRETAPPER]
