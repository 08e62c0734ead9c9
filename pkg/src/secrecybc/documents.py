"""JSON channel-spec and experiment documents.

Channel spec::

    {
      "name": "bsc-cascade",
      "description": "optional",
      "K": 2,
      "alphabets": {"X": 2, "Y": [2, 2], "Z": 2},
      "base": [[0.95, 0.05], [0.05, 0.95]],
      "kernels": [<Y1->Y2 table>, <Y2->Z table>]
    }

Numbers are read as written (as decimals) and never renormalised.
``alphabets`` is optional; when present it is checked against the tables.
"""

import json
from decimal import Decimal

from .channel_model import DegradedBcSpec, DiscreteChannel, validate
from .errors import DocumentError
from .region import ChainDistribution, OptimizerOptions

MODES = ("region", "simulate", "equivocation")


def _loads(text, what):
    try:
        return json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{what}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def read_text(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc.strerror}") from None


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, Decimal)):
        raise DocumentError(f"{where}: expected a number, got {json.dumps(v, default=str)}")
    return float(v)


def _int(v, where, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise DocumentError(f"{where}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise DocumentError(f"{where}: must be >= {minimum}, got {v}")
    return v


def _matrix(v, where):
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise DocumentError(f"{where}: expected a non-empty list of rows")
    width = len(v[0])
    if width == 0:
        raise DocumentError(f"{where}[0]: empty row")
    out = []
    for i, row in enumerate(v):
        if len(row) != width:
            raise DocumentError(f"{where}[{i}]: row has {len(row)} entries, row 0 has {width}")
        out.append([_number(x, f"{where}[{i}][{j}]") for j, x in enumerate(row)])
    return out


def _vector(v, where):
    if not isinstance(v, list) or not v:
        raise DocumentError(f"{where}: expected a non-empty list")
    return [_number(x, f"{where}[{i}]") for i, x in enumerate(v)]


def _require(doc, key, where):
    if not isinstance(doc, dict):
        raise DocumentError(f"{where}: expected an object")
    if key not in doc:
        raise DocumentError(f"{where}: missing required field {key!r}")
    return doc[key]


def parse_channel_document(text):
    """Parse a channel document; returns ``(spec, diagnostics)``.

    Syntax and structure problems raise :class:`DocumentError`; content
    problems (row sums, dimensions, declared alphabet sizes) come back as
    diagnostics so they can all be reported together.
    """
    doc = _loads(text, "channel spec")
    if not isinstance(doc, dict):
        raise DocumentError("channel spec: top level must be an object")
    k = _int(_require(doc, "K", "channel spec"), "K")
    base = DiscreteChannel(_matrix(_require(doc, "base", "channel spec"), "base"))
    kernels_raw = _require(doc, "kernels", "channel spec")
    if not isinstance(kernels_raw, list):
        raise DocumentError("kernels: expected a list of tables")
    kernels = tuple(DiscreteChannel(_matrix(t, f"kernels[{i}]")) for i, t in enumerate(kernels_raw))
    name = doc.get("name", "")
    description = doc.get("description", "")
    if not isinstance(name, str) or not isinstance(description, str):
        raise DocumentError("name and description must be strings")
    spec = DegradedBcSpec(k, base, kernels, name=name, description=description)
    diags = validate(spec)
    if "alphabets" in doc:
        diags += _check_alphabets(doc["alphabets"], spec)
    return spec, diags


def _check_alphabets(alpha, spec):
    if not isinstance(alpha, dict):
        raise DocumentError("alphabets: expected an object with X, Y, Z")
    x = _int(_require(alpha, "X", "alphabets"), "alphabets.X", 1)
    ys = _require(alpha, "Y", "alphabets")
    if not isinstance(ys, list):
        raise DocumentError("alphabets.Y: expected a list")
    ys = [_int(v, f"alphabets.Y[{i}]", 1) for i, v in enumerate(ys)]
    z = _int(_require(alpha, "Z", "alphabets"), "alphabets.Z", 1)
    out = []
    if x != spec.base.input_size:
        out.append(f"dimension mismatch: alphabets.X = {x} but base has {spec.base.input_size} rows")
    declared = [x] + ys + [z]
    actual = [spec.base.input_size, spec.base.output_size] + [kern.output_size for kern in spec.kernels]
    if len(ys) != spec.k_receivers:
        out.append(f"alphabets.Y lists {len(ys)} sizes for K = {spec.k_receivers}")
    elif len(declared) == len(actual):
        names = ["X"] + [f"Y{i + 1}" for i in range(len(ys))] + ["Z"]
        for name, d, a in zip(names[1:], declared[1:], actual[1:]):
            if d != a:
                out.append(f"dimension mismatch: alphabets say |{name}| = {d} but the tables give {a}")
    return out


def render_channel_document(spec):
    """JSON text that :func:`parse_channel_document` maps back to ``spec``."""
    doc = {
        "name": spec.name,
        "description": spec.description,
        "K": spec.k_receivers,
        "alphabets": {"X": spec.x_size, "Y": list(spec.y_sizes), "Z": spec.z_size},
        "base": spec.base.rows.tolist(),
        "kernels": [k.rows.tolist() for k in spec.kernels],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_channel(path):
    return parse_channel_document(read_text(path))


def parse_chain(doc, where="chain"):
    top = _vector(_require(doc, "top", where), f"{where}.top")
    links_raw = doc.get("links", [])
    if not isinstance(links_raw, list):
        raise DocumentError(f"{where}.links: expected a list of tables")
    links = [_matrix(t, f"{where}.links[{i}]") for i, t in enumerate(links_raw)]
    return ChainDistribution(top, tuple(links))


def _opt(doc, key, cast, default):
    if key not in doc:
        return default
    return cast(doc[key], key)


def parse_optimizer(doc, seed, threads=1):
    if not isinstance(doc, dict):
        raise DocumentError("optimizer: expected an object")
    card = doc.get("cardinalities")
    if card is not None:
        if not isinstance(card, list):
            raise DocumentError("optimizer.cardinalities: expected a list")
        card = tuple(_int(c, f"optimizer.cardinalities[{i}]", 1) for i, c in enumerate(card))
    method = doc.get("method", "ascent")
    if method not in ("ascent", "grid"):
        raise DocumentError(f"optimizer.method: unknown method {method!r}")
    return OptimizerOptions(
        cardinalities=card,
        restarts=_opt(doc, "restarts", lambda v, w: _int(v, f"optimizer.{w}", 1), 8),
        grid_step=_opt(doc, "grid_step", lambda v, w: _number(v, f"optimizer.{w}"), 1.0 / 16),
        tolerance=_opt(doc, "tolerance", lambda v, w: _number(v, f"optimizer.{w}"), 1e-10),
        method=method,
        seed=seed,
        threads=threads,
    )


def parse_weights(value, where="weights"):
    if not isinstance(value, list) or not value:
        raise DocumentError(f"{where}: expected a non-empty list of weight vectors")
    return [tuple(_vector(w, f"{where}[{i}]")) for i, w in enumerate(value)]


def parse_experiment(text):
    """Parse an experiment document into a plain dict with defaults filled in."""
    doc = _loads(text, "experiment")
    if not isinstance(doc, dict):
        raise DocumentError("experiment: top level must be an object")
    mode = _require(doc, "mode", "experiment")
    if mode not in MODES:
        raise DocumentError(f"mode: expected one of {MODES}, got {mode!r}")
    seed = _int(_require(doc, "seed", "experiment"), "seed", 0)
    exp = {"mode": mode, "seed": seed, "raw": doc}
    exp["tau"] = _number(doc.get("tau", 0), "tau")
    exp["budget_cap"] = _int(doc["budget_cap"], "budget_cap", 1) if "budget_cap" in doc else None
    outputs = doc.get("outputs", {})
    if not isinstance(outputs, dict):
        raise DocumentError("outputs: expected an object")
    exp["outputs"] = outputs
    if mode == "region":
        if "weights" in doc:
            exp["weights"] = parse_weights(doc["weights"])
        else:
            exp["weight_steps"] = _int(_require(doc, "weight_steps", "experiment (region mode needs weights or weight_steps)"), "weight_steps", 1)
        exp["optimizer"] = doc.get("optimizer", {})
        return exp

    ns = _require(doc, "n", "experiment")
    if not isinstance(ns, list) or not ns:
        raise DocumentError("n: expected a non-empty list of blocklengths")
    exp["n"] = [_int(v, f"n[{i}]", 1) for i, v in enumerate(ns)]
    exp["codebooks"] = _int(_require(doc, "codebooks", "experiment"), "codebooks", 1)
    if mode == "simulate":
        exp["trials"] = _int(_require(doc, "trials", "experiment"), "trials", 1)
    decoder = doc.get("decoder", "ml")
    if decoder not in ("ml", "typical"):
        raise DocumentError(f"decoder: expected 'ml' or 'typical', got {decoder!r}")
    exp["decoder"] = decoder
    exp["epsilon"] = _number(doc["epsilon"], "epsilon") if "epsilon" in doc else None
    if decoder == "typical" and exp["epsilon"] is None:
        raise DocumentError("epsilon: required for decoder 'typical'")
    if "chain" in doc:
        exp["chain"] = doc["chain"]
    else:
        exp["chain_weights"] = parse_weights([_require(doc, "chain_weights", "experiment (needs chain or chain_weights)")], "chain_weights")[0]
        exp["optimizer"] = doc.get("optimizer", {})
    rates = doc.get("rates", {"scale": 1})
    if not isinstance(rates, dict):
        raise DocumentError("rates: expected an object")
    if "R" in rates or "R_prime" in rates:
        exp["R"] = _vector(_require(rates, "R", "rates"), "rates.R")
        exp["R_prime"] = _vector(_require(rates, "R_prime", "rates"), "rates.R_prime")
    else:
        exp["rate_scale"] = _number(rates.get("scale", 1), "rates.scale")
    eq = doc.get("equivocation")
    if mode == "equivocation" and eq is None:
        eq = {}
    if eq is not None:
        if not isinstance(eq, dict):
            raise DocumentError("equivocation: expected an object")
        method = eq.get("method", "exact")
        if method not in ("exact", "mc"):
            raise DocumentError(f"equivocation.method: expected 'exact' or 'mc', got {method!r}")
        subsets = eq.get("subsets")
        if subsets is not None:
            if not isinstance(subsets, list) or not all(isinstance(s, list) for s in subsets):
                raise DocumentError("equivocation.subsets: expected a list of receiver lists")
            subsets = [tuple(_int(k, f"equivocation.subsets[{i}]", 1) for k in s) for i, s in enumerate(subsets)]
        exp["equivocation"] = {
            "method": method,
            "subsets": subsets,
            "samples": _int(eq.get("samples", 200), "equivocation.samples", 1),
            "tolerance": _number(eq.get("tolerance", 0), "equivocation.tolerance"),
        }
    exp["wiretap_trials"] = _int(doc.get("wiretap_trials", 0), "wiretap_trials", 0)
    return exp


def load_experiment(path):
    return parse_experiment(read_text(path))
