import csv
import json
import statistics
import subprocess
import sys

import numpy as np
import pytest
from conftest import random_spec
from hypothesis import given, settings
from hypothesis import strategies as st

from secrecybc import cli
from secrecybc.channel_model import DegradedBcSpec
from secrecybc.documents import parse_channel_document, parse_experiment, render_channel_document
from secrecybc.errors import DocumentError, InconsistencyError

H22_MINUS_H10 = 0.291171909372684371479759411716


def spec_doc(base, kernels, **extra):
    doc = {"K": len(kernels), "base": base, "kernels": kernels}
    doc.update(extra)
    return doc


def bsc_rows(p):
    return [[1 - p, p], [p, 1 - p]]


K2 = spec_doc(bsc_rows(0.05), [bsc_rows(0.1), bsc_rows(0.15)], name="cascade",
              alphabets={"X": 2, "Y": [2, 2], "Z": 2})


@pytest.fixture
def write(tmp_path):
    def w(name, obj):
        p = tmp_path / name
        p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return str(p)

    return w


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


# documents


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_round_trip(seed, k):
    spec = random_spec(np.random.default_rng(seed), k)
    spec = DegradedBcSpec(spec.k_receivers, spec.base, spec.kernels, name=f"s{seed}", description="d")
    back, diags = parse_channel_document(render_channel_document(spec))
    assert diags == [] and back == spec


def test_decimals_read_exactly():
    spec, diags = parse_channel_document(json.dumps(spec_doc([[0.3, 0.7], [0.1, 0.9]], [bsc_rows(0.5)])))
    assert diags == [] and spec.base.rows[0, 0] == 0.3


def test_no_silent_renormalisation():
    spec, diags = parse_channel_document(json.dumps(spec_doc([[0.3, 0.6], [0.1, 0.9]], [bsc_rows(0.5)])))
    assert spec.base.rows[0, 1] == 0.6
    assert any("base" in d and "row 0" in d for d in diags)


@pytest.mark.parametrize("text, where", [
    ('{"K": 1, "base": [[1, 0], [0, 1]], "kernels": [[[1, 0], [0, 1]]', "line"),
    ('{"K": 1, "base": [[1, 0], [0]], "kernels": [[[1, 0], [0, 1]]]}', "base[1]"),
    ('{"K": 1, "base": [1, 0], "kernels": []}', "base"),
    ('{"K": 1, "base": [[1, "a"], [0, 1]], "kernels": []}', "base[0][1]"),
    ('{"base": [[1, 0], [0, 1]], "kernels": []}', "'K'"),
    ('[1, 2]', "top level"),
])
def test_parse_errors_have_context(text, where):
    with pytest.raises(DocumentError) as exc:
        parse_channel_document(text)
    assert where in str(exc.value)


def test_alphabet_mismatch_is_a_diagnostic():
    doc = dict(K2, alphabets={"X": 2, "Y": [2, 3], "Z": 2})
    _, diags = parse_channel_document(json.dumps(doc))
    assert any("Y2" in d for d in diags)


def test_experiment_requirements():
    with pytest.raises(DocumentError, match="seed"):
        parse_experiment('{"mode": "region", "weight_steps": 2}')
    with pytest.raises(DocumentError, match="mode"):
        parse_experiment('{"mode": "plot", "seed": 1}')
    with pytest.raises(DocumentError, match="trials"):
        parse_experiment('{"mode": "simulate", "seed": 1, "n": [4], "codebooks": 2, "chain_weights": [1]}')
    with pytest.raises(DocumentError, match="epsilon"):
        parse_experiment('{"mode": "simulate", "seed": 1, "n": [4], "codebooks": 2, "trials": 3, '
                         '"chain_weights": [1], "decoder": "typical"}')
    exp = parse_experiment('{"mode": "equivocation", "seed": 1, "n": [4], "codebooks": 2, "chain_weights": [1]}')
    assert exp["equivocation"]["method"] == "exact"


# validate


def test_validate_ok(write, capsys):
    assert run("validate", "--spec", write("s.json", K2)) == 0
    out = capsys.readouterr()
    assert out.out == "" and out.err == ""


def test_validate_bad_row(write, capsys):
    doc = spec_doc(bsc_rows(0.05), [[[0.9, 0.3], [0.1, 0.9]], bsc_rows(0.15)])
    assert run("validate", "--spec", write("s.json", doc)) == 1
    err = capsys.readouterr().err
    assert "kernel 0" in err and "row 0" in err and "1.2" in err


def test_validate_malformed(write, capsys):
    assert run("validate", "--spec", write("s.json", '{"K": 1, "base": [[1, 0], [0, 1], "kernels": []}')) == 2
    assert "line" in capsys.readouterr().err


def test_validate_missing_file(tmp_path):
    assert run("validate", "--spec", tmp_path / "nope.json") == 2


# region


def test_region_zero_secrecy(write, tmp_path):
    spec = write("s.json", spec_doc(bsc_rows(0.1), [bsc_rows(0.0), bsc_rows(0.0)]))
    exp = write("e.json", {"mode": "region", "seed": 1, "weight_steps": 2, "optimizer": {"restarts": 2}})
    out = tmp_path / "r.tsv"
    assert run("region", "--spec", spec, "--experiment", exp, "--out", out) == 0
    rows = read_rows(out)
    assert len(rows) == 3
    for r in rows:
        assert max(float(r["R_1"]), float(r["R_2"]), float(r["value"])) <= 1e-6


def test_region_k1_closed_form(write, tmp_path):
    spec = write("s.json", spec_doc(bsc_rows(0.1), [bsc_rows(0.15)]))
    exp = write("e.json", {"mode": "region", "seed": 1, "weights": [[1]]})
    out = tmp_path / "r.tsv"
    assert run("region", "--spec", spec, "--experiment", exp, "--out", out) == 0
    header = out.read_text().splitlines()[0].split("\t")
    assert header == ["w_1", "R_1", "Rp_1", "value"]
    assert float(read_rows(out)[0]["R_1"]) == pytest.approx(H22_MINUS_H10, abs=1e-6)


def test_region_deterministic_and_seed_override(write, tmp_path):
    spec = write("s.json", K2)
    exp = write("e.json", {"mode": "region", "seed": 5, "weight_steps": 3, "optimizer": {"restarts": 2}})
    outs = [tmp_path / f"r{i}.tsv" for i in range(3)]
    run("region", "--spec", spec, "--experiment", exp, "--out", outs[0])
    run("region", "--spec", spec, "--experiment", exp, "--out", outs[1], "--threads", 2)
    run("region", "--spec", spec, "--experiment", exp, "--out", outs[2], "--seed", 6)
    assert outs[0].read_bytes() == outs[1].read_bytes()
    exp6 = write("e6.json", {"mode": "region", "seed": 6, "weight_steps": 3, "optimizer": {"restarts": 2}})
    direct = tmp_path / "r6.tsv"
    run("region", "--spec", spec, "--experiment", exp6, "--out", direct)
    assert outs[2].read_bytes() == direct.read_bytes()


def test_region_rejects_invalid_spec(write, tmp_path, capsys):
    spec = write("s.json", spec_doc([[0.5, 0.6], [0, 1]], [bsc_rows(0.1)]))
    exp = write("e.json", {"mode": "region", "seed": 5, "weight_steps": 1})
    assert run("region", "--spec", spec, "--experiment", exp, "--out", tmp_path / "r.tsv") == 1
    assert "row 0" in capsys.readouterr().err
    assert not (tmp_path / "r.tsv").exists()


def test_region_mode_mismatch(write, tmp_path):
    exp = write("e.json", {"mode": "simulate", "seed": 1, "n": [4], "codebooks": 1, "trials": 2, "chain_weights": [1, 0]})
    assert run("region", "--spec", write("s.json", K2), "--experiment", exp, "--out", tmp_path / "r.tsv") == 2


# simulate

CHAIN = {"top": [0.5, 0.5], "links": [[[0.9, 0.1], [0.1, 0.9]]]}


def test_simulate_noiseless(write, tmp_path):
    spec = write("s.json", spec_doc([[1, 0], [0, 1]], [[[1, 0], [0, 1]], [[0.5, 0.5], [0.5, 0.5]]]))
    exp = write("e.json", {"mode": "simulate", "seed": 2, "n": [12], "trials": 200, "codebooks": 2,
                           "chain": {"top": [0.5, 0.5], "links": [[[1, 0], [0, 1]]]},
                           "rates": {"R": [0.0, 0.2], "R_prime": [0.0, 0.0]}})
    out = tmp_path / "s.tsv"
    assert run("simulate", "--spec", spec, "--experiment", exp, "--out", out) == 0
    for r in read_rows(out):
        assert float(r["pe_1"]) == 0 and float(r["pe_2"]) == 0


def test_simulate_independent_wiretapper(write, tmp_path):
    spec = write("s.json", spec_doc(bsc_rows(0.05), [bsc_rows(0.1), [[0.5, 0.5], [0.5, 0.5]]]))
    exp = write("e.json", {"mode": "equivocation", "seed": 2, "n": [4, 6], "codebooks": 2, "chain": CHAIN,
                           "rates": {"scale": 0.7}, "equivocation": {"method": "exact"}})
    out = tmp_path / "s.tsv"
    assert run("simulate", "--spec", spec, "--experiment", exp, "--out", out) == 0
    rows = read_rows(out)
    assert len(rows) == 4 and "pe_1" not in rows[0]
    for r in rows:
        for c in ("gap_1", "gap_2", "gap_1-2"):
            assert abs(float(r[c])) <= 1e-9


def test_simulate_columns_and_determinism(write, tmp_path):
    spec = write("s.json", K2)
    exp = write("e.json", {"mode": "simulate", "seed": 3, "n": [4, 6], "trials": 100, "codebooks": 2, "chain": CHAIN,
                           "tau": 0.02, "rates": {"scale": 1.0},
                           "equivocation": {"method": "mc", "samples": 30, "subsets": [[1], [1, 2]]},
                           "wiretap_trials": 50})
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    assert run("simulate", "--spec", spec, "--experiment", exp, "--out", a) == 0
    assert run("simulate", "--spec", spec, "--experiment", exp, "--out", b, "--threads", 3) == 0
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0].split("\t")
    assert header == ["n", "replicate", "L_1", "L_2", "Lp_1", "Lp_2", "pe_1", "pe_2", "pe_se_1", "pe_se_2",
                      "re_1", "gap_1", "re_se_1", "re_1-2", "gap_1-2", "re_se_1-2", "lambda_1", "lambda_2"]
    for line in a.read_text().splitlines()[1:]:
        for cell in line.split("\t"):
            digits = cell.lstrip("-").replace(".", "").split("e")[0].lstrip("0")
            assert len(digits) <= 9


def test_simulate_budget_refusal(write, tmp_path, capsys):
    exp = write("e.json", {"mode": "simulate", "seed": 1, "n": [40], "trials": 10, "codebooks": 1, "chain": CHAIN,
                           "rates": {"R": [0.3, 0.3], "R_prime": [0.2, 0.2]}})
    out = tmp_path / "s.tsv"
    assert run("simulate", "--spec", write("s.json", K2), "--experiment", exp, "--out", out, "--budget-cap", 100000) == 3
    assert "N_1*n" in capsys.readouterr().err
    assert not out.exists()


def test_simulate_bad_subset(write, tmp_path):
    doc = spec_doc(bsc_rows(0.05), [bsc_rows(0.1), bsc_rows(0.1), bsc_rows(0.1)])
    chain = {"top": [0.5, 0.5], "links": [[[0.9, 0.1], [0.1, 0.9]], [[0.9, 0.1], [0.1, 0.9]]]}
    exp = write("e.json", {"mode": "equivocation", "seed": 1, "n": [2], "codebooks": 1, "chain": chain,
                           "equivocation": {"subsets": [[1, 3]]}})
    assert run("simulate", "--spec", write("s.json", doc), "--experiment", exp, "--out", tmp_path / "o.tsv") == 1


def test_internal_inconsistency_exit_code(write, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise InconsistencyError("I(X;Y) = -0.5 bits")

    monkeypatch.setattr(cli, "trace_boundary", boom)
    exp = write("e.json", {"mode": "region", "seed": 1, "weight_steps": 1})
    assert run("region", "--spec", write("s.json", K2), "--experiment", exp, "--out", tmp_path / "r.tsv") == 4


# export-plotdata


@pytest.fixture
def sim_table(write, tmp_path):
    exp = write("e.json", {"mode": "simulate", "seed": 4, "n": [4, 8], "trials": 200, "codebooks": 3, "chain": CHAIN,
                           "rates": {"scale": 0.7}})
    out = tmp_path / "s.tsv"
    assert run("simulate", "--spec", write("s.json", K2), "--experiment", exp, "--out", out) == 0
    return out


def test_export_simulate_medians(sim_table, tmp_path):
    out = tmp_path / "l.tsv"
    assert run("export-plotdata", "--in", sim_table, "--kind", "simulate", "--out", out) == 0
    long = read_rows(out)
    raw = read_rows(sim_table)
    for k in (1, 2):
        for n in (4, 8):
            want = statistics.median(float(r[f"pe_{k}"]) for r in raw if r["n"] == str(n))
            [got] = [r for r in long if r["series"] == f"pe_{k}" and r["x"] == str(n)]
            assert float(got["y"]) == pytest.approx(want, rel=1e-8)


def test_export_idempotent_and_figure(sim_table, tmp_path):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    fa, fb = tmp_path / "a.png", tmp_path / "b.png"
    run("export-plotdata", "--in", sim_table, "--kind", "simulate", "--out", a, "--figure", fa)
    run("export-plotdata", "--in", sim_table, "--kind", "simulate", "--out", b, "--figure", fb)
    assert a.read_bytes() == b.read_bytes()
    assert fa.read_bytes() == fb.read_bytes() and fa.read_bytes()[:4] == b"\x89PNG"


def test_export_region(write, tmp_path):
    spec = write("s.json", K2)
    exp = write("e.json", {"mode": "region", "seed": 1, "weights": [[1, 0], [0.5, 0.5], [0, 1]], "optimizer": {"restarts": 1}})
    r = tmp_path / "r.tsv"
    run("region", "--spec", spec, "--experiment", exp, "--out", r)
    out = tmp_path / "l.tsv"
    assert run("export-plotdata", "--in", r, "--kind", "region", "--out", out) == 0
    long = read_rows(out)
    table = read_rows(r)
    for k in (1, 2):
        series = [row for row in long if row["series"] == f"R_{k}"]
        assert [row["x"] for row in series] == ["0", "1", "2"]
        assert [row["y"] for row in series] == [t[f"R_{k}"] for t in table]


def test_export_schema_mismatch_and_unknown_kind(sim_table, tmp_path):
    assert run("export-plotdata", "--in", sim_table, "--kind", "region", "--out", tmp_path / "x.tsv") == 2
    with pytest.raises(SystemExit) as exc:
        run("export-plotdata", "--in", sim_table, "--kind", "histogram", "--out", tmp_path / "x.tsv")
    assert exc.value.code == 2


def test_module_entry_point(write):
    r = subprocess.run([sys.executable, "-m", "secrecybc", "validate", "--spec", write("s.json", K2)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stderr == ""
