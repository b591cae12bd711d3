import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmph.cli import (
    EXIT_IO,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_VALIDATION,
    cmd_evaluate,
    cmd_fit,
    cmd_flip,
    cmd_premium,
    cmd_simulate,
    ingest_summary,
    main,
)
from mmph.dataio import Dataset, ModelDocument, ingest
from mmph.errors import ConventionError, DomainError, IngestionError
from mmph.jointmodel import JointModel, marginal_n
from mmph.phasetype import dph_mean, ph_mean
from mmph.simulate import simulate

from conftest import random_joint_model


def write_csv(path, rows, header=("y", "n")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def read_rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_ingest_standardizes(tmp_path):
    ds = ingest(write_csv(tmp_path / "d.csv", [(300, 1), (250, 2), (400, 1)]))
    assert ds.shift == 249.0
    np.testing.assert_array_equal(ds.y, [51.0, 1.0, 151.0])
    np.testing.assert_array_equal(ds.n, [1, 2, 1])


def test_ingest_rejects_zero_count_with_line(tmp_path):
    path = write_csv(tmp_path / "d.csv", [(300, 1), (250, 0)])
    with pytest.raises(IngestionError, match="line 3"):
        ingest(path)


def test_ingest_errors_name_line_and_column(tmp_path):
    with pytest.raises(IngestionError, match=r"line 2.*'y'"):
        ingest(write_csv(tmp_path / "a.csv", [("abc", 1)]))
    with pytest.raises(IngestionError, match=r"line 3.*'n'"):
        ingest(write_csv(tmp_path / "b.csv", [(1.0, 1), (2.0, "")]))
    with pytest.raises(IngestionError, match="missing column"):
        ingest(write_csv(tmp_path / "c.csv", [(1.0, 1)], header=("amount", "n")))


def test_ingest_custom_columns_and_delimiter(tmp_path):
    path = tmp_path / "d.tsv"
    path.write_text("id\tcost\tclaims\n1\t10.5\t1\n2\t12.5\t3\n")
    ds = ingest(path, "cost", "claims", "\t")
    np.testing.assert_array_equal(ds.y_raw, [10.5, 12.5])
    np.testing.assert_array_equal(ds.n, [1, 3])


def test_ingest_summary_groups():
    ds = Dataset.from_raw([1.0, 3.0, 10.0, 20.0], [1, 1, 2, 2])
    rows = {r[0]: r for r in ingest_summary(ds)}
    assert rows["1"][1:3] == [2, 2.0]
    assert rows["2"][1:3] == [2, 15.0]
    assert rows["all"][1] == 4


def test_model_document_round_trip(rng):
    model = random_joint_model(rng, 4, 2)
    doc = ModelDocument.from_model(model, shift=1234.5678901234567, metadata={"seed": 3})
    back = ModelDocument.from_json(doc.to_json())
    assert back.to_dict() == doc.to_dict()
    np.testing.assert_array_equal(back.model().t_mat, model.t_mat)
    np.testing.assert_array_equal(back.model().alpha, model.alpha)


def test_model_document_rejects_bad_input():
    with pytest.raises(IngestionError):
        ModelDocument.from_json("{not json")
    with pytest.raises(IngestionError, match="schema"):
        ModelDocument.from_json(json.dumps({"schema_version": 99}))


@pytest.fixture
def small_dataset(dependent_model):
    data = simulate(dependent_model, 400, 21)
    return Dataset.from_raw(data.y * 1000.0 + 500.0, data.n, "synthetic")


def test_fit_is_deterministic(small_dataset):
    a, rep_a, trace_a = cmd_fit(small_dataset, 3, 2, iters=20, restarts=2, seed=5)
    b, _, trace_b = cmd_fit(small_dataset, 3, 2, iters=20, restarts=2, seed=5)
    assert a.to_json() == b.to_json()
    assert trace_a == trace_b
    assert a.shift == small_dataset.shift
    assert rep_a.joint_aic == pytest.approx(2 * (9 + 2) - 2 * rep_a.joint_loglik)


def test_fit_single_state_rate(tmp_path):
    y = np.random.default_rng(2).exponential(5.0, 200) + 10.0
    ds = Dataset.from_raw(y, np.ones(200, dtype=int))
    doc, _, _ = cmd_fit(ds, 1, 1, iters=5, restarts=1, seed=0)
    assert -doc.t_mat[0][0] == pytest.approx(1.0 / ds.y.mean(), rel=1e-8)


def test_premium_degenerate_dataset():
    c = 730.0
    ds = Dataset.from_raw(np.full(10, c), np.ones(10, dtype=int))
    doc = ModelDocument.from_model(JointModel.from_arrays([1.0], [[-1.0]], 1), shift=ds.shift)
    rep = cmd_premium(doc, ds)
    assert rep.joint_estimate == pytest.approx(c, rel=1e-12)
    assert rep.independent_estimate == pytest.approx(c, rel=1e-12)
    assert rep.empirical_mean == pytest.approx(c, rel=1e-12)


def test_premium_shift_mismatch(small_dataset, dependent_model):
    doc = ModelDocument.from_model(dependent_model, shift=small_dataset.shift + 1.0)
    with pytest.raises(ConventionError):
        cmd_premium(doc, small_dataset)


def test_premium_ci_and_finiteness(small_dataset, dependent_model):
    doc = ModelDocument.from_model(dependent_model, shift=small_dataset.shift)
    rep = cmd_premium(doc, small_dataset)
    lo, hi = rep.empirical_ci
    assert lo < rep.empirical_mean < hi
    prod = small_dataset.y_raw * small_dataset.n
    assert hi - lo == pytest.approx(2 * 1.96 * prod.std(ddof=1) / math.sqrt(prod.size))
    for v in (rep.joint_estimate, rep.independent_estimate, lo, hi):
        assert math.isfinite(v)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1e4, 1e6), st.integers(0, 2**32 - 1))
def test_property_premium_shift_invariant(offset, seed):
    rng = np.random.default_rng(seed)
    model = random_joint_model(rng, 3, 2)
    data = simulate(model, 50, rng)
    base = Dataset.from_raw(data.y + 5.0, data.n)
    moved = Dataset.from_raw(data.y + 5.0 + offset, data.n)
    a = cmd_premium(ModelDocument.from_model(model, shift=base.shift), base)
    b = cmd_premium(ModelDocument.from_model(model, shift=moved.shift), moved)
    # moving the raw data moves model estimates by offset * E[N], the sample by offset * mean(n)
    en = dph_mean(marginal_n(model))
    assert b.joint_estimate == pytest.approx(a.joint_estimate + offset * en, rel=1e-8)
    assert b.independent_estimate == pytest.approx(a.independent_estimate + offset * en, rel=1e-8)
    assert b.empirical_mean == pytest.approx(a.empirical_mean + offset * data.n.mean(), rel=1e-8)


def test_premium_coverage_of_empirical_ci():
    model = JointModel.from_arrays([1.0, 0.0], [[-1.5, 1.0], [0.5, -1.0]], 1)
    hits = 0
    for seed in range(100):
        data = simulate(model, 10**5, seed)
        rep = cmd_premium(ModelDocument.from_model(model, shift=0.0), Dataset(data.y, data.n, 0.0))
        lo, hi = rep.empirical_ci
        hits += lo <= rep.joint_estimate <= hi
    assert hits >= 90


def test_evaluate_tables(dependent_model, small_dataset):
    doc = ModelDocument.from_model(dependent_model, shift=small_dataset.shift)
    tables = cmd_evaluate(doc, small_dataset, y_points=40)
    moments = dict(tables["moments"][1])
    assert moments["H(0,0)"] == pytest.approx(1.0, abs=1e-12)
    header, rows = tables["conditional"]
    for n in (1, 2):
        cdf = np.array([r[3] for r in rows if r[0] == n])
        dens = np.array([r[2] for r in rows if r[0] == n])
        assert np.all(np.diff(cdf) >= 0)
        assert np.all((cdf >= 0) & (cdf <= 1)) and np.all(dens >= 0)
    joint = np.array([r[3] for r in tables["joint"][1]])
    assert np.all((joint >= 0) & (joint <= 1))
    ks = tables["ks"][1]
    assert [r[0] for r in ks] == [1, 2]
    assert all(0 <= r[2] <= 1 for r in ks)


def test_evaluate_flags_empty_counts():
    model = JointModel.from_arrays([1.0], [[-1.0]], 1)
    tables = cmd_evaluate(ModelDocument.from_model(model), n_max=2, y_points=5)
    flagged = [r for r in tables["conditional"][1] if r[0] == 2]
    assert flagged and all(r[4] for r in flagged)


def test_simulate_count_zero_is_header_only(dependent_model):
    doc = ModelDocument.from_model(dependent_model)
    assert cmd_simulate(doc, 0, seed=1) == "y,n\n"


def test_simulate_determinism_and_raw_shift(dependent_model):
    doc = ModelDocument.from_model(dependent_model, shift=100.0)
    a = cmd_simulate(doc, 50, seed=4)
    assert a == cmd_simulate(doc, 50, seed=4)
    raw = read_rows(cmd_simulate(doc, 50, seed=4, raw=True))[1:]
    std = read_rows(a)[1:]
    for r, s in zip(raw, std):
        assert float(r[0]) == pytest.approx(float(s[0]) + 100.0)


def test_simulate_mean_matches(dependent_model):
    doc = ModelDocument.from_model(dependent_model)
    rows = np.loadtxt(io.StringIO(cmd_simulate(doc, 10**6, seed=9)), delimiter=",", skiprows=1)
    y = rows[:, 0]
    se = y.std(ddof=1) / math.sqrt(y.size)
    assert abs(y.mean() - ph_mean(dependent_model.ph)) <= 3 * se


def test_flip():
    ds = Dataset.from_raw([5.0, 6.0, 7.0], [1, 2, 1])
    flipped = cmd_flip(ds)
    np.testing.assert_array_equal(flipped.n, [2, 1, 2])
    np.testing.assert_array_equal(flipped.y_raw, ds.y_raw)
    np.testing.assert_array_equal(cmd_flip(flipped).n, ds.n)
    with pytest.raises(DomainError):
        cmd_flip(Dataset.from_raw([1.0], [3]))


def test_main_round_trip(tmp_path, small_dataset, capsys):
    data = tmp_path / "d.csv"
    write_csv(data, zip(small_dataset.y_raw, small_dataset.n))
    model = tmp_path / "model.json"
    args = ["fit", str(data), "--p", "2", "--eplus", "1", "--iters", "5", "--restarts", "1",
            "--seed", "0", "--out", str(model)]
    assert main(args) == EXIT_OK
    assert (tmp_path / "model_trace.csv").exists()
    assert json.loads((tmp_path / "model_report.json").read_text())["restart_index"] == 0

    out = tmp_path / "premium.json"
    assert main(["premium", str(model), str(data), "--out", str(out)]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["empirical_ci"][0] < rep["empirical_ci"][1]

    assert main(["evaluate", str(model), "--data", str(data), "--out", str(tmp_path / "eval")]) == EXIT_OK
    assert (tmp_path / "eval" / "ks.csv").exists()

    sims = tmp_path / "sims.csv"
    assert main(["simulate", str(model), "--count", "3", "--seed", "1", "--out", str(sims)]) == EXIT_OK
    assert len(read_rows(sims.read_text())) == 4

    flipped = tmp_path / "flip.csv"
    assert main(["flip", str(data), "--out", str(flipped)]) == EXIT_OK
    assert main(["ingest-summary", str(flipped)]) == EXIT_OK
    assert "shift" in capsys.readouterr().out


def test_main_exit_codes(tmp_path):
    bad = write_csv(tmp_path / "bad.csv", [(1.0, 0)])
    assert main(["ingest-summary", str(bad)]) == EXIT_VALIDATION
    assert main(["ingest-summary", str(tmp_path / "missing.csv")]) == EXIT_IO

    data = write_csv(tmp_path / "d.csv", [(1.0, 1), (2.0, 2)])
    doc = ModelDocument.from_model(JointModel.from_arrays([1.0], [[-1.0]], 1), shift=123.0)
    doc.save(tmp_path / "m.json")
    assert main(["premium", str(tmp_path / "m.json"), str(data)]) == EXIT_VALIDATION

    # a count the model cannot produce has zero likelihood
    assert main(["fit", str(data), "--p", "1", "--eplus", "1", "--iters", "3", "--restarts", "1",
                 "--out", str(tmp_path / "f.json")]) == EXIT_NUMERICAL
