import io
import itertools
import math

import numpy as np
import pytest

from dbcd.errors import ConfigurationError
from dbcd.metrics import (
    CSV_COLUMNS,
    CostParams,
    IterationRecord,
    auprc,
    communication_cost,
    computation_cost,
    cost_estimate,
    emit_csv,
    load_reference,
    rfvd,
    save_reference,
    synth_correlated_dataset,
    synth_dataset,
)

METHOD_LIST = ("hydra", "grock", "pcd-r", "pcd-s", "dbcd-r", "dbcd-s")


# ------------------------------------------------------------------- rfvd


def test_rfvd_examples():
    assert rfvd(1.01 * 2.0, 2.0) == pytest.approx(-2.0, abs=1e-12)
    assert rfvd(2.0 * 3.0, 3.0) == 0.0
    assert rfvd(5.0, 5.0) == -16.0
    assert rfvd(4.999, 5.0) == -16.0  # below reference clamps too


def test_rfvd_domain_error():
    with pytest.raises(ValueError):
        rfvd(1.0, 0.0)
    with pytest.raises(ValueError):
        rfvd(1.0, -2.0)


def test_rfvd_monotone_along_descent():
    f_star = 1.0
    fs = [2.0, 1.5, 1.2, 1.05, 1.0001, 1.0]
    vals = [rfvd(f, f_star) for f in fs]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


# ------------------------------------------------------------------- auprc


def test_auprc_perfect_ranking():
    assert auprc([0.9, 0.1], [1, -1]) == 1.0


def test_auprc_reversed_ranking():
    # single useful PR point: R=1, P=0.5
    assert auprc([0.9, 0.1], [-1, 1]) == pytest.approx(0.5)


def test_auprc_all_ties_gives_positive_fraction():
    labels = [1, -1, -1, 1, -1]
    assert auprc([0.7] * 5, labels) == pytest.approx(2.0 / 5.0)


def test_auprc_errors():
    with pytest.raises(ValueError, match="positive"):
        auprc([0.2, 0.1], [-1, -1])
    with pytest.raises(ValueError, match="aligned"):
        auprc([0.2, 0.1], [1, -1, 1])


def oracle_auprc(scores, labels):
    """Slow reference: explicit group-by-threshold staircase, plain loops."""
    pairs = list(zip(scores, labels))
    n_pos = sum(1 for _, lbl in pairs if lbl > 0)
    distinct = sorted({s for s, _ in pairs}, reverse=True)
    terms = []
    prev_recall = 0.0
    for threshold in distinct:
        taken = [(s, l) for s, l in pairs if s >= threshold]
        tp = sum(1 for _, l in taken if l > 0)
        precision = tp / len(taken)
        recall = tp / n_pos
        terms.append((recall - prev_recall) * precision)
        prev_recall = recall
    return math.fsum(terms)


def test_auprc_matches_exhaustive_enumeration():
    # every label pattern with >= 1 positive and every score-tie structure
    # from a 3-letter alphabet, for n up to 5; exact equality required
    alphabet = (0.1, 0.5, 0.9)
    for n in range(1, 6):
        for labels in itertools.product((1, -1), repeat=n):
            if all(l < 0 for l in labels):
                continue
            for scores in itertools.product(alphabet, repeat=n):
                got = auprc(np.array(scores), np.array(labels))
                want = oracle_auprc(scores, labels)
                assert got == want, (scores, labels)


def test_auprc_matches_oracle_on_random_n6_to_n8():
    rng = np.random.Generator(np.random.PCG64(2024))
    for _ in range(400):
        n = int(rng.integers(6, 9))
        labels = np.where(rng.random(n) < 0.5, 1, -1)
        if not np.any(labels > 0):
            labels[0] = 1
        scores = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=n)
        assert auprc(scores, labels) == oracle_auprc(
            scores.tolist(), labels.tolist()
        )


def test_auprc_in_unit_interval():
    rng = np.random.Generator(np.random.PCG64(6))
    for _ in range(100):
        n = int(rng.integers(2, 30))
        labels = np.where(rng.random(n) < 0.4, 1, -1)
        if not np.any(labels > 0):
            labels[0] = 1
        val = auprc(rng.standard_normal(n), labels)
        assert 0.0 <= val <= 1.0


# -------------------------------------------------------------- cost model


def test_computation_cost_hydra_frozen_example():
    comp = computation_cost("hydra", nz=1000, n_nodes=10, s_size=10, m=100, n=50)
    assert comp == pytest.approx(30.0)


def test_communication_cost_hydra_frozen_example():
    comm = communication_cost("hydra", n=50, n_nodes=10, beta=100.0)
    assert comm == pytest.approx(100.0 * 50 * math.log2(10))


def test_cost_zero_communication_single_node():
    for method in METHOD_LIST:
        assert communication_cost(method, 1000, 1, 12345.0, tau_ls=9) == 0.0


def test_line_search_methods_charge_tau_scalars():
    for method in ("pcd-r", "pcd-s", "dbcd-r", "dbcd-s"):
        comm = communication_cost(method, n=100, n_nodes=4, beta=2.0, tau_ls=3)
        assert comm == pytest.approx(2.0 * 103 * 2.0)
    for method in ("hydra", "grock"):
        comm = communication_cost(method, n=100, n_nodes=4, beta=2.0, tau_ls=3)
        assert comm == pytest.approx(2.0 * 100 * 2.0)


def test_dbcd_r_inner_term_is_k_plus_one_times_hydra_inner():
    nz, p, s, m, n = 5000, 5, 20, 200, 300
    sel = nz / p * (s / m)
    comp = computation_cost("dbcd-r", nz, p, s, m, n, tau_ls=0, k=10)
    assert comp == pytest.approx(11.0 * sel)


def test_dbcd_r_full_working_set_reduction():
    # at |S| = m, q = 1: comp = (k+1) * nz/P + tau * (m + n)
    nz, p, m, n, k, tau = 8000, 4, 100, 60, 10, 3
    comp = computation_cost("dbcd-r", nz, p, m, m, n, tau_ls=tau, k=k)
    assert comp == pytest.approx((k + 1) * nz / p + tau * (m + n))


def test_greedy_rows_scale_with_skew():
    base = computation_cost("dbcd-s", 5000, 5, 20, 200, 300, tau_ls=2, k=10, q=1.0)
    skew = computation_cost("dbcd-s", 5000, 5, 20, 200, 300, tau_ls=2, k=10, q=2.0)
    sel = 5000 / 5 * (20 / 200)
    assert skew - base == pytest.approx((10 + 1) * sel)  # k*q and q terms double


def test_cost_estimate_tuple_and_params_validation():
    params = CostParams(nz=1000, n=50, m=100, n_nodes=10, s_size=10, beta=100.0)
    comp, comm = cost_estimate("hydra", params)
    assert comp == pytest.approx(30.0)
    assert comm == pytest.approx(100.0 * 50 * math.log2(10))

    with pytest.raises(ConfigurationError):
        CostParams(nz=1, n=1, m=1, n_nodes=0, s_size=0)
    with pytest.raises(ConfigurationError):
        CostParams(nz=1, n=1, m=1, n_nodes=1, s_size=5)
    with pytest.raises(ConfigurationError):
        CostParams(nz=1, n=1, m=1, n_nodes=1, s_size=1, q=0.5)
    with pytest.raises(ConfigurationError, match="unknown method"):
        computation_cost("admm", 1, 1, 1, 1, 1)
    with pytest.raises(ConfigurationError, match="unknown method"):
        communication_cost("admm", 1, 2, 1.0)


# ---------------------------------------------------------------- emit_csv


def one_record(**overrides):
    base = dict(
        t=0,
        objective=0.6931471805599453,
        rfvd=float("nan"),
        kkt=0.25,
        alpha=1.0,
        s_size=12,
        nnz_pct=4.0,
        comp_model=1100.16,
        comm_model=40200.0,
        tau_ls=1,
    )
    base.update(overrides)
    return IterationRecord(**base)


def test_emit_csv_single_record():
    out = io.StringIO()
    emit_csv([one_record()], out)
    lines = out.getvalue().splitlines()
    assert len(lines) == 2
    assert lines[0] == ",".join(CSV_COLUMNS)
    cells = lines[1].split(",")
    assert cells[0] == "0"
    assert cells[1] == "0.69314718056"  # 12 significant digits
    assert cells[2] == "nan"
    assert cells[9] == "1"


def test_emit_csv_path_and_determinism(tmp_path):
    records = [one_record(t=i, objective=0.5 / (i + 1)) for i in range(5)]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(records, p1)
    emit_csv(records, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_bytes().count(b"\n") == 6


def test_emit_csv_empty_error():
    with pytest.raises(ValueError, match="no records"):
        emit_csv([], io.StringIO())


def test_emit_csv_excludes_measured_fields():
    out = io.StringIO()
    emit_csv([one_record(wall_ms=123.456, y_drift=1e-9)], out)
    assert "123.456" not in out.getvalue()
    assert "wall" not in out.getvalue()


# ------------------------------------------------------------ synth_dataset


def test_synth_dataset_deterministic():
    a, wa = synth_dataset(50, 20, 0.3, 0.25, seed=9)
    b, wb = synth_dataset(50, 20, 0.3, 0.25, seed=9)
    assert a.matrix == b.matrix
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(wa, wb)
    c, _ = synth_dataset(50, 20, 0.3, 0.25, seed=10)
    assert c.matrix != a.matrix


def test_synth_dataset_dense_full_rank():
    ds, _ = synth_dataset(30, 30, 1.0, 0.5, seed=4)
    dense = ds.matrix.tocsc().toarray()
    assert np.linalg.matrix_rank(dense) == 30


def test_synth_dataset_planted_support_size():
    _, w_star = synth_dataset(40, 30, 0.2, 0.3, seed=1)
    assert int(np.count_nonzero(w_star)) == math.ceil(0.3 * 30)


def test_synth_dataset_noise_free_labels_match_margin():
    ds, w_star = synth_dataset(80, 25, 0.4, 0.4, seed=2, noise=0.0)
    margin = ds.matrix.tocsc() @ w_star
    assert np.array_equal(ds.labels, np.where(margin > 0, 1.0, -1.0))


def test_synth_dataset_labels_are_pm_one():
    ds, _ = synth_dataset(60, 10, 0.5, 0.2, seed=3)
    assert set(np.unique(ds.labels)) <= {-1.0, 1.0}


def test_synth_dataset_validation():
    with pytest.raises(ConfigurationError):
        synth_dataset(10, 5, 1.5, 0.2)
    with pytest.raises(ConfigurationError):
        synth_dataset(10, 5, 0.5, -0.1)


# ------------------------------------------------- synth_correlated_dataset


def test_synth_correlated_deterministic():
    a, wa = synth_correlated_dataset(60, 24, 0.2, 6, 0.25, seed=5)
    b, wb = synth_correlated_dataset(60, 24, 0.2, 6, 0.25, seed=5)
    assert a.matrix == b.matrix
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(wa, wb)
    c, _ = synth_correlated_dataset(60, 24, 0.2, 6, 0.25, seed=6)
    assert c.matrix != a.matrix


def test_synth_correlated_groups_share_row_support():
    ds, _ = synth_correlated_dataset(100, 20, 0.15, 5, 0.2, seed=8)
    X = ds.matrix.tocsc()
    k = round(0.15 * 100)
    for g in range(4):
        cols = [X[:, j].indices for j in range(5 * g, 5 * g + 5)]
        for rows in cols:
            assert rows.size == k
            assert np.array_equal(rows, cols[0])
    # different groups draw their own supports
    assert not np.array_equal(X[:, 0].indices, X[:, 5].indices)


def test_synth_correlated_columns_correlate_within_group_only():
    ds, _ = synth_correlated_dataset(400, 12, 0.5, 6, 0.0, seed=3, jitter=0.2)
    X = ds.matrix.tocsc().toarray()
    same = np.corrcoef(X[:, 0][X[:, 0] != 0], X[:, 1][X[:, 1] != 0])[0, 1]
    assert same > 0.9  # jitter 0.2 => corr about 1/(1+0.04)
    dense_corr = np.corrcoef(X[:, 0], X[:, 6])[0, 1]
    assert abs(dense_corr) < 0.5


def test_synth_correlated_group_one_is_independent_layout():
    ds, w_star = synth_correlated_dataset(50, 10, 0.3, 1, 0.4, seed=2)
    assert ds.matrix.nnz == 10 * round(0.3 * 50)
    assert int(np.count_nonzero(w_star)) == math.ceil(0.4 * 10)
    assert set(np.unique(ds.labels)) <= {-1.0, 1.0}


def test_synth_correlated_validation():
    with pytest.raises(ConfigurationError):
        synth_correlated_dataset(10, 5, 0.0, 2, 0.2)
    with pytest.raises(ConfigurationError):
        synth_correlated_dataset(10, 5, 0.5, 0, 0.2)
    with pytest.raises(ConfigurationError):
        synth_correlated_dataset(10, 5, 0.5, 2, 1.5)


# ----------------------------------------------------------- reference file


def test_reference_round_trip(tmp_path):
    path = tmp_path / "ref.json"
    save_reference(path, 0.123456789, lam=0.01, kkt=1e-11)
    assert load_reference(path) == pytest.approx(0.123456789, rel=1e-15)
    text = path.read_text()
    assert '"lam"' in text and '"f_star"' in text
