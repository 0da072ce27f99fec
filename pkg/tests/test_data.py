import gzip
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from symaccel.data import (
    IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
    Dataset,
    load_delimited,
    load_idx_pair,
    parity_rule,
    read_idx,
    standardize,
    synth_logistic,
    write_idx,
)
from symaccel.errors import ConfigError, DataFormatError
from symaccel.objectives import LogisticRegressionObjective


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_delimited_label_mapping(tmp_path):
    p = write(tmp_path, "wdbc.csv", "radius,texture,diagnosis\n1.0,2.0,M\n3.5,-1,B\n0,0,M\n")
    ds = load_delimited(p, label_column="diagnosis", positive_label="M")
    assert ds.n == 3 and ds.d == 2
    np.testing.assert_array_equal(ds.labels, [1, 0, 1])
    np.testing.assert_array_equal(ds.features, [[1.0, 2.0], [3.5, -1.0], [0.0, 0.0]])
    assert ds.provenance == ("file", str(p))


def test_load_delimited_index_and_delimiter(tmp_path):
    p = write(tmp_path, "d.tsv", "1\t0.5\t2\n0\t1.5\t3\n")
    ds = load_delimited(p, delimiter="\t", has_header=False, label_column=0)
    np.testing.assert_array_equal(ds.labels, [1, 0])
    np.testing.assert_array_equal(ds.features, [[0.5, 2.0], [1.5, 3.0]])


def test_load_delimited_gzip(tmp_path):
    p = tmp_path / "d.csv.gz"
    with gzip.open(p, "wt") as fh:
        fh.write("a,y\n1,1\n2,0\n")
    assert load_delimited(p).n == 2


def test_nan_feature_names_row(tmp_path):
    p = write(tmp_path, "bad.csv", "a,b,y\n1,2,1\n3,NaN,0\n")
    with pytest.raises(DataFormatError) as err:
        load_delimited(p)
    assert "row 3" in str(err.value)


def test_non_numeric_feature_names_row_and_column(tmp_path):
    p = write(tmp_path, "bad.csv", "a,b,y\n1,x,1\n")
    with pytest.raises(DataFormatError) as err:
        load_delimited(p)
    assert "row 2, column 2" in str(err.value)


def test_missing_label_column_is_config_error(tmp_path):
    p = write(tmp_path, "d.csv", "a,b\n1,2\n")
    with pytest.raises(ConfigError):
        load_delimited(p, label_column="class")
    with pytest.raises(ConfigError):
        load_delimited(p, label_column=5)


def test_empty_and_ragged_files(tmp_path):
    with pytest.raises(DataFormatError):
        load_delimited(write(tmp_path, "e.csv", ""))
    with pytest.raises(DataFormatError):
        load_delimited(write(tmp_path, "h.csv", "a,y\n"))
    with pytest.raises(DataFormatError):
        load_delimited(write(tmp_path, "r.csv", "a,y\n1,1\n2\n"))


def idx_fixture(tmp_path, n=4, labels=(0, 1, 2, 3)):
    images = np.zeros((n, 28, 28), dtype=np.uint8)
    images[0, 0, 0] = 255
    images[1, 27, 27] = 51
    write_idx(tmp_path / "img.idx", images)
    write_idx(tmp_path / "lab.idx", np.array(labels, dtype=np.uint8))
    return tmp_path / "img.idx", tmp_path / "lab.idx"


def test_idx_pair_parity_and_scaling(tmp_path):
    ds = load_idx_pair(*idx_fixture(tmp_path))
    np.testing.assert_array_equal(ds.labels, [1, 0, 1, 0])
    assert ds.features.shape == (4, 784)
    assert ds.features[0, 0] == 1.0
    assert ds.features[1, 783] == pytest.approx(0.2, abs=1e-15)


def test_idx_header_bytes_are_big_endian(tmp_path):
    img, lab = idx_fixture(tmp_path)
    assert img.read_bytes()[:16] == bytes.fromhex("00000803" "00000004" "0000001c" "0000001c")
    assert lab.read_bytes()[:8] == bytes.fromhex("00000801" "00000004")
    assert read_idx(lab, IDX_LABELS_MAGIC).tolist() == [0, 1, 2, 3]


def test_idx_errors(tmp_path):
    img, lab = idx_fixture(tmp_path)
    with pytest.raises(DataFormatError):
        read_idx(img, IDX_LABELS_MAGIC)
    raw = img.read_bytes()
    for cut in (0, 3, 10, len(raw) - 1):
        (tmp_path / "cut.idx").write_bytes(raw[:cut])
        with pytest.raises(DataFormatError):
            read_idx(tmp_path / "cut.idx", IDX_IMAGES_MAGIC)
    write_idx(tmp_path / "lab3.idx", np.array([0, 1, 2], dtype=np.uint8))
    with pytest.raises(DataFormatError):
        load_idx_pair(img, tmp_path / "lab3.idx")


@settings(max_examples=40, deadline=None)
@given(st.binary(max_size=64))
def test_idx_reader_is_total(tmp_path_factory, blob):
    p = tmp_path_factory.mktemp("fuzz") / "f.idx"
    p.write_bytes(blob)
    try:
        read_idx(p, IDX_LABELS_MAGIC)
    except DataFormatError:
        pass


def test_parity_rule():
    np.testing.assert_array_equal(parity_rule(np.arange(10)), [1, 0] * 5)


def test_standardize_examples():
    ds = Dataset(np.array([[1.0, 5.0], [3.0, 5.0]]), np.array([1.0, 0.0]))
    z, mean, sd = standardize(ds)
    np.testing.assert_array_equal(z.features[:, 0], [-1.0, 1.0])
    np.testing.assert_array_equal(z.features[:, 1], [0.0, 0.0])
    np.testing.assert_array_equal(mean, [2.0, 5.0])
    assert sd[0] == 1.0
    with pytest.raises(ConfigError):
        standardize(Dataset(np.ones((1, 2)), np.ones(1)))


def test_standardize_is_idempotent(standardized_synth7):
    again, mean, sd = standardize(standardized_synth7)
    np.testing.assert_allclose(again.features, standardized_synth7.features, atol=1e-12)
    np.testing.assert_allclose(mean, 0.0, atol=1e-12)
    np.testing.assert_allclose(sd, 1.0, atol=1e-12)


def test_dataset_invariants():
    with pytest.raises(DataFormatError):
        Dataset(np.array([[np.inf]]), np.array([1.0]))
    with pytest.raises(DataFormatError):
        Dataset(np.array([[1.0]]), np.array([2.0]))
    with pytest.raises(DataFormatError):
        Dataset(np.zeros((2, 1)), np.zeros(3))
    ds = Dataset(np.zeros((2, 1)), np.zeros(2)).with_intercept()
    np.testing.assert_array_equal(ds.features[:, -1], [1.0, 1.0])


def test_synth_is_deterministic_and_balanced():
    a, b = synth_logistic(5, 51, 3, 2.0), synth_logistic(5, 51, 3, 2.0)
    assert a.features.tobytes() == b.features.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()
    assert a.labels.sum() == 26
    assert a.provenance[0] == "synthetic"
    assert not np.array_equal(a.features, synth_logistic(6, 51, 3, 2.0).features)


def optimum(ds):
    obj = LogisticRegressionObjective.from_dataset(ds)
    res = minimize(obj.value, np.zeros(ds.d), jac=obj.gradient, method="L-BFGS-B", options={"maxiter": 5000})
    return res.fun


def test_synth_separation_controls_loss():
    assert optimum(synth_logistic(1, 200, 5, 10.0)) < 0.1
    assert optimum(synth_logistic(1, 2000, 5, 0.0)) == pytest.approx(math.log(2), abs=0.01)


def test_plus_minus_one_labels_are_remapped(tmp_path):
    p = write(tmp_path, "pm.csv", "a,y\n1,+1\n2,-1\n3,1.0\n4,-1\n")
    np.testing.assert_array_equal(load_delimited(p).labels, [1, 0, 1, 0])
