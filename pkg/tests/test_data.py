import numpy as np
import pytest

from conftest import make_frame, uci_or_skip
from holistic_ml.data import (
    UCI_FEATURES,
    Frame,
    Role,
    SyntheticConfig,
    as_categorical,
    filter_segment,
    generate_synthetic,
    infer_schema,
    load_csv,
    load_uci,
    noiseless_labels,
    one_hot_encode,
    split,
    write_csv,
)
from holistic_ml.errors import DataError


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_two_row_csv(tmp_path):
    path = write(tmp_path, "a,b\n1,2\n3,4\n")
    frame = load_csv(path, {"a": "numeric", "b": "numeric"})
    assert (frame.n_rows, frame.n_cols) == (2, 2)
    assert frame.values("b").tolist() == [2.0, 4.0]


def test_text_in_numeric_column_names_row_and_column(tmp_path):
    path = write(tmp_path, "a,b\n1,2\n3,oops\n")
    with pytest.raises(DataError, match=r"row 2.*'b'"):
        load_csv(path, {"a": "numeric", "b": "numeric"})


def test_missing_file_and_header_mismatch(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_csv(tmp_path / "nope.csv", {"a": "numeric"})
    path = write(tmp_path, "a,b\n1,2\n")
    with pytest.raises(DataError, match="mismatch"):
        load_csv(path, {"a": "numeric", "c": "numeric"})


def test_empty_cell_is_rejected(tmp_path):
    path = write(tmp_path, "a,b\n1,\n")
    with pytest.raises(DataError, match="row 1"):
        load_csv(path, {"a": "numeric", "b": "numeric"})


def test_categorical_codes_follow_first_appearance(tmp_path):
    path = write(tmp_path, "c,y\nb,1\na,0\nb,0\n")
    frame = load_csv(path, {"c": "categorical", "y": "target"})
    assert frame.column("c").levels == ("b", "a")
    assert frame.values("c").tolist() == [0, 1, 0]
    assert frame.target_name == "y"


def test_target_must_be_binary(tmp_path):
    path = write(tmp_path, "a,y\n1,2\n")
    with pytest.raises(DataError, match="0 or 1"):
        load_csv(path, {"a": "numeric", "y": "target"})


def test_skip_columns_and_infer_schema(tmp_path):
    path = write(tmp_path, "ID,a,c,y\n1,0.5,x,1\n2,1.5,y,0\n")
    schema = infer_schema(path, target="y", categorical=["c"], skip=["ID"])
    frame = load_csv(path, schema)
    assert frame.names == ["a", "c", "y"]
    assert frame.column("c").role is Role.CATEGORICAL
    with pytest.raises(DataError, match="not found"):
        infer_schema(path, target="label")


def test_csv_round_trip(tmp_path):
    frame = make_frame(target="y", categorical={"c": ["u", "v"]}, a=[0.1, 2.5], c=["v", "u"], y=[1, 0])
    path = tmp_path / "out.csv"
    write_csv(frame, path)
    back = load_csv(path, {"a": "numeric", "c": "categorical", "y": "target"})
    assert back.values("a").tolist() == [0.1, 2.5]
    assert back.decoded("c") == ["v", "u"]


def test_frame_is_immutable():
    frame = make_frame(a=[1.0, 2.0])
    with pytest.raises(ValueError):
        frame.values("a")[0] = 5.0


def test_frame_rejects_ragged_and_bad_codes():
    from holistic_ml.data import Column

    with pytest.raises(DataError):
        Frame([Column("a", Role.NUMERIC), Column("b", Role.NUMERIC)], {"a": [1, 2], "b": [1]})
    with pytest.raises(DataError):
        Frame([Column("c", Role.CATEGORICAL, ("x",))], {"c": [0, 1]})


def test_synthetic_examples_from_the_signal():
    frame = make_frame(**{f"X_num{i}": [0.0, 0.0] for i in range(1, 10)})
    frame = frame.with_values("X_num1", np.array([1.0, 0.0])).with_values("X_num4", np.array([1.0, 0.0]))
    assert noiseless_labels(frame).tolist() == [1.0, 0.0]


def test_synthetic_noise_rate_and_determinism():
    cfg = SyntheticConfig(10_000, seed=3, noise_rate=0.15)
    a, b = generate_synthetic(cfg), generate_synthetic(cfg)
    assert a.equals(b)
    flipped = np.mean(a.target != noiseless_labels(a))
    assert 0.13 <= flipped <= 0.17
    assert a.names == [f"X_num{i}" for i in range(1, 10)] + ["label"]


def test_synthetic_noise_free_labels_match_rule():
    frame = generate_synthetic(SyntheticConfig(2000, seed=5, noise_rate=0.0))
    assert np.array_equal(frame.target, noiseless_labels(frame))


def test_synthetic_config_validation():
    with pytest.raises(DataError):
        generate_synthetic(SyntheticConfig(10, n_features=8))
    with pytest.raises(DataError):
        generate_synthetic(SyntheticConfig(10, noise_rate=1.5))


def test_split_sizes_and_determinism():
    frame = make_frame(a=np.arange(100.0))
    train, valid = split(frame, 0.3, seed=1)
    assert (train.n_rows, valid.n_rows) == (70, 30)
    again = split(frame, 0.3, seed=1)
    assert train.equals(again[0]) and valid.equals(again[1])
    assert sorted(train.values("a").tolist() + valid.values("a").tolist()) == list(np.arange(100.0))


def test_split_errors():
    with pytest.raises(DataError):
        split(make_frame(a=[]), 0.3, 0)
    with pytest.raises(DataError):
        split(make_frame(a=[1.0, 2.0]), 1.0, 0)


def test_one_hot_levels_and_partition():
    frame = make_frame(PAY_0=[2, 3, 4, 3, 2])
    encoded = one_hot_encode(as_categorical(frame, ["PAY_0"]), ["PAY_0"])
    assert encoded.names == ["PAY_0 == 2", "PAY_0 == 3", "PAY_0 == 4"]
    assert encoded.matrix().sum(axis=1).tolist() == [1.0] * 5
    with pytest.raises(DataError, match="not categorical"):
        one_hot_encode(frame, ["PAY_0"])
    with pytest.raises(DataError):
        one_hot_encode(frame, ["missing"])


def test_filter_segment_cases():
    frame = make_frame(PAY_0=[-1, 0, 2, 3], y=[0, 0, 1, 1], target="y")
    assert filter_segment(frame, "PAY_0 > -5").equals(frame)
    assert filter_segment(frame, "PAY_0 > 1").values("PAY_0").tolist() == [2.0, 3.0]
    assert filter_segment(frame, "PAY_0>=3").n_rows == 1
    assert filter_segment(frame, "PAY_0 > 10").n_rows == 0
    with pytest.raises(DataError):
        filter_segment(frame, "PAY_0 ~ 1")
    with pytest.raises(DataError):
        filter_segment(frame, "nope > 1")


def test_filter_segment_on_categorical_levels():
    frame = make_frame(categorical={"c": ["1", "2", "7"]}, c=["7", "1", "2"])
    assert filter_segment(frame, "c > 1").decoded("c") == ["7", "2"]


@pytest.mark.uci
def test_uci_shape():
    path = uci_or_skip()
    frame = load_uci(path)
    assert frame.n_rows == 30000
    assert len(frame.feature_names) == 23
    assert all(n in frame for n in UCI_FEATURES)
