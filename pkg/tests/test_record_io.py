import numpy as np
import pytest

from hardc.errors import InsufficientClass, ParseError
from hardc.record_io import (
    CLASS_NAMES,
    CORPUS_CLASS_COUNTS,
    BeatDataset,
    RawRecord,
    Signal,
    class_code,
    class_name,
    parse_beat_csv,
    parse_raw_record,
    read_beat_csv,
    sniff_segment_len,
    split_indices,
    stratified_split,
    write_beat_csv,
    write_raw_record,
)


def test_class_bijection():
    assert CLASS_NAMES == ("N", "FN", "PVC", "AP", "FVN")
    for code, name in enumerate(CLASS_NAMES):
        assert class_name(code) == name
        assert class_code(name) == code
    with pytest.raises(ValueError):
        class_name(5)


def test_corpus_counts_total():
    assert sum(CORPUS_CLASS_COUNTS) == 109446


def test_parse_single_row():
    ds = parse_beat_csv(b"0.1,0.2,3\n", 2)
    np.testing.assert_array_equal(ds.beats, [[0.1, 0.2]])
    assert ds.labels.tolist() == [3]


def test_parse_empty_input():
    ds = parse_beat_csv(b"", 4)
    assert len(ds) == 0
    assert ds.segment_len == 4


@pytest.mark.parametrize(
    "text, bad_line",
    [
        ("1,2,3,4,5,0\n1,2,3,4,5,1\n1,2,3,4,0\n", 3),  # short row
        ("1,2,3,4,5,0\n1,2,x,4,5,1\n", 2),  # non-numeric sample
        ("1,2,3,4,5,7\n", 1),  # label out of range
        ("1,2,3,4,5,0\n\n1,2,3,4,5,1.5\n", 3),  # fractional label, blank line still counted
        ("1,2,3,4,5,6,0\n", 1),  # long row
        ("1,2,3,4,nan,0\n", 1),
    ],
)
def test_parse_reports_first_bad_line(text, bad_line):
    with pytest.raises(ParseError) as info:
        parse_beat_csv(text.encode(), 5)
    assert info.value.line == bad_line


def test_parse_accepts_float_formatted_labels():
    assert parse_beat_csv("1,2,4.0\n", 2).labels.tolist() == [4]


def test_write_format():
    assert write_beat_csv(BeatDataset.empty(3)) == b""
    out = write_beat_csv(BeatDataset(np.array([[0.5, -1.25]]), [2]))
    assert out == b"0.5,-1.25,2\n"


def test_round_trip_within_1e9(rng):
    # nine significant digits give < 1e-9 absolute error for |v| < 1
    ds = BeatDataset(rng.uniform(-1, 1, (10, 187)), rng.integers(0, 5, 10))
    back = parse_beat_csv(write_beat_csv(ds), 187)
    assert np.abs(back.beats - ds.beats).max() < 1e-9
    np.testing.assert_array_equal(back.labels, ds.labels)


def test_round_trip_relative_precision(rng):
    ds = BeatDataset(rng.standard_normal((10, 360)) * 5, rng.integers(0, 5, 10))
    back = parse_beat_csv(write_beat_csv(ds), 360)
    np.testing.assert_allclose(back.beats, ds.beats, rtol=5e-9, atol=0)


def test_read_and_sniff(tmp_path):
    p = tmp_path / "b.csv"
    p.write_bytes(b"1,2,3,0\n4,5,6,1\n")
    assert sniff_segment_len(p.read_bytes()) == 3
    assert len(read_beat_csv(p, 3)) == 2


def test_raw_record_parse():
    rec = parse_raw_record(b"fs=360\n0.0\n0.1\n", b"1,0\n")
    assert rec.signal.fs == 360
    np.testing.assert_array_equal(rec.signal.samples, [0.0, 0.1])
    assert rec.annotations == [(1, 0)]


@pytest.mark.parametrize(
    "samples, ann",
    [
        (b"fs=360\n0.0\n0.1\n", b"5,0\n"),  # index past the end
        (b"rate=360\n0.0\n", b""),  # bad header
        (b"fs=-1\n0.0\n", b""),
        (b"fs=360\n0.0\n0.1\n0.2\n", b"2,0\n1,0\n"),  # not increasing
        (b"fs=360\n0.0\nabc\n", b""),
        (b"fs=360\n0.0\n0.1\n", b"1,9\n"),
    ],
)
def test_raw_record_errors(samples, ann):
    with pytest.raises(ParseError):
        parse_raw_record(samples, ann)


def test_raw_record_75_seconds():
    x = np.sin(np.arange(27000) / 50.0)
    samples, ann = write_raw_record(RawRecord(Signal(x), [(100, 0), (26999, 4)]))
    rec = parse_raw_record(samples, ann)
    assert len(rec.signal) == 27000
    assert rec.annotations == [(100, 0), (26999, 4)]


def test_stratified_split_80_20():
    labels = np.repeat(np.arange(5), 10)
    ds = BeatDataset(np.arange(50.0)[:, None], labels)
    tr, te = stratified_split(ds, 0.8, seed=0)
    assert tr.class_counts().tolist() == [8] * 5
    assert te.class_counts().tolist() == [2] * 5


def test_stratified_split_two_beats():
    ds = BeatDataset(np.array([[1.0], [2.0]]), [0, 0])
    tr, te = stratified_split(ds, 0.5, seed=3)
    assert (len(tr), len(te)) == (1, 1)


def test_stratified_split_deterministic_and_exhaustive(rng):
    labels = rng.integers(0, 5, 200)
    ds = BeatDataset(rng.standard_normal((200, 4)), labels)
    a = split_indices(ds, 0.7, seed=9)
    b = split_indices(ds, 0.7, seed=9)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    allidx = np.concatenate(a)
    assert sorted(allidx.tolist()) == list(range(200))


def test_stratified_split_needs_two_per_class():
    ds = BeatDataset(np.zeros((3, 2)), [0, 0, 1])
    with pytest.raises(InsufficientClass):
        stratified_split(ds, 0.5, seed=0)


def test_dataset_validation():
    with pytest.raises(ValueError):
        BeatDataset(np.zeros((2, 3)), [0])
    with pytest.raises(ValueError):
        BeatDataset(np.zeros((2, 3)), [0, 1], segment_len=4)
