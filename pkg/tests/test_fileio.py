import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsdkit.fileio import (ChainFileError, dumps_report, format_chain, load_schema,
                           parse_chain, read_chain)
from qsdkit.fixtures import NAMED, random_reducible


CHAIN_A = """qsd-chain v1 d=2
# chain A
0 0 0.5
1 0 0.3
1 1 0.5
"""


def test_parse_chain_A():
    ch = parse_chain(CHAIN_A)
    assert ch.dense().tolist() == [[0.5, 0.0], [0.3, 0.5]]


@pytest.mark.parametrize("name", sorted(NAMED))
def test_format_parse_round_trip(name):
    ch = NAMED[name]()
    back = parse_chain(format_chain(ch))
    assert np.array_equal(back.dense(), ch.dense())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 5000))
def test_round_trip_random(seed):
    ch, _ = random_reducible(1, seed)
    assert np.array_equal(parse_chain(format_chain(ch)).dense(), ch.dense())


def test_duplicates_are_summed_with_warning():
    with pytest.warns(UserWarning, match="duplicate"):
        ch = parse_chain("qsd-chain v1 d=1\n0 0 0.2\n0 0 0.3\n")
    assert ch.dense()[0, 0] == pytest.approx(0.5)


def test_weights():
    ch = parse_chain(CHAIN_A + "weight 1 3.5\n")
    assert ch.weight.tolist() == [1.0, 3.5]
    with pytest.raises(ChainFileError, match=">= 1"):
        parse_chain(CHAIN_A + "weight 1 0.5\n")


@pytest.mark.parametrize("text, where", [
    ("0 0 0.5\n", ":1:"),
    ("qsd-chain v1 d=2\n0 0 half\n", ":2:"),
    ("qsd-chain v1 d=2\n0 5 0.1\n", ":2:"),
    ("qsd-chain v1 d=2\n0 0 0.5\n1 0 0.8\n1 1 0.5\n", "row 1 sums to"),
    ("# nothing\n", "missing header"),
])
def test_errors_name_the_location(text, where):
    with pytest.raises(ChainFileError, match=where):
        parse_chain(text, "f.chain")


def test_read_missing_file(tmp_path):
    with pytest.raises(ChainFileError, match="cannot read"):
        read_chain(tmp_path / "nope.chain")


def test_report_is_deterministic_and_exact():
    rep = {"b": [0.1, float("inf")], "a": np.array([1 / 3]), "c": np.int64(2)}
    text = dumps_report(rep)
    assert text == dumps_report(rep)
    back = json.loads(text)
    assert list(back) == ["a", "b", "c"]
    assert back["a"][0] == 1 / 3
    assert back["b"][1] == "inf"


def test_schema_is_valid_json_schema():
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.Draft202012Validator.check_schema(load_schema())
