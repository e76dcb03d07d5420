import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bellsim.detection import (MASKED, DetectorModel, conditional_table, dark_count_convolve, decode_pattern,
                               encode_patterns, lookup_keys, model_map, model_map_array, modes_per_word,
                               reported_total, sort_keys)

MODELS = list(DetectorModel)


def _oracle(phi, eta, xi, model):
    """Per mode: binomial thinning then an independent dark count, then the model map."""
    per_mode = []
    for n in phi:
        dist = {}
        for k in range(n + 1):
            pk = math.comb(n, k) * eta ** k * (1 - eta) ** (n - k)
            dist[k] = dist.get(k, 0.0) + pk * (1 - xi)
            dist[k + 1] = dist.get(k + 1, 0.0) + pk * xi
        per_mode.append(dist)
    out = {}
    for combo in itertools.product(*[d.items() for d in per_mode]):
        raw = tuple(c[0] for c in combo)
        p = math.prod(c[1] for c in combo)
        rep = model_map(raw, model)
        out[rep] = out.get(rep, 0.0) + p
    return out


@pytest.mark.parametrize("raw,model,expected", [
    ((2, 1, 0, 3), "PNRD", (2, 1, 0, 3)),
    ((2, 1, 0, 3), "BD", (1, 1, 0, 1)),
    ((2, 1, 0, 3), "SlowPNRD", (2, MASKED, 0, 3)),
    ((2, 1, 0, 3), "SlowBD", (1, MASKED, 0, 1)),
    ((0, 0, 1, 0), "SlowBD", (0, 0, 1, MASKED)),
])
def test_model_map_examples(raw, model, expected):
    assert model_map(raw, model) == expected
    assert tuple(model_map_array(np.array([raw]), model)[0]) == expected


def test_parse_model_names():
    assert DetectorModel.parse("slow_pnrd") is DetectorModel.SLOW_PNRD
    assert DetectorModel.parse("SlowBD") is DetectorModel.SLOW_BD
    assert DetectorModel.parse(1) is DetectorModel.BD
    with pytest.raises(ValueError):
        DetectorModel.parse("fast")


phis = st.lists(st.integers(0, 3), min_size=2, max_size=6).filter(lambda v: len(v) % 2 == 0)


@given(phis, st.floats(0, 1), st.floats(0, 0.5), st.sampled_from(MODELS))
def test_povm_completeness(phi, eta, xi, model):
    table = conditional_table(phi, eta, xi, model)
    assert sum(table.values()) == pytest.approx(1.0, abs=1e-10)


@given(phis, st.floats(0, 1), st.floats(0, 0.5), st.sampled_from(MODELS))
def test_conditional_table_matches_oracle(phi, eta, xi, model):
    table = conditional_table(phi, eta, xi, model)
    oracle = _oracle(phi, eta, xi, model)
    for key in set(table) | set(oracle):
        assert table.get(key, 0.0) == pytest.approx(oracle.get(key, 0.0), abs=1e-12)


def test_ideal_detectors_are_deterministic():
    assert conditional_table((1, 0, 2, 1), 1.0, 0.0, "SlowPNRD") == {(1, MASKED, 2, MASKED): 1.0}


def test_dark_count_convolve_mass():
    d = dark_count_convolve({(0, 1): 0.25, (1, 0): 0.75}, 0.1)
    assert sum(d.values()) == pytest.approx(1.0)
    assert d[(1, 2)] == pytest.approx(0.25 * 0.1 * 0.1)
    with pytest.raises(ValueError):
        dark_count_convolve({(0,): 1.0}, 1.0)


@given(st.lists(st.lists(st.integers(-1, 5), min_size=40, max_size=40), min_size=1, max_size=20))
def test_key_roundtrip_and_order(rows):
    arr = np.array(rows)
    radix = 7
    keys = encode_patterns(arr, radix)
    assert keys.shape == (len(rows), -(-40 // modes_per_word(radix)))
    for row, key in zip(rows, keys):
        assert decode_pattern(key, radix, 40) == tuple(row)
    # lexicographic key order equals reversed-digit order of the patterns
    skeys, vals = sort_keys(keys, np.arange(len(rows)))
    found = lookup_keys(skeys, vals, keys)
    assert all(tuple(arr[f]) == tuple(r) for f, r in zip(found, rows))


def test_lookup_missing():
    keys = encode_patterns(np.array([[0, 1], [1, 0]]), 4)
    skeys, vals = sort_keys(keys, np.array([5, 6]))
    q = encode_patterns(np.array([[1, 1], [1, 0]]), 4)
    assert list(lookup_keys(skeys, vals, q)) == [-1, 6]


def test_encode_rejects_out_of_range():
    with pytest.raises(ValueError):
        encode_patterns(np.array([[5]]), 4)


def test_reported_total_ignores_masked():
    assert reported_total((2, MASKED, 0, 1)) == 3
