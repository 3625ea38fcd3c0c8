from __future__ import annotations

import math

import jsonschema
import numpy as np
import pytest

from mengerlab import reduction as rd
from mengerlab.errors import InputError, PreconditionError
from mengerlab.report import LevelRecord, ScaleReport, blowup_fit, load_schema, verdict_for


def report(values, base=10.0, pred=None, start=1):
    recs = [LevelRecord(start + i, float(v), 1) for i, v in enumerate(values)]
    return ScaleReport("synthetic", base, recs, predicted_exponent=pred)


def test_exact_power_law():
    k = np.arange(1, 7)
    fitted, pred, gap = blowup_fit(report(3.0 * 10.0 ** (k * 0.37), pred=0.4))
    assert fitted == pytest.approx(0.37, abs=1e-12)
    assert gap == pytest.approx(0.03 / 0.4)


def test_constant_sums():
    fitted, _, gap = blowup_fit(report([2.5] * 6, pred=0.0))
    assert fitted == pytest.approx(0.0, abs=1e-12)
    assert gap == pytest.approx(0.0, abs=1e-12)


def test_noisy_synthetic():
    rng = np.random.default_rng(0)
    for s in (-1.0, 0.0, 0.5):
        k = np.arange(1, 7)
        v = 10.0 ** (k * s) * rng.uniform(0.9, 1.1, k.size)
        assert blowup_fit(report(v))[0] == pytest.approx(s, abs=0.05)


def test_nonpositive_excluded_and_too_few():
    fitted, _, _ = blowup_fit(report([0.0, 10.0, 100.0, 1000.0, -1.0]))
    assert fitted == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        blowup_fit(report([1.0, 0.0, 2.0, 0.0]))


def test_verdict():
    assert verdict_for(0.0) == "DIVERGENT"
    assert verdict_for(-0.04) == "DIVERGENT"
    assert verdict_for(-0.2) == "CONVERGENT"


def test_report_serialisation_and_schema():
    rep = report([1.0, 2.0, 4.0], base=2.0, pred=1.0).refit()
    rep.verdict = verdict_for(rep.fitted_exponent)
    d = rep.to_dict()
    assert d["schema_version"] == "1.0" and d["total"] == 7.0
    assert [l["cumulative"] for l in d["levels"]] == [1.0, 3.0, 7.0]
    schema = load_schema()
    jsonschema.validate(d, schema)
    jsonschema.validate(d, {**schema, "$ref": "#/$defs/scale_report"})
    csv = rep.to_csv().splitlines()
    assert csv[0] == "level,cells,sum,cumulative,fitted,predicted"
    assert csv[3].split(",")[3] == "7.0"


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv(rd.THREADS_ENV, raising=False)
    assert rd.resolve_threads() == 1
    monkeypatch.setenv(rd.THREADS_ENV, "2")
    assert rd.resolve_threads() == min(2, rd.os.cpu_count() or 1)
    assert rd.resolve_threads(1) == 1
    monkeypatch.setenv(rd.THREADS_ENV, "zero")
    with pytest.raises(InputError):
        rd.resolve_threads()


def test_ordered_map_order_and_sum():
    items = list(range(50))
    out = rd.ordered_map(lambda i: i * i, items, threads=4)
    assert out == [i * i for i in items]
    vals = [1e16, 1.0, -1e16, 1.0]
    assert rd.ordered_sum(vals) == 2.0


def test_item_rng_independent_of_order():
    a = rd.item_rng(5, 3, 1).random(4)
    rd.item_rng(5, 2, 0).random(10)
    b = rd.item_rng(5, 3, 1).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, rd.item_rng(5, 1, 3).random(4))


def test_blocks():
    bl = rd.blocks(10, 4)
    assert [list(b) for b in bl] == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]
