from __future__ import annotations

import json

import pytest

from sqckit.corpus import FIXTURE_DIR, Fixture, corpus_run, load_fixture, load_fixtures, run_fixture
from sqckit.errors import FixtureParseError
from sqckit.serialize import serialize

IDS = sorted(p.stem for p in FIXTURE_DIR.glob("*.json"))
QUICK = ["ex_6_1", "ex_6_2", "ex_6_3", "ex_6_4", "min_parabolas", "norm_ball_r1", "scale", "rotation"]


def test_corpus_size():
    assert len(IDS) == 20
    assert {"ex_6_1", "ex_6_2", "ex_6_3", "ex_6_4", "min_parabolas"} <= set(IDS)


@pytest.mark.parametrize("fid", IDS)
def test_fixture_parses_and_roundtrips(fid):
    fx = load_fixture(fid)
    raw = json.loads((FIXTURE_DIR / f"{fid}.json").read_text())
    assert json.loads(serialize(fx.expr)) == raw["expr"]


def test_fixture_parse_error():
    with pytest.raises(FixtureParseError):
        Fixture.from_json({"id": "x"})


def test_filter():
    assert [f.id for f in load_fixtures(filter="ex_6")] == ["ex_6_1", "ex_6_2", "ex_6_3", "ex_6_4"]


@pytest.mark.parametrize("fid", QUICK)
def test_quick_fixture_passes(fid):
    res = run_fixture(load_fixture(fid), budget=100_000, seed=0)
    assert res.passed, [c.to_dict() for c in res.checks if not c.passed]


def test_report_has_disclaimer():
    d = corpus_run("norm_ball_r1").to_dict()
    assert "disclaimer" in d


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 7, 42])
def test_full_suite_other_seeds(seed):
    suite = corpus_run(seed=seed)
    bad = {f.id: [c.to_dict() for c in f.checks if not c.passed] for f in suite.fixtures if not f.passed}
    assert suite.passed, bad
