import json

import numpy as np
import pytest

from quantk.io import dumps
from quantk.suites import (DEFAULT_TRIALS, SUITES, check, index_configurations, run_suite,
                           run_trial, trial_rng)


def test_trial_streams_are_reproducible_and_distinct():
    a = trial_rng(42, "kappa", 3).random(4)
    assert np.array_equal(a, trial_rng(42, "kappa", 3).random(4))
    for other in (trial_rng(43, "kappa", 3), trial_rng(42, "nerve", 3), trial_rng(42, "kappa", 4)):
        assert not np.array_equal(a, other.random(4))


def test_check_records_both_sides():
    c = check("x", 1.0, 2.0)
    assert c == {"name": "x", "lhs": 1.0, "rhs": 2.0, "relation": "<=", "passed": True}
    assert not check("y", 2, 2, "<")["passed"]
    assert check("z", 3, 1, gating=False)["gating"] is False
    with pytest.raises(ValueError):
        check("w", 1, 1, "~")


def test_every_check_carries_numbers_not_bare_booleans():
    for suite in ("filtration", "commutator", "difference", "kappa", "nerve", "pairing-params"):
        for c in run_trial(suite, 5, 0)["checks"]:
            assert {"lhs", "rhs", "relation", "passed"} <= set(c), (suite, c["name"])
            assert not isinstance(c["lhs"], bool) and not isinstance(c["rhs"], bool)


def test_index_configurations_cover_the_grid():
    cfg = index_configurations()
    assert len(cfg) == 15 == DEFAULT_TRIALS["index"] - 1
    assert {s for s, _ in cfg} == {8, 12, 16} and {f for _, f in cfg} == {-2, -1, 0, 1, 2}


@pytest.mark.parametrize("suite", [s for s in SUITES if s != "index"])
def test_small_suite_passes(suite):
    rep = run_suite(suite, seed=42, trials=4)
    assert rep["passed"], rep["failed_trials"]
    assert [r["trial"] for r in rep["results"]] == [0, 1, 2, 3]
    assert "timestamp" not in dumps(rep)


def test_non_gating_checks_do_not_fail_a_trial():
    res = run_trial("difference", 0, 0)
    shown = [c for c in res["checks"] if c.get("gating") is False]
    assert shown and res["passed"]


def test_worker_count_does_not_change_the_report():
    one = run_suite("kappa", seed=9, trials=6, workers=1)
    two = run_suite("kappa", seed=9, trials=6, workers=2)
    assert dumps(one) == dumps(two)


def test_seed_must_fit_in_64_bits():
    with pytest.raises(ValueError):
        run_suite("kappa", seed=2 ** 64, trials=1)


def test_report_round_trips_through_json():
    rep = run_suite("nerve", seed=1, trials=2)
    assert json.loads(dumps(rep))["summary"]


def test_reports_do_not_depend_on_the_hash_seed():
    import os
    import subprocess
    import sys

    code = ("from quantk.suites import run_suite; from quantk.io import dumps; "
            "print(''.join(dumps(run_suite(s, seed=42, trials=20)) for s in "
            "('filtration', 'difference', 'kappa', 'nerve', 'pairing-params')))")
    outs = []
    for h in ("1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=h)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                   text=True, check=True).stdout)
    assert outs[0] == outs[1]
