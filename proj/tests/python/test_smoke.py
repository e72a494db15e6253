import math

import pytest

import sarguard


def close(a, b, tol=1e-12):
    return abs(a - b) < tol


LOW = {"trail": 0.10, "shelter": 0.08, "waterways": 0.12, "contour": 0.05, "region": 0.65}
HIGH = {"trail": 0.22, "shelter": 0.21, "waterways": 0.22, "contour": 0.12, "region": 0.23}


def test_shipped_network_favours_region_for_a_child():
    post = sarguard.infer({"age_group": "child"})
    assert set(post) == set(sarguard.STRATEGIES)
    assert close(sum(post.values()), 1.0, 1e-9)
    assert max(post, key=post.get) == "region"


def test_update_from_uniform():
    uniform = {s: 0.2 for s in sarguard.STRATEGIES}
    out = sarguard.update(uniform, "waterways", 0.8)
    assert close(out["waterways"], 0.36 / 1.16)
    assert close(out["trail"], 0.2 / 1.16)


def test_alpha():
    assert close(sarguard.alpha("High", "High", "High"), 0.8)
    assert close(sarguard.alpha("Medium", "High", "Low"), 0.425)
    assert close(sarguard.alpha("Medium", "Low", "Low", lam=1.0), 0.4)


def test_entropy_and_verdicts():
    # Independent evaluation of the normalized entropy.
    h = -sum(p * math.log2(p) for p in LOW.values()) / math.log2(5)
    assert close(sarguard.entropy(LOW), h)
    assert sarguard.verdict(LOW, "region", "region")["decision"] == "Autonomous"
    assert sarguard.verdict(LOW, "region", "trail")["decision"] == "RequiresApproval"
    assert sarguard.verdict(HIGH, "region", "contour")["decision"] == "RequiresApproval"
    assert sarguard.verdict(HIGH, "region", "shelter")["decision"] == "AutonomousNotify"


def test_errors_carry_codes():
    with pytest.raises(sarguard.SarError) as e:
        sarguard.alpha("Extreme", "High", "High")
    assert e.value.code == "validation"
    with pytest.raises(sarguard.SarError) as e:
        sarguard.update({"trail": 1.0}, "nowhere", 0.1)
    assert e.value.code == "validation"
    with pytest.raises(sarguard.SarError) as e:
        sarguard.snapshot("not json", 0)
    assert e.value.code == "parse"
    assert not sarguard.verify("")["ok"]
    with pytest.raises(sarguard.SarError) as e:
        sarguard.run(sarguard.scenario_path("atlantis"))
    assert e.value.code == "io"


def test_rockies_mission_round_trip():
    run = sarguard.run(sarguard.scenario_path("rockies"), "always-approve")
    assert run.outcome == "found"
    assert max(run.summary["belief"], key=run.summary["belief"].get) == "waterways"
    assert sarguard.verify(run.replay)["ok"]

    again = sarguard.run(sarguard.scenario_path("rockies"), "always-approve")
    assert again.replay == run.replay

    rows = sarguard.plot_csv(run.replay).splitlines()
    updates = [e for e in run.events if e["kind"] == "belief_update"]
    assert len(rows) == len(updates) + 2
    assert sarguard.snapshot(run.replay, 1)["dominant"] == "region"


def test_rejecting_operator_blocks_clue_updates():
    run = sarguard.run(sarguard.scenario_path("rockies"), "always-reject", ticks_max=600)
    positives = [e for e in run.events
                 if e["kind"] == "belief_update" and e["data"]["kind"] == "positive" and e["data"]["source"] == "pipeline"]
    assert positives == []


def test_config_overrides_apply():
    run = sarguard.run(sarguard.scenario_path("quarry"), "always-approve", seed=3,
                       config={"constants": {"ticks_max": 40}}, mission_id="q-short")
    assert run.outcome in ("exhausted", "found")
    assert run.events[0]["data"]["mission_id"] == "q-short"
    assert run.events[-1]["tick"] <= 40
