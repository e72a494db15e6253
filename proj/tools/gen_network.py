#!/usr/bin/env python3
"""Writes data/network/default_network.json.

Strategy weights are hand-authored from lost-person behaviour orderings:
children stay near the last known point, adult hikers keep to trails and
contours, elderly subjects favour trails and nearby shelter, and bad weather
or darkness pushes everyone towards shelter.
"""
import itertools
import json
import pathlib

STRATEGIES = ["trail", "shelter", "waterways", "contour", "region"]
AGE = ["child", "adult", "elderly"]
EXPERIENCE = ["hiker", "novice"]
WEATHER = ["clear", "rain", "cold"]
DAYLIGHT = ["day", "night"]

BASE = {
    "child": dict(trail=1.5, shelter=1.2, waterways=2.0, contour=0.3, region=6.0),
    "adult": dict(trail=4.0, shelter=1.0, waterways=1.5, contour=3.0, region=1.5),
    "elderly": dict(trail=3.0, shelter=2.0, waterways=1.0, contour=0.5, region=3.0),
}
EXPERIENCE_MULT = {"hiker": dict(trail=1.5, contour=1.5), "novice": dict(region=1.2, shelter=1.2)}
WEATHER_MULT = {"clear": {}, "rain": dict(shelter=2.0), "cold": dict(shelter=2.5)}
DAYLIGHT_MULT = {"day": {}, "night": dict(shelter=2.0, trail=0.8)}

# P(feature present | strategy): the strategy a subject follows makes its
# terrain feature more likely to be reported near the search area.
EVIDENCE = {
    "trails_present": dict(trail=0.95, shelter=0.6, waterways=0.5, contour=0.6, region=0.6),
    "water_present": dict(trail=0.4, shelter=0.4, waterways=0.95, contour=0.4, region=0.4),
    "shelter_present": dict(trail=0.4, shelter=0.9, waterways=0.4, contour=0.4, region=0.4),
    "steep_terrain": dict(trail=0.4, shelter=0.4, waterways=0.4, contour=0.85, region=0.4),
}


def strategy_row(age, exp, weather, daylight):
    w = dict(BASE[age])
    for mult in (EXPERIENCE_MULT[exp], WEATHER_MULT[weather], DAYLIGHT_MULT[daylight]):
        for k, v in mult.items():
            w[k] *= v
    total = sum(w.values())
    row = [round(w[s] / total, 12) for s in STRATEGIES]
    row[-1] = round(1.0 - sum(row[:-1]), 12)
    return row


def build():
    nodes = [
        {"id": "age_group", "states": AGE, "group": "profile"},
        {"id": "experience", "states": EXPERIENCE, "group": "profile"},
        {"id": "weather", "states": WEATHER, "group": "environment"},
        {"id": "daylight", "states": DAYLIGHT, "group": "environment"},
        {"id": "strategy", "states": STRATEGIES, "group": "strategy"},
    ]
    nodes += [{"id": e, "states": ["yes", "no"], "group": "evidence"} for e in EVIDENCE]
    parents = ["age_group", "experience", "weather", "daylight"]
    edges = [[p, "strategy"] for p in parents] + [["strategy", e] for e in EVIDENCE]
    cpts = {
        "age_group": {"": [0.3, 0.5, 0.2]},
        "experience": {"": [0.5, 0.5]},
        "weather": {"": [0.6, 0.25, 0.15]},
        "daylight": {"": [0.7, 0.3]},
    }
    cpts["strategy"] = {
        "|".join(combo): strategy_row(*combo) for combo in itertools.product(AGE, EXPERIENCE, WEATHER, DAYLIGHT)
    }
    for e, table in EVIDENCE.items():
        cpts[e] = {s: [table[s], round(1.0 - table[s], 12)] for s in STRATEGIES}
    return {"schema_version": 1, "name": "default-lost-person", "nodes": nodes, "edges": edges, "cpts": cpts}


if __name__ == "__main__":
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "network" / "default_network.json"
    out.write_text(json.dumps(build(), indent=1) + "\n")
    print(f"wrote {out}")
