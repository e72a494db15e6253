#!/usr/bin/env python3
"""Writes the shipped scenarios to data/scenarios/.

Terrain is painted onto a cell grid with a few primitives and stored
run-length encoded. Rerun after editing; the output is deterministic.
"""
import json
import math
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "scenarios"


class Grid:
    def __init__(self, width, height, cell, fill="O"):
        self.w, self.h, self.cell = width, height, cell
        self.f = [[fill] * width for _ in range(height)]
        self.e = [[0.0] * width for _ in range(height)]

    def paint(self, pred, code, overwrite=None):
        for r in range(self.h):
            for c in range(self.w):
                if pred(c, r) and (overwrite is None or self.f[r][c] in overwrite):
                    self.f[r][c] = code

    def line(self, points, code, width=1):
        """Marks cells along a polyline of cell coordinates."""
        for (c0, r0), (c1, r1) in zip(points, points[1:]):
            n = max(abs(c1 - c0), abs(r1 - r0)) * 2 + 1
            for i in range(n + 1):
                c = round(c0 + (c1 - c0) * i / n)
                r = round(r0 + (r1 - r0) * i / n)
                for dc in range(width):
                    if 0 <= c + dc < self.w and 0 <= r < self.h and self.f[r][c + dc] != "W":
                        self.f[r][c + dc] = code

    def shoreline(self):
        marks = []
        for r in range(self.h):
            for c in range(self.w):
                if self.f[r][c] == "W":
                    continue
                near = any(
                    0 <= r + dr < self.h and 0 <= c + dc < self.w and self.f[r + dr][c + dc] == "W"
                    for dr in (-1, 0, 1)
                    for dc in (-1, 0, 1)
                )
                if near:
                    marks.append((r, c))
        for r, c in marks:
            self.f[r][c] = "H"

    def elevate(self, fn):
        for r in range(self.h):
            for c in range(self.w):
                self.e[r][c] = round(fn(c, r), 1)

    def to_json(self):
        def rle(row):
            out, i = [], 0
            while i < len(row):
                j = i
                while j < len(row) and row[j] == row[i]:
                    j += 1
                out.append((str(j - i) if j - i > 1 else "") + row[i])
                i = j
            return "".join(out)

        def erle(row):
            out, i = [], 0
            while i < len(row):
                j = i
                while j < len(row) and row[j] == row[i]:
                    j += 1
                v = f"{row[i]:g}"
                out.append(f"{j - i}*{v}" if j - i > 1 else v)
                i = j
            return " ".join(out)

        return {
            "width": self.w,
            "height": self.h,
            "cell_size_m": self.cell,
            "features": [rle(r) for r in self.f],
            "elevation": [erle(r) for r in self.e],
        }


def cell(c, r, dx=0.0, dy=0.0):
    loc = {"cell": [c, r]}
    if dx or dy:
        loc["offset"] = [dx, dy]
    return loc


def rect(x0, y0, x1, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def rockies():
    g = Grid(120, 100, 10.0)
    # West forest, southern shrubland, open meadow around the last known point.
    g.paint(lambda c, r: c < 31, "F")
    g.paint(lambda c, r: r > 72 and c >= 31, "S")
    # Lake east of the meadow; its ring of neighbours becomes shoreline.
    g.paint(lambda c, r: ((c - 85) / 18) ** 2 + ((r - 45) / 25) ** 2 <= 1.0, "W")
    g.shoreline()
    # Trails leave the trailhead parking lot (the last known point) north-west
    # towards the ridge and south-west towards a ranger cabin.
    g.line([(40, 50), (36, 40), (30, 25), (26, 10), (24, 0)], "T")
    g.line([(40, 50), (30, 65), (18, 80), (12, 88)], "T")
    g.paint(lambda c, r: 38 <= c <= 42 and 50 <= r <= 53, "O")
    g.paint(lambda c, r: 8 <= c <= 11 and 88 <= r <= 91, "B")

    def elev(c, r):
        base = 2400.0 + 0.4 * c + 0.3 * (100 - r)
        if r < 9:
            base += (9 - r) * 4.0  # ridge: 0.4 rise per metre
        return base

    g.elevate(elev)

    lkp = cell(40, 50)
    doc = {
        "schema_version": 1,
        "id": "rockies",
        "name": "Rocky Mountain lake, missing child",
        "seed": 20240611,
        "grid": g.to_json(),
        "profile": {
            "description": "Girl, 7, wearing a red hat, yellow shirt, blue shorts and gym shoes; "
            "carrying a small backpack, a doll and a teddy bear. Not an experienced hiker.",
            "age_group": "child",
            "experience": "novice",
            "life_risk": False,
            "elapsed_min": 60,
            "lkp": lkp,
            "items": [
                {"item": "hat", "color": "red", "aliases": ["cap"]},
                {"item": "shirt", "color": "yellow", "aliases": ["t-shirt"]},
                {"item": "shorts", "color": "blue"},
                {"item": "gym shoes", "color": "", "aliases": ["sneakers"]},
                {"item": "backpack", "color": ""},
                {"item": "doll", "color": ""},
                {"item": "teddy bear", "color": ""},
            ],
        },
        "environment": {"weather": "clear", "daylight": "day"},
        "clues": [
            {
                "id": "clue-doll",
                "location": cell(37, 53, 2.0, -3.0),
                "description": "small doll dropped at the edge of the trailhead lot",
                "image_ref": "images/rockies/doll.jpg",
                "stage1": {"label": "doll", "confidence": "High"},
                "ground_truth_relevant": True,
            },
            {
                "id": "clue-red-cloth",
                "location": cell(29, 50),
                "description": "patch of red between the trees, possibly cloth",
                "image_ref": "images/rockies/red-cloth.jpg",
                "stage1": {"label": "red object", "confidence": "Low"},
                "stage2": {"label": "cloth", "confidence": "Medium"},
                "closeup": {
                    "description": "torn red plastic bag snagged on a branch",
                    "stage1": {"label": "plastic bag", "confidence": "High"},
                },
                "ground_truth_relevant": False,
            },
            {
                "id": "clue-red-hat",
                "location": cell(67, 37),
                "description": "red hat at the water's edge",
                "image_ref": "images/rockies/red-hat.jpg",
                "stage1": {"label": "hat", "confidence": "High"},
                "ground_truth_relevant": True,
            },
            {
                "id": "clue-glasses",
                "location": cell(37, 43),
                "description": "pair of reading glasses on the trail",
                "image_ref": "images/rockies/glasses.jpg",
                "stage1": {"label": "glasses", "confidence": "High"},
                "ground_truth_relevant": False,
            },
            {
                "id": "clue-boots",
                "location": cell(30, 65),
                "description": "old adult hiking boots, weathered",
                "image_ref": "images/rockies/boots.jpg",
                "stage1": {"label": "boots", "confidence": "Medium"},
                "ground_truth_relevant": False,
            },
            {
                "id": "clue-bike",
                "location": cell(22, 75),
                "description": "blue mountain bike leaning on a tree",
                "image_ref": "images/rockies/bike.jpg",
                "stage1": {"label": "bicycle", "confidence": "High"},
                "ground_truth_relevant": False,
            },
        ],
        "person": {
            "location": cell(104, 45),
            "description": "child sitting on the far shore of the lake",
        },
        "envelope": {
            "min_altitude_m": 30,
            "max_altitude_m": 120,
            "max_range_m": 2000,
            "battery_reserve_fraction": 0.2,
            "home": [395.0, 525.0],
            "include": [rect(5, 5, 1195, 995)],
            "exclude": [],
        },
        "agents": {"count": 7},
        "constants": {"preempt_on_switch": True, "ticks_max": 3600},
    }
    return doc


def quarry():
    g = Grid(100, 100, 10.0, fill="S")
    g.paint(lambda c, r: r < 35, "F")
    # Quarry pit: a bowl with steep walls south-east of the last known point.
    pit = lambda c, r: math.hypot(c - 65, r - 65)
    g.paint(lambda c, r: pit(c, r) <= 20, "O")
    g.line([(0, 50), (20, 48), (40, 45), (55, 40), (70, 30), (85, 20), (99, 12)], "T")
    g.line([(40, 45), (42, 60), (45, 75), (48, 99)], "T")
    g.paint(lambda c, r: 8 <= c <= 11 and 52 <= r <= 55, "B")

    def elev(c, r):
        base = 800.0 + 0.2 * c
        d = pit(c, r)
        if d <= 20:
            base -= min(40.0, (20 - d) * 5.0)  # walls drop 0.5 m per metre
        return base

    g.elevate(elev)

    doc = {
        "schema_version": 1,
        "id": "quarry",
        "name": "Quarry rim, overdue hiker",
        "seed": 7,
        "grid": g.to_json(),
        "profile": {
            "description": "Man, 54, experienced hiker, green jacket, black backpack, trekking poles. "
            "Reported a fall by phone before the call dropped.",
            "age_group": "adult",
            "experience": "hiker",
            "life_risk": True,
            "elapsed_min": 120,
            "lkp": cell(40, 46),
            "items": [
                {"item": "jacket", "color": "green"},
                {"item": "backpack", "color": "black"},
                {"item": "trekking pole", "color": "", "aliases": ["pole", "hiking pole"]},
            ],
        },
        "environment": {"weather": "cold", "daylight": "day"},
        "clues": [
            {
                "id": "clue-pole",
                "location": cell(56, 39),
                "description": "trekking pole lying across the trail",
                "image_ref": "images/quarry/pole.jpg",
                "stage1": {"label": "pole", "confidence": "High"},
                "ground_truth_relevant": True,
            },
            {
                "id": "clue-jacket",
                "location": cell(52, 58),
                "description": "green jacket caught on the quarry wall",
                "image_ref": "images/quarry/jacket.jpg",
                "stage1": {"label": "jacket", "confidence": "Medium"},
                "ground_truth_relevant": True,
            },
            {
                "id": "clue-toy",
                "location": cell(25, 48),
                "description": "child's toy truck in the grass",
                "image_ref": "images/quarry/toy.jpg",
                "stage1": {"label": "toy", "confidence": "High"},
                "ground_truth_relevant": False,
            },
            {
                "id": "clue-umbrella",
                "location": cell(42, 70),
                "description": "pink umbrella, faded",
                "image_ref": "images/quarry/umbrella.jpg",
                "stage1": {"label": "umbrella", "confidence": "High"},
                "ground_truth_relevant": False,
            },
            {
                "id": "clue-tire",
                "location": cell(80, 40),
                "description": "old tire dumped near the rim",
                "image_ref": "images/quarry/tire.jpg",
                "stage1": {"label": "tire", "confidence": "Medium"},
                "ground_truth_relevant": False,
            },
        ],
        "person": {"location": cell(49, 62), "description": "adult lying at the foot of the quarry wall"},
        "envelope": {
            "min_altitude_m": 30,
            "max_altitude_m": 120,
            "max_range_m": 1500,
            "battery_reserve_fraction": 0.25,
            "home": [105.0, 455.0],
            "include": [rect(5, 5, 995, 995)],
            "exclude": [rect(600, 600, 760, 760)],
        },
        "airspace": [
            {
                "id": "heliport-approach",
                "polygon": rect(600, 150, 800, 380),
                "restricted": True,
                "note": "hospital heliport approach corridor",
            }
        ],
        "agents": {"count": 4},
        "constants": {"ticks_max": 3600, "miss_probability": 0.05},
    }
    return doc


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for doc in (rockies(), quarry()):
        path = OUT / f"{doc['id']}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
