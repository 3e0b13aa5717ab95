"""Generate the bundled occupancy telemetry CSV.

Synthesizes an office-room sensor trace at a 2-minute cadence: bright
occupied working hours, dark evenings with occasional occupied stretches
(split between a humid subgroup and a high-CO2 subgroup), empty nights and
weekends with residual CO2 decay, and two high-CO2 meeting episodes. Label
noise is injected at fixed per-group rates so rule accuracy lands in the
mid-90s rather than at an implausible 100%.

The script asserts every property downstream code relies on (row count,
boundary values, induced split thresholds, class-noise counts, episode
shape, humidity tail count) before writing, so a bad edit fails here and
not in the test suite. Run from the repository root:

    python3 tools/make_dataset.py
"""

from __future__ import annotations

import random
import sys
from datetime import datetime, timedelta
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sensorcep.ingest import SensorRecord, load_csv, write_csv
from sensorcep.rules import induce_tree, Split

OUT = Path(__file__).resolve().parent.parent / "src" / "sensorcep" / "data" / "occupancy.csv"

N_ROWS = 8143
START = datetime(2015, 2, 2, 0, 0, 0)
STEP = timedelta(minutes=2)
SEED = 20150202

EP1_LO = datetime(2015, 2, 3, 16, 30)
EP1_HI = datetime(2015, 2, 3, 17, 30)
EP2_LO = datetime(2015, 2, 12, 18, 30)
EP2_HI = datetime(2015, 2, 12, 20, 15)

HUMIDITY_TAIL_TARGET = 5454  # rows with humidity strictly above 30

# boundary values planted so the induced split midpoints are exact
LIGHT_LO_EDGE = 364.25   # brightest dark row
LIGHT_HI_EDGE = 366.0    # dimmest bright row -> midpoint 365.125
HUM_LO_EDGE = 37.5       # most humid dry row
HUM_HI_EDGE = 37.686     # driest humid row -> midpoint 37.593
CO2_LO_EDGE = 450.666    # highest low-CO2 row
CO2_HI_EDGE = 462.0      # lowest high-CO2 row -> midpoint 456.333

NOISE = {"BRIGHT": 0.03, "HUMID": 0.20, "STUFFY": 0.12, "EMPTY": 0.004}


def humidity_ratio(temp_c: float, rel_humidity: float) -> float:
    """Mass mixing ratio from temperature and relative humidity (Magnus)."""
    import math

    saturation = 610.94 * math.exp(17.625 * temp_c / (temp_c + 243.04))
    partial = rel_humidity / 100.0 * saturation
    return round(0.622 * partial / (101325.0 - partial), 6)


def pick_group(rng: random.Random, ts: datetime) -> str:
    if EP1_LO <= ts <= EP1_HI or EP2_LO <= ts <= EP2_HI:
        return "EPISODE"
    workday = ts.weekday() < 5
    if workday and 8 <= ts.hour < 18:
        r = rng.random()
        return "BRIGHT" if r < 0.73 else ("STUFFY" if r < 0.775 else "EMPTY")
    if workday and 18 <= ts.hour < 23:
        r = rng.random()
        return "HUMID" if r < 0.105 else ("STUFFY" if r < 0.16 else "EMPTY")
    return "STUFFY" if rng.random() < 0.03 else "EMPTY"


def dark_light(rng: random.Random) -> float:
    return 0.0 if rng.random() < 0.7 else round(rng.uniform(1.0, 364.24), 2)


def make_rows():
    rng = random.Random(SEED)
    rows = []
    for i in range(N_ROWS):
        ts = START + i * STEP
        group = pick_group(rng, ts)
        day = ts.weekday() < 5 and 8 <= ts.hour < 18
        temp = round(rng.uniform(20.5, 24.5), 2) if (day or group == "EPISODE") \
            else round(rng.uniform(19.0, 20.5), 2)
        if group == "BRIGHT":
            light = round(rng.uniform(366.01, 690.0), 2)
            hum = round(rng.uniform(26.0, 37.4), 4)
            co2 = round(rng.uniform(430.0, 1280.0), 2)
            occ = 1
        elif group == "HUMID":
            light = dark_light(rng)
            hum = round(rng.uniform(37.686, 39.5), 4)
            co2 = round(rng.uniform(462.1, 1100.0), 2)
            occ = 1
        elif group == "STUFFY":
            light = dark_light(rng)
            hum = round(rng.uniform(26.0, 37.4), 4)
            co2 = round(rng.uniform(462.1, 1280.0), 2)
            occ = 1
        elif group == "EMPTY":
            light = dark_light(rng)
            hum = round(rng.uniform(26.0, 37.4), 4)
            co2 = round(rng.uniform(395.0, 450.6), 2) if rng.random() < 0.88 \
                else round(rng.uniform(462.1, 1050.0), 2)
            occ = 0
        else:  # EPISODE: occupied meeting, lights on, CO2 well above normal
            light = round(rng.uniform(366.01, 690.0), 2)
            hum = round(rng.uniform(26.0, 37.4), 4)
            co2 = round(rng.uniform(1350.0, 1390.0), 2)
            occ = 1
        rows.append({"ts": ts, "group": group, "temp": temp, "hum": hum,
                     "light": light, "co2": co2, "occ": occ, "planted": False})
    return rows, rng


def plant_boundaries(rows, rng):
    """Pin the exact values the split midpoints are computed from."""
    by_group = {}
    for i, row in enumerate(rows):
        by_group.setdefault(row["group"], []).append(i)

    def take(group):
        idx = rng.choice([i for i in by_group[group] if not rows[i]["planted"]])
        rows[idx]["planted"] = True
        return rows[idx]

    take("BRIGHT")["light"] = LIGHT_HI_EDGE
    take("EMPTY")["light"] = LIGHT_LO_EDGE

    row = take("EMPTY")
    row["hum"] = HUM_LO_EDGE
    if row["co2"] > CO2_LO_EDGE:          # keep it on the low-CO2 side
        row["co2"] = round(rng.uniform(395.0, 450.6), 2)

    row = take("EMPTY")
    if row["co2"] > CO2_LO_EDGE:
        row["co2"] = round(rng.uniform(395.0, 450.6), 2)
    row["co2"] = CO2_LO_EDGE

    take("STUFFY")["co2"] = CO2_HI_EDGE

    # a humid row on the low-CO2 side pins the humidity split in that branch;
    # a few more make the subgroup visible to induction
    row = take("HUMID")
    row["hum"] = HUM_HI_EDGE
    row["co2"] = 430.0
    for _ in range(6):
        take("HUMID")["co2"] = round(rng.uniform(420.0, 450.6), 2)

    # the observed meeting-room peaks
    ep2 = [i for i in by_group["EPISODE"] if rows[i]["ts"] >= EP2_LO]
    for idx, value in zip(ep2[:3], (1355.75, 1389.66, 1385.19)):
        rows[idx]["co2"] = value
        rows[idx]["planted"] = True


def inject_label_noise(rows, rng):
    flipped = 0
    for group, rate in NOISE.items():
        pool = [i for i, r in enumerate(rows)
                if r["group"] == group and not r["planted"]]
        k = round(rate * len(pool))
        for i in rng.sample(pool, k):
            rows[i]["occ"] = 1 - rows[i]["occ"]
            flipped += 1
    return flipped


def pin_humidity_tail(rows, rng):
    """Redraw non-planted humidities until exactly the target count sits
    strictly above 30."""
    count = sum(1 for r in rows if r["hum"] > 30.0)
    movable_up = [i for i, r in enumerate(rows)
                  if not r["planted"] and r["group"] != "HUMID" and r["hum"] <= 29.95]
    movable_down = [i for i, r in enumerate(rows)
                    if not r["planted"] and r["group"] != "HUMID"
                    and 30.05 <= r["hum"] <= 37.4]
    if count < HUMIDITY_TAIL_TARGET:
        for i in rng.sample(movable_up, HUMIDITY_TAIL_TARGET - count):
            rows[i]["hum"] = round(rng.uniform(30.05, 37.4), 4)
    elif count > HUMIDITY_TAIL_TARGET:
        for i in rng.sample(movable_down, count - HUMIDITY_TAIL_TARGET):
            rows[i]["hum"] = round(rng.uniform(26.0, 29.95), 4)


def to_records(rows):
    records = []
    for i, row in enumerate(rows, start=1):
        records.append(SensorRecord(
            row_id=str(i),
            timestamp=row["ts"],
            temperature=row["temp"],
            humidity=row["hum"],
            light=row["light"],
            co2=row["co2"],
            humidity_ratio=humidity_ratio(row["temp"], row["hum"]),
            occupancy=row["occ"],
        ))
    return records


def collect_splits(tree):
    found = []

    def walk(node):
        if isinstance(node, Split):
            found.append((node.feature, node.threshold))
            walk(node.left)
            walk(node.right)

    walk(tree.root)
    return found


def verify(records):
    assert len(records) == N_ROWS
    assert all(not r.violations() for r in records), "invalid rows generated"
    assert sum(1 for r in records if r.humidity > 30.0) == HUMIDITY_TAIL_TARGET

    lights_dark = [r.light for r in records if r.light <= 365.125]
    lights_bright = [r.light for r in records if r.light > 365.125]
    assert max(lights_dark) == LIGHT_LO_EDGE and min(lights_bright) == LIGHT_HI_EDGE

    # the co2 split is induced inside the dark branch; only dark rows must
    # keep the boundary gap clean
    gap = [r.co2 for r in records
           if r.light <= 365.125 and CO2_LO_EDGE < r.co2 < CO2_HI_EDGE]
    assert not gap, f"dark-row CO2 values inside the boundary gap: {gap[:5]}"

    episode = [r for r in records
               if EP1_LO <= r.timestamp <= EP1_HI or EP2_LO <= r.timestamp <= EP2_HI]
    rest = [r for r in records if r not in episode]
    assert all(r.co2 > 1300.0 for r in episode) and len(episode) >= 80
    assert max(r.co2 for r in rest) <= 1280.0
    assert max(r.temperature for r in records) <= 28.0
    assert max(r.humidity for r in records) <= 40.0

    tree = induce_tree(records, features=("light", "humidity", "co2"))
    assert isinstance(tree.root, Split) and tree.root.feature == "light", \
        f"root split is {tree.root.feature}"
    assert abs(tree.root.threshold - 365.125) < 1e-9, tree.root.threshold
    splits = collect_splits(tree)
    hum_splits = [t for f, t in splits if f == "humidity" and abs(t - 37.593) <= 1.0]
    co2_splits = [t for f, t in splits if f == "co2" and abs(t - 456.333) <= 10.0]
    assert hum_splits, f"no humidity split near 37.593 in {splits}"
    assert co2_splits, f"no co2 split near 456.333 in {splits}"

    correct = sum(1 for r in records if tree.predict(r) == r.occupancy)
    accuracy = correct / len(records)
    assert accuracy >= 0.94, f"full-data accuracy {accuracy:.4f}"
    return tree, splits, accuracy


def main():
    rows, rng = make_rows()
    plant_boundaries(rows, rng)
    inject_label_noise(rows, rng)
    pin_humidity_tail(rows, rng)
    records = to_records(rows)
    tree, splits, accuracy = verify(records)

    OUT.parent.mkdir(parents=True, exist_ok=True)
    write_csv(records, OUT)
    reloaded = load_csv(OUT)
    assert reloaded == records, "CSV round trip drifted"

    groups = {}
    for row in rows:
        groups[row["group"]] = groups.get(row["group"], 0) + 1
    print(f"wrote {len(records)} rows to {OUT}")
    print(f"groups: {groups}")
    print(f"splits: {splits}")
    print(f"full-data tree accuracy: {accuracy:.4f}")
    print(f"occupied rows: {sum(r.occupancy for r in records)}")


if __name__ == "__main__":
    main()
