#!/usr/bin/env python3
"""Regenerates the bundled feeders and scenarios under data/.

Run from the repository root: python3 tools/make_data.py
"""
import json
import math
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"

STEPS_PER_DAY = 48
DT = 0.5


def daily_shape(hour):
    # night trough, morning shoulder, midday plateau, evening peak around 19h
    base = 0.42
    morning = 0.22 * math.exp(-((hour - 8.0) / 1.6) ** 2)
    midday = 0.28 * math.exp(-((hour - 12.5) / 2.6) ** 2)
    evening = 0.58 * math.exp(-((hour - 19.0) / 2.0) ** 2)
    return base + morning + midday + evening


def forecast(base_p, pf_ratio, shape=daily_shape):
    p, q = [], []
    for t in range(STEPS_PER_DAY):
        s = shape(t * DT)
        p.append([round(b * s, 6) for b in base_p])
        q.append([round(b * s * pf_ratio, 6) for b in base_p])
    return {"p": p, "q": q}


def dump(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1) + "\n")


def feeder12():
    # trunk 0-1-2-3-4-5-6, laterals 2-7-8, 3-9-10, 5-11-12
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (2, 7), (7, 8), (3, 9), (9, 10), (5, 11), (11, 12)]
    r = [0.008, 0.012, 0.012, 0.011, 0.012, 0.013, 0.012, 0.014, 0.011, 0.013, 0.012, 0.014]
    lines = [{"from": a, "to": b, "r_pu": ri, "x_pu": round(ri * 0.75, 6)} for (a, b), ri in zip(edges, r)]
    battery_buses = [3, 5, 6, 8, 10, 11, 12]
    capacitor_buses = [4, 6, 10, 12]
    buses = []
    for i in range(13):
        b = {"id": i}
        if i in capacitor_buses:
            b["capacitor"] = {"q_min": 0.0, "q_max": 0.05}
        if i in battery_buses:
            b["battery"] = f"B{i}"
        buses.append(b)
    batteries = [{"id": f"B{i}", "e_low": 0.12, "e_max": 1.0, "e0": 0.5, "p_min": -0.2, "p_max": 0.2, "eta": 1.0}
                 for i in battery_buses]
    base_p = [0.05, 0.045, 0.05, 0.04, 0.055, 0.045, 0.04, 0.05, 0.045, 0.05, 0.04, 0.05]
    return {
        "base": {"S_base_kVA": 1000.0, "V_base_kV": 12.47},
        "v0_pu": 1.0,
        "v_bounds_pu": [0.95, 1.0],
        "batteries": batteries,
        "buses": buses,
        "lines": lines,
        "fixed_load": forecast(base_p, 0.3),
    }


def feeder6():
    edges = [(0, 1), (1, 2), (2, 3), (1, 4), (4, 5)]
    r = [0.008, 0.012, 0.014, 0.012, 0.014]
    battery_buses = [3, 5]
    buses = []
    for i in range(6):
        b = {"id": i}
        if i == 3:
            b["capacitor"] = {"q_min": 0.0, "q_max": 0.04}
        if i in battery_buses:
            b["battery"] = f"B{i}"
        buses.append(b)
    return {
        "base": {"S_base_kVA": 1000.0, "V_base_kV": 12.47},
        "v0_pu": 1.0,
        "v_bounds_pu": [0.95, 1.0],
        "batteries": [{"id": f"B{i}", "e_low": 0.12, "e_max": 0.8, "e0": 0.4, "p_min": -0.15, "p_max": 0.15}
                      for i in battery_buses],
        "buses": buses,
        "lines": [{"from": a, "to": b, "r_pu": ri, "x_pu": round(ri * 0.75, 6)} for (a, b), ri in zip(edges, r)],
        "fixed_load": forecast([0.05, 0.06, 0.05, 0.05, 0.06], 0.3),
    }


def bad_cycle():
    return {
        "buses": [{"id": i} for i in range(4)],
        "lines": [{"from": 0, "to": 1, "r_pu": 0.01, "x_pu": 0.01},
                  {"from": 1, "to": 2, "r_pu": 0.01, "x_pu": 0.01},
                  {"from": 2, "to": 3, "r_pu": 0.01, "x_pu": 0.01},
                  {"from": 3, "to": 1, "r_pu": 0.01, "x_pu": 0.01}],
    }


# bus numbers of the original 38-bus layout mapped onto the 12 load buses of feeder12
BUS_MAP = {4: 4, 5: 5, 6: 6, 8: 8, 9: 9, 12: 12, 15: 10, 16: 7, 17: 11, 19: 12, 20: 3, 22: 11, 25: 8,
           28: 6, 31: 2, 33: 1, 38: 9}


def step(hour):
    return int(round(hour / DT))


def daytime_mix():
    shapeable = [(1, [6, 9]), (8, [5, 19]), (11, [15]), (12, [25]), (13, [4, 31]), (15, [19, 19]),
                 (16, [15, 15]), (16.5, [25, 15])]
    deferrable = [(4, [8]), (6, [33]), (10, [4, 5, 5, 16, 17]), (11, [28]), (12, [19, 38]), (17, [8, 20, 22]),
                  (18, [12]), (18.5, [5, 22]), (19.5, [12])]
    reqs = []
    n = 0
    for hour, buses in shapeable:
        for b in buses:
            n += 1
            k = step(hour)
            need = 0.10 + 0.01 * (n % 6)
            reqs.append({"kind": "shapeable", "id": f"S{n}", "bus": BUS_MAP[b], "step": k,
                         "e0": round(0.02 * (n % 3), 6), "e_low": 0.0, "e_max": 1.0,
                         "e_des": round(0.02 * (n % 3) + need, 6), "c_max": 0.06, "eta": 0.9,
                         "k_out": min(k + 16 + 2 * (n % 5), 58)})
    n = 0
    for hour, buses in deferrable:
        for b in buses:
            n += 1
            reqs.append({"kind": "deferrable", "id": f"D{n}", "bus": BUS_MAP[b], "step": step(hour),
                         "profile": [0.05, 0.05, 0.05, 0.05], "d_max": 6})
    reqs.sort(key=lambda r: r["step"])  # stable: table order within a step
    return {"network": "../feeders/feeder12.json", "config": "../config/default.json", "total_steps": 60,
            "seed": 0, "requests": reqs}


def evening_peak():
    # commuters plugging in between 16h and 19h, leaving the next morning
    reqs = []
    buses = [3, 5, 6, 8, 10, 11, 12, 4, 9, 2]
    for n in range(20):
        k = step(16.0) + (n * 7) % 7 + n // 4
        b = buses[n % len(buses)]
        reqs.append({"kind": "shapeable", "id": f"EV{n + 1}", "bus": b, "step": k, "e0": 0.02, "e_low": 0.0,
                     "e_max": 1.0, "e_des": 0.16, "c_max": 0.06, "eta": 0.9, "k_out": 58})
    return {"network": "../feeders/feeder12.json", "config": "../config/default.json", "total_steps": 60,
            "seed": 0, "requests": reqs}


def default_config():
    return {
        "dt_hours": DT,
        "N": 10,
        "N_r": 96,
        "weights": {"T1": 1.0, "T2": 10.0, "T3": 10.0},
        "nu_nom": 1.0,
        "loss_weight": 0.1,
        "price": {"type": "tou", "offpeak": 1.0, "peak": 3.0, "peak_start_h": 16.0, "peak_end_h": 21.0},
    }


def main():
    dump(DATA / "feeders" / "feeder12.json", feeder12())
    dump(DATA / "feeders" / "feeder6.json", feeder6())
    dump(DATA / "feeders" / "bad_cycle.json", bad_cycle())
    dump(DATA / "scenarios" / "daytime_mix.json", daytime_mix())
    dump(DATA / "scenarios" / "evening_peak.json", evening_peak())
    dump(DATA / "config" / "default.json", default_config())


if __name__ == "__main__":
    main()
