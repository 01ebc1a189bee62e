"""Independent oracle for the native insight functions (numpy/scipy).

Writes fixtures/golden/insights/cases.json: fixed input series plus the
expected chosen indices and p-values. The C++ tests compare against it.
"""
import json
import math
from pathlib import Path

import numpy as np
from scipy import stats

OUT = Path(__file__).resolve().parent.parent / "fixtures" / "golden" / "insights" / "cases.json"


def rank_desc(v):
    return sorted(range(len(v)), key=lambda i: (-v[i], i))


def leader_p(sorted_desc, leaders):
    v = np.asarray(sorted_desc, dtype=float)
    if np.all(v > 0):
        ranks = np.arange(1, len(v) + 1, dtype=float)
        x, y = np.log(ranks[leaders:]), np.log(v[leaders:])
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (intercept + slope * x)
        sd = math.sqrt(float(np.sum(resid ** 2)) / (len(x) - 2))
        out = []
        for r in range(leaders):
            e = math.log(v[r]) - (intercept + slope * math.log(r + 1))
            out.append(float(stats.norm.sf(e / sd)))
        return out
    rest = v[leaders:]
    m, sd = rest.mean(), rest.std(ddof=1)
    return [float(stats.norm.sf((v[r] - m) / sd)) for r in range(leaders)]


def outstanding_no1(v):
    order = rank_desc(v)
    return {"index": order[0], "pValue": leader_p([v[i] for i in order], 1)[0]}


def outstanding_top2(v):
    order = rank_desc(v)
    p = leader_p([v[i] for i in order], 2)
    return {"indices": order[:2], "pValue": max(p)}


def outstanding_last(v):
    pivot = min(v) + max(v)
    refl = [pivot - x for x in v]
    order = rank_desc(refl)
    return {"index": order[0], "pValue": leader_p([refl[i] for i in order], 1)[0]}


def outlier(v):
    n = len(v)
    flagged, min_p = [], 1.0
    for i in range(n):
        rest = np.delete(np.asarray(v, float), i)
        z = abs(v[i] - rest.mean()) / rest.std(ddof=1)
        p = min(1.0, 2 * stats.norm.sf(z) * n)
        if p < 0.05:
            flagged.append(i)
        min_p = min(min_p, p)
    return {"indices": flagged, "pValue": float(min_p)}


def change_point(v):
    best, best_abs, best_res = None, -1, None
    for k in range(2, len(v) - 1):
        res = stats.ttest_ind(v[k:], v[:k], equal_var=False)
        if abs(res.statistic) > best_abs:
            best, best_abs, best_res = k, abs(res.statistic), res
    return {"index": best, "pValue": float(best_res.pvalue)}


def trend(v):
    res = stats.linregress(np.arange(len(v), dtype=float), v)
    direction = (1 if res.slope > 0 else -1) if res.pvalue < 0.05 else 0
    return {"direction": direction, "pValue": float(res.pvalue)}


def seasonality(v):
    a = np.asarray(v, float)
    n, m = len(a), a.mean()
    denom = float(np.sum((a - m) ** 2))
    best, best_r = None, -math.inf
    for k in range(2, n // 2 + 1):
        r = float(np.sum((a[:-k] - m) * (a[k:] - m))) / denom
        if r > best_r:
            best, best_r = k, r
    p = min(1.0, 2 * stats.norm.sf(best_r * math.sqrt(n)) * (n // 2 - 1))
    return {"period": best, "pValue": p}


def correlation(a, b):
    res = stats.pearsonr(a, b)
    return {"direction": 1 if res[0] > 0 else -1, "pValue": float(res[1])}


def attribution(v):
    total, n = sum(v), len(v)
    lead = rank_desc(v)[0]
    share = v[lead] / total
    p0 = 1 / n
    z = (share - p0) / math.sqrt(p0 * (1 - p0) / total)
    return {"index": lead, "pValue": float(min(1.0, 2 * stats.norm.sf(abs(z))))}


def evenness(v):
    res = stats.chisquare(v)
    return {"pValue": float(res.pvalue)}


def main():
    rng = np.random.default_rng(2022)
    cases = []

    def add(kind, values, expected, **extra):
        cases.append({"type": kind, "values": [float(x) for x in values], "expected": expected, **extra})

    longtail = [round(1000 / (r + 1) ** 1.1 * rng.uniform(0.8, 1.25), 3) for r in range(12)]
    longtail[0] *= 1.8
    rng.shuffle(longtail)
    longtail = [float(x) for x in longtail]
    add("outstanding_no1", longtail, outstanding_no1(longtail))
    add("outstanding_top2", longtail, outstanding_top2(longtail))
    add("outstanding_last", longtail, outstanding_last(longtail))
    mixed = [float(x) for x in np.round(rng.normal(0, 5, 10), 3)]
    mixed[3] = 25.0
    add("outstanding_no1", mixed, outstanding_no1(mixed))

    spiky = [float(x) for x in np.round(rng.normal(50, 2, 30), 3)]
    spiky[7] += 20
    spiky[21] -= 18
    add("outlier", spiky, outlier(spiky))

    shifted = [float(x) for x in np.round(np.r_[rng.normal(10, 1, 9), rng.normal(14, 1.5, 15)], 3)]
    add("change_point", shifted, change_point(shifted))

    ramp = [float(x) for x in np.round(0.4 * np.arange(25) + rng.normal(0, 2, 25), 3)]
    add("trend", ramp, trend(ramp))
    flat = [float(x) for x in np.round(rng.normal(0, 1, 25), 3)]
    add("trend", flat, trend(flat))

    seasonal = [float(x) for x in np.round(5 * np.sin(2 * np.pi * np.arange(40) / 6) + rng.normal(0, 1, 40), 3)]
    add("seasonality", seasonal, seasonality(seasonal))

    a = [float(x) for x in np.round(rng.normal(0, 1, 20).cumsum(), 3)]
    b = [float(x) for x in np.round(-0.8 * np.asarray(a) + rng.normal(0, 1, 20), 3)]
    add("correlation", a, correlation(a, b), paired=b)

    shares = [120.0, 30.0, 25.0, 28.0, 31.0]
    add("attribution", shares, attribution(shares))
    add("evenness", [20.0, 22.0, 19.0, 21.0, 18.0], evenness([20.0, 22.0, 19.0, 21.0, 18.0]))
    add("evenness", shares, evenness(shares))

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"cases": cases}, indent=2) + "\n")
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
