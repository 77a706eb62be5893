#!/usr/bin/env python3
"""Recomputes an EvalReport with numpy/scipy and compares it field by field.

usage: check_report.py <data.jsonl> <schema_map.json> <predictions.jsonl> <report.json>
"""

import json
import sys

import numpy as np
from scipy.stats import spearmanr

EDGES = [1.0, 2.5, 3.5, 4.5, 5.0]
TOL = 1e-12


def main():
    data_path, map_path, preds_path, report_path = sys.argv[1:5]
    fmap = json.load(open(map_path))
    gold, sigma = {}, {}
    for line in open(data_path):
        if line.strip():
            r = json.loads(line)
            gold[str(r[fmap["id"]])] = r[fmap["gold_mean"]]
            sigma[str(r[fmap["id"]])] = r[fmap["gold_std"]]
    preds = {}
    flagged = 0
    for line in open(preds_path):
        if line.strip():
            p = json.loads(line)
            preds[p["id"]] = p["score"]
            flagged += bool(p.get("flagged"))
    ids = sorted(gold)
    g = np.array([gold[i] for i in ids])
    s = np.array([sigma[i] for i in ids])
    p = np.array([preds[i] for i in ids])
    err = np.abs(p - g)

    expected = {
        "n": len(ids),
        "spearman": spearmanr(p, g).statistic,
        "accuracy": float(np.mean(err <= s + 1e-9)),
        "mae": float(np.mean(err)),
        "parse_failure_count": flagged,
    }
    rep = json.load(open(report_path))
    bad = []
    for k, v in expected.items():
        if abs(rep[k] - v) > TOL:
            bad.append(f"{k}: report {rep[k]!r} vs oracle {v!r}")
    for b, (lo, hi) in zip(rep["buckets"], zip(EDGES, EDGES[1:])):
        last = hi == EDGES[-1]
        mask = (g >= lo) & ((g <= hi) if last else (g < hi))
        n = int(mask.sum())
        if b["n"] != n:
            bad.append(f"bucket {b['label']}: n {b['n']} vs {n}")
        if n and abs(b["mae"] - err[mask].mean()) > TOL:
            bad.append(f"bucket {b['label']}: mae {b['mae']} vs {err[mask].mean()}")
    hi_mask = s >= rep["disagreement"]["threshold"]
    for name, mask in (("high", hi_mask), ("low", ~hi_mask)):
        d = rep["disagreement"]
        if d[f"{name}_n"] != int(mask.sum()):
            bad.append(f"{name}_n mismatch")
        if mask.any() and abs(d[f"{name}_mae"] - err[mask].mean()) > TOL:
            bad.append(f"{name}_mae {d[f'{name}_mae']} vs {err[mask].mean()}")
    if bad:
        print("MISMATCH " + report_path)
        for b in bad:
            print("  " + b)
        sys.exit(1)
    print("ok " + report_path)


if __name__ == "__main__":
    main()
