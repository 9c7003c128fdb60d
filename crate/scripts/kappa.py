#!/usr/bin/env python3
"""Cohen's kappa for a JSON list of {"gold": ..., "pred": ...} pairs."""

import json
import sys
from collections import Counter


def kappa(pairs):
    n = len(pairs)
    observed = sum(1 for g, p in pairs if g == p) / n
    gold = Counter(g for g, _ in pairs)
    pred = Counter(p for _, p in pairs)
    expected = sum(gold[k] * pred.get(k, 0) for k in gold) / (n * n)
    return (observed - expected) / (1 - expected)


def main():
    with open(sys.argv[1]) as f:
        rows = json.load(f)
    print(repr(kappa([(r["gold"], r["pred"]) for r in rows])))


if __name__ == "__main__":
    main()
