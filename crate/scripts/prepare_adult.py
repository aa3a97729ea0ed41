#!/usr/bin/env python3
"""Convert the raw UCI Adult training file into the numeric CSV the loader reads.

Each of the 14 attributes becomes one numeric column. Continuous attributes are
copied as-is; categorical attributes are replaced by the index of the category
in the sorted list of distinct values (unknown "?" is its own category). The
income column becomes `label` (1 for ">50K", 0 otherwise). Standardization is
left to the loader (`standardize=true` in the run config).

Usage: prepare_adult.py adult.data data/adult.csv
"""

import csv
import sys

COLUMNS = [
    ("age", False),
    ("workclass", True),
    ("fnlwgt", False),
    ("education", True),
    ("education_num", False),
    ("marital_status", True),
    ("occupation", True),
    ("relationship", True),
    ("race", True),
    ("sex", True),
    ("capital_gain", False),
    ("capital_loss", False),
    ("hours_per_week", False),
    ("native_country", True),
]


def main(src, dst):
    rows = []
    with open(src) as f:
        for line in f:
            fields = [x.strip() for x in line.strip().split(",")]
            if len(fields) != len(COLUMNS) + 1:
                continue
            rows.append(fields)

    codes = {}
    for j, (_, categorical) in enumerate(COLUMNS):
        if categorical:
            values = sorted({r[j] for r in rows})
            codes[j] = {v: i for i, v in enumerate(values)}

    with open(dst, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([name for name, _ in COLUMNS] + ["label"])
        for r in rows:
            out = []
            for j, (_, categorical) in enumerate(COLUMNS):
                out.append(codes[j][r[j]] if categorical else int(r[j]))
            out.append(1 if r[-1].rstrip(".") == ">50K" else 0)
            w.writerow(out)
    print(f"wrote {len(rows)} rows to {dst}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
