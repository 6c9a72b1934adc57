#!/usr/bin/env python3
"""Convert the raw KDDCUP99 10-percent file into the numeric format the
package loaders accept.

The raw file (kddcup.data_10_percent, available from the UCI/KDD archive)
has 41 features, three of them categorical (protocol_type, service, flag),
plus a label string.  This script one-hot encodes the categorical columns
(giving 122 features with the full category sets) and writes a delimited
file with a trailing binary 'label' column.

Label convention for anomaly detection: the 'attack' traffic is the bulk
of this file and is treated as the NORMAL class (label 0); rows labeled
'normal.' become the anomaly class (label 1).

Usage:
    python scripts/prepare_kdd99.py kddcup.data_10_percent kdd99_prepared.csv
"""

import argparse
import csv
import sys

CATEGORICAL_COLUMNS = {1: "protocol_type", 2: "service", 3: "flag"}
N_RAW_FEATURES = 41


def read_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) != N_RAW_FEATURES + 1:
                sys.exit(f"{path}:{line_no}: expected {N_RAW_FEATURES + 1} fields, got {len(row)}")
            yield row


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("raw", help="raw kddcup.data_10_percent file")
    parser.add_argument("out", help="output delimited file")
    args = parser.parse_args()

    rows = list(read_rows(args.raw))
    if not rows:
        sys.exit(f"{args.raw}: no rows")

    categories = {col: sorted({row[col] for row in rows}) for col in CATEGORICAL_COLUMNS}
    width = N_RAW_FEATURES - len(CATEGORICAL_COLUMNS) + sum(len(v) for v in categories.values())
    print(f"{len(rows)} rows; categorical levels: "
          + ", ".join(f"{CATEGORICAL_COLUMNS[c]}={len(v)}" for c, v in categories.items())
          + f"; output width {width}")

    header = []
    for col in range(N_RAW_FEATURES):
        if col in CATEGORICAL_COLUMNS:
            name = CATEGORICAL_COLUMNS[col]
            header.extend(f"{name}_{level}" for level in categories[col])
        else:
            header.append(f"f{col}")
    header.append("label")

    n_anomalies = 0
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            cells = []
            for col in range(N_RAW_FEATURES):
                if col in CATEGORICAL_COLUMNS:
                    cells.extend(
                        "1" if row[col] == level else "0" for level in categories[col]
                    )
                else:
                    cells.append(row[col])
            # 'normal.' traffic is the anomalous class in this protocol.
            label = 1 if row[-1].strip() == "normal." else 0
            n_anomalies += label
            cells.append(str(label))
            writer.writerow(cells)
    print(f"wrote {args.out}: {len(rows)} rows, {n_anomalies} anomalies "
          f"({100.0 * n_anomalies / len(rows):.1f}%)")


if __name__ == "__main__":
    main()
