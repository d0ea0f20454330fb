"""Regenerates data/size_table.csv, the bundled synthetic (size, compliance) table.

157 clusters with sizes between 6 and 85 and compliance rates from 0.05 to
0.97. Compliance falls with cluster size (small clusters comply more), which
is what makes cluster-level averaging drift from the complier-weighted effect
when effects depend on size.

    python3 tools/make_size_table.py > data/size_table.csv
"""
import numpy as np

SEED = 157
ROWS = 157


def main():
    rng = np.random.default_rng(SEED)
    n = np.clip(np.round(rng.normal(44.0, 18.0, ROWS)), 6, 85).astype(int)
    n[0], n[1] = 6, 85
    rate = 0.97 - 0.0105 * (n - 6) + rng.normal(0.0, 0.08, ROWS)
    rate = np.round(np.clip(rate, 0.05, 0.97), 3)
    print("n,compliance_rate")
    for size, r in zip(n, rate):
        print(f"{size},{r:.3f}")


if __name__ == "__main__":
    main()
