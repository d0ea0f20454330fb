import json
import os
from fractions import Fraction
from pathlib import Path

import pytest

import crtiv

DATA = Path(os.environ.get("CRTIV_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


def read_units(name):
    ids, z, d, y = [], [], [], []
    with open(DATA / name) as f:
        next(f)
        for line in f:
            a, b, c, e = line.strip().split(",")
            ids.append(a)
            z.append(int(b))
            d.append(int(c))
            y.append(float(e))
    return ids, z, d, y


def test_effect_ratio_matches_ratio_of_arm_sum_contrasts():
    ids, z, d, y = read_units("toy.csv")
    sums = {}
    for i, zi, di, yi in zip(ids, z, d, y):
        s = sums.setdefault(i, [zi, 0.0, 0.0])
        s[1] += yi
        s[2] += di
    t = [s for s in sums.values() if s[0] == 1]
    c = [s for s in sums.values() if s[0] == 0]
    num = sum(s[1] for s in t) / len(t) - sum(s[1] for s in c) / len(c)
    den = sum(s[2] for s in t) / len(t) - sum(s[2] for s in c) / len(c)

    r = crtiv.estimate(ids, z, d, y, method="er")
    assert r["point"] == pytest.approx(num / den, rel=1e-12)
    assert r["variance"] is None
    assert r["region"].kind == "FiniteInterval"
    assert r["region"].contains(r["point"])


def test_csv_and_array_entry_points_agree():
    ids, z, d, y = read_units("toy.csv")
    for method in ("cl", "tsls", "er"):
        a = crtiv.estimate(ids, z, d, y, method=method)
        b = crtiv.estimate_csv(str(DATA / "toy.csv"), method=method)
        assert a["point"] == b["point"]


def test_permutation_region_small_design():
    r = crtiv.estimate_csv(str(DATA / "toy10.csv"), ci="permutation")
    assert r["diagnostics"]["null_size"] == 252
    assert r["region"].lo < r["point"] < r["region"].hi


def test_identification_weights():
    example_a = [(80, 40, 1.0), (10, 5, 2.0), (10, 5, 1.5)]
    assert crtiv.true_cace(example_a) == pytest.approx(float(Fraction(23, 20)))
    assert crtiv.identified_value(example_a, "cl") == pytest.approx(1.5)
    assert crtiv.identified_value(example_a, "tsls") == pytest.approx(float(Fraction(95, 68)))
    assert sum(crtiv.method_weights(example_a, "tsls")) == pytest.approx(1.0)


def test_errors_are_raised_with_their_code():
    ids, z, d, y = read_units("zero_compliance.csv")
    with pytest.raises(crtiv.CrtivError, match="ZeroDenominator"):
        crtiv.estimate(ids, z, d, y)


def test_simulate_is_deterministic():
    scen = str(DATA / "scenarios" / "smoke.json")
    a = crtiv.simulate(scen, workers=1, replicates=10)
    b = crtiv.simulate(scen, workers=2, replicates=10)
    assert a == b
    assert {c["method"] for c in a} == {"effect_ratio", "cluster_level", "tsls"}


def test_cli_in_process():
    code, out, err = crtiv.run_cli(["weights", "--spec", str(DATA / "weights_b.csv"), "--exact", "--format", "json"])
    assert code == 0, err
    doc = json.loads(out)
    assert doc["identified_exact"]["cluster_level"] == "29/17"
