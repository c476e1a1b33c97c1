"""Smoke test for the starkshield extension module.

Build first:  pip install --no-build-isolation ./crates/py
"""
import json
import math
import tempfile

import starkshield as ss


def main():
    r = ss.protection_ratio(40.0)
    assert abs(ss.bessel_j0(2 * math.sqrt(2) * r) - 39.0 / 41.0) < 1e-10

    rows = ss.protection_table([1.0, 10.0, 1e6])
    assert all(row[4] < 1e-10 for row in rows)

    ou = ss.ou_trace(19.0, 1.0, 0.01, 1000, seed=1)
    rtn = ss.rtn_trace(8.0, 1.0, 0.01, 1000, seed=1)
    assert len(ou) == 1001 and len(rtn) == 1001
    assert set(abs(v) for v in rtn) == {8.0}

    sig = ss.ramsey(40.0, 19.0, 1.0, n_trajectories=20, horizon=0.3, n_sample_times=31, seed=3)
    assert abs(sig["mean"][0] - 1.0) < 1e-9
    t = sig["times"][10]
    assert abs(sig["mean"][10] - ss.analytic_fid(19.0, 1.0, t)) < 0.15

    q = ss.qpt("x_pi", n_traces=4)
    assert abs(q["ideal"]["fidelity"] - 1.0) < 1e-6

    with tempfile.TemporaryDirectory() as out:
        manifest = json.loads(ss.run_experiment("protection-table", out=out))
        assert manifest["files"] == ["protection_table.csv"]

    try:
        ss.protection_ratio(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative s accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
