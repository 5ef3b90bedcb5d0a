"""Smoke test of the Python bindings.

Build and install the extension first:

    pip install ./crates/python --no-build-isolation

then run ``python python/smoke_test.py``.
"""

import json
import math

import twostroke_py as ts

FIG2 = {
    "sites": [{"omega": 0.75}, {"omega": 1.0}],
    "coupling": {"type": "partial_swap", "g": 0.3},
    "baths": {"cold": {"T": 0.4, "g": 0.3}, "hot": {"T": 0.8, "g": 0.3}},
    "tau_q": 1.0,
    "tau_w": 1.0,
}


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    spec = ts.EngineSpec.from_json(json.dumps(FIG2))
    assert spec.num_sites == 2
    assert spec.frequencies == [0.75, 1.0]
    assert spec.energy_conservation_defect() == (0.0, 0.0)
    assert ts.EngineSpec.from_json(spec.to_json()).to_json() == spec.to_json()

    engine = ts.Engine(spec)
    ledger = engine.run_cycles(50)
    assert len(ledger) == 50
    for row in ledger:
        assert abs(row["dE"] - row["Q_C"] - row["Q_H"] + row["W"]) <= 1e-10
        assert row["Sigma"] >= -1e-12

    spectral = engine.limit_cycle()
    iterate = engine.limit_cycle(method="iterate")
    assert close(spectral["efficiency"], 0.25, 1e-8)
    assert close(spectral["W"], iterate["W"], 1e-10)
    assert spectral["regime"] == "engine"
    rho = spectral["rho_star"]
    assert len(rho) == 4 and close(sum(rho[i][i].real for i in range(4)), 1.0, 1e-12)

    model = ts.AnalyticModel(spec)
    assert close(model.relaxation_rate(), 1.0 - model.lam, 1e-10)
    assert close(model.work_closed_form(), spectral["W"], 1e-10)
    steady = model.steady_state()
    assert set(steady["x"]) == {"Z1", "Z2", "S", "A"}
    traj = model.trajectory(10)
    assert [p["n"] for p in traj] == list(range(11))

    checks = engine.verify()
    failed = [c["check"] for c in checks if c["status"] == "fail"]
    assert not failed, failed

    sweep_cfg = dict(FIG2, sweep={"axes": [{"name": "tau_q", "min": 0.5, "max": 4.0, "points": 4}]})
    rows = ts.sweep(json.dumps(sweep_cfg), jobs=1)
    assert len(rows) == 4 and all(r["status"] == "ok" for r in rows)
    assert all(close(r["efficiency"], 0.25, 1e-8) for r in rows)

    try:
        ts.EngineSpec.from_json(json.dumps(dict(FIG2, tau_x=1.0)))
    except ts.ConfigError:
        pass
    else:
        raise AssertionError("unknown key accepted")
    try:
        engine.limit_cycle(method="iterate", max_cycles=3)
    except ts.SolverError:
        pass
    else:
        raise AssertionError("3 cycles cannot converge")

    print("smoke test passed: W* = %.9f, efficiency = %.6f, P* = %.6e"
          % (spectral["W"], spectral["efficiency"], spectral["P"]))
    assert math.isfinite(spectral["P"])


if __name__ == "__main__":
    main()
