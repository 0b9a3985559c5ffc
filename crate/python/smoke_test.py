"""Smoke test for the nullwave extension module.

Build and install first:  pip install --no-build-isolation -e crates/python
"""

import math
import pathlib

import nullwave

ROOT = pathlib.Path(__file__).resolve().parent.parent

LINEAR = """
[grid]
x_min = -20.0
x_max = 20.0
m = 401

[time]
t_final = 4.0

[weight]
delta = 0.5

[[data.field]]
traveling = "right"
f = { kind = "gaussian", width = 1.0 }

[nonlinearity]
preset = "null"
"""


def main():
    cfg = nullwave.Config.from_toml(LINEAR)
    assert cfg.m == 401 and cfg.fields == 1 and cfg.is_null

    # A right mover under a null form translates one cell per step.
    sim = nullwave.Simulation(cfg)
    q0 = sim.q(0)
    for _ in range(10):
        assert sim.step()
    assert sim.q(0)[10:] == q0[:-10]
    assert all(v == 0.0 for v in sim.p(0))

    out = nullwave.run(cfg)
    assert out["blowup"] is None
    assert abs(out["reports"][-1]["e_total"] / out["e_initial"] - 1.0) < 1e-12

    study = nullwave.convergence_study(nullwave.Config.load(str(ROOT / "configs" / "linear.toml")))
    assert study["conclusive"]
    assert all(1.8 <= p <= 2.2 for p in study["fitted"]), study["fitted"]

    john = nullwave.Config.load(str(ROOT / "configs" / "john.toml"))
    est = nullwave.detect_blowup(john)
    assert est is not None and abs(est["t_blow"] - nullwave.john_oracle(0.2)) < 0.25, est

    assert nullwave.is_null(1.0, 0.0, 0.0, -1.0)
    assert not nullwave.is_null(1.0, 0.0, 0.0, 0.0)
    assert nullwave.to_null_frame(1.0, 0.0, 0.0, -1.0) == (0.0, 0.5, 0.5, 0.0)
    assert math.isclose(nullwave.weight_value(0.5, 1.0), 2.0 ** 1.5)

    try:
        nullwave.Config.from_toml(LINEAR.replace("delta = 0.5", "delta = 1.5"))
    except ValueError as e:
        assert "(0, 1)" in str(e)
    else:
        raise AssertionError("delta = 1.5 accepted")

    print("smoke test ok: order", [round(p, 3) for p in study["fitted"]], "t_blow", est["t_blow"])


if __name__ == "__main__":
    main()
