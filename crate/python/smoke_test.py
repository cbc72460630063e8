"""Smoke test for the Python bindings.

Build the module first, e.g.

    cargo build --release -p source-trace-py --features extension-module
    cp target/release/libsource_trace_py.so python/source_trace_py.so

then run ``python3 python/smoke_test.py`` from the repository root.
"""

import json
import math

import source_trace_py as st


def main() -> None:
    river = st.RiverParams.truckee()
    truth = (1300.0, -22106.0, -215.0)

    c = st.concentration(truth, 0.0, 80.0, river)
    assert c > 0.0, c

    cfg = json.loads(st.default_config(40))
    cfg["run"]["tolerance"] = 1e-4
    text = json.dumps(cfg)

    obs = st.simulate(text)
    assert len(obs) == 40
    assert all(
        math.isclose(st.concentration(truth, o.sensor_location, o.sample_time, river), o.concentration)
        for o in obs
    )

    csv = st.write_observations(obs)
    back = st.load_observations(csv)
    assert [o.concentration for o in back] == [o.concentration for o in obs]

    res = st.identify("atgd", obs, text)
    assert len(res.points) == len(obs)
    assert res.trace_csv.splitlines()[0].startswith("n,s,l,t")
    print("atgd final estimate", res.final_estimate, "inner steps", res.inner_steps)

    (s, l, t), value = st.oracle(obs, text, grid=10)
    assert value >= 0.0

    assert abs(st.t_quantile(0.05, 10) - 2.228) < 1e-3
    # Two samples, one degree of freedom: t(0.5, 1) = 1, so the interval
    # is mean ± std/sqrt(2) = 1 ± 1.
    lower, upper = st.confidence_interval([0.0, 2.0], 0.5)
    assert abs(lower) < 1e-9 and abs(upper - 2.0) < 1e-9, (lower, upper)

    try:
        st.identify("nope", obs, text)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown algorithm accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
