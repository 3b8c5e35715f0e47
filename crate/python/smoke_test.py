"""Smoke test for the fk_kam extension module.

Build and run from the repository root:

    cargo build --release -p fk-kam-python --features extension-module
    cp target/release/libfk_kam_py.so python/fk_kam.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import fk_kam

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def main():
    kappa, k, m = fk_kam.diophantine([GOLDEN])
    assert abs(kappa - (1.0 - GOLDEN)) < 1e-12, kappa
    assert (k, m) == ([1], 1)

    try:
        fk_kam.Model([0.5], [1.0, 0.5], [])
    except ArithmeticError as e:
        assert "ResonanceDetected" in str(e)
    else:
        raise AssertionError("rational frequency accepted")

    model = fk_kam.Model([GOLDEN], [1.0, 0.5], [([1, 0], 0.5, 0.0)]).scaled(0.05)
    state, residuals = fk_kam.solve(model, grid_size=64)
    assert residuals[-1] < 1e-12, residuals
    assert all(b < a for a, b in zip(residuals, residuals[1:])), residuals
    res_e, res_f = state.residuals(model)
    assert max(res_e, res_f) < 1e-12
    assert abs(state.v.average()) < 1e-14
    assert state.c.values()[0] > 0.0

    family = fk_kam.Model([GOLDEN], [1.0, 0.5], [([1, 0], 0.5, 0.0)])
    series = fk_kam.series(family, grid_size=64, order=3)
    # the order-3 partial sum misses terms of order mu^4: halving mu divides the gap by about 16
    gaps = []
    for mu in (0.05, 0.025):
        exact, _ = fk_kam.solve(family.scaled(mu), grid_size=64)
        gaps.append(exact.distance(series.evaluate(mu)))
    ratio = gaps[0] / gaps[1]
    assert 12.0 < ratio < 24.0, gaps

    print(f"kappa_hat={kappa:.15f}")
    print(f"iterations={len(residuals) - 1} sigma={state.sigma:.6e} lambda={state.lambda_:.6e}")
    print(f"series_gaps={gaps[0]:.3e},{gaps[1]:.3e} ratio={ratio:.2f}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
