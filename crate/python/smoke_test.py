"""Smoke test for the gridless_tomo extension module."""
import math

import gridless_tomo as gt


def main():
    g = gt.ArrayGeometry.ku_band_simulation()
    assert g.n_full == 12
    assert abs(g.rayleigh_resolution_m - 4.48) < 0.05, g.rayleigh_resolution_m

    tau, p = gt.regularization(1.0, 12, 8, 1)
    assert abs(tau - 13.162339551232187) < 1e-9, tau
    assert gt.regularization(0.0, 12, 8, 1)[0] == 0.0

    data = gt.simulate(g, [3.3], snapshots=4, noise_variance=0.0, seed=7)
    assert len(data) == 12 and len(data[0]) == 4
    r = gt.estimate(data, g, 0.0, method="empast", tau=1e-3)
    assert len(r["elevations_m"]) == 1, r
    assert abs(r["elevations_m"][0] - 3.3) < 0.01 * g.rayleigh_resolution_m, r

    sub = g.with_random_subset(8, seed=1)
    noisy = [data[i] for i in sub.observed_indices]
    r = gt.estimate(noisy, sub, 1e-6, method="gbcs", tau=1e-3)
    assert min(abs(s - 3.3) for s in r["elevations_m"]) < g.rayleigh_resolution_m / 8

    try:
        gt.estimate(data, g, 0.0, method="music")
    except ValueError as e:
        assert "empast" in str(e)
    else:
        raise AssertionError("unknown method accepted")

    mc = gt.monte_carlo("empast", 20.0, trials=4, seed=1, snapshots=4)
    assert mc["trials"] == 4 and 0.0 <= mc["p_d"] <= 1.0
    assert mc["sigma_s"] is None or math.isfinite(mc["sigma_s"])
    print("smoke test passed:", gt.__version__, g)


if __name__ == "__main__":
    main()
