"""Quick end-to-end check of the `fusion` extension module."""

import math
import os
import sys
import tempfile

import fusion


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    data = fusion.ObservationSet.simulate(seed=1)
    m = data.moments()
    assert len(data) == 100
    assert close(m["corr"], 0.78, 1e-10), m

    prior = fusion.PriorSpec.reference()
    start = fusion.ModelParams(m["mean_x"], m["mean_y"], m["sd_x"] ** 2, m["sd_y"] ** 2, 0.0)
    r = fusion.rho_mle(start, data)
    assert -1 < r < 1

    a = fusion.max_alpha(0.78, 100)
    lo, hi = fusion.rho_support(0.78, 100, a)
    assert lo < 0.78 < hi
    draws = fusion.sample_fiducial_rho(0.78, 100, a, 2000, seed=3)
    assert all(lo <= d <= hi for d in draws)

    chain = fusion.run_chain(data, prior, iterations=20000, burn_in=1000, seed=7)
    assert len(chain) == 20000
    rho = chain.values("rho")
    assert close(sum(rho) / len(rho), 0.78, 0.05)
    summary = chain.summary()
    assert set(summary["params"]) == {"mu_x", "mu_y", "sigma2_x", "sigma2_y", "rho"}

    chains = fusion.run_multi_chain(data, prior, chains=3, iterations=20000, burn_in=2000, seed=11)
    report = fusion.gelman_rubin(chains, threshold=1.05)
    assert report["pass"], report["psrf"]

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "trace.csv")
        chains[0].to_csv(path)
        assert fusion.ChainTrace.from_csv(path).rows() == chains[0].rows()

    x, dens = fusion.reference_curve("confidence_rho", r=0.78, n=100)
    area = sum(0.5 * (x[i] - x[i - 1]) * (dens[i] + dens[i - 1]) for i in range(1, len(x)))
    assert close(area, 1.0, 1e-3), area

    try:
        fusion.ModelParams(0, 0, -1, 1, 0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative variance accepted")

    print(f"ok: rho mean {sum(rho) / len(rho):.4f}, max psrf {max(report['psrf'].values()):.5f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
