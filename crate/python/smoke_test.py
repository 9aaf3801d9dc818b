"""Quick check that the extension imports and the main entry points run."""

import math

import countshrink as cs


def main():
    eh = cs.PriorFamily("EH", gamma=1.0)
    ig = cs.PriorFamily("IG", gamma=0.5)
    pg = cs.PriorFamily("PG")
    print(eh, ig, pg)

    # PG posterior mean is conjugate: (y + a) / (1 + b).
    assert abs(pg.posterior_mean(4, alpha=2.0, beta=1.0) - 3.0) < 1e-8

    bias = eh.bias_curve([10, 100, 1000])
    assert all(b < 0 for b in bias)
    assert abs(bias[2]) < abs(bias[0])

    grid = [0.01 * k for k in range(1, 2001)]
    dens = ig.posterior_density(grid, y=3, alpha=2.0, beta=2.0)
    area = sum(0.5 * (grid[i + 1] - grid[i]) * (dens[i] + dens[i + 1]) for i in range(len(grid) - 1))
    assert abs(area - 1.0) < 1e-2, area

    pmf = cs.crt_pmf(5, 1.5)
    assert abs(sum(pmf) - 1.0) < 1e-12 and len(pmf) == 6
    tables = cs.sample_crt(5, 1.5, 2000, seed=3)
    assert all(1 <= t <= 5 for t in tables)

    xs = cs.sample_gig(0.5, 2.0, 1.0, 20000, seed=4)
    # GIG(1/2, a, b) has mean (1 + sqrt(ab)) / a.
    want = (1 + math.sqrt(2.0)) / 2.0
    got = sum(xs) / len(xs)
    assert abs(got - want) < 0.03, (got, want)

    sim = cs.generate_scenario("I", 0.1, 200, seed=7)
    fit = cs.fit(sim["counts"], offsets=sim["offsets"], family=eh, draws=500, burn_in=100, seed=7)
    means = fit.lambda_means()
    assert len(means) == 200 and all(m > 0 for m in means)
    assert fit.n_draws == 500
    assert len(fit.column("alpha")) == 500
    top = sorted(range(200), key=lambda i: -means[i])[:10]
    print("top units:", top)
    print("outliers among them:", sum(sim["outlier"][i] for i in top))

    try:
        cs.PriorFamily("XX")
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("bad family accepted")

    print("ok")


if __name__ == "__main__":
    main()
