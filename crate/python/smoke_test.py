"""Smoke test for the lsd extension module. Run after `maturin develop`."""

import math

import lsd


def main():
    p = lsd.TiltParams(0.5, 0.0)
    print(p, "A =", p.exp_a, "B =", p.exp_b)

    g = lsd.poisson_pmf(2.0)
    f = lsd.poisson_pmf(3.0)
    n = max(len(g), len(f))
    g += [0.0] * (n - len(g))
    f += [0.0] * (n - len(f))
    kl = sum(a * math.log(a / b) for a, b in zip(g, f) if a > 0)
    d = lsd.lsd(g, f, lsd.TiltParams(0.0, 0.0))
    assert abs(d - kl) < 1e-9, (d, kl)
    print("LSD(0, 0) =", d)

    sample = [0, 2, 2, 3, 5, 6, 1, 4, 3, 2, 12, 14]
    for beta in (0.0, 0.5, 1.0):
        r = lsd.estimate(sample, lsd.TiltParams(beta, 0.0))
        assert r.converged
        print(f"beta={beta}: theta_hat={r.theta_hat:.4f}")

    assert abs(lsd.influence_first(12, 4.0, lsd.TiltParams(0.0, 0.0)) - 8.0) < 1e-8
    print("IF2(12) at (0.5, 1):", lsd.influence_second(12, 4.0, lsd.TiltParams(0.5, 1.0)))

    t = lsd.one_sample_test(sample, 2.0, lsd.TiltParams(0.5, 0.0))
    print("test W =", t["statistic"], "p =", t["p_value"])

    report = lsd.simulate({"replications": 50, "grid_beta": [0.0, 1.0], "grid_gamma": [0.0]})
    for cell in report["cells"]:
        print(cell["beta"], cell["gamma"], {m["name"]: m["value"] for m in cell["metrics"]})

    try:
        lsd.TiltParams(-0.5, 0.0)
    except lsd.LsdException as e:
        print("rejected:", e)
    else:
        raise AssertionError("negative beta accepted")

    print("ok")


if __name__ == "__main__":
    main()
