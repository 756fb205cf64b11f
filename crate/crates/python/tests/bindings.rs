use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module(code: &str) {
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(lsd::lsd)(py);
        let globals = PyDict::new(py);
        globals.set_item("lsd", module).unwrap();
        let code = std::ffi::CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python code failed");
        }
    });
}

#[test]
fn tilt_params_and_divergence() {
    with_module(
        r#"
import math
p = lsd.TiltParams(0.2, 0.5)
assert abs(p.exp_a - 1.4) < 1e-15 and abs(p.exp_b + 0.2) < 1e-15
g, f = lsd.poisson_pmf(2.0), lsd.poisson_pmf(3.0)
n = max(len(g), len(f))
g += [0.0] * (n - len(g)); f += [0.0] * (n - len(f))
kl = sum(a * math.log(a / b) for a, b in zip(g, f) if a > 0)
assert abs(lsd.lsd(g, f, lsd.TiltParams(0.0, 0.0)) - kl) < 1e-9
assert lsd.gsd(g, g, p) < 1e-12
try:
    lsd.TiltParams(-1.0, 0.0)
    raise AssertionError("accepted a negative beta")
except lsd.LsdException as e:
    assert "[domain]" in str(e)
"#,
    );
}

#[test]
fn estimation_and_influence() {
    with_module(
        r#"
r = lsd.estimate([0, 2, 2, 3, 5, 6, 1, 4], lsd.TiltParams(0.0, 0.0))
assert r.converged and abs(r.theta_hat - 2.875) < 1e-6
for y in range(10):
    assert abs(lsd.influence_first(y, 4.0, lsd.TiltParams(0.0, 0.7)) - (y - 4.0)) < 1e-8
assert abs(lsd.influence_second(12, 4.0, lsd.TiltParams(0.0, 0.0))) < 1e-6
c = lsd.bias_curves(12, 4.0, lsd.TiltParams(0.5, 1.0), [0.0, 0.1])
assert set(c) >= {"first_order", "second_order", "adequacy_ratio"}
s = lsd.model_sandwich(4.0, 0.0)
assert abs(s["sandwich"][0][0] - 4.0) < 1e-8
"#,
    );
}

#[test]
fn tests_and_simulation() {
    with_module(
        r#"
t = lsd.one_sample_test([5, 6, 4, 7, 5, 6, 3, 5, 6, 4], 2.0, lsd.TiltParams(0.5, 0.0))
assert t["p_value"] < 0.01 and t["reject_at"]["0.05"]
t2 = lsd.two_sample_test([1, 2, 3, 2], [2, 1, 3, 2], lsd.TiltParams(0.0, 0.0))
assert t2["statistic"] >= 0.0
cfg = {"replications": 30, "grid_beta": [0.0, 0.5], "grid_gamma": [0.0]}
a = lsd.simulate(cfg)
b = lsd.simulate(__import__("json").dumps(cfg))
assert a == b and len(a["cells"]) == 2
csv = lsd.simulate_csv(cfg)
assert csv.splitlines()[0] == "gamma,beta,metric,value,n_fail"
try:
    lsd.simulate({"replicatoins": 3})
    raise AssertionError("accepted an unknown field")
except lsd.LsdException as e:
    assert "[serialization]" in str(e)
"#,
    );
}
