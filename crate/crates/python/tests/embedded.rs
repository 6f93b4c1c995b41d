use std::ffi::CString;
use std::sync::Once;

use pyo3::prelude::*;
use pynetblock::pynetblock as nbmod;

static INIT: Once = Once::new();

fn run(code: &str) {
    INIT.call_once(|| {
        pyo3::append_to_inittab!(nbmod);
        Python::initialize();
    });
    Python::attach(|py| {
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, None, None) {
            e.print(py);
            panic!("python code failed: {e}");
        }
    });
}

#[test]
fn noiseless_round_trip() {
    run(r#"
import pynetblock as nb

z = nb.Membership([0] * 4 + [1] * 4 + [2] * 4, 3)
b = [[1, 1, 0], [1, 1, 0], [0, 0, 1]]
a = [[float(b[z.labels[i]][z.labels[j]]) for j in range(12)] for i in range(12)]
s = nb.Sample.from_dense([a] * 5, 1.0)
assert (s.n, s.num_layers, s.rho) == (12, 5, 1.0)

fit = nb.estimate(s, z)
assert fit["d_hat"] == 2, fit["d_hat"]
assert fit["cv"]["selected_index"] == 0
err = sum((fit["b_hat"][i][j] - b[i][j]) ** 2 for i in range(3) for j in range(3)) ** 0.5
assert err < 1e-3, err

zero = nb.estimate(s, z, lam=1.01 * nb.lambda_max(s, z))
assert zero["d_hat"] == 0 and all(v == 0.0 for r in zero["b_hat"] for v in r)

avg = nb.averaging_estimator(s, z)
assert avg["d_hat"] == 2
"#);
}

#[test]
fn clustering_helpers_and_errors() {
    run(r#"
import pynetblock as nb

assert nb.adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
al = nb.align_labels([1, 1, 0, 0], [0, 0, 1, 1], 2)
assert al["misclustering_rate"] == 0.0

try:
    nb.Membership([0, 3], 2)
except nb.NetblockError:
    pass
else:
    raise AssertionError("label out of range accepted")

try:
    nb.spectral_cluster(nb.Sample.from_edges(3, [[(0, 1)]], 1.0), 2, engine="spectral")
except nb.NetblockError as e:
    assert "engine" in str(e)
else:
    raise AssertionError("bad engine accepted")
"#);
}

#[test]
fn simulate_and_theory_from_dicts() {
    run(r#"
import pynetblock as nb

cfg = nb.preset("rank1")
assert cfg["n"] == 1000
cfg.update(n=60, K=3, d=1, L=3, replicates=1)
cfg["sizes"] = {"kind": "equal"}
s, z, truth = nb.simulate(cfg, seed=5)
assert s.n == 60 and s.num_layers == 3 and len(truth) == 1
s2, z2, _ = nb.simulate(cfg, seed=5)
assert [s.edges(l) for l in range(3)] == [s2.edges(l) for l in range(3)]

ctx = dict(n=1000, k=10, layers=100, rho=0.1, d=1, c1=1.5, c2=1.5,
           misclustered=0, b_op=1.0, b_max=1.0)
rep = nb.theory_report(ctx)
assert rep["lambda_val"] > 0 and rep["bound"] > 0
"#);
}
