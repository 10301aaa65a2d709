use std::ffi::CStr;

use pyo3::prelude::*;
use pyo3::types::PyModule;

/// Runs `code` in an embedded interpreter with the module importable as
/// `qmonitor`. Python `assert`s surface as test failures.
fn run(code: &CStr) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "qmonitor").unwrap();
        qmonitor::qmonitor(&m).unwrap();
        py.import("sys")
            .unwrap()
            .getattr("modules")
            .unwrap()
            .set_item("qmonitor", m)
            .unwrap();
        if let Err(e) = py.run(code, None, None) {
            e.display(py);
            panic!("python code failed: {e}");
        }
    });
}

#[test]
fn config_keywords_and_text_round_trip() {
    run(c"
import qmonitor as q
c = q.Config(gamma=0.1, lambda_q=1000, n_steps=400, initial_state='e', perfect=False)
assert c.gamma == 0.1 and c.lambda_q == 1000.0 and c.n_steps == 400
assert c.initial_state == 'e'
assert abs(c.dt * 400 - 2 * 3.141592653589793 / 0.1) < 1e-9
again = q.Config.from_text(c.to_text())
assert again.to_text() == c.to_text()
assert q.Config(perfect=True).lambda_q is None
assert len(c.times()) == 401 and len(c.omega_track()) == 401
pg, pe = c.occupation()
assert all(abs(a + b - 1) < 1e-9 for a, b in zip(pg, pe))
for bad in [dict(gamma=-1), dict(nope=1), dict(initial_state='x')]:
    try:
        q.Config(**bad)
    except ValueError:
        pass
    else:
        raise AssertionError(bad)
");
}

#[test]
fn trajectory_pipeline_reproduces_drive_without_noise() {
    run(c"
import qmonitor as q
c = q.Config(perfect=True, n_steps=1000, dt=0.02)
t = q.run_trajectory(c, 3)
assert len(t) == 1000 and len(t.states()) == 1001
assert t.jump_count == sum(t.jumped())
recs = q.measure(t)
assert recs.labels().count('stay') == 1000 - t.jump_count
track = q.reconstruct(recs, 'naive')
assert max(abs(a - b) for a, b in zip(track.omega_m(), t.omega())) < 1e-10
assert track.mean_abs_error(t.omega()) < 1e-10
assert track.believed() == t.states()
l = q.ledger(t)
assert abs(l.residual) < 1e-12 and abs(l.du - (l.heat + l.work)) < 1e-12
s = q.entropy(t)
assert abs(q.entropy_measured(track, c) - s) < 1e-6
");
}

#[test]
fn step_rules_and_classifier() {
    run(c"
import qmonitor as q
assert q.readout(0.3, 1.7) == 0.3
assert q.readout(0.0, 1.0, lambda_q=1.0) == 1.0
assert q.classify(-1.2, 'e', 1.2) == 'jump_down'
assert q.classify(0.0, 'e', 1.2) == 'stay'
assert q.classify(0.3, 'g', 1.2) == 'stay'
d = 0.013
assert abs(q.step_naive(d / 2, 'e', 'e', 1.0) - d) < 1e-15
assert abs(q.step_naive(-d / 2, 'g', 'g', 1.0) - d) < 1e-15
w = 1.1
naive = q.step_naive(-w - d / 2, 'e', 'g', w)
assert abs(naive - d) < 1e-12
assert abs(q.step_corrected(-w - d / 2, 'e', 'g', w) - d / 2) < 1e-12
assert q.misclassification_probability(10.0, 1.0) < 1e-6
try:
    q.classify(0.0, 'x', 1.0)
except ValueError:
    pass
else:
    raise AssertionError
");
}

#[test]
fn two_point_and_estimator() {
    run(c"
import qmonitor as q
flip = [[0, 1], [1, 0]]
d = q.two_point_distribution([-0.5, 0.5], [-0.5, 0.5], flip, [1.0, 0.0])
assert d == [(1.0, 1.0)]
h = 2 ** -0.5
d = q.two_point_distribution([-0.5, 0.5], [-0.5, 0.5], [[h, h], [h, -h]], [1.0, 0.0])
assert len(d) == 2 and abs(d[0][1] - 0.5) < 1e-12
try:
    q.two_point_distribution([0, 1], [0, 1], [[1, 1], [0, 1]], [1.0, 0.0])
except ValueError:
    pass
else:
    raise AssertionError
e = q.ft_estimator([0.0, 0.0, 0.0])
assert e.mean == 1.0 and e.std_error == 0.0 and e.n_samples == 3
");
}

#[test]
fn ensemble_and_sweep_match_each_other() {
    run(c"
import qmonitor as q
c = q.Config(n_steps=400, dt=0.02, lambda_q=1e4)
e = q.run_ensemble(c, n=64, rule='both', workers=2)
assert e.rule == 'naive' and len(e.true_jumps) == 64 and len(e.omega_mean) == 401
assert e.ft.lambda_q == 1e4 and e.ft.n_trajectories == 64
again = q.run_ensemble(c, n=64, rule='both', workers=1)
assert again.omega_mean == e.omega_mean and again.entropy_exact == e.entropy_exact
pts = q.run_sweep(c, [1e2, 1e4], n=64)
assert [p.lambda_q for p in pts] == [1e2, 1e4]
assert pts[1].mean_abs_omega_error == e.ft.mean_abs_omega_error
assert pts[1].ft_mean_exact == e.ft.ft_mean_exact
try:
    q.run_sweep(c, [0.0], n=4)
except ValueError:
    pass
else:
    raise AssertionError
");
}
