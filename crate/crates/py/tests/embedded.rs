use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::wrap_pymodule;

fn run(code: &std::ffi::CStr) {
    Python::initialize();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("rr", wrap_pymodule!(rrdelay_py::rrdelay_py)(py)).unwrap();
        if let Err(e) = py.run(code, Some(&globals), None) {
            e.print(py);
            panic!("python check failed");
        }
    });
}

#[test]
fn exponential_strategy_from_python() {
    run(c"
m = rr.Model.table1('exponential', 'I')
q, pi = m.strategy(0.0)
assert abs(q - 0.29151071432884556) < 1e-12, q
assert abs(pi - 0.32390079369871729) < 1e-12, pi
assert m.family == 'exponential'
");
}

#[test]
fn power_solution_from_python() {
    run(c"
m = rr.Model.table1('power', 'I').with_points([(0.5, 1.0)])
sol = m.solve(1e-3)
assert abs(sol.g_at(0.0)[0] - 1.3068434592081293) < 1e-9
assert sol.times[0] == 2.0 and not sol.exploded
");
}

#[test]
fn errors_map_to_python_exceptions() {
    run(c"
try:
    rr.Model.table1('exponential', 'I').strategy(5.0)
    raise AssertionError('expected ValueError')
except ValueError as e:
    assert 'outside' in str(e)
try:
    rr.Model.table1('exponential', 'I').solve()
    raise AssertionError('expected ValueError')
except ValueError:
    pass
");
}
