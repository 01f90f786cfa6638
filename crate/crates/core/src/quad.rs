//! Composite Simpson quadrature.

/// Default node count for density integrals.
pub const DEFAULT_NODES: usize = 4001;

/// Integrates `f` over `[a, b]` with composite Simpson on `nodes` points
/// (rounded up to odd, at least 3).
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, nodes: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let nodes = nodes.max(3) | 1;
    let panels = nodes - 1;
    let h = (b - a) / panels as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for k in 1..panels {
        let v = f(a + h * k as f64);
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    (f(a) + f(b) + 4.0 * odd + 2.0 * even) * h / 3.0
}

/// Simpson weights and nodes for `[a, b]`, for callers that evaluate several
/// integrands at shared nodes.
pub fn simpson_rule(a: f64, b: f64, nodes: usize) -> (alloc::vec::Vec<f64>, alloc::vec::Vec<f64>) {
    let nodes = nodes.max(3) | 1;
    let panels = nodes - 1;
    let h = (b - a) / panels as f64;
    let mut xs = alloc::vec::Vec::with_capacity(nodes);
    let mut ws = alloc::vec::Vec::with_capacity(nodes);
    for k in 0..nodes {
        xs.push(if k == panels { b } else { a + h * k as f64 });
        let w = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        ws.push(w * h / 3.0);
    }
    (xs, ws)
}
