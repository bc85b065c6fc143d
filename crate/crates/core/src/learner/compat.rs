use crate::error::{Error, Result};
use crate::fpta::{Iofpta, NodeId};

use super::Epsilon;

/// Half-width `(√(1/n1) + √(1/n2)) · √(½ ln(2/ε))` of the Hoeffding test.
pub fn hoeffding_bound(n1: u64, n2: u64, eps: Epsilon) -> f64 {
    (1.0 / (n1 as f64).sqrt() + 1.0 / (n2 as f64).sqrt()) * eps.confidence_factor()
}

/// True when `f1/n1` and `f2/n2` are within the Hoeffding bound, or when
/// either sample is empty.
pub fn hoeffding(f1: u64, n1: u64, f2: u64, n2: u64, eps: Epsilon) -> Result<bool> {
    if f1 > n1 {
        return Err(Error::MalformedCounts { f: f1, n: n1 });
    }
    if f2 > n2 {
        return Err(Error::MalformedCounts { f: f2, n: n2 });
    }
    if n1 == 0 || n2 == 0 {
        return Ok(true);
    }
    let diff = (f1 as f64 / n1 as f64 - f2 as f64 / n2 as f64).abs();
    Ok(diff < hoeffding_bound(n1, n2, eps))
}

/// Recursive ε-compatibility of two nodes of the frozen tree `t`.
///
/// Labels must agree; for every input the output distributions (err
/// included) must pass the Hoeffding test; and every pair of children
/// reached by the same step must be compatible in turn. A child missing on
/// either side carries no evidence and is accepted.
pub fn compatible(t: &Iofpta, qr: NodeId, qb: NodeId, eps: Epsilon) -> bool {
    let factor = eps.confidence_factor();
    let mut stack = vec![(qr, qb)];
    while let Some((x, y)) = stack.pop() {
        let (nx, ny) = (t.node(x), t.node(y));
        if nx.label != ny.label {
            return false;
        }
        if x == y {
            continue;
        }
        for a in 0..t.num_inputs() {
            let (n1, n2) = (nx.totals[a], ny.totals[a]);
            if n1 == 0 || n2 == 0 {
                continue;
            }
            let bound = (1.0 / (n1 as f64).sqrt() + 1.0 / (n2 as f64).sqrt()) * factor;
            if !distributions_close(nx.freq_for(a), n1, ny.freq_for(a), n2, bound) {
                return false;
            }
        }
        push_common_children(t, x, y, &mut stack);
    }
    true
}

fn distributions_close(
    fx: &[((usize, usize), u64)],
    n1: u64,
    fy: &[((usize, usize), u64)],
    n2: u64,
    bound: f64,
) -> bool {
    let close = |f1: u64, f2: u64| (f1 as f64 / n1 as f64 - f2 as f64 / n2 as f64).abs() < bound;
    let (mut i, mut j) = (0, 0);
    while i < fx.len() || j < fy.len() {
        let ok = match (fx.get(i), fy.get(j)) {
            (Some(&(kx, cx)), Some(&(ky, cy))) if kx == ky => {
                i += 1;
                j += 1;
                close(cx, cy)
            }
            (Some(&(kx, cx)), Some(&(ky, _))) if kx < ky => {
                i += 1;
                close(cx, 0)
            }
            (Some(&(_, cx)), None) => {
                i += 1;
                close(cx, 0)
            }
            (_, Some(&(_, cy))) => {
                j += 1;
                close(0, cy)
            }
            (None, None) => unreachable!(),
        };
        if !ok {
            return false;
        }
    }
    true
}

fn push_common_children(t: &Iofpta, x: NodeId, y: NodeId, stack: &mut Vec<(NodeId, NodeId)>) {
    let (cx, cy) = (&t.node(x).children, &t.node(y).children);
    let (mut i, mut j) = (0, 0);
    while i < cx.len() && j < cy.len() {
        match cx[i].0.cmp(&cy[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                stack.push((cx[i].1, cy[j].1));
                i += 1;
                j += 1;
            }
        }
    }
}
