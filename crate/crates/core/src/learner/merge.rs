use crate::error::{Error, Result};
use crate::fpta::{Iofpta, NodeId};

/// Merges `qb` into `qr` in the working tree `a`.
///
/// The edge into `qb` is redirected to `qr`, then `qb`'s subtree is folded
/// into `qr`: counts are added, children reached by the same step are folded
/// recursively and children `qr` lacks are adopted. Afterwards `qb` and its
/// former subtree are unreachable.
pub fn merge(a: &mut Iofpta, qr: NodeId, qb: NodeId) -> Result<()> {
    merge_tracking(a, qr, qb, |_, _| {})
}

/// Like [`merge`], calling `on_adopt(parent, child)` whenever a node gains a
/// child through adoption.
pub(crate) fn merge_tracking(
    a: &mut Iofpta,
    qr: NodeId,
    qb: NodeId,
    mut on_adopt: impl FnMut(NodeId, NodeId),
) -> Result<()> {
    if a.nodes[qr].label != a.nodes[qb].label {
        return Err(Error::LabelMismatch(qr, qb));
    }
    if let Some((p, step)) = a.nodes[qb].parent {
        a.nodes[p].set_child(step, qr);
    }
    let mut stack = vec![(qr, qb)];
    while let Some((r, b)) = stack.pop() {
        let freq = std::mem::take(&mut a.nodes[b].freq);
        for (step, count) in freq {
            a.nodes[r].add_freq(step, count);
        }
        a.nodes[b].totals.iter_mut().for_each(|t| *t = 0);
        let children = std::mem::take(&mut a.nodes[b].children);
        for (step, cb) in children {
            match a.nodes[r].child(step) {
                Some(cr) => stack.push((cr, cb)),
                None => {
                    a.nodes[r].set_child(step, cb);
                    a.nodes[cb].parent = Some((r, step));
                    on_adopt(r, cb);
                }
            }
        }
    }
    Ok(())
}
