use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::models::{enumerate_kanban_states, KanbanState, MachinePosition};

fn admissible(k: usize) -> bool {
    k >= 3 && (k - 1).is_power_of_two()
}

/// Aggregate map of the `k`-ticket machine onto the `(k+1)/2`-ticket one:
/// `b' = ceil(b/2)`, `c' = ceil(c/2)`, `a' = k' - b' - c'`.
pub fn triangle_aggregation(k: usize, position: MachinePosition) -> Result<Vec<usize>> {
    if !admissible(k) {
        return Err(invalid(format!("triangle aggregation needs k = 2^m + 1 with m >= 1, got {k}")));
    }
    let kc = (k + 1) / 2;
    let coarse: HashMap<KanbanState, usize> = enumerate_kanban_states(kc, position)
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    enumerate_kanban_states(k, position)
        .into_iter()
        .map(|s| {
            let b = s.b.div_ceil(2);
            let c = s.c.div_ceil(2);
            let target = KanbanState::new(kc - b - c, b, c);
            coarse
                .get(&target)
                .copied()
                .ok_or_else(|| invalid(format!("state {s:?} has no aggregate")))
        })
        .collect()
}

/// Last step from two tickets: middle `{1,2},{4,5},{3,6}`, ends `{1,2},{3}`.
pub fn final_kanban_aggregation(size: usize, position: MachinePosition) -> Result<Vec<usize>> {
    match (position, size) {
        (MachinePosition::Middle, 6) => Ok(vec![0, 0, 2, 1, 1, 2]),
        (MachinePosition::First | MachinePosition::Last, 3) => Ok(vec![0, 0, 1]),
        _ => Err(invalid(format!("final aggregation does not apply to a {position:?} factor of size {size}"))),
    }
}
