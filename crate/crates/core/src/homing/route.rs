use serde::{Deserialize, Serialize};

use crate::pathplan::Path;
use crate::Vec3;

use super::{cost, FreeRay, HomingError, HomingParams, HomingTree, NodeId};

/// Route from the current position to a landing spot in radio range of a
/// communication node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomingRoute {
    /// Starts at the current position and ends at `landing`.
    pub waypoints: Vec<Vec3>,
    pub landing: Vec3,
    /// Summed link costs of the flown part (s).
    pub cost: f64,
    /// Communication node the landing spot relays through.
    pub comm_node: NodeId,
    /// Tree nodes whose links are flown, in flight order; the last one may
    /// lie past the landing spot.
    pub nodes: Vec<NodeId>,
}

impl HomingRoute {
    pub fn is_empty(&self) -> bool {
        self.waypoints.len() <= 1
    }

    pub fn path(&self) -> Path {
        Path::new(self.waypoints.clone())
    }
}

/// Attaches `current` to the tree like a pose node (without the `d_e` check
/// and without inserting it), follows parent links to the first
/// communication node and stops where that sequence first comes within
/// `d_c` of it. When the stop falls inside a link, the landing spot is the
/// point of the link at radio range, so a long direct link to the base does
/// not drag the robot all the way home.
///
/// A position already within `d_c` of a communication node lands in place.
pub fn homing_path(tree: &HomingTree, current: Vec3, ray: &impl FreeRay) -> Result<HomingRoute, HomingError> {
    let params = tree.params();
    let (near, d) = tree.nearest_comm(current);
    if d <= params.d_c {
        return Ok(HomingRoute { waypoints: vec![current], landing: current, cost: 0.0, comm_node: near.id, nodes: Vec::new() });
    }
    let (attach, _) = tree.best_attachment(current, ray).ok_or(HomingError::NoHomingPath(current))?;
    let mut chain = vec![*tree.node(attach).unwrap()];
    while !chain.last().unwrap().kind.is_communication() {
        let p = chain.last().unwrap().parent.expect("pose nodes always have a parent");
        chain.push(*tree.node(p).ok_or(HomingError::UnknownNode(p))?);
    }
    let comm = *chain.last().unwrap();
    let stop = chain.iter().position(|n| n.position.distance(comm.position) <= params.d_c).expect("comm node is in range of itself");
    let before = if stop == 0 { current } else { chain[stop - 1].position };
    let landing = range_entry(before, chain[stop].position, comm.position, params.d_c);
    let mut total = 0.0;
    let mut waypoints = vec![current];
    for n in &chain[..stop] {
        total += cost(*waypoints.last().unwrap(), n.position, params);
        waypoints.push(n.position);
    }
    total += cost(*waypoints.last().unwrap(), landing, params);
    waypoints.push(landing);
    Ok(HomingRoute {
        landing,
        waypoints,
        cost: total,
        comm_node: comm.id,
        nodes: chain[..=stop].iter().map(|n| n.id).collect(),
    })
}

/// First point of the segment `a -> b` within `range` of `c`; `b` must be
/// in range. The result is always in range.
fn range_entry(a: Vec3, b: Vec3, c: Vec3, range: f64) -> Vec3 {
    if a.distance(c) <= range {
        return a;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if a.lerp(b, mid).distance(c) <= range {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    a.lerp(b, hi)
}

/// Homing cost from `current`, or `retrace_cost` when the tree cannot route it.
pub fn homing_estimate(tree: &HomingTree, current: Vec3, ray: &impl FreeRay, retrace_cost: f64) -> f64 {
    homing_path(tree, current, ray).map(|r| r.cost).unwrap_or(retrace_cost)
}

/// Time to go home: remaining flight time no longer covers the estimate plus
/// the reserve (inclusive).
pub fn homing_trigger(remaining_flight_time: f64, estimate: f64, params: &HomingParams) -> bool {
    remaining_flight_time <= estimate + params.reserve_time
}
