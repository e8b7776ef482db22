use std::cmp::Ordering;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::{Vec3, VoxelKey};

use super::{cost, FreeRay, HomingError, HomingParams};

pub type NodeId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Base,
    LandedRobot,
    DeployedBeacon,
    Pose,
}

impl NodeKind {
    pub fn is_communication(self) -> bool {
        !matches!(self, NodeKind::Pose)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub position: Vec3,
    pub parent: Option<NodeId>,
    /// Flight-time estimate of the link to `parent` (s).
    pub edge_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    /// A pose node closer than `d_e` to an existing node.
    TooClose { nearest: NodeId, distance: f64 },
    /// No existing node is reachable by a free ray.
    NotVisible,
    DuplicateId,
    /// The tree already has its base station.
    SecondBase,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Insertion {
    Inserted { parent: NodeId, reparented: Vec<NodeId> },
    Rejected(Rejection),
}

impl Insertion {
    pub fn is_inserted(&self) -> bool {
        matches!(self, Insertion::Inserted { .. })
    }
}

/// Tree of communication and pose nodes rooted at the base station.
///
/// Communication nodes hang off the cheapest other communication node; pose
/// nodes hang off the visible node minimizing link cost plus accumulated
/// cost. Inserting a communication node pulls over every pose node it can see
/// more cheaply than the pose node's current route.
#[derive(Debug, Clone)]
pub struct HomingTree {
    params: HomingParams,
    nodes: Vec<Node>,
    acc: Vec<f64>,
    children: Vec<Vec<usize>>,
    index: FxHashMap<NodeId, usize>,
    grid: FxHashMap<VoxelKey, Vec<usize>>,
}

impl PartialEq for HomingTree {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.sorted_nodes() == other.sorted_nodes()
    }
}

impl HomingTree {
    pub fn new(base_id: NodeId, base: Vec3, params: HomingParams) -> Result<Self, HomingError> {
        params.validate()?;
        if !base.is_finite() {
            return Err(HomingError::Params("base position must be finite".into()));
        }
        let mut t = Self {
            params,
            nodes: Vec::new(),
            acc: Vec::new(),
            children: Vec::new(),
            index: FxHashMap::default(),
            grid: FxHashMap::default(),
        };
        t.push(Node { id: base_id, kind: NodeKind::Base, position: base, parent: None, edge_cost: 0.0 }, 0.0);
        Ok(t)
    }

    pub fn params(&self) -> &HomingParams {
        &self.params
    }

    pub fn base(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    /// Nodes in insertion order.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn sorted_nodes(&self) -> Vec<Node> {
        let mut v = self.nodes.clone();
        v.sort_by_key(|n| n.id);
        v
    }

    pub fn comm_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind.is_communication())
    }

    pub fn pose_nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| !n.kind.is_communication())
    }

    pub fn accumulated_cost(&self, id: NodeId) -> Result<f64, HomingError> {
        self.index.get(&id).map(|&i| self.acc[i]).ok_or(HomingError::UnknownNode(id))
    }

    pub fn parent(&self, id: NodeId) -> Result<Option<NodeId>, HomingError> {
        self.node(id).map(|n| n.parent).ok_or(HomingError::UnknownNode(id))
    }

    /// Nearest communication node and its distance.
    pub fn nearest_comm(&self, p: Vec3) -> (&Node, f64) {
        self.comm_nodes()
            .map(|n| (n, n.position.distance(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.id.cmp(&b.0.id)))
            .expect("tree always holds the base")
    }

    /// Visible node minimizing `cost(p, v) + accumulatedCost(v)`, ties by id.
    pub fn best_attachment(&self, p: Vec3, ray: &impl FreeRay) -> Option<(NodeId, f64)> {
        let mut cand: Vec<(f64, NodeId, usize)> =
            (0..self.nodes.len()).map(|i| (cost(p, self.nodes[i].position, &self.params) + self.acc[i], self.nodes[i].id, i)).collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.into_iter().find(|c| ray.free_ray(p, self.nodes[c.2].position)).map(|c| (c.1, c.0))
    }

    /// Inserts a node; rejection is a normal outcome.
    pub fn insert(&mut self, id: NodeId, kind: NodeKind, position: Vec3, ray: &impl FreeRay) -> Insertion {
        if self.index.contains_key(&id) {
            return Insertion::Rejected(Rejection::DuplicateId);
        }
        match kind {
            NodeKind::Base => Insertion::Rejected(Rejection::SecondBase),
            NodeKind::Pose => self.insert_pose(id, position, ray),
            _ => self.insert_comm(id, kind, position, ray),
        }
    }

    fn insert_comm(&mut self, id: NodeId, kind: NodeKind, position: Vec3, ray: &impl FreeRay) -> Insertion {
        let (parent, edge) = self
            .comm_nodes()
            .map(|c| (c.id, cost(position, c.position, &self.params)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("tree always holds the base");
        let n = self.push(Node { id, kind, position, parent: Some(parent), edge_cost: edge }, 0.0);
        let mut poses: Vec<usize> = (0..n).filter(|&i| !self.nodes[i].kind.is_communication()).collect();
        poses.sort_by_key(|&i| self.nodes[i].id);
        let mut reparented = Vec::new();
        for p in poses {
            let c = cost(position, self.nodes[p].position, &self.params);
            if c < self.acc[p] && ray.free_ray(position, self.nodes[p].position) {
                self.reparent(p, n, c);
                reparented.push(self.nodes[p].id);
            }
        }
        Insertion::Inserted { parent, reparented }
    }

    fn insert_pose(&mut self, id: NodeId, position: Vec3, ray: &impl FreeRay) -> Insertion {
        if let Some((nearest, distance)) = self.nearest_within(position, self.params.d_e) {
            return Insertion::Rejected(Rejection::TooClose { nearest, distance });
        }
        let Some((parent, total)) = self.best_attachment(position, ray) else {
            return Insertion::Rejected(Rejection::NotVisible);
        };
        let pi = self.index[&parent];
        let edge = cost(position, self.nodes[pi].position, &self.params);
        let acc = edge + self.acc[pi];
        debug_assert_eq!(acc, total);
        self.push(Node { id, kind: NodeKind::Pose, position, parent: Some(parent), edge_cost: edge }, acc);
        Insertion::Inserted { parent, reparented: Vec::new() }
    }

    fn cell(&self, p: Vec3) -> VoxelKey {
        (p / self.params.d_e).floor().as_ivec3()
    }

    /// Closest node strictly nearer than `r` (`r` ≤ d_e).
    fn nearest_within(&self, p: Vec3, r: f64) -> Option<(NodeId, f64)> {
        let k = self.cell(p);
        let mut best: Option<(NodeId, f64)> = None;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(bucket) = self.grid.get(&(k + VoxelKey::new(dx, dy, dz))) else { continue };
                    for &i in bucket {
                        let d = self.nodes[i].position.distance(p);
                        let n = self.nodes[i].id;
                        if d < r && best.is_none_or(|(bid, bd)| d < bd || (d == bd && n < bid)) {
                            best = Some((n, d));
                        }
                    }
                }
            }
        }
        best
    }

    fn push(&mut self, node: Node, acc: f64) -> usize {
        let i = self.nodes.len();
        if let Some(p) = node.parent {
            let pi = self.index[&p];
            self.children[pi].push(i);
        }
        self.index.insert(node.id, i);
        let cell = self.cell(node.position);
        self.grid.entry(cell).or_default().push(i);
        self.nodes.push(node);
        self.acc.push(acc);
        self.children.push(Vec::new());
        i
    }

    fn reparent(&mut self, i: usize, new_parent: usize, edge: f64) {
        if let Some(old) = self.nodes[i].parent {
            let oi = self.index[&old];
            self.children[oi].retain(|&c| c != i);
        }
        self.nodes[i].parent = Some(self.nodes[new_parent].id);
        self.nodes[i].edge_cost = edge;
        self.children[new_parent].push(i);
        let mut stack = vec![i];
        while let Some(j) = stack.pop() {
            let pj = self.index[&self.nodes[j].parent.unwrap()];
            self.acc[j] = if self.nodes[j].kind.is_communication() { 0.0 } else { self.nodes[j].edge_cost + self.acc[pj] };
            stack.extend(self.children[j].iter().copied());
        }
    }

    /// Root uniqueness, acyclicity, comm-chain property and cached costs.
    pub fn check_invariants(&self) -> Result<(), String> {
        let roots: Vec<_> = self.nodes.iter().filter(|n| n.parent.is_none()).collect();
        if roots.len() != 1 || roots[0].kind != NodeKind::Base {
            return Err("tree must have exactly one root, the base".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            let mut cur = n;
            let mut steps = 0;
            let mut acc = 0.0;
            let mut terms = Vec::new();
            let mut reached_comm = n.kind.is_communication();
            while let Some(p) = cur.parent {
                if !reached_comm {
                    terms.push(cur.edge_cost);
                }
                let next = self.node(p).ok_or(format!("node {} has unknown parent {p}", cur.id))?;
                if n.kind.is_communication() && !next.kind.is_communication() {
                    return Err(format!("communication node {} has pose ancestor {}", n.id, next.id));
                }
                if next.kind.is_communication() {
                    reached_comm = true;
                }
                cur = next;
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(format!("cycle through node {}", n.id));
                }
            }
            for t in terms.iter().rev() {
                acc += t;
            }
            if !n.kind.is_communication() && (acc - self.acc[i]).abs() > 1e-9 * (1.0 + acc) {
                return Err(format!("stale accumulated cost at node {}", n.id));
            }
            if n.kind.is_communication() && self.acc[i] != 0.0 {
                return Err(format!("communication node {} has non-zero cost", n.id));
            }
        }
        Ok(())
    }

    /// Rebuilds an insertion-ordered tree from stored records (decoding).
    pub(crate) fn from_records(params: HomingParams, records: Vec<Node>) -> Result<Self, HomingError> {
        let mut it = records.into_iter();
        let base = it.next().ok_or_else(|| HomingError::Format("no base record".into()))?;
        if base.kind != NodeKind::Base || base.parent.is_some() {
            return Err(HomingError::Format("first record must be the base".into()));
        }
        let mut t = Self::new(base.id, base.position, params)?;
        let rest: Vec<Node> = it.collect();
        // Parents may appear after children when reparented; link in two passes.
        for n in &rest {
            if n.kind == NodeKind::Base || t.index.contains_key(&n.id) {
                return Err(HomingError::Format(format!("duplicate or second base node {}", n.id)));
            }
            let i = t.nodes.len();
            t.index.insert(n.id, i);
            let cell = t.cell(n.position);
            t.grid.entry(cell).or_default().push(i);
            t.nodes.push(*n);
            t.acc.push(0.0);
            t.children.push(Vec::new());
        }
        for i in 1..t.nodes.len() {
            let p = t.nodes[i].parent.ok_or_else(|| HomingError::Format(format!("node {} has no parent", t.nodes[i].id)))?;
            let pi = *t.index.get(&p).ok_or(HomingError::UnknownNode(p))?;
            t.children[pi].push(i);
        }
        let mut stack = vec![0usize];
        let mut seen = 1usize;
        while let Some(j) = stack.pop() {
            for c in t.children[j].clone() {
                t.acc[c] = if t.nodes[c].kind.is_communication() { 0.0 } else { t.nodes[c].edge_cost + t.acc[j] };
                seen += 1;
                stack.push(c);
            }
        }
        if seen != t.nodes.len() {
            return Err(HomingError::Format("records contain a cycle".into()));
        }
        t.check_invariants().map_err(HomingError::Format)?;
        Ok(t)
    }
}

fn canonical_order(a: &HomingTree, b: &HomingTree) -> Ordering {
    b.len().cmp(&a.len()).then_with(|| {
        let ia: Vec<NodeId> = a.sorted_nodes().iter().map(|n| n.id).collect();
        let ib: Vec<NodeId> = b.sorted_nodes().iter().map(|n| n.id).collect();
        ia.cmp(&ib).then_with(|| super::encode_tree(&canonicalized(a)).cmp(&super::encode_tree(&canonicalized(b))))
    })
}

fn canonicalized(t: &HomingTree) -> HomingTree {
    let mut c = t.clone();
    let base = c.nodes[0];
    let mut rest: Vec<Node> = c.nodes[1..].to_vec();
    rest.sort_by_key(|n| n.id);
    c.nodes = std::iter::once(base).chain(rest).collect();
    c
}

/// Shares two replicas.
///
/// The larger tree (ties: smaller id list, then smaller canonical encoding)
/// absorbs the other tree's missing nodes through regular insertion,
/// communication nodes first, each group in increasing id order. The choice
/// does not depend on argument order, so `merge(a, b) == merge(b, a)`.
pub fn merge_trees(local: &HomingTree, remote: &HomingTree, ray: &impl FreeRay) -> Result<HomingTree, HomingError> {
    if local.params.d_e != remote.params.d_e {
        return Err(HomingError::Incompatible("different d_e".into()));
    }
    if local.base().id != remote.base().id || local.base().position != remote.base().position {
        return Err(HomingError::Incompatible("different base station".into()));
    }
    let (into, from) = match canonical_order(local, remote) {
        Ordering::Greater => (remote, local),
        _ => (local, remote),
    };
    let mut missing = Vec::new();
    for n in &from.nodes {
        match into.node(n.id) {
            Some(m) if m.kind != n.kind || m.position != n.position => {
                return Err(HomingError::Incompatible(format!("node {} differs between replicas", n.id)));
            }
            Some(_) => {}
            None => missing.push(*n),
        }
    }
    let mut out = into.clone();
    missing.sort_by_key(|n| (!n.kind.is_communication(), n.id));
    for n in missing {
        out.insert(n.id, n.kind, n.position, ray);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(_: Vec3, _: Vec3) -> bool {
        true
    }

    fn params() -> HomingParams {
        HomingParams { d_e: 1.0, d_c: 50.0, v_nominal: 1.0, reserve_time: 10.0 }
    }

    #[test]
    fn first_pose_hangs_off_base() {
        let mut t = HomingTree::new(0, Vec3::ZERO, params()).unwrap();
        let r = t.insert(1, NodeKind::Pose, Vec3::new(3.0, 0.0, 0.0), &open);
        assert_eq!(r, Insertion::Inserted { parent: 0, reparented: vec![] });
        assert_eq!(t.accumulated_cost(1).unwrap(), 3.0);
    }

    #[test]
    fn close_pose_is_rejected() {
        let mut t = HomingTree::new(0, Vec3::ZERO, params()).unwrap();
        t.insert(1, NodeKind::Pose, Vec3::new(3.0, 0.0, 0.0), &open);
        let r = t.insert(2, NodeKind::Pose, Vec3::new(3.5, 0.0, 0.0), &open);
        assert!(matches!(r, Insertion::Rejected(Rejection::TooClose { nearest: 1, .. })));
    }

    #[test]
    fn chain_costs_accumulate() {
        let mut t = HomingTree::new(0, Vec3::ZERO, params()).unwrap();
        let wall = |a: Vec3, b: Vec3| a.x.min(b.x) > 1.0;
        t.insert(1, NodeKind::Pose, Vec3::new(3.0, 0.0, 0.0), &open);
        t.insert(2, NodeKind::Pose, Vec3::new(3.0, 4.0, 0.0), &wall);
        assert_eq!(t.parent(2).unwrap(), Some(1));
        assert_eq!(t.accumulated_cost(2).unwrap(), 7.0);
        assert!(t.accumulated_cost(99).is_err());
        t.check_invariants().unwrap();
    }

    #[test]
    fn comm_node_pulls_over_cheaper_poses() {
        let mut t = HomingTree::new(0, Vec3::ZERO, params()).unwrap();
        for i in 1..=10 {
            t.insert(i, NodeKind::Pose, Vec3::new(2.0 * i as f64, 0.0, 0.0), &|a: Vec3, b: Vec3| a.distance(b) < 2.5);
        }
        assert!((t.accumulated_cost(10).unwrap() - 20.0).abs() < 1e-9);
        let r = t.insert(100, NodeKind::LandedRobot, Vec3::new(16.0, 1.0, 0.0), &|a: Vec3, b: Vec3| a.distance(b) < 5.0);
        let Insertion::Inserted { parent, reparented } = r else { panic!() };
        assert_eq!(parent, 0);
        assert_eq!(reparented, vec![6, 7, 8, 9, 10]);
        assert!(t.accumulated_cost(10).unwrap() < 5.0);
        assert_eq!(t.accumulated_cost(100).unwrap(), 0.0);
        t.check_invariants().unwrap();
    }

    #[test]
    fn second_base_and_duplicates_rejected() {
        let mut t = HomingTree::new(0, Vec3::ZERO, params()).unwrap();
        assert_eq!(t.insert(5, NodeKind::Base, Vec3::ONE, &open), Insertion::Rejected(Rejection::SecondBase));
        assert_eq!(t.insert(0, NodeKind::Pose, Vec3::splat(9.0), &open), Insertion::Rejected(Rejection::DuplicateId));
    }
}
