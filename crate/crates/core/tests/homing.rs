use cavenav::homing::*;
use cavenav::Vec3;
use proptest::prelude::*;

/// Segments blocked by any sphere.
#[derive(Debug, Clone)]
struct Spheres(Vec<(Vec3, f64)>);

impl FreeRay for Spheres {
    fn free_ray(&self, a: Vec3, b: Vec3) -> bool {
        self.0.iter().all(|(c, r)| {
            let d = b - a;
            let t = if d.length_squared() > 0.0 { ((*c - a).dot(d) / d.length_squared()).clamp(0.0, 1.0) } else { 0.0 };
            (a + d * t).distance(*c) > *r
        })
    }
}

/// Literal replay of the insertion rules over flat vectors.
struct Oracle {
    params: HomingParams,
    nodes: Vec<(NodeId, NodeKind, Vec3, Option<usize>, f64)>,
}

impl Oracle {
    fn acc(&self, i: usize) -> f64 {
        let n = &self.nodes[i];
        if n.1.is_communication() {
            return 0.0;
        }
        n.4 + self.acc(n.3.unwrap())
    }

    fn cost(&self, a: Vec3, b: Vec3) -> f64 {
        a.distance(b) / self.params.v_nominal
    }

    fn insert(&mut self, id: NodeId, kind: NodeKind, p: Vec3, ray: &Spheres) -> bool {
        if self.nodes.iter().any(|n| n.0 == id) {
            return false;
        }
        if kind.is_communication() {
            let mut best: Option<(f64, NodeId, usize)> = None;
            for (i, n) in self.nodes.iter().enumerate() {
                if n.1.is_communication() {
                    let c = self.cost(p, n.2);
                    if best.is_none_or(|b| c < b.0 || (c == b.0 && n.0 < b.1)) {
                        best = Some((c, n.0, i));
                    }
                }
            }
            let (c, _, parent) = best.unwrap();
            self.nodes.push((id, kind, p, Some(parent), c));
            let me = self.nodes.len() - 1;
            let mut poses: Vec<usize> = (0..me).filter(|&i| !self.nodes[i].1.is_communication()).collect();
            poses.sort_by_key(|&i| self.nodes[i].0);
            for q in poses {
                let c = self.cost(p, self.nodes[q].2);
                if c < self.acc(q) && ray.free_ray(p, self.nodes[q].2) {
                    self.nodes[q].3 = Some(me);
                    self.nodes[q].4 = c;
                }
            }
            return true;
        }
        if self.nodes.iter().any(|n| n.2.distance(p) < self.params.d_e) {
            return false;
        }
        let mut best: Option<(f64, NodeId, usize)> = None;
        for (i, n) in self.nodes.iter().enumerate() {
            if !ray.free_ray(p, n.2) {
                continue;
            }
            let c = self.cost(p, n.2) + self.acc(i);
            if best.is_none_or(|b| c < b.0 || (c == b.0 && n.0 < b.1)) {
                best = Some((c, n.0, i));
            }
        }
        let Some((_, _, parent)) = best else { return false };
        let c = self.cost(p, self.nodes[parent].2);
        self.nodes.push((id, NodeKind::Pose, p, Some(parent), c));
        true
    }
}

fn params() -> HomingParams {
    HomingParams { d_e: 2.0, d_c: 50.0, v_nominal: 1.2, reserve_time: 30.0 }
}

fn arb_kind() -> impl Strategy<Value = NodeKind> {
    prop_oneof![8 => Just(NodeKind::Pose), 1 => Just(NodeKind::LandedRobot), 1 => Just(NodeKind::DeployedBeacon)]
}

fn arb_point() -> impl Strategy<Value = Vec3> {
    (-15.0f64..15.0, -15.0f64..15.0, -3.0f64..3.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn arb_case() -> impl Strategy<Value = (Spheres, Vec<(NodeId, NodeKind, Vec3)>)> {
    let spheres = prop::collection::vec((arb_point(), 0.5f64..3.0), 0..5).prop_map(Spheres);
    let seq = prop::collection::vec((1u64..1000, arb_kind(), arb_point()), 1..20);
    (spheres, seq)
}

fn build(seq: &[(NodeId, NodeKind, Vec3)], ray: &Spheres) -> HomingTree {
    let mut t = HomingTree::new(0, Vec3::ZERO, params()).unwrap();
    for (id, k, p) in seq {
        t.insert(*id, *k, *p, ray);
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn insertion_matches_brute_force_replay((ray, seq) in arb_case()) {
        let mut tree = HomingTree::new(0, Vec3::ZERO, params()).unwrap();
        let mut oracle = Oracle { params: params(), nodes: vec![(0, NodeKind::Base, Vec3::ZERO, None, 0.0)] };
        for (id, kind, p) in &seq {
            let got = tree.insert(*id, *kind, *p, &ray).is_inserted();
            let want = oracle.insert(*id, *kind, *p, &ray);
            prop_assert_eq!(got, want);
            tree.check_invariants().map_err(TestCaseError::fail)?;
            prop_assert_eq!(tree.len(), oracle.nodes.len());
            for (i, n) in oracle.nodes.iter().enumerate() {
                let parent = n.3.map(|j| oracle.nodes[j].0);
                prop_assert_eq!(tree.parent(n.0).unwrap(), parent);
                prop_assert_eq!(tree.accumulated_cost(n.0).unwrap(), oracle.acc(i));
            }
        }
    }

    #[test]
    fn merge_is_commutative((ray, a) in arb_case(), b in prop::collection::vec((1000u64..2000, arb_kind(), arb_point()), 0..15), shared in 0usize..5) {
        let ta = build(&a, &ray);
        let mut bseq: Vec<_> = a.iter().take(shared).cloned().collect();
        bseq.extend(b);
        let tb = build(&bseq, &ray);
        let ab = merge_trees(&ta, &tb, &ray).unwrap();
        let ba = merge_trees(&tb, &ta, &ray).unwrap();
        prop_assert_eq!(encode_tree(&ab), encode_tree(&ba));
        ab.check_invariants().map_err(TestCaseError::fail)?;
        let mut ids: Vec<_> = ab.nodes().iter().map(|n| n.id).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), ab.len());
    }

    #[test]
    fn comm_insertion_never_raises_costs((ray, seq) in arb_case(), p in arb_point()) {
        let mut t = build(&seq, &ray);
        let before: Vec<(NodeId, f64)> = t.pose_nodes().map(|n| (n.id, t.accumulated_cost(n.id).unwrap())).collect();
        t.insert(5000, NodeKind::DeployedBeacon, p, &ray);
        for (id, c) in before {
            prop_assert!(t.accumulated_cost(id).unwrap() <= c);
        }
    }

    #[test]
    fn codec_round_trips((ray, seq) in arb_case()) {
        let t = build(&seq, &ray);
        let bytes = encode_tree(&t);
        let back = decode_tree(&bytes).unwrap();
        prop_assert_eq!(encode_tree(&back), bytes);
        for n in t.nodes() {
            prop_assert_eq!(back.accumulated_cost(n.id).unwrap(), t.accumulated_cost(n.id).unwrap());
        }
    }
}

#[test]
fn cost_examples() {
    let p = HomingParams { v_nominal: 1.2, ..HomingParams::default() };
    assert_eq!(cost(Vec3::ONE, Vec3::ONE, &p), 0.0);
    assert!((cost(Vec3::ZERO, Vec3::new(12.0, 0.0, 0.0), &p) - 10.0).abs() < 1e-12);
}

#[test]
fn merge_with_empty_remote_is_identity() {
    let ray = Spheres(vec![]);
    let a = build(&[(3, NodeKind::Pose, Vec3::new(4.0, 0.0, 0.0)), (7, NodeKind::Pose, Vec3::new(8.0, 1.0, 0.0))], &ray);
    let empty = HomingTree::new(0, Vec3::ZERO, params()).unwrap();
    let m = merge_trees(&a, &empty, &ray).unwrap();
    assert_eq!(encode_tree(&m), encode_tree(&a));
}

#[test]
fn remote_landed_robot_shortens_local_routes() {
    let near = |a: Vec3, b: Vec3| a.distance(b) <= 2.5;
    let p = params();
    let mut local = HomingTree::new(0, Vec3::ZERO, p).unwrap();
    for i in 1..=40 {
        local.insert(i, NodeKind::Pose, Vec3::new(2.0 * i as f64, 0.0, 0.0), &near);
    }
    let mut remote = HomingTree::new(0, Vec3::ZERO, p).unwrap();
    for i in 1..=30 {
        remote.insert(100 + i, NodeKind::Pose, Vec3::new(2.0 * i as f64, 0.5, 0.0), &near);
    }
    remote.insert(500, NodeKind::LandedRobot, Vec3::new(60.0, 1.0, 0.0), &near);
    let before = local.accumulated_cost(40).unwrap();
    let merged = merge_trees(&local, &remote, &near).unwrap();
    assert!(merged.accumulated_cost(40).unwrap() < before);
    merged.check_invariants().unwrap();
}

#[test]
fn mismatched_bases_are_incompatible() {
    let a = HomingTree::new(0, Vec3::ZERO, params()).unwrap();
    let b = HomingTree::new(0, Vec3::ONE, params()).unwrap();
    assert!(matches!(merge_trees(&a, &b, &Spheres(vec![])), Err(HomingError::Incompatible(_))));
}

#[test]
fn second_robot_lands_near_the_first() {
    let p = HomingParams { d_e: 1.0, d_c: 50.0, v_nominal: 1.2, reserve_time: 30.0 };
    let near = |a: Vec3, b: Vec3| a.distance(b) <= 2.5;
    let mut t = HomingTree::new(0, Vec3::ZERO, p).unwrap();
    for i in 1..=55 {
        t.insert(i, NodeKind::Pose, Vec3::new(2.0 * i as f64, 0.0, 0.0), &near);
    }
    let first = homing_path(&t, Vec3::new(110.0, 0.0, 0.0), &near).unwrap();
    assert!(first.landing.distance(Vec3::ZERO) <= 50.0);
    t.insert(1000, NodeKind::LandedRobot, Vec3::new(80.0, 0.0, 0.0), &near);
    let second = homing_path(&t, Vec3::new(110.0, 0.0, 0.0), &|a: Vec3, b: Vec3| a.distance(b) <= 2.5).unwrap();
    assert!(second.is_empty() || second.landing.distance(Vec3::new(80.0, 0.0, 0.0)) <= 50.0);
    // 30 m closer relay: cost drops by 30 m of flight.
    assert!(first.cost - second.cost >= 30.0 / 1.2 - 1e-9);
}
