use crate::Vec3;

/// Disc-model radio links: an edge between every pair at distance ≤ `d_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    adjacency: Vec<Vec<usize>>,
}

pub fn comm_graph(positions: &[Vec3], d_c: f64) -> CommGraph {
    let n = positions.len();
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if positions[i].distance(positions[j]) <= d_c {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    CommGraph { adjacency }
}

impl CommGraph {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(&b)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Vertices reachable from `from`, as a membership mask.
    pub fn reachable(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    pub fn path_connected(&self, a: usize, b: usize) -> bool {
        self.reachable(a)[b]
    }

    /// True for the empty graph.
    pub fn is_connected(&self) -> bool {
        self.is_empty() || self.reachable(0).into_iter().all(|s| s)
    }
}
