//! Per-modality dynamic graph over (target, timestep) observations.
//!
//! Nodes are ordered target-major: node `i * k + t`. Temporal edges join every
//! pair of valid nodes in consecutive timesteps, in both directions. Spatial
//! neighborhoods are the nearest valid nodes at the same timestep.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::trajectory::ObservationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphNode {
    pub target_index: usize,
    pub time_index: usize,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphOptions {
    /// Spatial neighbors kept per node.
    pub spatial_k: usize,
    /// Restrict temporal edges to the same target.
    pub same_target_only: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            spatial_k: 8,
            same_target_only: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TemporalGraph {
    pub nodes: Vec<GraphNode>,
    pub temporal_edges: Vec<(usize, usize)>,
    pub spatial_neighbors: Vec<Vec<usize>>,
    /// Sources of incoming temporal edges per node.
    incoming: Vec<Vec<usize>>,
    k: usize,
}

pub fn build_graph(obs: &ObservationSet, opts: &GraphOptions) -> TemporalGraph {
    let (n, k) = (obs.n(), obs.k());
    let node_id = |i: usize, t: usize| i * k + t;
    let nodes: Vec<GraphNode> = (0..n)
        .flat_map(|i| {
            (0..k).map(move |t| GraphNode {
                target_index: i,
                time_index: t,
                valid: obs.observed(i, t),
            })
        })
        .collect();

    let valid_at = |t: usize| -> Vec<usize> { (0..n).filter(|&i| obs.observed(i, t)).collect() };

    let mut temporal_edges = Vec::new();
    let mut incoming = vec![Vec::new(); n * k];
    for t in 1..k {
        let prev = valid_at(t - 1);
        let cur = valid_at(t);
        for &i in &prev {
            for &j in &cur {
                if opts.same_target_only && i != j {
                    continue;
                }
                let (a, b) = (node_id(i, t - 1), node_id(j, t));
                temporal_edges.push((a, b));
                temporal_edges.push((b, a));
                incoming[b].push(a);
                incoming[a].push(b);
            }
        }
    }

    let mut spatial_neighbors = vec![Vec::new(); n * k];
    for t in 0..k {
        let valid = valid_at(t);
        for &i in &valid {
            let p = obs.coord(i, t);
            let mut cand: Vec<(f64, usize)> = valid
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let q = obs.coord(j, t);
                    (((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt(), j)
                })
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            spatial_neighbors[node_id(i, t)] = cand
                .into_iter()
                .take(opts.spatial_k)
                .map(|(_, j)| node_id(j, t))
                .collect();
        }
    }

    TemporalGraph {
        nodes,
        temporal_edges,
        spatial_neighbors,
        incoming,
        k,
    }
}

impl TemporalGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Dense `num_nodes × num_nodes` mask: row `i` marks `temporal_neighbors(i)`.
    pub fn temporal_mask(&self) -> Vec<bool> {
        let n = self.num_nodes();
        let mut mask = vec![false; n * n];
        for i in 0..n {
            for j in temporal_neighbors(self, i) {
                mask[i * n + j] = true;
            }
        }
        mask
    }

    /// Dense mask of spatial neighborhoods (self excluded).
    pub fn spatial_mask(&self) -> Vec<bool> {
        let n = self.num_nodes();
        let mut mask = vec![false; n * n];
        for (i, nb) in self.spatial_neighbors.iter().enumerate() {
            for &j in nb {
                mask[i * n + j] = true;
            }
        }
        mask
    }

    pub fn valid_mask(&self) -> Vec<bool> {
        self.nodes.iter().map(|n| n.valid).collect()
    }

    /// Plain-text edge list, `src_target,src_time -> dst_target,dst_time`.
    pub fn edge_list(&self) -> String {
        let mut s = String::new();
        for &(a, b) in &self.temporal_edges {
            let (na, nb) = (self.nodes[a], self.nodes[b]);
            let _ = writeln!(
                s,
                "{},{} -> {},{}",
                na.target_index, na.time_index, nb.target_index, nb.time_index
            );
        }
        s
    }
}

/// Temporal neighbors of `node` including itself; empty for invalid nodes.
pub fn temporal_neighbors(g: &TemporalGraph, node: usize) -> Vec<usize> {
    if !g.nodes[node].valid {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(g.incoming[node].len() + 1);
    out.push(node);
    out.extend_from_slice(&g.incoming[node]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::TimeWindow;

    fn obs(rows: &[&[Option<[f64; 2]>]]) -> ObservationSet {
        let k = rows[0].len();
        let mut o = ObservationSet::empty(TimeWindow::new(0, 10, k));
        for (i, row) in rows.iter().enumerate() {
            o.ids.push(Some(format!("t{i}")));
            for p in row.iter() {
                o.coords.push(p.unwrap_or([0.0, 0.0]));
                o.mask.push(p.is_some());
            }
        }
        o
    }

    #[test]
    fn single_target_two_steps() {
        let g = build_graph(&obs(&[&[Some([0.1, 0.1]), Some([0.2, 0.2])]]), &GraphOptions::default());
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.temporal_edges, vec![(0, 1), (1, 0)]);
        assert!(g.spatial_neighbors.iter().all(Vec::is_empty));
        assert_eq!(temporal_neighbors(&g, 0), vec![0, 1]);
    }

    #[test]
    fn missing_node_gets_no_edges() {
        let g = build_graph(
            &obs(&[&[Some([0.1, 0.1]), Some([0.2, 0.2])], &[Some([0.5, 0.5]), None]]),
            &GraphOptions::default(),
        );
        // target 1 at t₂ is node 3
        assert!(g.temporal_edges.iter().all(|&(a, b)| a != 3 && b != 3));
        assert!(temporal_neighbors(&g, 3).is_empty());
        assert_eq!(g.temporal_edges.len(), 4);
    }

    #[test]
    fn isolated_node_is_its_own_neighbor() {
        let g = build_graph(&obs(&[&[Some([0.1, 0.1]), None, Some([0.3, 0.3])]]), &GraphOptions::default());
        assert_eq!(temporal_neighbors(&g, 0), vec![0]);
    }

    #[test]
    fn same_target_only_restricts_edges() {
        let full = [Some([0.1, 0.1]), Some([0.2, 0.2])];
        let opts = GraphOptions {
            same_target_only: true,
            ..GraphOptions::default()
        };
        let g = build_graph(&obs(&[&full, &full]), &opts);
        assert_eq!(g.temporal_edges.len(), 4);
    }

    #[test]
    fn spatial_neighbors_nearest_first_with_index_ties() {
        let g = build_graph(
            &obs(&[&[Some([0.0, 0.0])], &[Some([1.0, 0.0])], &[Some([-1.0, 0.0])], &[Some([0.5, 0.0])]]),
            &GraphOptions {
                spatial_k: 2,
                same_target_only: false,
            },
        );
        assert_eq!(g.spatial_neighbors[0], vec![3, 1]);
        // 0 and 1 are both 0.5 away from 3
        assert_eq!(g.spatial_neighbors[3], vec![0, 1]);
    }

    #[test]
    fn edge_list_format() {
        let g = build_graph(&obs(&[&[Some([0.1, 0.1]), Some([0.2, 0.2])]]), &GraphOptions::default());
        assert_eq!(g.edge_list(), "0,0 -> 0,1\n0,1 -> 0,0\n");
    }
}
