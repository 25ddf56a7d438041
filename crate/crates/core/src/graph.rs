//! Finite graphs on which the spin and random-cluster samplers run. A
//! domain gives the graph (interior ∪ ∂Ω_δ, E(Ω_δ)); tiny test graphs can be
//! built directly.

use crate::domain::{ArcSide, DiscreteDomain, Site, VertexKind, DIRS};

#[derive(Clone, Debug)]
pub struct SiteGraph {
    pub n: usize,
    pub edges: Vec<(u32, u32)>,
    /// The field acts on interior vertices only.
    pub interior: Vec<bool>,
    /// Arc of a boundary vertex (None for interior vertices or unlabelled graphs).
    pub side: Vec<Option<ArcSide>>,
    adj_start: Vec<u32>,
    adj: Vec<(u32, u32)>,
}

impl SiteGraph {
    pub fn new(n: usize, edges: Vec<(u32, u32)>, interior: Vec<bool>, side: Vec<Option<ArcSide>>) -> Self {
        assert_eq!(interior.len(), n);
        assert_eq!(side.len(), n);
        let mut deg = vec![0u32; n + 1];
        for &(u, v) in &edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        let mut adj_start = vec![0u32; n + 1];
        for v in 0..n {
            adj_start[v + 1] = adj_start[v] + deg[v];
        }
        let mut fill = adj_start.clone();
        let mut adj = vec![(0u32, 0u32); 2 * edges.len()];
        for (e, &(u, v)) in edges.iter().enumerate() {
            adj[fill[u as usize] as usize] = (v, e as u32);
            fill[u as usize] += 1;
            adj[fill[v as usize] as usize] = (u, e as u32);
            fill[v as usize] += 1;
        }
        SiteGraph { n, edges, interior, side, adj_start, adj }
    }

    pub fn from_domain(d: &DiscreteDomain) -> Self {
        let n = d.n_vertices();
        let ni = d.n_interior();
        let interior = (0..n).map(|k| k < ni).collect();
        let side = (0..n)
            .map(|k| match d.kind(d.site(k)) {
                VertexKind::Boundary(s) => Some(s),
                _ => None,
            })
            .collect();
        SiteGraph::new(n, d.edges(), interior, side)
    }

    /// Graph of an interior site set together with its outer neighbours
    /// (interior vertices first, in the given order).
    pub fn from_sites(sites: &[Site]) -> (Self, Vec<Site>) {
        let mut all: Vec<Site> = sites.to_vec();
        let pos = |all: &Vec<Site>, s: Site| all.iter().position(|x| *x == s);
        let ni = sites.len();
        let mut edges = Vec::new();
        for k in 0..ni {
            for d in DIRS {
                let w = sites[k].offset(d);
                match pos(&all, w) {
                    Some(m) if m < ni => {
                        if d == (1, 0) || d == (0, 1) {
                            edges.push((k as u32, m as u32));
                        }
                    }
                    Some(m) => edges.push((k as u32, m as u32)),
                    None => {
                        all.push(w);
                        edges.push((k as u32, (all.len() - 1) as u32));
                    }
                }
            }
        }
        let n = all.len();
        let g = SiteGraph::new(n, edges, (0..n).map(|k| k < ni).collect(), vec![None; n]);
        (g, all)
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[(u32, u32)] {
        &self.adj[self.adj_start[v] as usize..self.adj_start[v + 1] as usize]
    }

    pub fn n_interior(&self) -> usize {
        self.interior.iter().filter(|&&b| b).count()
    }

    /// Subgraph induced on `keep` plus every vertex adjacent to it; the
    /// adjacent-only vertices come last and are reported separately.
    /// Edges between two adjacent-only vertices are dropped.
    pub fn neighbourhood_subgraph(&self, keep: &[usize]) -> (SiteGraph, Vec<usize>) {
        let mut map = vec![u32::MAX; self.n];
        let mut verts: Vec<usize> = keep.to_vec();
        for (k, &v) in keep.iter().enumerate() {
            map[v] = k as u32;
        }
        let nk = keep.len();
        let mut edges = Vec::new();
        for &v in keep {
            for &(w, _) in self.neighbors(v) {
                let w = w as usize;
                if map[w] == u32::MAX {
                    map[w] = verts.len() as u32;
                    verts.push(w);
                }
                let (a, b) = (map[v], map[w]);
                if (b as usize) >= nk || a < b {
                    edges.push((a, b));
                }
            }
        }
        let n = verts.len();
        let g = SiteGraph::new(
            n,
            edges,
            (0..n).map(|k| k < nk && self.interior[verts[k]]).collect(),
            verts.iter().map(|&v| self.side[v]).collect(),
        );
        (g, verts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, ShapeSpec};

    #[test]
    fn domain_graph_counts() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]), 0.25).unwrap();
        let g = SiteGraph::from_domain(&d);
        assert_eq!(g.n, 9 + 12);
        // 12 interior-interior edges + 12 interior-boundary edges
        assert_eq!(g.edges.len(), 24);
        for v in 0..9 {
            assert_eq!(g.neighbors(v).len(), 4);
        }
    }

    #[test]
    fn from_sites_domino() {
        let (g, all) = SiteGraph::from_sites(&[Site::new(0, 0), Site::new(1, 0)]);
        assert_eq!(all.len(), 2 + 6);
        assert_eq!(g.edges.len(), 7);
    }

    #[test]
    fn neighbourhood_subgraph_keeps_frame() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]), 0.25).unwrap();
        let g = SiteGraph::from_domain(&d);
        let centre = d.index(Site::new(2, 2)).unwrap();
        let (sub, verts) = g.neighbourhood_subgraph(&[centre]);
        assert_eq!(sub.n, 5);
        assert_eq!(sub.edges.len(), 4);
        assert_eq!(verts[0], centre);
    }
}
