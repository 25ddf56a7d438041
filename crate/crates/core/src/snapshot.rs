//! On-disk snapshots of spin and edge configurations.
//!
//! Container: the line `MAGSNAP1`, one line of JSON header, then a
//! little-endian u64 payload length and the payload. Spin payloads are a
//! packed bitmap over graph vertices (bit set ⇔ +1). Edge payloads are the
//! open-edge bitmap, the per-vertex cluster table (u32), and a flag byte
//! per cluster (bit 0 ghost-connected, bit 1 ghost flags present).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldSpec;
use crate::fk::{EdgeConfig, FkBoundary};
use crate::graph::SiteGraph;
use crate::ising::{BoundaryCondition, SpinConfig};

const MAGIC: &[u8] = b"MAGSNAP1\n";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    Spins { bc: BoundaryCondition },
    Edges { bc: FkBoundary },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub kind: SnapshotKind,
    pub domain_hash: String,
    pub field: FieldSpec,
    pub seed: u64,
    pub sweeps: u64,
    pub n_vertices: usize,
    pub n_edges: usize,
}

fn pack(bits: impl Iterator<Item = bool>) -> Vec<u8> {
    let mut out = Vec::new();
    for (k, b) in bits.enumerate() {
        if k % 8 == 0 {
            out.push(0);
        }
        if b {
            *out.last_mut().unwrap() |= 1 << (k % 8);
        }
    }
    out
}

fn unpack(bytes: &[u8], n: usize) -> Result<Vec<bool>> {
    if bytes.len() < n.div_ceil(8) {
        return Err(Error::Format("bitmap truncated".into()));
    }
    Ok((0..n).map(|k| bytes[k / 8] >> (k % 8) & 1 == 1).collect())
}

fn write_container<W: Write>(mut w: W, header: &SnapshotHeader, payload: &[u8]) -> Result<()> {
    w.write_all(MAGIC)?;
    let h = serde_json::to_string(header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(h.as_bytes())?;
    w.write_all(b"\n")?;
    w.write_all(&(payload.len() as u64).to_le_bytes())?;
    w.write_all(payload)?;
    Ok(())
}

fn read_container<R: Read>(mut r: R) -> Result<(SnapshotHeader, Vec<u8>)> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let rest = buf.strip_prefix(MAGIC).ok_or_else(|| Error::Format("not a snapshot".into()))?;
    let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Format("header not terminated".into()))?;
    let header: SnapshotHeader = serde_json::from_slice(&rest[..nl]).map_err(|e| Error::Format(e.to_string()))?;
    let body = &rest[nl + 1..];
    if body.len() < 8 {
        return Err(Error::Format("missing payload length".into()));
    }
    let len = u64::from_le_bytes(body[..8].try_into().unwrap()) as usize;
    let payload = body.get(8..8 + len).ok_or_else(|| Error::Format("payload truncated".into()))?;
    Ok((header, payload.to_vec()))
}

pub fn write_spins<W: Write>(w: W, header: &SnapshotHeader, cfg: &SpinConfig) -> Result<()> {
    if header.kind != (SnapshotKind::Spins { bc: cfg.bc }) || header.n_vertices != cfg.spins.len() {
        return Err(Error::Format("header does not describe this spin configuration".into()));
    }
    write_container(w, header, &pack(cfg.spins.iter().map(|&s| s > 0)))
}

pub fn read_spins<R: Read>(r: R) -> Result<(SnapshotHeader, SpinConfig)> {
    let (h, payload) = read_container(r)?;
    let SnapshotKind::Spins { bc } = h.kind else {
        return Err(Error::Format("not a spin snapshot".into()));
    };
    let spins = unpack(&payload, h.n_vertices)?.into_iter().map(|b| if b { 1 } else { -1 }).collect();
    Ok((h, SpinConfig { spins, bc }))
}

pub fn write_edges<W: Write>(w: W, header: &SnapshotHeader, cfg: &EdgeConfig) -> Result<()> {
    if header.kind != (SnapshotKind::Edges { bc: cfg.bc }) || header.n_edges != cfg.open.len() || header.n_vertices != cfg.cluster.len() {
        return Err(Error::Format("header does not describe this edge configuration".into()));
    }
    let mut payload = pack(cfg.open.iter().copied());
    for &c in &cfg.cluster {
        payload.extend_from_slice(&c.to_le_bytes());
    }
    for c in 0..cfg.n_clusters() {
        let flag = match &cfg.ghost {
            Some(g) => 2 | g[c] as u8,
            None => 0,
        };
        payload.push(flag);
    }
    write_container(w, header, &payload)
}

/// The graph is needed to rebuild cluster sizes and boundary clusters; the
/// stored cluster table is checked against the rebuilt one.
pub fn read_edges<R: Read>(r: R, graph: &SiteGraph) -> Result<(SnapshotHeader, EdgeConfig)> {
    let (h, payload) = read_container(r)?;
    let SnapshotKind::Edges { bc } = h.kind else {
        return Err(Error::Format("not an edge snapshot".into()));
    };
    if graph.edges.len() != h.n_edges || graph.n != h.n_vertices {
        return Err(Error::Format("snapshot does not match the graph".into()));
    }
    let nb = h.n_edges.div_ceil(8);
    let open = unpack(&payload, h.n_edges)?;
    let mut cfg = EdgeConfig::from_open(graph, bc, open);
    let table = payload.get(nb..nb + 4 * h.n_vertices).ok_or_else(|| Error::Format("cluster table truncated".into()))?;
    let stored: Vec<u32> = table.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
    if stored != cfg.cluster {
        return Err(Error::Format("cluster table disagrees with the edge bitmap".into()));
    }
    let flags = payload.get(nb + 4 * h.n_vertices..).unwrap_or(&[]);
    if flags.len() != cfg.n_clusters() {
        return Err(Error::Format("cluster flags truncated".into()));
    }
    if flags.iter().any(|f| f & 2 != 0) {
        cfg.ghost = Some(flags.iter().map(|f| f & 1 == 1).collect());
    }
    Ok((h, cfg))
}

/// CSV of per-sample observables with a header row.
pub fn observables_csv(names: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = names.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, ShapeSpec};
    use crate::fk::sample_fk;
    use crate::ising::sample_ising;
    use crate::rng;

    #[test]
    fn spin_and_edge_roundtrip() {
        let d = build_domain(&ShapeSpec::unit_disk([-1.0, 0.0], [1.0, 0.0]), 1.0 / 9.0).unwrap();
        let f = FieldSpec::constant(0.3);
        let cfg = sample_ising(&d, BoundaryCondition::Dobrushin, &f, 5, 1).unwrap();
        let h = SnapshotHeader {
            kind: SnapshotKind::Spins { bc: cfg.bc },
            domain_hash: d.hash(),
            field: f.clone(),
            seed: 1,
            sweeps: 5,
            n_vertices: cfg.spins.len(),
            n_edges: 0,
        };
        let mut buf = Vec::new();
        write_spins(&mut buf, &h, &cfg).unwrap();
        let (h2, c2) = read_spins(&buf[..]).unwrap();
        assert_eq!((h2, c2), (h, cfg));

        let g = SiteGraph::from_domain(&d);
        let mut e = sample_fk(&d, FkBoundary::Wired, &f, 5, 2).unwrap();
        crate::fk::attach_ghost(&mut e, &f.per_vertex(&d), &mut rng::stream(3, 0)).unwrap();
        let h = SnapshotHeader { kind: SnapshotKind::Edges { bc: e.bc }, n_vertices: g.n, n_edges: g.edges.len(), ..h2_like(&d, &f) };
        let mut buf = Vec::new();
        write_edges(&mut buf, &h, &e).unwrap();
        let (_, e2) = read_edges(&buf[..], &g).unwrap();
        assert_eq!(e2.open, e.open);
        assert_eq!(e2.ghost, e.ghost);
        assert_eq!(e2.boundary_clusters, e.boundary_clusters);
        assert!(read_spins(&buf[..]).is_err());
        assert!(read_edges(&buf[..buf.len() - 1], &g).is_err());
    }

    fn h2_like(d: &crate::domain::DiscreteDomain, f: &FieldSpec) -> SnapshotHeader {
        SnapshotHeader { kind: SnapshotKind::Spins { bc: BoundaryCondition::Plus }, domain_hash: d.hash(), field: f.clone(), seed: 2, sweeps: 5, n_vertices: 0, n_edges: 0 }
    }

    #[test]
    fn empty_observables_csv_has_header_only() {
        assert_eq!(observables_csv(&["m", "e"], &[]), "m,e\n");
    }
}
