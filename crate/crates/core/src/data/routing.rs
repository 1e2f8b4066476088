use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix::TrafficMatrix;
use crate::error::{Error, Result};

/// Link-by-flow incidence: `rows[l][f] == 1` when link `l` carries flow `f`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingMatrix {
    link_ids: Vec<String>,
    flow_labels: Vec<String>,
    rows: Vec<Vec<u8>>,
}

impl RoutingMatrix {
    pub fn new(link_ids: Vec<String>, flow_labels: Vec<String>, rows: Vec<Vec<u8>>) -> Result<Self> {
        let m = flow_labels.len();
        if rows.len() != link_ids.len() {
            return Err(Error::Contract(format!("{} link ids for {} rows", link_ids.len(), rows.len())));
        }
        for (l, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Contract(format!("link {l} has {} entries, expected {m}", row.len())));
            }
            if row.iter().any(|&v| v > 1) {
                return Err(Error::Contract(format!("link {l} has a non-binary entry")));
            }
        }
        for f in 0..m {
            if !rows.iter().any(|r| r[f] == 1) {
                return Err(Error::Contract(format!("flow {} traverses no link", flow_labels[f])));
            }
        }
        Ok(Self { link_ids, flow_labels, rows })
    }

    pub fn n_links(&self) -> usize {
        self.link_ids.len()
    }

    pub fn n_flows(&self) -> usize {
        self.flow_labels.len()
    }

    pub fn link_ids(&self) -> &[String] {
        &self.link_ids
    }

    pub fn carries(&self, link: usize, flow: usize) -> bool {
        self.rows[link][flow] == 1
    }

    /// Keeps only the given flow columns.
    pub fn select_flows(&self, flows: &[usize]) -> Result<Self> {
        let rows: Vec<Vec<u8>> = self.rows.iter().map(|r| flows.iter().map(|&f| r[f]).collect()).collect();
        let labels = flows.iter().map(|&f| self.flow_labels[f].clone()).collect();
        // Links that no longer carry any selected flow are dropped.
        let (ids, rows): (Vec<_>, Vec<_>) = self
            .link_ids
            .iter()
            .cloned()
            .zip(rows)
            .filter(|(_, r)| r.contains(&1))
            .unzip();
        Self::new(ids, labels, rows)
    }

    /// Link loads as a `T x L` row-major array: `loads[t * L + l]`.
    pub fn link_loads(&self, tm: &TrafficMatrix) -> Result<Vec<f64>> {
        if tm.n_flows() != self.n_flows() {
            return Err(Error::Contract(format!(
                "routing covers {} flows, matrix has {}",
                self.n_flows(),
                tm.n_flows()
            )));
        }
        let (t_len, l_len) = (tm.n_samples(), self.n_links());
        let mut loads = vec![0.0; t_len * l_len];
        for (l, row) in self.rows.iter().enumerate() {
            for (f, &on) in row.iter().enumerate() {
                if on == 1 {
                    for (t, v) in tm.flow(f).iter().enumerate() {
                        loads[t * l_len + l] += v;
                    }
                }
            }
        }
        Ok(loads)
    }

    /// CSV: header `link,<flow>,...`, one row per link, cells in {0,1}.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "link,{}", self.flow_labels.join(","))?;
        for (id, row) in self.link_ids.iter().zip(&self.rows) {
            let cells: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(out, "{id},{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_csv(&mut f)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(BufReader::new(std::fs::File::open(path)?))
    }

    pub fn read_csv(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or(Error::Parse { row: 1, col: 1, msg: "empty file".into() })??;
        let labels: Vec<String> = header.split(',').skip(1).map(|s| s.trim().to_string()).collect();
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != labels.len() + 1 {
                return Err(Error::Parse {
                    row: i + 2,
                    col: cells.len(),
                    msg: format!("expected {} cells", labels.len() + 1),
                });
            }
            ids.push(cells[0].trim().to_string());
            let row = cells[1..]
                .iter()
                .enumerate()
                .map(|(c, v)| match v.trim() {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(Error::Parse { row: i + 2, col: c + 2, msg: format!("expected 0 or 1, got {other:?}") }),
                })
                .collect::<Result<Vec<u8>>>()?;
            rows.push(row);
        }
        Self::new(ids, labels, rows)
    }
}

/// Undirected network used to route synthetic OD flows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<String>,
    pub links: Vec<(usize, usize)>,
}

impl Topology {
    /// Ring of `n` nodes plus chords between opposite nodes, until `n_links`
    /// links exist. With `n = 12, n_links = 15` this matches the scale of a
    /// 12-router, 15-link backbone.
    pub fn ring_with_chords(n: usize, n_links: usize) -> Self {
        let nodes = (0..n).map(|i| format!("n{i}")).collect();
        let mut links: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let mut i = 0;
        while links.len() < n_links && i < n {
            let j = (i + n / 2) % n;
            let e = (i.min(j), i.max(j));
            if i != j && !links.iter().any(|&(a, b)| (a.min(b), a.max(b)) == e) {
                links.push(e);
            }
            i += 1 + n / 8;
        }
        Self { nodes, links }
    }

    /// Hop-count shortest path as link indices; ties go to lower node indices.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (l, &(a, b)) in self.links.iter().enumerate() {
            adj[a].push((b, l));
            adj[b].push((a, l));
        }
        for list in &mut adj {
            list.sort();
        }
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for &(v, l) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    prev[v] = Some((u, l));
                    queue.push_back(v);
                }
            }
        }
        if !seen[to] {
            return None;
        }
        let mut path = Vec::new();
        let mut cur = to;
        while let Some((p, l)) = prev[cur] {
            path.push(l);
            cur = p;
        }
        path.reverse();
        Some(path)
    }

    /// Routes each `(origin, dest)` pair on its shortest path.
    pub fn routing_matrix(&self, pairs: &[(usize, usize)]) -> Result<RoutingMatrix> {
        let mut rows = vec![vec![0u8; pairs.len()]; self.links.len()];
        for (f, &(o, d)) in pairs.iter().enumerate() {
            let path = self
                .shortest_path(o, d)
                .ok_or_else(|| Error::Contract(format!("no path from node {o} to node {d}")))?;
            for l in path {
                rows[l][f] = 1;
            }
        }
        let ids = self.links.iter().map(|&(a, b)| format!("{}-{}", self.nodes[a], self.nodes[b])).collect();
        let labels = pairs.iter().map(|&(o, d)| format!("{}-{}", self.nodes[o], self.nodes[d])).collect();
        RoutingMatrix::new(ids, labels, rows)
    }
}

#[cfg(test)]
mod tests {
    use std::io::Cursor;

    use super::*;
    use crate::data::matrix::FlowId;

    #[test]
    fn ring_of_twelve_has_fifteen_links() {
        let topo = Topology::ring_with_chords(12, 15);
        assert_eq!(topo.links.len(), 15);
        let pairs: Vec<(usize, usize)> =
            (0..12).flat_map(|o| (0..12).filter(move |&d| d != o).map(move |d| (o, d))).collect();
        let r = topo.routing_matrix(&pairs).unwrap();
        assert_eq!((r.n_links(), r.n_flows()), (15, 132));
    }

    #[test]
    fn link_loads_sum_carried_flows() {
        let topo = Topology { nodes: vec!["a".into(), "b".into(), "c".into()], links: vec![(0, 1), (1, 2)] };
        let r = topo.routing_matrix(&[(0, 2), (1, 2)]).unwrap();
        let tm = TrafficMatrix::from_flows(
            vec![FlowId::new("a", "c"), FlowId::new("b", "c")],
            vec![vec![1.0, 2.0], vec![10.0, 20.0]],
            300,
            0,
        )
        .unwrap();
        assert_eq!(r.link_loads(&tm).unwrap(), vec![1.0, 11.0, 2.0, 22.0]);
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let topo = Topology::ring_with_chords(6, 7);
        let r = topo.routing_matrix(&[(0, 3), (1, 2), (5, 4)]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(RoutingMatrix::read_csv(Cursor::new(buf)).unwrap(), r);
        let bad = "link,f0,f1\nl0,1,0\n";
        assert!(RoutingMatrix::read_csv(Cursor::new(bad)).is_err());
        let bad2 = "link,f0\nl0,2\n";
        assert!(RoutingMatrix::read_csv(Cursor::new(bad2)).is_err());
    }
}
