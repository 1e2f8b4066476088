use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detector::AnomalyEvent;
use crate::error::{Error, Result};

fn covers(a: &AnomalyEvent, b: &AnomalyEvent, network_wide_b: bool) -> bool {
    let same_flow = network_wide_b || a.flow.is_none() || b.flow.is_none() || a.flow == b.flow;
    same_flow && a.overlaps(b.start, b.end)
}

/// Percentage of events in `a` that intersect some event of `b` on the same
/// flow. Network-wide events (flow `None`) match every flow, and
/// `network_wide_b` treats all of `b` that way. `None` when `a` is empty.
pub fn overlap(a: &[AnomalyEvent], b: &[AnomalyEvent], network_wide_b: bool) -> Option<f64> {
    if a.is_empty() {
        return None;
    }
    let covered = a.iter().filter(|ea| b.iter().any(|eb| covers(ea, eb, network_wide_b))).count();
    Some(100.0 * covered as f64 / a.len() as f64)
}

/// Row method's events covered by the column method, in percent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    pub methods: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

/// Every ordered pair of methods; all methods must carry the same number of events.
pub fn overlap_matrix(methods: &[(String, Vec<AnomalyEvent>)]) -> Result<OverlapMatrix> {
    if let Some((_, first)) = methods.first() {
        if let Some((name, ev)) = methods.iter().find(|(_, ev)| ev.len() != first.len()) {
            return Err(Error::Contract(format!(
                "budget mismatch: {name} has {} events, {} has {}",
                ev.len(),
                methods[0].0,
                first.len()
            )));
        }
    }
    let cells = methods
        .iter()
        .map(|(_, a)| methods.iter().map(|(_, b)| overlap(a, b, false)).collect())
        .collect();
    Ok(OverlapMatrix { methods: methods.iter().map(|(m, _)| m.clone()).collect(), cells })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"))
}

impl OverlapMatrix {
    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let r = self.methods.iter().position(|m| m == row)?;
        let c = self.methods.iter().position(|m| m == col)?;
        self.cells[r][c]
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("method,{}\n", self.methods.join(","));
        for (m, row) in self.methods.iter().zip(&self.cells) {
            let cells: Vec<String> = row.iter().map(|v| cell(*v)).collect();
            let _ = writeln!(out, "{m},{}", cells.join(","));
        }
        out
    }

    /// Fixed-width table; the diagonal is shown as `-`.
    pub fn to_table(&self) -> String {
        let width = self.methods.iter().map(String::len).max().unwrap_or(0).max(7);
        let mut out = format!("{:width$}", "");
        for m in &self.methods {
            let _ = write!(out, "  {m:>width$}");
        }
        out.push('\n');
        for (i, (m, row)) in self.methods.iter().zip(&self.cells).enumerate() {
            let _ = write!(out, "{m:width$}");
            for (j, v) in row.iter().enumerate() {
                let s = if i == j { "-".to_string() } else { cell(*v) };
                let _ = write!(out, "  {s:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(flow: Option<usize>, start: usize, end: usize) -> AnomalyEvent {
        AnomalyEvent { method: "m".into(), flow, start, end, peak_score: 2.0 }
    }

    #[test]
    fn examples() {
        let a = vec![ev(Some(0), 0, 5), ev(Some(0), 10, 15), ev(Some(0), 20, 25)];
        let b = vec![ev(Some(0), 4, 6), ev(Some(0), 30, 31)];
        assert!((overlap(&a, &b, false).unwrap() - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(overlap(&a, &a, false), Some(100.0));
        assert_eq!(overlap(&a, &[ev(Some(0), 40, 50)], false), Some(0.0));
        assert_eq!(overlap(&[], &a, false), None);
    }

    #[test]
    fn network_wide_matching() {
        let a = vec![ev(Some(1), 0, 5)];
        let b = vec![ev(Some(2), 3, 3)];
        assert_eq!(overlap(&a, &b, false), Some(0.0));
        assert_eq!(overlap(&a, &b, true), Some(100.0));
        assert_eq!(overlap(&a, &[ev(None, 3, 3)], false), Some(100.0));
        assert_eq!(overlap(&[ev(None, 3, 3)], &a, false), Some(100.0));
    }

    #[test]
    fn matrix_csv_and_mismatch() {
        let a = vec![ev(Some(0), 0, 5)];
        let b = vec![ev(Some(0), 9, 9)];
        let m = overlap_matrix(&[("x".into(), a.clone()), ("y".into(), a.clone()), ("z".into(), b)]).unwrap();
        assert_eq!(m.get("x", "y"), Some(100.0));
        assert_eq!(m.get("x", "x"), Some(100.0));
        assert_eq!(m.get("z", "x"), Some(0.0));
        assert!(m.to_csv().starts_with("method,x,y,z\nx,100.00,100.00,0.00\n"));
        assert!(m.to_table().contains('-'));
        assert!(overlap_matrix(&[("x".into(), a), ("y".into(), vec![])]).is_err());
        let empty = overlap_matrix(&[("p".into(), vec![]), ("q".into(), vec![])]).unwrap();
        assert!(empty.to_csv().contains("n/a"));
    }
}
