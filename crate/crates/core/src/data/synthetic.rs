//! Synthetic traffic matrices with labeled anomalies.
//!
//! Flows are split into context groups. Every member of a group follows the
//! group's base curve (a daily sinusoid with a group-specific phase, times a
//! weekly modulation), scaled by a per-flow level and perturbed by
//! multiplicative lognormal noise. A slow AR(1) log-fluctuation shared by the
//! members of each group makes a flow's own group its most informative context. Injections are applied on top of the clean
//! matrix, so stretches without injections are identical to the clean run.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::matrix::{FlowId, TrafficMatrix, DEFAULT_INTERVAL_SECONDS};
use super::routing::{RoutingMatrix, Topology};
use crate::diff::seeded_rng;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InjectionKind {
    /// One flow leaves its group's pattern.
    ContextualDeviation,
    /// Every member of the flow's group shifts except the flow itself.
    ContextShift,
    /// Short spike on every flow at once.
    PointSpike,
}

impl InjectionKind {
    pub const ALL: [InjectionKind; 3] =
        [InjectionKind::ContextualDeviation, InjectionKind::ContextShift, InjectionKind::PointSpike];

    pub fn as_str(self) -> &'static str {
        match self {
            InjectionKind::ContextualDeviation => "contextual-deviation",
            InjectionKind::ContextShift => "context-shift",
            InjectionKind::PointSpike => "point-spike",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub kind: InjectionKind,
    pub flow: usize,
    pub start: usize,
    pub duration: usize,
    /// Affected values are multiplied by `1 + magnitude`.
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_flows: usize,
    pub n_groups: usize,
    pub samples: usize,
    pub seed: u64,
    /// Samples per day.
    pub period: usize,
    /// Standard deviation of the lognormal noise.
    pub noise: f64,
    /// Typical flow level in bps.
    pub base_level: f64,
    pub diurnal_amplitude: f64,
    /// Fraction of a day over which the group peak times are spread; group
    /// `g` peaks `g / n_groups * phase_spread` days after group 0.
    pub phase_spread: f64,
    pub weekly_amplitude: f64,
    /// Stationary standard deviation of a slow AR(1) log-fluctuation shared
    /// by all members of a group.
    pub group_noise: f64,
    /// AR(1) coefficient of the group fluctuation.
    pub group_persistence: f64,
    pub interval_seconds: u64,
    pub start_timestamp: i64,
    pub injections: Vec<Injection>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_flows: 12,
            n_groups: 3,
            samples: 30 * 288,
            seed: 1,
            period: 288,
            noise: 0.1,
            base_level: 1.0e6,
            diurnal_amplitude: 0.6,
            phase_spread: 0.25,
            weekly_amplitude: 0.1,
            group_noise: 0.15,
            group_persistence: 0.5,
            interval_seconds: DEFAULT_INTERVAL_SECONDS,
            start_timestamp: 1_100_000_000,
            injections: Vec::new(),
        }
    }
}

/// Ground-truth label written to the label file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub kind: InjectionKind,
    pub flow: usize,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub magnitude: f64,
    /// Every flow whose series the injection touched.
    pub flows: Vec<usize>,
}

impl GroundTruth {
    /// Same label with sample indices shifted into a window starting at `offset`.
    pub fn shifted(&self, offset: usize) -> Option<GroundTruth> {
        if self.end < offset {
            return None;
        }
        Some(GroundTruth { start: self.start.saturating_sub(offset), end: self.end - offset, ..self.clone() })
    }
}

pub fn save_labels(labels: &[GroundTruth], path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(labels)?)?;
    Ok(())
}

pub fn load_labels(path: &Path) -> Result<Vec<GroundTruth>> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub matrix: TrafficMatrix,
    /// The same matrix before injections.
    pub clean: TrafficMatrix,
    pub routing: RoutingMatrix,
    pub labels: Vec<GroundTruth>,
    /// Context group of every flow.
    pub groups: Vec<usize>,
}

impl SyntheticSpec {
    pub fn group_of(&self, flow: usize) -> usize {
        flow % self.n_groups
    }

    pub fn group_members(&self, group: usize) -> Vec<usize> {
        (0..self.n_flows).filter(|&f| self.group_of(f) == group).collect()
    }

    /// Flows whose values an injection changes, plus the labeled flow.
    pub fn footprint(&self, inj: &Injection) -> Vec<usize> {
        match inj.kind {
            InjectionKind::ContextualDeviation => vec![inj.flow],
            InjectionKind::ContextShift => self.group_members(self.group_of(inj.flow)),
            InjectionKind::PointSpike => (0..self.n_flows).collect(),
        }
    }

    fn touched(&self, inj: &Injection) -> Vec<usize> {
        match inj.kind {
            InjectionKind::ContextShift => {
                self.footprint(inj).into_iter().filter(|&f| f != inj.flow).collect()
            }
            _ => self.footprint(inj),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_flows == 0 || self.n_groups == 0 || self.n_groups > self.n_flows {
            return Err(Error::Spec(format!("{} flows in {} groups", self.n_flows, self.n_groups)));
        }
        if self.samples == 0 || self.period == 0 {
            return Err(Error::Spec("samples and period must be positive".into()));
        }
        if !(self.noise >= 0.0) || !(self.group_noise >= 0.0) || !(self.base_level > 0.0) {
            return Err(Error::Spec("noise levels must be >= 0 and base level > 0".into()));
        }
        if !(0.0..1.0).contains(&self.group_persistence) {
            return Err(Error::Spec("group persistence must lie in [0, 1)".into()));
        }
        for (i, inj) in self.injections.iter().enumerate() {
            if inj.flow >= self.n_flows {
                return Err(Error::Spec(format!("injection {i}: flow {} out of range", inj.flow)));
            }
            if inj.duration == 0 || inj.start + inj.duration > self.samples {
                return Err(Error::Spec(format!("injection {i}: span outside [0, {})", self.samples)));
            }
            if !(inj.magnitude > -1.0) || !inj.magnitude.is_finite() {
                return Err(Error::Spec(format!("injection {i}: magnitude must exceed -1")));
            }
        }
        for (i, a) in self.injections.iter().enumerate() {
            let fa = self.footprint(a);
            for (j, b) in self.injections.iter().enumerate().skip(i + 1) {
                let overlap_time = a.start < b.start + b.duration && b.start < a.start + a.duration;
                if overlap_time && self.footprint(b).iter().any(|f| fa.contains(f)) {
                    return Err(Error::Spec(format!("injections {i} and {j} overlap on a shared flow")));
                }
            }
        }
        Ok(())
    }

    /// Twelve flows in three groups, 30 days at 5-minute cadence, noise 0.1,
    /// with 20 contextual deviations, 5 context shifts and 5 network-wide
    /// spikes placed in the second half.
    pub fn scenario_s1(seed: u64) -> Self {
        let mut spec = SyntheticSpec { seed, ..SyntheticSpec::default() };
        let mut rng = seeded_rng(seed ^ 0x005E_ED51);
        let half = spec.samples / 2;
        let plan = [
            (InjectionKind::PointSpike, 5, (1, 2), (1.0, 2.0)),
            (InjectionKind::ContextShift, 5, (24, 48), (0.8, 1.5)),
            (InjectionKind::ContextualDeviation, 20, (6, 18), (1.0, 2.0)),
        ];
        for (kind, count, (dmin, dmax), (mmin, mmax)) in plan {
            let mut placed = 0;
            while placed < count {
                let duration = rng.random_range(dmin..=dmax);
                let inj = Injection {
                    kind,
                    flow: rng.random_range(0..spec.n_flows),
                    start: rng.random_range(half + 24..spec.samples - duration - 12),
                    duration,
                    magnitude: rng.random_range(mmin..mmax),
                };
                if spec.clear_of(&inj, 12) {
                    spec.injections.push(inj);
                    placed += 1;
                }
            }
        }
        spec
    }

    /// True when `inj` stays `margin` samples away from every existing
    /// injection that shares a flow with it.
    fn clear_of(&self, inj: &Injection, margin: usize) -> bool {
        let fp = self.footprint(inj);
        self.injections.iter().all(|other| {
            let apart = inj.start >= other.start + other.duration + margin
                || other.start >= inj.start + inj.duration + margin;
            apart || !self.footprint(other).iter().any(|f| fp.contains(f))
        })
    }
}

fn base_curve(spec: &SyntheticSpec, group: usize, t: usize) -> f64 {
    let day = 2.0 * PI * t as f64 / spec.period as f64;
    let phase = 2.0 * PI * spec.phase_spread * group as f64 / spec.n_groups as f64;
    let week = 2.0 * PI * t as f64 / (7 * spec.period) as f64;
    (1.0 + spec.diurnal_amplitude * (day + phase).sin()) * (1.0 + spec.weekly_amplitude * week.sin())
}

/// OD pairs for `n_flows` flows on `topo`, chosen by a seeded shuffle of all
/// ordered node pairs.
fn pick_pairs(topo: &Topology, n_flows: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let n = topo.nodes.len();
    let mut pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|o| (0..n).filter(move |&d| d != o).map(move |d| (o, d))).collect();
    pairs.shuffle(rng);
    let mut chosen: Vec<(usize, usize)> = pairs.into_iter().cycle().take(n_flows).collect();
    if n_flows <= n * (n - 1) {
        chosen.sort();
    }
    chosen
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let topo = Topology::ring_with_chords(12, 15);
    let pairs = pick_pairs(&topo, spec.n_flows, &mut rng);
    let levels: Vec<f64> = (0..spec.n_flows).map(|_| spec.base_level * rng.random_range(-0.7f64..0.7).exp()).collect();

    let groups: Vec<usize> = (0..spec.n_flows).map(|f| spec.group_of(f)).collect();
    let t_len = spec.samples;
    let phi = spec.group_persistence;
    let innovation = spec.group_noise * (1.0 - phi * phi).sqrt();
    let drift: Vec<Vec<f64>> = (0..spec.n_groups)
        .map(|_| {
            let first: f64 = StandardNormal.sample(&mut rng);
            let mut g = spec.group_noise * first;
            (0..t_len)
                .map(|t| {
                    if t > 0 {
                        let eps: f64 = StandardNormal.sample(&mut rng);
                        g = phi * g + innovation * eps;
                    }
                    g
                })
                .collect()
        })
        .collect();
    let mut clean = vec![0.0; spec.n_flows * t_len];
    for f in 0..spec.n_flows {
        let g = groups[f];
        for t in 0..t_len {
            let eps: f64 = StandardNormal.sample(&mut rng);
            clean[f * t_len + t] = levels[f] * base_curve(spec, g, t) * (drift[g][t] + spec.noise * eps).exp();
        }
    }

    let mut values = clean.clone();
    let mut labels = Vec::with_capacity(spec.injections.len());
    for inj in &spec.injections {
        let factor = 1.0 + inj.magnitude;
        for f in spec.touched(inj) {
            for t in inj.start..inj.start + inj.duration {
                values[f * t_len + t] *= factor;
            }
        }
        labels.push(GroundTruth {
            kind: inj.kind,
            flow: inj.flow,
            start: inj.start,
            end: inj.start + inj.duration - 1,
            magnitude: inj.magnitude,
            flows: spec.footprint(inj),
        });
    }

    let ids: Vec<FlowId> = pairs
        .iter()
        .map(|&(o, d)| FlowId::new(topo.nodes[o].clone(), topo.nodes[d].clone()))
        .collect();
    let matrix = TrafficMatrix::new(ids.clone(), spec.interval_seconds, spec.start_timestamp, t_len, values)?;
    let clean = TrafficMatrix::new(ids, spec.interval_seconds, spec.start_timestamp, t_len, clean)?;
    let routing = topo.routing_matrix(&pairs)?;
    Ok(SyntheticData { matrix, clean, routing, labels, groups })
}
