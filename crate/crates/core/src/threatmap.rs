//! Per-cell Bernoulli occupancy posterior (the threat map).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::grid::{CellIndex, GridSpec, Position};
use crate::sensor::{SensingDisc, SensorParams};

pub const P_FLOOR: f64 = 1e-6;
pub const P_CEIL: f64 = 1.0 - 1e-6;

/// Posterior after a scan with no detection in the cell.
#[inline]
pub fn posterior_miss(prior: f64, p_detect: f64, p_false_alarm: f64) -> f64 {
    let num = (1.0 - p_detect) * prior;
    num / (num + (1.0 - p_false_alarm) * (1.0 - prior))
}

/// Posterior after a scan with a detection in the cell.
#[inline]
pub fn posterior_hit(prior: f64, p_detect: f64, p_false_alarm: f64) -> f64 {
    let num = p_detect * prior;
    num / (num + p_false_alarm * (1.0 - prior))
}

/// Binary entropy in bits. Zero at both endpoints.
#[inline]
pub fn binary_entropy(p: f64) -> f64 {
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).log2();
    }
    h
}

#[inline]
pub(crate) fn clamp_prob(p: f64) -> f64 {
    if p.is_nan() {
        return 0.5;
    }
    p.clamp(P_FLOOR, P_CEIL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThreatMap {
    probs: Vec<f64>,
}

impl ThreatMap {
    /// Uninformed map: every cell at 1/2.
    pub fn new(grid: &GridSpec) -> Self {
        ThreatMap {
            probs: vec![0.5; grid.cell_count()],
        }
    }

    /// Build a map from raw probabilities, clamping each into
    /// `[P_FLOOR, P_CEIL]`.
    pub fn from_probs(probs: Vec<f64>) -> Self {
        ThreatMap {
            probs: probs.into_iter().map(clamp_prob).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, m: CellIndex) -> f64 {
        self.probs[m.index()]
    }

    pub fn set(&mut self, m: CellIndex, p: f64) {
        self.probs[m.index()] = clamp_prob(p);
    }

    /// Bayes update from one scan taken at `sensor_pos`.
    pub fn bayes_update(
        &mut self,
        sensor: &SensorParams,
        grid: &GridSpec,
        sensor_pos: Position,
        hit_cells: &BTreeSet<CellIndex>,
    ) {
        let disc = sensor.disc(grid, sensor_pos);
        self.update_with_disc(&disc, sensor, grid, hit_cells);
    }

    /// As [`bayes_update`](Self::bayes_update) with a precomputed disc.
    ///
    /// Cells inside the disc are conditioned on hit / no hit; cells outside
    /// are left untouched, except hits that landed just outside the disc
    /// (noise, or rounding to the nearest cell). Those are conditioned as
    /// hits with the disc's false-alarm probability.
    pub fn update_with_disc(
        &mut self,
        disc: &SensingDisc,
        sensor: &SensorParams,
        grid: &GridSpec,
        hit_cells: &BTreeSet<CellIndex>,
    ) {
        let pfa = disc.p_false_alarm;
        for c in &disc.cells {
            let prior = self.probs[c.cell.index()];
            let post = if hit_cells.contains(&c.cell) {
                posterior_hit(prior, c.p_detect, pfa)
            } else {
                posterior_miss(prior, c.p_detect, pfa)
            };
            self.probs[c.cell.index()] = clamp_prob(post);
        }
        for &m in hit_cells {
            if disc.contains(m) {
                continue;
            }
            let r = disc.center.distance(&grid.cell_center(m));
            log::debug!("detection associated outside sensing disc: cell {m} at range {r:.3}");
            let prior = self.probs[m.index()];
            self.probs[m.index()] = clamp_prob(posterior_hit(prior, sensor.p_detect(r), pfa));
        }
    }

    /// Mean binary entropy per cell, in bits.
    pub fn entropy(&self) -> f64 {
        let total: f64 = self.probs.iter().map(|&p| binary_entropy(p)).sum();
        total / self.probs.len() as f64
    }

    /// Largest cell probability and its cell; ties go to the smallest index.
    pub fn max_belief(&self) -> (f64, CellIndex) {
        let mut best = (self.probs[0], 0usize);
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > best.0 {
                best = (p, i);
            }
        }
        (best.0, CellIndex::from_raw(best.1))
    }

    /// Row-major JSON array, values rounded to six significant digits.
    pub fn to_json(&self) -> String {
        let vals: Vec<serde_json::Value> = self
            .probs
            .iter()
            .map(|&p| {
                let s = format!("{p:.5e}");
                serde_json::Value::from(s.parse::<f64>().unwrap_or(p))
            })
            .collect();
        serde_json::Value::Array(vals).to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::FalseAlarmModel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid() -> GridSpec {
        GridSpec::new(100, 1.0).unwrap()
    }

    /// Two-hypothesis Bayes by enumeration of the joint (occupancy, outcome)
    /// table. Kept deliberately unlike the closed forms above.
    fn brute_bayes(prior: f64, pd: f64, pfa: f64, hit: bool) -> f64 {
        let joint: [(bool, f64); 2] = [(true, prior), (false, 1.0 - prior)];
        let mut evidence = 0.0;
        let mut occupied = 0.0;
        for (present, p_h) in joint {
            let p_hit = if present { pd } else { pfa };
            let lik = if hit { p_hit } else { 1.0 - p_hit };
            evidence += lik * p_h;
            if present {
                occupied += lik * p_h;
            }
        }
        occupied / evidence
    }

    #[test]
    fn init_map_examples() {
        let m = ThreatMap::new(&grid());
        assert_eq!(m.len(), 10_000);
        assert!(m.probs().iter().all(|&p| p == 0.5));
        assert_eq!(m.entropy(), 1.0);
        let small = ThreatMap::new(&GridSpec::new(2, 1.0).unwrap());
        assert_eq!(small.probs(), &[0.5; 4]);
    }

    #[test]
    fn scalar_update_examples() {
        assert_abs_diff_eq!(posterior_miss(0.5, 0.5, 0.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(posterior_hit(0.5, 0.9, 0.1), 0.9, epsilon = 1e-15);
        for p in [0.1, 0.5, 0.77] {
            assert_abs_diff_eq!(posterior_hit(p, 0.3, 0.3), p, epsilon = 1e-15);
            assert_abs_diff_eq!(posterior_miss(p, 0.3, 0.3), p, epsilon = 1e-15);
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(ThreatMap::from_probs(vec![0.5; 16]).entropy(), 1.0);
        let floor = ThreatMap::from_probs(vec![0.0; 16]);
        assert_abs_diff_eq!(floor.entropy(), 2.13743e-5, epsilon = 1e-9);
        let mut half = vec![0.0; 8];
        half.extend(vec![0.5; 8]);
        assert_abs_diff_eq!(ThreatMap::from_probs(half).entropy(), 0.5, epsilon = 2e-5);
    }

    #[test]
    fn max_belief_examples() {
        let g = grid();
        let mut m = ThreatMap::new(&g);
        assert_eq!(m.max_belief(), (0.5, g.cell(0).unwrap()));
        let c = g.cell(4321).unwrap();
        m.set(c, 0.9);
        assert_eq!(m.max_belief(), (0.9, c));
    }

    #[test]
    fn static_sensor_whitens_neighbourhood() {
        let g = grid();
        let s = SensorParams::default();
        let pos = g.cell_center(g.cell_at(70, 12).unwrap());
        let mut m = ThreatMap::new(&g);
        let none = BTreeSet::new();
        m.bayes_update(&s, &g, pos, &none);
        let near = g.cell_at(70, 12).unwrap();
        assert_eq!(m.get(near), P_FLOOR);
        let after_one = m.get(g.cell_at(72, 12).unwrap());
        assert!(after_one < 0.5);
        for _ in 0..7 {
            m.bayes_update(&s, &g, pos, &none);
        }
        assert!(m.get(g.cell_at(72, 12).unwrap()) < after_one);
        assert!(m.get(g.cell_at(72, 12).unwrap()) < 0.01);
        // Far away stays untouched.
        assert_eq!(m.get(g.cell_at(35, 60).unwrap()), 0.5);
    }

    #[test]
    fn false_alarm_decays_after_empty_scans() {
        // Static searcher at (70,12): one empty scan, a false alarm at
        // (70,11), then six empty scans.
        let g = grid();
        let pos = g.cell_center(g.cell_at(70, 12).unwrap());
        let fa = g.cell_at(70, 11).unwrap();
        let none = BTreeSet::new();
        // (model, floor after the hit, ceiling after the empty scans)
        let cases = [(FalseAlarmModel::PerCell, 0.75, 0.01), (FalseAlarmModel::DiscShare, 0.99, 0.5)];
        for (model, after_hit, after_misses) in cases {
            let s = SensorParams { false_alarm_model: model, ..Default::default() };
            let mut m = ThreatMap::new(&g);
            m.bayes_update(&s, &g, pos, &none);
            m.bayes_update(&s, &g, pos, &BTreeSet::from([fa]));
            assert!(m.get(fa) > after_hit, "{model:?}: {}", m.get(fa));
            for _ in 0..6 {
                m.bayes_update(&s, &g, pos, &none);
            }
            assert!(m.get(fa) < after_misses, "{model:?}: {}", m.get(fa));
            assert_ne!(m.max_belief().1, fa);
        }
    }

    #[test]
    fn outside_disc_is_bit_identical() {
        let g = grid();
        let s = SensorParams::default();
        let pos = g.cell_center(g.cell_at(40, 40).unwrap());
        let mut m = ThreatMap::from_probs((0..g.cell_count()).map(|i| (i % 97) as f64 / 97.0).collect());
        let before = m.clone();
        let disc = s.disc(&g, pos);
        m.bayes_update(&s, &g, pos, &BTreeSet::from([g.cell_at(41, 42).unwrap()]));
        for i in 0..g.cell_count() {
            let c = g.cell(i).unwrap();
            if !disc.contains(c) {
                assert_eq!(m.get(c).to_bits(), before.get(c).to_bits());
            }
        }
    }

    #[test]
    fn hit_outside_disc_uses_disc_false_alarm() {
        let g = grid();
        for model in [FalseAlarmModel::PerCell, FalseAlarmModel::DiscShare] {
            let s = SensorParams { false_alarm_model: model, ..Default::default() };
            let pos = g.cell_center(g.cell_at(40, 40).unwrap());
            let far = g.cell_at(40, 50).unwrap();
            let mut m = ThreatMap::new(&g);
            m.bayes_update(&s, &g, pos, &BTreeSet::from([far]));
            let pfa = s.disc(&g, pos).p_false_alarm;
            let expect = posterior_hit(0.5, (-10.0f64 / 3.0).exp(), pfa);
            assert_abs_diff_eq!(m.get(far), clamp_prob(expect), epsilon = 1e-15);
            // A hit just past the rim must not settle the search by itself.
            assert!(m.get(far) < 1.0 - 1e-3);
        }
    }

    #[test]
    fn update_order_independent() {
        let g = grid();
        let s = SensorParams::default();
        let pos = g.cell_center(g.cell_at(20, 20).unwrap());
        let (m1, m2) = (g.cell_at(21, 20).unwrap(), g.cell_at(18, 23).unwrap());
        let mut joint = ThreatMap::new(&g);
        joint.bayes_update(&s, &g, pos, &BTreeSet::from([m1, m2]));

        // Per-cell, in reverse order, straight from the scalar rules.
        let base = ThreatMap::new(&g);
        let disc = s.disc(&g, pos);
        let mut manual = base.clone();
        for c in disc.cells.iter().rev() {
            let hit = c.cell == m1 || c.cell == m2;
            let prior = base.get(c.cell);
            let post = if hit {
                posterior_hit(prior, c.p_detect, disc.p_false_alarm)
            } else {
                posterior_miss(prior, c.p_detect, disc.p_false_alarm)
            };
            manual.set(c.cell, post);
        }
        assert_eq!(joint, manual);
    }

    #[test]
    fn json_is_row_major_and_rounded() {
        let m = ThreatMap::from_probs(vec![0.5, 0.123456789, 0.0, 1.0]);
        let v: Vec<f64> = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v, vec![0.5, 0.123457, 1e-6, 0.999999]);
    }

    proptest! {
        #[test]
        fn matches_brute_force_bayes(p in 1e-6f64..(1.0 - 1e-6), pd in 0.0f64..1.0, pfa in 0.0f64..0.5, hit: bool) {
            let fast = if hit { posterior_hit(p, pd, pfa) } else { posterior_miss(p, pd, pfa) };
            let slow = brute_bayes(p, pd, pfa, hit);
            prop_assert!((fast - slow).abs() <= 1e-12);
        }

        #[test]
        fn evidence_moves_belief_monotonically(p in 0.01f64..0.99, pd in 0.0f64..1.0, pfa in 0.0f64..0.5) {
            let miss = posterior_miss(p, pd, pfa);
            let hit = posterior_hit(p, pd, pfa);
            if pd > pfa + 1e-9 {
                prop_assert!(miss < p);
                prop_assert!(hit > p);
            } else if pd + 1e-9 < pfa {
                prop_assert!(miss > p);
                prop_assert!(hit < p);
            }
        }

        #[test]
        fn entropy_bounded_and_maximal_at_half(probs in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
            let m = ThreatMap::from_probs(probs);
            let h = m.entropy();
            prop_assert!((0.0..=1.0).contains(&h));
            prop_assert!(h <= 1.0);
            prop_assert!(m.probs().iter().all(|&p| (P_FLOOR..=P_CEIL).contains(&p)));
        }
    }
}
