use serde::{Deserialize, Serialize};

use super::{EmbeddedPotential, InnerPotential, Potential, TimePotential};
use crate::error::{Error, Result};

/// Right-continuous step function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    initial: f64,
    /// `(time, value)` pairs with strictly increasing times.
    switches: Vec<(f64, f64)>,
}

impl StepFunction {
    pub fn constant(value: f64) -> Self {
        Self {
            initial: value,
            switches: Vec::new(),
        }
    }

    pub fn new(initial: f64, switches: Vec<(f64, f64)>) -> Result<Self> {
        if switches.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid("switch times must be strictly increasing"));
        }
        if std::iter::once(initial)
            .chain(switches.iter().flat_map(|&(t, v)| [t, v]))
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("step function values must be finite"));
        }
        Ok(Self { initial, switches })
    }

    /// `base` everywhere except `level` on `[start, start + width)`.
    pub fn pulse(base: f64, level: f64, start: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::invalid("pulse width must be positive"));
        }
        Self::new(base, vec![(start, level), (start + width, base)])
    }

    /// Overlays pulses (each `(start, width, level)`) on a constant base.
    pub fn pulses(base: f64, pulses: &[(f64, f64, f64)]) -> Result<Self> {
        let mut sorted = pulses.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut switches: Vec<(f64, f64)> = Vec::new();
        let mut last_end = f64::NEG_INFINITY;
        for (start, width, level) in sorted {
            if !(width > 0.0) {
                return Err(Error::invalid("pulse width must be positive"));
            }
            if start < last_end {
                return Err(Error::invalid(format!(
                    "pulse at t={start} overlaps previous pulse"
                )));
            }
            if let Some(last) = switches.last_mut() {
                if last.0 == start {
                    // Back-to-back pulses: the new level replaces the return to base.
                    last.1 = level;
                    switches.push((start + width, base));
                    last_end = start + width;
                    continue;
                }
            }
            switches.push((start, level));
            switches.push((start + width, base));
            last_end = start + width;
        }
        Self::new(base, switches)
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.switches.partition_point(|&(s, _)| s <= t);
        if i == 0 {
            self.initial
        } else {
            self.switches[i - 1].1
        }
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn switches(&self) -> &[(f64, f64)] {
        &self.switches
    }

    pub fn switch_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.switches.iter().map(|&(t, _)| t)
    }

    /// Distinct levels visited.
    pub fn levels(&self) -> Vec<f64> {
        let mut v: Vec<f64> = std::iter::once(self.initial)
            .chain(self.switches.iter().map(|&(_, v)| v))
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

/// Time-dependent height of one constant segment of the inner potential.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierModulation {
    pub segment: usize,
    pub heights: StepFunction,
}

/// Embedded piecewise potential whose segment heights follow step functions.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSchedule {
    base: EmbeddedPotential,
    modulations: Vec<BarrierModulation>,
}

impl BarrierSchedule {
    /// A schedule that never changes.
    pub fn fixed(base: EmbeddedPotential) -> Self {
        Self {
            base,
            modulations: Vec::new(),
        }
    }

    pub fn new(base: EmbeddedPotential, modulations: Vec<BarrierModulation>) -> Result<Self> {
        if !modulations.is_empty() {
            let InnerPotential::Piecewise(p) = base.inner() else {
                return Err(Error::invalid("only piecewise potentials can be modulated"));
            };
            for m in &modulations {
                if p.segment_value(m.segment).is_none() {
                    return Err(Error::invalid(format!(
                        "segment {} is not a constant segment",
                        m.segment
                    )));
                }
            }
            let mut seen: Vec<usize> = modulations.iter().map(|m| m.segment).collect();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid("segment modulated twice"));
            }
        }
        Ok(Self { base, modulations })
    }

    pub fn base(&self) -> &EmbeddedPotential {
        &self.base
    }

    pub fn modulations(&self) -> &[BarrierModulation] {
        &self.modulations
    }

    /// All switching instants, sorted and deduplicated.
    pub fn switch_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .modulations
            .iter()
            .flat_map(|m| m.heights.switch_times())
            .collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Segment heights in force at time `t`.
    pub fn heights_at(&self, t: f64) -> Vec<(usize, f64)> {
        self.modulations
            .iter()
            .map(|m| (m.segment, m.heights.value(t)))
            .collect()
    }

    /// The static potential in force at time `t`.
    pub fn potential_at(&self, t: f64) -> EmbeddedPotential {
        let InnerPotential::Piecewise(p) = self.base.inner() else {
            return self.base.clone();
        };
        let mut p = p.clone();
        for (s, h) in self.heights_at(t) {
            p = p
                .with_segment_value(s, h)
                .expect("validated at construction");
        }
        self.base.with_inner(p).expect("same range")
    }

    /// `∂V(x)/∂height` for a modulated segment, in box coordinates.
    pub fn segment_weight(&self, segment: usize, x: f64) -> f64 {
        match self.base.inner() {
            InnerPotential::Piecewise(p) if (0.0..=self.base.length()).contains(&x) => {
                p.segment_weight(segment, x - self.base.shift())
            }
            _ => 0.0,
        }
    }

    /// Base height of a segment.
    pub(crate) fn base_height(&self, segment: usize) -> f64 {
        match self.base.inner() {
            InnerPotential::Piecewise(p) => p.segment_value(segment).unwrap_or(0.0),
            _ => 0.0,
        }
    }
}

impl TimePotential for BarrierSchedule {
    fn value_at(&self, x: f64, t: f64) -> f64 {
        let v = self.base.value(x);
        if !v.is_finite() {
            return v;
        }
        self.modulations.iter().fold(v, |acc, m| {
            let dh = m.heights.value(t) - self.base_height(m.segment);
            acc + dh * self.segment_weight(m.segment, x)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{embed_in_infinite_well, evaluate, PiecewisePotential};

    fn schedule() -> BarrierSchedule {
        let inner = PiecewisePotential::constant(
            vec![0.0, 2.0, 5.0, 6.0, 9.0, 11.0],
            vec![64.0, 0.0, 20.0, 0.0, 64.0],
        )
        .unwrap();
        let base = embed_in_infinite_well(inner, 1.0, 13.0).unwrap();
        let m = BarrierModulation {
            segment: 2,
            heights: StepFunction::pulse(20.0, 5.0, 1.0, 0.5).unwrap(),
        };
        BarrierSchedule::new(base, vec![m]).unwrap()
    }

    #[test]
    fn pulse_changes_height_inside_only() {
        let s = schedule();
        let x = 6.5; // middle of segment 2 in box coordinates
        assert_eq!(evaluate(&s, x, 0.5), 20.0);
        assert_eq!(evaluate(&s, x, 1.2), 5.0);
        assert_eq!(evaluate(&s, x, 2.0), 20.0);
        assert_eq!(evaluate(&s, 4.0, 1.2), 0.0);
    }

    #[test]
    fn right_continuous_at_switches() {
        let s = schedule();
        for t in s.switch_times() {
            let at = evaluate(&s, 6.5, t);
            let after = evaluate(&s, 6.5, t + 1e-12);
            let before = evaluate(&s, 6.5, t - 1e-12);
            assert_eq!(at, after);
            assert_ne!(at, before);
        }
    }

    #[test]
    fn frozen_potential_matches_schedule() {
        let s = schedule();
        let p = s.potential_at(1.2);
        for i in 0..130 {
            let x = i as f64 * 0.1;
            assert_eq!(p.value(x), evaluate(&s, x, 1.2));
        }
    }

    #[test]
    fn step_function_pulses() {
        let f = StepFunction::pulses(1.0, &[(2.0, 1.0, 3.0), (3.0, 1.0, 4.0)]).unwrap();
        assert_eq!(f.value(1.9), 1.0);
        assert_eq!(f.value(2.0), 3.0);
        assert_eq!(f.value(3.0), 4.0);
        assert_eq!(f.value(4.0), 1.0);
        assert!(StepFunction::pulses(1.0, &[(2.0, 2.0, 3.0), (3.0, 1.0, 4.0)]).is_err());
    }

    #[test]
    fn rejects_bad_modulation() {
        let s = schedule();
        let m = BarrierModulation {
            segment: 9,
            heights: StepFunction::constant(1.0),
        };
        assert!(BarrierSchedule::new(s.base().clone(), vec![m]).is_err());
    }
}
