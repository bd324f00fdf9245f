use std::ops::Range;

use super::SimulationError;
use crate::market::TenorStructure;

/// Piece of a step lying inside one tenor period; driver increments are
/// drawn per segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub period: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub start: f64,
    pub end: f64,
    /// Tenor period containing `start`; drift inputs are taken from it.
    pub period: usize,
    /// Rates `first_live..=N` are evolved on this step.
    pub first_live: usize,
    /// Expiry fixed at `end`, if any.
    pub observe: Option<usize>,
    segments: Range<usize>,
}

impl Step {
    pub fn dt(&self) -> f64 {
        self.end - self.start
    }
}

/// Time grid of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationGrid {
    n_rates: usize,
    steps_per_tenor: Option<usize>,
    substeps: usize,
    steps: Vec<Step>,
    segments: Vec<Segment>,
}

impl SimulationGrid {
    /// `m` equal steps inside every period up to `T_N`; expiry `i` is
    /// observed at `T_i`.
    pub fn per_tenor(tenor: &TenorStructure, m: usize) -> Result<Self, SimulationError> {
        Self::per_tenor_refined(tenor, m, 1)
    }

    /// `m` steps per period, each driven by `substeps` equal driver
    /// increments. Grids with equal `m * substeps` consume the same draws,
    /// so a coarse grid can be paired with a fine one.
    pub fn per_tenor_refined(tenor: &TenorStructure, m: usize, substeps: usize) -> Result<Self, SimulationError> {
        if m == 0 || substeps == 0 {
            return Err(SimulationError::Grid("steps per tenor must be positive".into()));
        }
        let n = tenor.n_rates();
        let fine = m * substeps;
        let mut steps = Vec::with_capacity(n * m);
        let mut segments = Vec::with_capacity(n * fine);
        for j in 0..n {
            let (a, b) = (tenor.date(j), tenor.date(j + 1));
            let h = (b - a) / fine as f64;
            let at = |q: usize| match q {
                0 => a,
                q if q == fine => b,
                q => a + q as f64 * h,
            };
            for k in 0..m {
                let first = segments.len();
                for q in k * substeps..(k + 1) * substeps {
                    segments.push(Segment {
                        period: j,
                        dt: at(q + 1) - at(q),
                    });
                }
                steps.push(Step {
                    start: at(k * substeps),
                    end: at((k + 1) * substeps),
                    period: j,
                    first_live: j + 1,
                    observe: (k + 1 == m).then_some(j + 1),
                    segments: first..segments.len(),
                });
            }
        }
        Ok(Self {
            n_rates: n,
            steps_per_tenor: Some(m),
            substeps,
            steps,
            segments,
        })
    }

    /// One step from `0` to `T_e`, evolving rates `e..N` and observing
    /// expiry `e`.
    pub fn long_step(tenor: &TenorStructure, expiry: usize) -> Result<Self, SimulationError> {
        let n = tenor.n_rates();
        if !(1..=n).contains(&expiry) {
            return Err(SimulationError::Grid(format!("long-step expiry {expiry} outside 1..={n}")));
        }
        let segments: Vec<Segment> = (0..expiry)
            .map(|j| Segment {
                period: j,
                dt: tenor.accrual(j),
            })
            .collect();
        let steps = vec![Step {
            start: 0.0,
            end: tenor.date(expiry),
            period: 0,
            first_live: expiry,
            observe: Some(expiry),
            segments: 0..segments.len(),
        }];
        Ok(Self {
            n_rates: n,
            steps_per_tenor: None,
            substeps: 1,
            steps,
            segments,
        })
    }

    pub fn n_rates(&self) -> usize {
        self.n_rates
    }

    pub fn steps_per_tenor(&self) -> Option<usize> {
        self.steps_per_tenor
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn step_segments(&self, step: &Step) -> &[Segment] {
        &self.segments[step.segments.clone()]
    }

    /// Step boundaries `t_0 = 0, ..., t_K`.
    pub fn times(&self) -> Vec<f64> {
        let mut t = vec![0.0];
        t.extend(self.steps.iter().map(|s| s.end));
        t
    }

    pub fn observed_expiries(&self) -> Vec<usize> {
        self.steps.iter().filter_map(|s| s.observe).collect()
    }

    /// Rates evolved on step `k`.
    pub fn live_rates(&self, k: usize) -> std::ops::RangeInclusive<usize> {
        self.steps[k].first_live..=self.n_rates
    }

    pub fn describe(&self) -> String {
        match self.steps_per_tenor {
            Some(m) if self.substeps > 1 => format!("per-tenor:{m}x{}", self.substeps),
            Some(m) => format!("per-tenor:{m}"),
            None => format!("long-step:{}", self.steps[0].first_live),
        }
    }
}
