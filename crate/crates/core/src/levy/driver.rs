use super::nig::{NigDraw, NigParams};
use super::{DomainError, ParamError};

/// Something that evaluates a cumulant generating function on a real
/// interval.
pub trait Cumulant {
    fn eval(&self, z: f64) -> Result<f64, DomainError>;

    /// Half-width of the admissible argument interval.
    fn bound(&self) -> f64;
}

/// The family of the jump part of the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriverKind {
    #[default]
    Nig,
}

/// Local characteristics `(0, c, F)` of the driving process under the
/// terminal measure: an NIG jump measure `F`, a Brownian coefficient `c`
/// and the exponential-moment bound `M`.
///
/// The driver is a martingale: sampled increments are compensated by the
/// NIG mean, so the jump cumulant used in drift formulas is
/// `int (e^{zx} - 1 - zx) F(dx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyDriverSpec {
    pub kind: DriverKind,
    pub nig: NigParams,
    pub diffusion: f64,
    pub em_bound: f64,
}

impl LevyDriverSpec {
    /// Pure-jump NIG driver with `M = alpha - |beta|`.
    pub fn nig(nig: NigParams) -> Self {
        Self {
            kind: DriverKind::Nig,
            nig,
            diffusion: 0.0,
            em_bound: nig.alpha - nig.beta.abs(),
        }
    }

    pub fn with_diffusion(mut self, diffusion: f64) -> Result<Self, ParamError> {
        if !(diffusion >= 0.0) || !diffusion.is_finite() {
            return Err(ParamError::Diffusion(diffusion));
        }
        self.diffusion = diffusion;
        Ok(self)
    }

    /// Tighten the exponential-moment bound. It may never exceed the
    /// natural NIG bound `alpha - |beta|`.
    pub fn with_em_bound(mut self, bound: f64) -> Result<Self, ParamError> {
        let natural = self.nig.alpha - self.nig.beta.abs();
        if !(bound > 0.0 && bound <= natural) {
            return Err(ParamError::EmBound { bound, natural });
        }
        self.em_bound = bound;
        Ok(self)
    }

    fn check(&self, z: f64) -> Result<(), DomainError> {
        if z.abs() <= self.em_bound {
            Ok(())
        } else {
            Err(DomainError {
                argument: z,
                lower: -self.em_bound,
                upper: self.em_bound,
            })
        }
    }

    /// `int (e^{zx} - 1 - zx) F(dx)`.
    pub fn jump_cumulant(&self, z: f64) -> Result<f64, DomainError> {
        self.check(z)?;
        let k = self.nig.cumulant(z)?;
        if self.nig.beta == 0.0 {
            Ok(k - self.nig.mu * z)
        } else {
            Ok(k - self.nig.mean() * z)
        }
    }

    /// Cumulant of the martingale driver, `c z^2 / 2 + jump_cumulant(z)`.
    pub fn cumulant(&self, z: f64) -> Result<f64, DomainError> {
        Ok(0.5 * self.diffusion * z * z + self.jump_cumulant(z)?)
    }

    /// Variance of the driver per unit time.
    pub fn variance(&self) -> f64 {
        self.diffusion + self.nig.variance()
    }

    /// Compensated increment over `dt` assembled from an NIG draw and an
    /// independent standard normal for the Brownian part.
    pub fn martingale_increment(&self, dt: f64, draw: NigDraw, brownian: f64, mirror: bool) -> f64 {
        let jump = self.nig.assemble(dt, draw, mirror) - self.nig.mean() * dt;
        if self.diffusion > 0.0 {
            let w = if mirror { -brownian } else { brownian };
            jump + (self.diffusion * dt).sqrt() * w
        } else {
            jump
        }
    }
}

impl Cumulant for LevyDriverSpec {
    fn eval(&self, z: f64) -> Result<f64, DomainError> {
        self.jump_cumulant(z)
    }

    fn bound(&self) -> f64 {
        self.em_bound
    }
}

/// Piecewise-constant local characteristics on the tenor periods. A single
/// entry means a time-homogeneous driver.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverSchedule {
    specs: Vec<LevyDriverSpec>,
}

impl DriverSchedule {
    pub fn homogeneous(spec: LevyDriverSpec) -> Self {
        Self { specs: vec![spec] }
    }

    /// One spec per tenor period `[T_j, T_{j+1})`; periods beyond the end
    /// reuse the last entry.
    pub fn per_period(specs: Vec<LevyDriverSpec>) -> Result<Self, ParamError> {
        if specs.is_empty() {
            return Err(ParamError::EmptySchedule);
        }
        Ok(Self { specs })
    }

    pub fn spec(&self, period: usize) -> &LevyDriverSpec {
        &self.specs[period.min(self.specs.len() - 1)]
    }

    pub fn is_homogeneous(&self) -> bool {
        self.specs.len() == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_driver() -> LevyDriverSpec {
        LevyDriverSpec::nig(NigParams::symmetric(12.0, 12.0).unwrap())
    }

    #[test]
    fn bound_equals_alpha_for_symmetric_nig() {
        assert_eq!(reference_driver().em_bound, 12.0);
        assert_eq!(reference_driver().bound(), 12.0);
    }

    #[test]
    fn jump_cumulant_matches_nig_for_centred_law() {
        let d = reference_driver();
        for z in [-11.0, -0.18, 0.0, 0.36, 6.0] {
            assert_eq!(d.jump_cumulant(z).unwrap(), d.nig.cumulant(z).unwrap());
        }
        assert!(d.jump_cumulant(12.000001).is_err());
    }

    #[test]
    fn jump_cumulant_removes_mean() {
        let d = LevyDriverSpec::nig(NigParams::new(8.0, 1.0, 0.3, 2.0).unwrap());
        assert_eq!(d.em_bound, 7.0);
        let h = 1e-5;
        let slope = (d.jump_cumulant(h).unwrap() - d.jump_cumulant(-h).unwrap()) / (2.0 * h);
        assert!(slope.abs() < 1e-9);
        assert!(d.jump_cumulant(7.5).is_err());
    }

    #[test]
    fn diffusion_adds_quadratic_term() {
        let d = reference_driver().with_diffusion(0.04).unwrap();
        let z = 0.5;
        let expected = 0.02 * z * z + reference_driver().jump_cumulant(z).unwrap();
        assert!((d.cumulant(z).unwrap() - expected).abs() < 1e-15);
        assert!(reference_driver().with_diffusion(-1.0).is_err());
        assert!(reference_driver().with_em_bound(13.0).is_err());
        assert_eq!(reference_driver().with_em_bound(10.0).unwrap().bound(), 10.0);
    }

    #[test]
    fn schedule_lookup() {
        let a = reference_driver();
        let b = reference_driver().with_diffusion(0.1).unwrap();
        let s = DriverSchedule::per_period(vec![a, b]).unwrap();
        assert_eq!(s.spec(0), &a);
        assert_eq!(s.spec(1), &b);
        assert_eq!(s.spec(7), &b);
        assert!(!s.is_homogeneous());
        assert!(DriverSchedule::per_period(vec![]).is_err());
    }
}
