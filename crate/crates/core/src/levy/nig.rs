//! Normal inverse Gaussian distribution: cumulant, moments and exact
//! increment sampling by inverse-Gaussian subordination.

use rand::Rng;
use rand_distr::{Distribution, InverseGaussian, StandardNormal};

use super::{DomainError, ParamError};

/// NIG parameters in the `(alpha, beta, mu, delta_bar)` convention.
///
/// `mu` and `delta_bar` are rates per unit time: an increment over `dt`
/// is NIG distributed with location `mu * dt` and scale `delta_bar * dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NigParams {
    /// Tail heaviness, `alpha > 0`.
    pub alpha: f64,
    /// Asymmetry, `|beta| < alpha`.
    pub beta: f64,
    /// Location per unit time.
    pub mu: f64,
    /// Scale per unit time, `delta_bar > 0`.
    pub delta_bar: f64,
}

/// One subordinated draw: the inverse-Gaussian time change and the
/// standard normal that is scaled by its square root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NigDraw {
    pub time_change: f64,
    pub gaussian: f64,
}

impl NigParams {
    pub fn new(alpha: f64, beta: f64, mu: f64, delta_bar: f64) -> Result<Self, ParamError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(ParamError::Alpha(alpha));
        }
        if !(beta.abs() < alpha) {
            return Err(ParamError::Beta { alpha, beta });
        }
        if !mu.is_finite() {
            return Err(ParamError::Mu(mu));
        }
        if !(delta_bar > 0.0) || !delta_bar.is_finite() {
            return Err(ParamError::DeltaBar(delta_bar));
        }
        Ok(Self {
            alpha,
            beta,
            mu,
            delta_bar,
        })
    }

    /// Symmetric, centred NIG (`beta = mu = 0`).
    pub fn symmetric(alpha: f64, delta_bar: f64) -> Result<Self, ParamError> {
        Self::new(alpha, 0.0, 0.0, delta_bar)
    }

    /// `sqrt(alpha^2 - beta^2)`.
    pub fn gamma(&self) -> f64 {
        (self.alpha * self.alpha - self.beta * self.beta).sqrt()
    }

    /// Cumulant generating function per unit time,
    /// `mu u + delta_bar (gamma - sqrt(alpha^2 - (beta + u)^2))`.
    ///
    /// Defined for `|beta + u| <= alpha`.
    pub fn cumulant(&self, u: f64) -> Result<f64, DomainError> {
        let shifted = self.beta + u;
        if !(shifted.abs() <= self.alpha) {
            return Err(DomainError {
                argument: u,
                lower: -self.alpha - self.beta,
                upper: self.alpha - self.beta,
            });
        }
        let root = ((self.alpha - shifted) * (self.alpha + shifted)).sqrt();
        if self.beta == 0.0 {
            // delta_bar * (alpha - root) with the difference formed without cancellation
            let gap = u * u / (self.alpha + root);
            Ok(self.mu * u + self.delta_bar * gap)
        } else {
            Ok(self.mu * u + self.delta_bar * (self.gamma() - root))
        }
    }

    /// `kappa'(0)`.
    pub fn mean(&self) -> f64 {
        self.mu + self.delta_bar * self.beta / self.gamma()
    }

    /// `kappa''(0) = delta_bar alpha^2 / gamma^3`.
    pub fn variance(&self) -> f64 {
        let g = self.gamma();
        self.delta_bar * self.alpha * self.alpha / (g * g * g)
    }

    /// Draw the subordinator and Gaussian for an increment of length `dt`.
    pub fn draw<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<NigDraw, ParamError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(ParamError::TimeStep(dt));
        }
        let scale = self.delta_bar * dt;
        let subordinator = InverseGaussian::new(scale / self.gamma(), scale * scale)
            .map_err(|_| ParamError::TimeStep(dt))?;
        let time_change = subordinator.sample(rng);
        let gaussian: f64 = StandardNormal.sample(rng);
        Ok(NigDraw {
            time_change,
            gaussian,
        })
    }

    /// Assemble `H_{t+dt} - H_t` from a draw; `mirror` flips the Gaussian
    /// component and leaves the time change shared.
    pub fn assemble(&self, dt: f64, draw: NigDraw, mirror: bool) -> f64 {
        let g = if mirror { -draw.gaussian } else { draw.gaussian };
        self.mu * dt + self.beta * draw.time_change + draw.time_change.sqrt() * g
    }

    /// One exact draw of an NIG increment over `dt`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64, ParamError> {
        let draw = self.draw(dt, rng)?;
        Ok(self.assemble(dt, draw, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference_driver() -> NigParams {
        NigParams::symmetric(12.0, 12.0).unwrap()
    }

    #[test]
    fn cumulant_at_zero_is_zero() {
        assert_eq!(reference_driver().cumulant(0.0).unwrap(), 0.0);
        let skewed = NigParams::new(5.0, -1.5, 0.3, 2.0).unwrap();
        assert_eq!(skewed.cumulant(0.0).unwrap(), 0.0);
    }

    #[test]
    fn cumulant_closed_form_value() {
        let expected = 144.0 - 12.0 * 108f64.sqrt();
        assert!((reference_driver().cumulant(6.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 19.292342).abs() < 1e-6);
    }

    #[test]
    fn cumulant_domain() {
        assert!(reference_driver().cumulant(12.0).is_ok());
        assert!(reference_driver().cumulant(-12.0).is_ok());
        let err = reference_driver().cumulant(12.5).unwrap_err();
        assert_eq!(err.argument, 12.5);
        assert!(reference_driver().cumulant(f64::NAN).is_err());
        let skewed = NigParams::new(5.0, 2.0, 0.0, 1.0).unwrap();
        assert!(skewed.cumulant(3.0).is_ok());
        assert!(skewed.cumulant(3.1).is_err());
        assert!(skewed.cumulant(-7.0).is_ok());
    }

    #[test]
    fn variance_closed_form() {
        assert_eq!(reference_driver().variance(), 1.0);
        assert_eq!(NigParams::symmetric(4.0, 2.0).unwrap().variance(), 0.5);
        assert_eq!(reference_driver().mean(), 0.0);
    }

    #[test]
    fn variance_matches_finite_difference() {
        for p in [reference_driver(), NigParams::new(7.0, 1.5, 0.2, 3.0).unwrap()] {
            let h = 1e-4;
            let fd = (p.cumulant(h).unwrap() - 2.0 * p.cumulant(0.0).unwrap() + p.cumulant(-h).unwrap())
                / (h * h);
            assert!((fd - p.variance()).abs() < 1e-6, "{fd} vs {}", p.variance());
            let d1 = (p.cumulant(h).unwrap() - p.cumulant(-h).unwrap()) / (2.0 * h);
            assert!((d1 - p.mean()).abs() < 1e-7);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(NigParams::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(NigParams::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(NigParams::new(1.0, 0.0, 0.0, -1.0).is_err());
        assert!(NigParams::new(f64::NAN, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn rejects_non_positive_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(reference_driver().sample_increment(0.0, &mut rng).is_err());
        assert!(reference_driver().sample_increment(-0.1, &mut rng).is_err());
    }

    #[test]
    fn sample_moments_converge() {
        let p = reference_driver();
        let dt = 0.1;
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(20100917);
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = p.sample_increment(dt, &mut rng).unwrap();
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 3.0 * (dt / n as f64).sqrt(), "mean {mean}");
        assert!((var / (dt * p.variance()) - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn skewed_sample_moments() {
        let p = NigParams::new(6.0, 2.0, 0.1, 3.0).unwrap();
        let dt = 0.25;
        let n = 400_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..n).map(|_| p.sample_increment(dt, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (dt * p.variance() / n as f64).sqrt();
        assert!((mean - dt * p.mean()).abs() < 4.0 * se_mean);
        assert!((var / (dt * p.variance()) - 1.0).abs() < 0.03);
    }

    #[test]
    fn mirrored_draw_flips_gaussian_only() {
        let p = NigParams::new(6.0, 2.0, 0.1, 3.0).unwrap();
        let draw = NigDraw {
            time_change: 0.04,
            gaussian: 0.7,
        };
        let up = p.assemble(0.5, draw, false);
        let down = p.assemble(0.5, draw, true);
        assert!((up + down - 2.0 * (0.05 + 2.0 * 0.04)).abs() < 1e-15);
    }
}
