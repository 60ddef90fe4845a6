//! Cell geometry and channel statistics.
//!
//! Users are uniform over a disc of radius `R` (normalised to 1), so the
//! distance ratio `c₂ = r/R` has density `2c₂` on `[0, 1]`. After sorting,
//! the `j`-th nearest of `J` users follows the order-statistic density and
//! `c₂²` is Beta(`j`, `J−j+1`) distributed.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::{Complex, Error, Result};

/// Altitude ratio `c1 = H/R` and path-loss exponent `α`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CellGeometry {
    pub c1: f64,
    pub alpha: f64,
}

impl CellGeometry {
    pub fn new(c1: f64, alpha: f64) -> Result<Self> {
        if !(c1 > 0.0) || !c1.is_finite() {
            return Err(Error::InvalidParameter(format!("c1={c1} must be positive")));
        }
        if !(alpha >= 1.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha={alpha} must be >= 1"
            )));
        }
        Ok(CellGeometry { c1, alpha })
    }

    /// Amplitude gain after pre-compensating the path loss at the cell edge.
    pub fn pathloss_factor(&self, c2: f64) -> f64 {
        pathloss_factor(self, c2)
    }

    /// Power attenuation `(c1² + c2²)^{α/2}` dividing the per-node SNR.
    pub fn power_attenuation(&self, c2: f64) -> f64 {
        (self.c1 * self.c1 + c2 * c2).powf(self.alpha / 2.0)
    }
}

impl Default for CellGeometry {
    fn default() -> Self {
        CellGeometry {
            c1: 1.0,
            alpha: 3.0,
        }
    }
}

/// Rician factor `κ` (linear); `κ = 0` is Rayleigh fading.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RicianParams {
    pub kappa: f64,
}

impl RicianParams {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa={kappa} must be >= 0"
            )));
        }
        Ok(RicianParams { kappa })
    }
}

/// Sorted distance ratios of one user drop.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPlacement {
    pub distance_ratios: Vec<f64>,
    pub angles: Vec<f64>,
}

impl UserPlacement {
    /// Draws `j` users uniformly over the unit disc, nearest first.
    pub fn sample<R: Rng + ?Sized>(j: usize, rng: &mut R) -> Self {
        let mut distance_ratios = sample_radii(j, rng);
        distance_ratios.sort_by(f64::total_cmp);
        let angles = (0..j)
            .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
            .collect();
        UserPlacement {
            distance_ratios,
            angles,
        }
    }
}

/// Inverse CDF of the radial distance: `c₂ = √u`.
pub fn radius_from_uniform(u: f64) -> f64 {
    u.clamp(0.0, 1.0).sqrt()
}

/// `j` i.i.d. distance ratios, unsorted.
pub fn sample_radii<R: Rng + ?Sized>(j: usize, rng: &mut R) -> Vec<f64> {
    (0..j)
        .map(|_| radius_from_uniform(rng.random::<f64>()))
        .collect()
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn check_rank(rank: usize, count: usize) -> Result<()> {
    if rank == 0 || rank > count {
        return Err(Error::InvalidParameter(format!(
            "rank {rank} outside 1..={count}"
        )));
    }
    Ok(())
}

/// Density of the `rank`-th smallest of `count` distance ratios at `x`.
pub fn ordered_distance_pdf(rank: usize, count: usize, x: f64) -> Result<f64> {
    check_rank(rank, count)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("x={x} outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let f = 2.0 * x;
    let cdf = x * x;
    let below = (rank - 1) as f64;
    let above = (count - rank) as f64;
    if cdf == 1.0 && above > 0.0 {
        return Ok(0.0);
    }
    let mut log_tail = 0.0;
    if below > 0.0 {
        log_tail += below * cdf.ln();
    }
    if above > 0.0 {
        log_tail += above * (-cdf).ln_1p();
    }
    Ok(count as f64 * f * (ln_binomial(count - 1, rank - 1) + log_tail).exp())
}

/// Mean distance ratio of the `rank`-th nearest of `count` users,
/// `Γ(a+½)Γ(a+b) / (Γ(a+b+½)Γ(a))` with `a = rank`, `b = count−rank+1`.
pub fn expected_distance_ratio(rank: usize, count: usize) -> Result<f64> {
    check_rank(rank, count)?;
    let a = rank as f64;
    let b = (count - rank + 1) as f64;
    Ok((ln_gamma(a + 0.5) + ln_gamma(a + b) - ln_gamma(a + b + 0.5) - ln_gamma(a)).exp())
}

/// `(c1² + c2²)^{−α/4}`.
pub fn pathloss_factor(geom: &CellGeometry, c2: f64) -> f64 {
    (geom.c1 * geom.c1 + c2 * c2).powf(-geom.alpha / 4.0)
}

/// Unit-power Rician gain: real LOS part `√(κ/(1+κ))` plus a circular
/// Gaussian scatter term of variance `1/(1+κ)`.
pub fn sample_rician_gain<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> Complex {
    let los = (kappa / (1.0 + kappa)).sqrt();
    let sigma = (0.5 / (1.0 + kappa)).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(los + sigma * re, sigma * im)
}

pub fn sample_rician<R: Rng + ?Sized>(k: usize, kappa: f64, rng: &mut R) -> Vec<Complex> {
    (0..k).map(|_| sample_rician_gain(kappa, rng)).collect()
}

/// Circular complex Gaussian sample with `E|n|² = variance`.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex {
    let sigma = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(sigma * re, sigma * im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
        let h = (b - a) / intervals as f64;
        let mut s = f(a) + f(b);
        for i in 1..intervals {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn inverse_cdf_anchors() {
        assert_eq!(radius_from_uniform(0.25), 0.5);
        assert_eq!(radius_from_uniform(1.0), 1.0);
    }

    #[test]
    fn radius_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mean = sample_radii(n, &mut rng).iter().sum::<f64>() / n as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.002, "{mean}");
    }

    #[test]
    fn order_statistic_density_anchors() {
        for x in [0.1, 0.5, 0.9] {
            assert_relative_eq!(
                ordered_distance_pdf(1, 1, x).unwrap(),
                2.0 * x,
                epsilon = 1e-12
            );
            assert_relative_eq!(
                ordered_distance_pdf(6, 6, x).unwrap(),
                12.0 * x.powi(11),
                max_relative = 1e-12
            );
        }
        assert!(ordered_distance_pdf(0, 6, 0.5).is_err());
        assert!(ordered_distance_pdf(7, 6, 0.5).is_err());
        assert!(ordered_distance_pdf(1, 6, 1.5).is_err());
    }

    #[test]
    fn order_statistic_density_normalizes() {
        for rank in 1..=6 {
            let total = simpson(
                |x| ordered_distance_pdf(rank, 6, x).unwrap(),
                0.0,
                1.0,
                2000,
            );
            assert!((total - 1.0).abs() < 1e-9, "rank {rank}: {total}");
        }
    }

    #[test]
    fn expected_ratio_matches_density_mean() {
        assert_relative_eq!(
            expected_distance_ratio(1, 1).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            expected_distance_ratio(6, 6).unwrap(),
            12.0 / 13.0,
            epsilon = 1e-12
        );
        for rank in 1..=6 {
            let mean = simpson(
                |x| x * ordered_distance_pdf(rank, 6, x).unwrap(),
                0.0,
                1.0,
                4000,
            );
            assert_relative_eq!(
                expected_distance_ratio(rank, 6).unwrap(),
                mean,
                epsilon = 1e-8
            );
        }
        let nearest = expected_distance_ratio(1, 6).unwrap();
        assert!((nearest - 0.3410).abs() < 5e-5, "{nearest}");
    }

    #[test]
    fn expected_ratio_is_increasing_and_tends_to_one() {
        for count in [2usize, 6, 10, 50] {
            let v: Vec<f64> = (1..=count)
                .map(|r| expected_distance_ratio(r, count).unwrap())
                .collect();
            assert!(v.windows(2).all(|w| w[1] > w[0]));
        }
        let far = expected_distance_ratio(5000, 5000).unwrap();
        assert!(far > 0.9999 && far < 1.0);
    }

    #[test]
    fn pathloss_anchors() {
        let g = CellGeometry::new(1.0, 3.0).unwrap();
        assert_eq!(pathloss_factor(&g, 0.0), 1.0);
        assert_relative_eq!(pathloss_factor(&g, 1.0), 2f64.powf(-0.75), epsilon = 1e-15);
        let g2 = CellGeometry::new(1.0, 2.0).unwrap();
        assert_relative_eq!(pathloss_factor(&g2, 1.0), 0.5f64.sqrt(), epsilon = 1e-15);
        assert!(CellGeometry::new(0.0, 3.0).is_err());
        assert!(CellGeometry::new(1.0, 0.5).is_err());
    }

    #[test]
    fn pathloss_monotonicity() {
        let g = CellGeometry::new(1.0, 3.0).unwrap();
        let v: Vec<f64> = (0..=10)
            .map(|i| pathloss_factor(&g, i as f64 / 10.0))
            .collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        // decreasing in alpha once c1² + c2² > 1
        let a: Vec<f64> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&alpha| pathloss_factor(&CellGeometry::new(1.0, alpha).unwrap(), 0.5))
            .collect();
        assert!(a.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rician_limits_and_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in sample_rician(16, 1e12, &mut rng) {
            assert!((g - Complex::new(1.0, 0.0)).norm() < 1e-5);
        }
        let n = 1_000_000;
        for kappa in [0.0, 10.0] {
            let draws = sample_rician(n, kappa, &mut rng);
            let power = draws.iter().map(Complex::norm_sqr).sum::<f64>() / n as f64;
            let mean = draws.iter().sum::<Complex>() / n as f64;
            assert!((power - 1.0).abs() < 0.005, "kappa={kappa} power={power}");
            let los = (kappa / (1.0 + kappa)).sqrt();
            assert!(
                (mean.re - los).abs() < 0.003 && mean.im.abs() < 0.003,
                "{mean}"
            );
        }
    }

    #[test]
    fn sorted_order_statistic_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 100_000;
        let mut sum = [0.0f64; 6];
        let mut sum_sq = [0.0f64; 6];
        for _ in 0..trials {
            let p = UserPlacement::sample(6, &mut rng);
            for (i, &d) in p.distance_ratios.iter().enumerate() {
                sum[i] += d;
                sum_sq[i] += d * d;
            }
        }
        for rank in 1..=6 {
            let mean = sum[rank - 1] / trials as f64;
            let var = sum_sq[rank - 1] / trials as f64 - mean * mean;
            let se = (var / trials as f64).sqrt();
            let want = expected_distance_ratio(rank, 6).unwrap();
            assert!(
                (mean - want).abs() < 3.0 * se,
                "rank {rank}: {mean} vs {want}"
            );
        }
    }
}
