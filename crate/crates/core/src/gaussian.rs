//! Centred Gaussian measures that are diagonal in the Fourier basis:
//! sampling, Cameron–Martin norms, exponential-moment diagnostics and
//! Hölder-exponent estimation for sampled paths.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::rng::{self, StreamRng};
use crate::spectral::{FourierGrid, SpectralField};
use crate::stats::{self, LinearFit};

/// Centred Gaussian law with independent modes; `mode_std[idx]` is `σ_k`,
/// the standard deviation of `u_k` in the sense `E|u_k|^2 = σ_k^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    grid: FourierGrid,
    mode_std: Vec<f64>,
}

impl GaussianSpec {
    /// Requires `σ_k ≥ 0`, finite, and `σ_{-k} = σ_k`.
    pub fn new(grid: FourierGrid, mode_std: Vec<f64>) -> Result<Self> {
        if mode_std.len() != grid.len() {
            return Err(invalid("mode_std", "length does not match the grid"));
        }
        for (idx, &s) in mode_std.iter().enumerate() {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(invalid("mode_std", format!("σ = {s} at {:?}", grid.wavevector(idx))));
            }
            if s != mode_std[grid.mirror(idx)] {
                return Err(invalid("mode_std", format!("σ_k ≠ σ_-k at {:?}", grid.wavevector(idx))));
            }
        }
        Ok(Self { grid, mode_std })
    }

    pub fn from_fn<F: Fn([i64; 2]) -> f64>(grid: FourierGrid, f: F) -> Result<Self> {
        Self::new(grid, (0..grid.len()).map(|i| f(grid.wavevector(i))).collect())
    }

    pub fn from_variances(grid: FourierGrid, variances: Vec<f64>) -> Result<Self> {
        if let Some(v) = variances.iter().find(|v| !(**v >= 0.0)) {
            return Err(invalid("variances", format!("negative variance {v}")));
        }
        Self::new(grid, variances.into_iter().map(f64::sqrt).collect())
    }

    /// Space white noise of intensity `variance` per mode.
    pub fn white(grid: FourierGrid, variance: f64) -> Result<Self> {
        Self::from_variances(grid, vec![variance; grid.len()])
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn mode_std(&self) -> &[f64] {
        &self.mode_std
    }

    pub fn variance(&self, idx: usize) -> f64 {
        self.mode_std[idx].powi(2)
    }

    /// `Σ_k σ_k^2 = E‖u‖^2_{L^2}`.
    pub fn trace(&self) -> f64 {
        self.mode_std.iter().map(|s| s * s).sum()
    }

    pub fn max_variance(&self) -> f64 {
        self.mode_std.iter().fold(0.0, |m, s| m.max(s * s))
    }

    /// `1 / (2 max_k σ_k^2)`: `E exp(α‖u‖^2)` is finite iff `α` is below it.
    pub fn fernique_threshold(&self) -> f64 {
        0.5 / self.max_variance()
    }

    /// Variance of the real functional `u ↦ <l, u> = Σ_k conj(l_k) u_k`.
    pub fn functional_variance(&self, l: &SpectralField) -> Result<f64> {
        check_grid(&self.grid, l)?;
        Ok((0..self.grid.len()).map(|idx| l.get(idx, 0).norm_sqr() * self.variance(idx)).sum())
    }

    /// Draw one field. The zero mode is drawn first, then each pair
    /// `{k, -k}` in the nested shell order of [`FourierGrid::half_plane`],
    /// so a coarser truncation sees the same low modes as a finer one.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> SpectralField {
        let grid = self.grid;
        let mut out = SpectralField::zeros(grid, 1);
        let zero = grid.zero_index();
        out.set(zero, 0, Complex64::new(self.mode_std[zero] * rng::normal(rng), 0.0));
        for idx in grid.half_plane() {
            let s = self.mode_std[idx] * std::f64::consts::FRAC_1_SQRT_2;
            let a = s * rng::normal(rng);
            let b = s * rng::normal(rng);
            out.set(idx, 0, Complex64::new(a, b));
            out.set(grid.mirror(idx), 0, Complex64::new(a, -b));
        }
        out
    }

    /// `‖u‖^2_{L^2}` for `count` independent samples, sample `i` drawn from
    /// `stream(seed, i)` exactly as [`SampleEnsemble::generate`] would.
    pub fn sample_norms_sq(&self, seed: u64, count: usize) -> Vec<f64> {
        (0..count)
            .into_par_iter()
            .map(|i| self.sample(&mut rng::stream(seed, i as u64)).norm_sq())
            .collect()
    }

    /// Real coordinates `(re u_0, re u_k, im u_k, ...)` in draw order together
    /// with their standard deviations.
    fn real_coordinates(&self, u: &SpectralField) -> Vec<(f64, f64)> {
        let grid = self.grid;
        let zero = grid.zero_index();
        let mut out = vec![(u.get(zero, 0).re, self.mode_std[zero])];
        for idx in grid.half_plane() {
            let s = self.mode_std[idx] * std::f64::consts::FRAC_1_SQRT_2;
            let z = u.get(idx, 0);
            out.push((z.re, s));
            out.push((z.im, s));
        }
        out
    }

    /// Number of real coordinates attaining the maximal variance, weighted as
    /// they enter `‖u‖^2` (a pair `{k, -k}` counts twice).
    fn top_multiplicity(&self) -> usize {
        let top = self.max_variance();
        let grid = self.grid;
        let mut m = usize::from(self.variance(grid.zero_index()) >= top * (1.0 - 1e-12));
        for idx in grid.half_plane() {
            if self.variance(idx) >= top * (1.0 - 1e-12) {
                m += 2;
            }
        }
        m
    }
}

fn check_grid(grid: &FourierGrid, u: &SpectralField) -> Result<()> {
    if grid != u.grid() {
        return Err(Error::GridMismatch(format!("{grid:?} vs {:?}", u.grid())));
    }
    if u.components() != 1 {
        return Err(Error::ComponentMismatch {
            expected: 1,
            found: u.components(),
        });
    }
    Ok(())
}

/// Reproducible collection of independent samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEnsemble {
    pub spec: GaussianSpec,
    pub seed: u64,
    pub fields: Vec<SpectralField>,
}

impl SampleEnsemble {
    /// Sample `i` uses `stream(seed, i)`, so the result does not depend on
    /// the number of worker threads.
    pub fn generate(spec: &GaussianSpec, seed: u64, count: usize) -> Self {
        let fields = (0..count)
            .into_par_iter()
            .map(|i| spec.sample(&mut rng::stream(seed, i as u64)))
            .collect();
        Self {
            spec: spec.clone(),
            seed,
            fields,
        }
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn norms_sq(&self) -> Vec<f64> {
        self.fields.iter().map(SpectralField::norm_sq).collect()
    }
}

/// `(Σ_k |h_k|^2 / σ_k^2)^{1/2}`, infinite when `h` charges a mode with
/// `σ_k = 0`.
pub fn cameron_martin_norm(spec: &GaussianSpec, h: &SpectralField) -> Result<f64> {
    check_grid(spec.grid(), h)?;
    let mut acc = 0.0;
    for idx in 0..spec.grid().len() {
        let hk = h.get(idx, 0).norm_sqr();
        if hk == 0.0 {
            continue;
        }
        let var = spec.variance(idx);
        if var == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += hk / var;
    }
    Ok(acc.sqrt())
}

/// Empirical view of `E exp(α‖u‖^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FerniqueReport {
    pub alpha: f64,
    pub samples: usize,
    pub mean: f64,
    pub std_error: f64,
    /// `1 / (2 max σ_k^2)`.
    pub threshold: f64,
    /// Means over the nested prefixes of length 10, 100, 1000, ...
    pub prefix_means: Vec<(usize, f64)>,
    /// Median of the means of disjoint blocks of size 10, 100, 1000, ...
    pub block_medians: Vec<(usize, f64)>,
    /// Exponential rate of the upper tail of `‖u‖^2` estimated from the
    /// largest `√n` samples; the integral converges iff `α` is below it.
    pub tail_rate: f64,
}

impl FerniqueReport {
    /// The ensemble behaves as if the exponential moment were finite.
    pub fn stable(&self) -> bool {
        self.alpha < self.tail_rate
    }

    /// Block medians increase strictly with block size.
    pub fn monotone_growth(&self) -> bool {
        self.block_medians.len() >= 2 && self.block_medians.windows(2).all(|w| w[1].1 > w[0].1)
    }
}

pub fn fernique_diagnostic(ensemble: &SampleEnsemble, alpha: f64) -> Result<FerniqueReport> {
    fernique_from_norms(&ensemble.spec, &ensemble.norms_sq(), alpha)
}

/// As [`fernique_diagnostic`], from precomputed squared norms of samples of
/// `spec`.
pub fn fernique_from_norms(spec: &GaussianSpec, norms_sq: &[f64], alpha: f64) -> Result<FerniqueReport> {
    if !(alpha >= 0.0) {
        return Err(invalid("alpha", "must be non-negative"));
    }
    let n = norms_sq.len();
    if n < 100 {
        return Err(Error::InsufficientData(format!("{n} samples, need at least 100")));
    }
    if spec.max_variance() == 0.0 {
        return Err(invalid("spec", "degenerate measure"));
    }
    let values: Vec<f64> = norms_sq.iter().map(|z| (alpha * z).exp()).collect();
    let (mean, std_error) = stats::mean_se(&values);

    let mut prefix_means = Vec::new();
    let mut block_medians = Vec::new();
    let mut size = 10;
    while size <= n {
        prefix_means.push((size, values[..size].iter().sum::<f64>() / size as f64));
        if n / size >= 5 {
            let mut means: Vec<f64> = values.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
            means.sort_by(f64::total_cmp);
            block_medians.push((size, median_sorted(&means)));
        }
        size *= 10;
    }

    Ok(FerniqueReport {
        alpha,
        samples: n,
        mean,
        std_error,
        threshold: spec.fernique_threshold(),
        prefix_means,
        block_medians,
        tail_rate: tail_rate(norms_sq, 0.5 * spec.top_multiplicity() as f64),
    })
}

fn median_sorted(v: &[f64]) -> f64 {
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// For a gamma-type tail `z^{a-1} e^{-z/θ}` the mean excess over a high
/// threshold `s` is `θ (1 + (a - 1) θ / s + ...)`; solve for `θ` by fixed
/// point and return `1/θ`.
fn tail_rate(norms_sq: &[f64], shape: f64) -> f64 {
    let mut z = norms_sq.to_vec();
    z.sort_by(|a, b| b.total_cmp(a));
    let k = ((z.len() as f64).sqrt() as usize).max(10).min(z.len() - 1);
    let s = z[k];
    let excess = z[..k].iter().map(|v| v - s).sum::<f64>() / k as f64;
    let mut theta = excess;
    for _ in 0..100 {
        let next = excess / (1.0 + (shape - 1.0) * theta / s).max(0.1);
        if (next - theta).abs() <= 1e-14 * theta {
            theta = next;
            break;
        }
        theta = next;
    }
    1.0 / theta
}

/// Moment comparison between i.i.d. pairs `(x, y)` and their rotations
/// `(x sin φ + y cos φ, x cos φ - y sin φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationReport {
    /// Largest absolute difference of a compared moment.
    pub max_discrepancy: f64,
    /// Largest difference in units of its Monte-Carlo standard error.
    pub max_z: f64,
    pub statistics: usize,
}

impl RotationReport {
    pub fn pass(&self) -> bool {
        self.max_z <= 3.0
    }
}

/// Compares, for the first two active real coordinates, the means, second
/// moments and cross moment of each pair before and after rotation. At
/// `φ = 0` the map swaps `x` and `y`, so only resampling noise remains.
pub fn rotation_invariance_check(spec: &GaussianSpec, seed: u64, phi: f64, n_samples: usize) -> Result<RotationReport> {
    if n_samples < 2 {
        return Err(Error::InsufficientData("need at least two samples".into()));
    }
    let probe: Vec<usize> = spec
        .real_coordinates(&SpectralField::zeros(*spec.grid(), 1))
        .iter()
        .enumerate()
        .filter(|(_, (_, s))| *s > 0.0)
        .map(|(i, _)| i)
        .take(2)
        .collect();
    if probe.is_empty() {
        return Err(invalid("spec", "no active coordinates"));
    }
    let (sin, cos) = phi.sin_cos();
    let stats_per_draw = |i: usize| -> Vec<f64> {
        let mut r = rng::substream(seed, i as u64, 0);
        let x = spec.real_coordinates(&spec.sample(&mut r));
        let y = spec.real_coordinates(&spec.sample(&mut r));
        let mut d = Vec::with_capacity(5 * probe.len());
        for &c in &probe {
            let (a, b) = (x[c].0, y[c].0);
            let (ra, rb) = (a * sin + b * cos, a * cos - b * sin);
            d.extend([ra - a, rb - b, ra * ra - a * a, rb * rb - b * b, ra * rb - a * b]);
        }
        d
    };
    let diffs: Vec<Vec<f64>> = (0..n_samples).into_par_iter().map(stats_per_draw).collect();
    let statistics = diffs[0].len();
    let mut max_discrepancy = 0.0_f64;
    let mut max_z = 0.0_f64;
    for s in 0..statistics {
        let column: Vec<f64> = diffs.iter().map(|d| d[s]).collect();
        let (mean, se) = stats::mean_se(&column);
        max_discrepancy = max_discrepancy.max(mean.abs());
        let z = if mean == 0.0 { 0.0 } else { mean.abs() / se };
        max_z = max_z.max(z);
    }
    Ok(RotationReport {
        max_discrepancy,
        max_z,
        statistics,
    })
}

/// Draws `x` from the law of `c·u`, `u ~ spec`, and returns the whitened
/// average `X_M = (1/M) Σ (x_i / s_i)^2` over the first `M` active real
/// coordinates. Under the dilated law `X_M → c^2`.
pub fn dilate_singularity_diagnostic(spec: &GaussianSpec, c: f64, n_modes: usize, seed: u64) -> Result<f64> {
    if n_modes == 0 {
        return Err(invalid("n_modes", "must be positive"));
    }
    let mut r: StreamRng = rng::stream(seed, 0);
    let mut u = spec.sample(&mut r);
    u.scale(c);
    let coords: Vec<(f64, f64)> = spec
        .real_coordinates(&u)
        .into_iter()
        .filter(|(_, s)| *s > 0.0)
        .take(n_modes)
        .collect();
    if coords.len() < n_modes {
        return Err(Error::InsufficientData(format!(
            "only {} active real coordinates, {n_modes} requested",
            coords.len()
        )));
    }
    Ok(coords.iter().map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n_modes as f64)
}

/// Regression of `log2 E|X(x+h) - X(x)|^2` on `log2 h`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderEstimate {
    /// Half the fitted slope.
    pub alpha: f64,
    pub std_error: f64,
    pub fit: LinearFit,
    /// `(h, mean squared increment)` per level.
    pub points: Vec<(f64, f64)>,
}

/// `paths` are sampled at `n` equispaced points covering `domain_length`
/// (the last point excluded when `periodic`). Level `j` uses separations
/// `h = domain_length · 2^{-j}`, i.e. a lag of `n / 2^j` samples when
/// periodic and `(n - 1) / 2^j` otherwise.
pub fn holder_exponent_estimate(paths: &[Vec<f64>], levels: &[u32], domain_length: f64, periodic: bool) -> Result<HolderEstimate> {
    if levels.len() < 3 {
        return Err(Error::InsufficientData(format!("{} levels, need at least 3", levels.len())));
    }
    if paths.len() < 100 {
        return Err(Error::InsufficientData(format!("{} paths, need at least 100", paths.len())));
    }
    let n = paths[0].len();
    if paths.iter().any(|p| p.len() != n) {
        return Err(invalid("paths", "paths have different lengths"));
    }
    let intervals = if periodic { n } else { n.saturating_sub(1) };
    let mut points = Vec::with_capacity(levels.len());
    for &j in levels {
        let div = 1usize.checked_shl(j).unwrap_or(0);
        if div == 0 || intervals % div != 0 || intervals / div == 0 {
            return Err(invalid("levels", format!("level {j} does not divide the {intervals} intervals")));
        }
        let lag = intervals / div;
        let pairs = if periodic { n } else { n - lag };
        let msd = paths
            .par_iter()
            .map(|p| (0..pairs).map(|i| (p[(i + lag) % n] - p[i]).powi(2)).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum::<f64>()
            / (pairs * paths.len()) as f64;
        points.push((domain_length / div as f64, msd));
    }
    holder_from_points(points)
}

/// Fit the exponent from precomputed `(h, E|increment|^2)` pairs.
pub fn holder_from_points(points: Vec<(f64, f64)>) -> Result<HolderEstimate> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} scales, need at least 3", points.len())));
    }
    if points.iter().any(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::InsufficientData("increments must be positive".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.log2()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let fit = stats::linear_fit(&x, &y);
    Ok(HolderEstimate {
        alpha: fit.slope / 2.0,
        std_error: fit.slope_se / 2.0,
        fit,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    fn two_mode_spec() -> GaussianSpec {
        // σ^2 = 1 on k = ±1, 1/4 on k = ±2
        let g = make_grid(1, 6).unwrap();
        GaussianSpec::from_fn(g, |k| match k[0].abs() {
            1 => 1.0,
            2 => 0.5,
            _ => 0.0,
        })
        .unwrap()
    }

    fn unit_pair(grid: FourierGrid, k: i64) -> SpectralField {
        let mut h = SpectralField::zeros(grid, 1);
        h.set_pair([k, 0], 0, Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)).unwrap();
        h
    }

    #[test]
    fn cameron_martin_examples() {
        let spec = two_mode_spec();
        let g = *spec.grid();
        assert!((cameron_martin_norm(&spec, &unit_pair(g, 1)).unwrap() - 1.0).abs() < 1e-15);
        assert!((cameron_martin_norm(&spec, &unit_pair(g, 2)).unwrap() - 2.0).abs() < 1e-15);
        let mut h = SpectralField::zeros(g, 1);
        h.set_pair([0, 0], 0, Complex64::new(0.1, 0.0)).unwrap();
        assert_eq!(cameron_martin_norm(&spec, &h).unwrap(), f64::INFINITY);
    }

    #[test]
    fn zero_spec_samples_zero() {
        let g = make_grid(2, 8).unwrap();
        let spec = GaussianSpec::white(g, 0.0).unwrap();
        let u = spec.sample(&mut rng::stream(1, 0));
        assert_eq!(u.norm_sq(), 0.0);
    }

    #[test]
    fn samples_are_hermitian_and_reproducible() {
        let g = make_grid(2, 8).unwrap();
        let spec = GaussianSpec::from_fn(g, |k| 1.0 / (1.0 + (k[0] * k[0] + k[1] * k[1]) as f64)).unwrap();
        let a = SampleEnsemble::generate(&spec, 42, 8);
        let b = SampleEnsemble::generate(&spec, 42, 8);
        assert_eq!(a, b);
        for u in &a.fields {
            assert_eq!(u.hermitian_defect(), 0.0);
        }
    }

    #[test]
    fn coarse_sample_is_prefix_of_fine_sample() {
        let coarse = GaussianSpec::white(make_grid(2, 8).unwrap(), 1.0).unwrap();
        let fine = GaussianSpec::white(make_grid(2, 16).unwrap(), 1.0).unwrap();
        let a = coarse.sample(&mut rng::stream(5, 0));
        let b = fine.sample(&mut rng::stream(5, 0));
        for idx in 0..coarse.grid().len() {
            let k = coarse.grid().wavevector(idx);
            assert_eq!(a.get(idx, 0), b.coeff(k, 0).unwrap());
        }
    }

    #[test]
    fn asymmetric_spec_rejected() {
        let g = make_grid(1, 8).unwrap();
        assert!(GaussianSpec::from_fn(g, |k| if k[0] > 0 { 1.0 } else { 0.5 }).is_err());
    }

    #[test]
    fn fernique_alpha_zero_is_one() {
        let g = make_grid(1, 4).unwrap();
        let spec = GaussianSpec::from_fn(g, |k| if k[0] == 0 { 1.0 } else { 0.0 }).unwrap();
        let r = fernique_from_norms(&spec, &spec.sample_norms_sq(1, 1000), 0.0).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.threshold, 0.5);
    }

    #[test]
    fn dilate_zero_is_exactly_zero() {
        let spec = GaussianSpec::white(make_grid(1, 64).unwrap(), 1.0).unwrap();
        assert_eq!(dilate_singularity_diagnostic(&spec, 0.0, 32, 3).unwrap(), 0.0);
        assert!(dilate_singularity_diagnostic(&spec, 1.0, 1000, 3).is_err());
    }

    #[test]
    fn holder_rejects_thin_input() {
        let paths = vec![vec![0.0; 65]; 10];
        assert!(matches!(
            holder_exponent_estimate(&paths, &[1, 2, 3], 1.0, false),
            Err(Error::InsufficientData(_))
        ));
        let paths = vec![vec![0.0; 65]; 100];
        assert!(holder_exponent_estimate(&paths, &[1, 2], 1.0, false).is_err());
    }
}
