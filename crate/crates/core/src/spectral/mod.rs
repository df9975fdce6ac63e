//! Fourier-side representation of real fields on the torus `T^d = [0, 2π)^d`
//! (normalised Haar measure), Sobolev norms, Fourier multipliers, the Leray
//! projection and the Biot–Savart map.
//!
//! Modes are truncated symmetrically: each axis keeps the wavenumbers
//! `-(N/2 - 1) ..= N/2 - 1`, so the Nyquist mode is dropped and `k ↦ -k`
//! maps the index set onto itself.

pub mod transform;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Truncated wavenumber lattice for `d ∈ {1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FourierGrid {
    dim: usize,
    modes_per_dim: usize,
}

/// Build a grid with `modes_per_dim` (even, at least 4) samples per axis.
pub fn make_grid(dim: usize, modes_per_dim: usize) -> Result<FourierGrid> {
    FourierGrid::new(dim, modes_per_dim)
}

impl FourierGrid {
    pub fn new(dim: usize, modes_per_dim: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        if modes_per_dim < 4 || !modes_per_dim.is_multiple_of(2) {
            return Err(Error::InvalidModeCount(modes_per_dim));
        }
        Ok(Self { dim, modes_per_dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes_per_dim(&self) -> usize {
        self.modes_per_dim
    }

    /// Largest retained wavenumber along an axis, `N/2 - 1`.
    pub fn max_wavenumber(&self) -> i64 {
        (self.modes_per_dim / 2 - 1) as i64
    }

    /// Number of retained wavenumbers per axis, `N - 1`.
    pub fn side(&self) -> usize {
        self.modes_per_dim - 1
    }

    /// Total number of retained modes, `(N - 1)^d`.
    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-axis wavenumber set.
    pub fn wavenumbers(&self) -> Vec<i64> {
        let m = self.max_wavenumber();
        (-m..=m).collect()
    }

    /// Wavevector of mode `idx`; the second entry is 0 when `d = 1`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [i64; 2] {
        let m = self.max_wavenumber();
        if self.dim == 1 {
            [idx as i64 - m, 0]
        } else {
            let side = self.side();
            [(idx / side) as i64 - m, (idx % side) as i64 - m]
        }
    }

    pub fn index_of(&self, k: [i64; 2]) -> Option<usize> {
        let m = self.max_wavenumber();
        if k[0].abs() > m || k[1].abs() > m || (self.dim == 1 && k[1] != 0) {
            return None;
        }
        let a = (k[0] + m) as usize;
        Some(if self.dim == 1 { a } else { a * self.side() + (k[1] + m) as usize })
    }

    /// Index of `-k` given the index of `k`.
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    #[inline]
    pub fn zero_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    /// `|k|^2` for mode `idx`.
    #[inline]
    pub fn norm_sq(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        (k[0] * k[0] + k[1] * k[1]) as f64
    }

    /// One representative of every pair `{k, -k}`, `k ≠ 0`, ordered by
    /// square shells `max(|k1|, |k2|) = 1, 2, ...`. The order is nested under
    /// refinement: a coarser grid's list is a prefix of a finer grid's.
    pub fn half_plane(&self) -> Vec<usize> {
        let m = self.max_wavenumber();
        let mut out = Vec::with_capacity(self.len() / 2);
        if self.dim == 1 {
            out.extend((1..=m).map(|k| self.zero_index() + k as usize));
            return out;
        }
        for s in 1..=m {
            for k1 in 0..=s {
                for k2 in -s..=s {
                    if k1.abs().max(k2.abs()) != s || (k1 == 0 && k2 <= 0) {
                        continue;
                    }
                    out.push(self.index_of([k1, k2]).expect("in range"));
                }
            }
        }
        out
    }

    /// Physical points per axis for alias-free quadratic products (3/2 rule).
    pub fn dealias_points(&self) -> usize {
        3 * self.modes_per_dim / 2
    }

    fn check_same(&self, other: &FourierGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Real scalar or vector field stored as Fourier coefficients, mode-major:
/// `coeffs[idx * components + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: FourierGrid,
    components: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: FourierGrid, components: usize) -> Self {
        assert!(components >= 1);
        Self {
            grid,
            components,
            coeffs: vec![ZERO; grid.len() * components],
        }
    }

    pub fn from_coeffs(grid: FourierGrid, components: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if components == 0 || coeffs.len() != grid.len() * components {
            return Err(invalid(
                "coeffs",
                format!("expected {} coefficients, got {}", grid.len() * components, coeffs.len()),
            ));
        }
        Ok(Self { grid, components, coeffs })
    }

    /// Build from a closure `(k, component) -> u_{j,k}`. The caller is
    /// responsible for Hermitian symmetry; see [`SpectralField::symmetrize`].
    pub fn from_fn<F>(grid: FourierGrid, components: usize, f: F) -> Self
    where
        F: Fn([i64; 2], usize) -> Complex64,
    {
        let mut out = Self::zeros(grid, components);
        for idx in 0..grid.len() {
            let k = grid.wavevector(idx);
            for j in 0..components {
                out.coeffs[idx * components + j] = f(k, j);
            }
        }
        out
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn get(&self, idx: usize, j: usize) -> Complex64 {
        self.coeffs[idx * self.components + j]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, j: usize, value: Complex64) {
        self.coeffs[idx * self.components + j] = value;
    }

    pub fn coeff(&self, k: [i64; 2], j: usize) -> Option<Complex64> {
        self.grid.index_of(k).map(|idx| self.get(idx, j))
    }

    /// Set `u_{j,k} = value` and `u_{j,-k} = conj(value)`; on the zero mode
    /// only the real part is kept.
    pub fn set_pair(&mut self, k: [i64; 2], j: usize, value: Complex64) -> Result<()> {
        let idx = self
            .grid
            .index_of(k)
            .ok_or_else(|| invalid("k", format!("{k:?} is not a retained wavevector")))?;
        let mirror = self.grid.mirror(idx);
        if idx == mirror {
            self.set(idx, j, Complex64::new(value.re, 0.0));
        } else {
            self.set(idx, j, value);
            self.set(mirror, j, value.conj());
        }
        Ok(())
    }

    /// Largest violation of `u_{-k} = conj(u_k)`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for idx in 0..self.grid.len() {
            let mirror = self.grid.mirror(idx);
            for j in 0..self.components {
                worst = worst.max((self.get(mirror, j) - self.get(idx, j).conj()).norm());
            }
        }
        worst
    }

    /// Replace the field by its real part, `u_k ← (u_k + conj(u_{-k})) / 2`.
    pub fn symmetrize(&mut self) {
        for idx in 0..=self.grid.zero_index() {
            let mirror = self.grid.mirror(idx);
            for j in 0..self.components {
                let avg = (self.get(idx, j) + self.get(mirror, j).conj()) * 0.5;
                self.set(idx, j, avg);
                self.set(mirror, j, avg.conj());
            }
        }
    }

    pub fn component(&self, j: usize) -> SpectralField {
        let coeffs = (0..self.grid.len()).map(|idx| self.get(idx, j)).collect();
        SpectralField {
            grid: self.grid,
            components: 1,
            coeffs,
        }
    }

    pub fn from_components(parts: &[SpectralField]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| invalid("parts", "no components given"))?;
        let grid = first.grid;
        let mut out = Self::zeros(grid, parts.len());
        for (j, part) in parts.iter().enumerate() {
            grid.check_same(&part.grid)?;
            if part.components != 1 {
                return Err(Error::ComponentMismatch {
                    expected: 1,
                    found: part.components,
                });
            }
            for idx in 0..grid.len() {
                out.set(idx, j, part.get(idx, 0));
            }
        }
        Ok(out)
    }

    /// Complex values of component `j` on a uniform grid of `points` per axis.
    pub fn to_physical_complex(&self, j: usize, points: usize) -> Vec<Complex64> {
        transform::to_physical(&self.grid, points, |idx| self.get(idx, j))
    }

    /// Real values of component `j` on a uniform grid of `points` per axis.
    pub fn to_physical(&self, j: usize, points: usize) -> Vec<f64> {
        self.to_physical_complex(j, points).into_iter().map(|z| z.re).collect()
    }

    /// Scalar field whose retained coefficients are the discrete Fourier
    /// coefficients of real grid values.
    pub fn from_physical(grid: FourierGrid, points: usize, values: &[f64]) -> Self {
        let buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut out = SpectralField {
            grid,
            components: 1,
            coeffs: transform::from_physical(&grid, points, &buf),
        };
        out.symmetrize();
        out
    }

    /// `Σ_{j,k} |u_{j,k}|^2`, the squared L² norm for the normalised measure.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Real L² inner product `Re Σ conj(u_k) v_k`.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        if self.components != other.components {
            return Err(Error::ComponentMismatch {
                expected: self.components,
                found: other.components,
            });
        }
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a.conj() * b).re).sum())
    }

    /// Spatial mean of the first component.
    pub fn mean(&self) -> f64 {
        self.get(self.grid.zero_index(), 0).re
    }

    pub fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|z| *z *= a);
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.components != other.components {
            return Err(Error::ComponentMismatch {
                expected: self.components,
                found: other.components,
            });
        }
        self.coeffs.iter_mut().zip(&other.coeffs).for_each(|(x, y)| *x += y * a);
        Ok(())
    }

    /// Maximum modulus over all components on a uniform grid.
    pub fn sup_norm(&self, points: usize) -> f64 {
        (0..self.components)
            .flat_map(|j| self.to_physical(j, points))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Fourier multiplier `u_k ↦ m_k u_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    grid: FourierGrid,
    symbol: Vec<Complex64>,
}

impl DiagonalOperator {
    /// Symbol must satisfy `m_{-k} = conj(m_k)` (to 1e-12 relative).
    pub fn new(grid: FourierGrid, symbol: Vec<Complex64>) -> Result<Self> {
        if symbol.len() != grid.len() {
            return Err(invalid("symbol", "length does not match the grid"));
        }
        for idx in 0..grid.len() {
            let a = symbol[idx];
            let b = symbol[grid.mirror(idx)].conj();
            if (a - b).norm() > 1e-12 * (1.0 + a.norm()) {
                return Err(Error::NonHermitianSymbol(grid.wavevector(idx)));
            }
        }
        Ok(Self { grid, symbol })
    }

    pub fn from_fn<F: Fn([i64; 2]) -> Complex64>(grid: FourierGrid, f: F) -> Result<Self> {
        Self::new(grid, (0..grid.len()).map(|i| f(grid.wavevector(i))).collect())
    }

    pub fn real_from_fn<F: Fn([i64; 2]) -> f64>(grid: FourierGrid, f: F) -> Result<Self> {
        Self::from_fn(grid, |k| Complex64::new(f(k), 0.0))
    }

    pub fn identity(grid: FourierGrid) -> Self {
        Self {
            grid,
            symbol: vec![Complex64::new(1.0, 0.0); grid.len()],
        }
    }

    /// `Δ`, symbol `-|k|^2`.
    pub fn laplacian(grid: FourierGrid) -> Self {
        Self {
            grid,
            symbol: (0..grid.len()).map(|i| Complex64::new(-grid.norm_sq(i), 0.0)).collect(),
        }
    }

    /// `(1 - Δ)^alpha`, symbol `(1 + |k|^2)^alpha`.
    pub fn bessel_power(grid: FourierGrid, alpha: f64) -> Self {
        Self {
            grid,
            symbol: (0..grid.len())
                .map(|i| Complex64::new((1.0 + grid.norm_sq(i)).powf(alpha), 0.0))
                .collect(),
        }
    }

    /// Semigroup `exp(t A)`.
    pub fn exp(&self, t: f64) -> Self {
        Self {
            grid: self.grid,
            symbol: self.symbol.iter().map(|m| (m * t).exp()).collect(),
        }
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    pub fn apply(&self, u: &SpectralField) -> Result<SpectralField> {
        apply_multiplier(u, self)
    }
}

/// `(Σ_{j,k} (1 + |k|^2)^s |u_{j,k}|^2)^{1/2}`.
pub fn sobolev_norm(u: &SpectralField, s: f64) -> f64 {
    let grid = u.grid();
    let c = u.components();
    let mut acc = 0.0;
    for idx in 0..grid.len() {
        let w = (1.0 + grid.norm_sq(idx)).powf(s);
        for j in 0..c {
            acc += w * u.get(idx, j).norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn apply_multiplier(u: &SpectralField, op: &DiagonalOperator) -> Result<SpectralField> {
    u.grid().check_same(op.grid())?;
    let mut out = u.clone();
    let c = u.components();
    for (idx, m) in op.symbol.iter().enumerate() {
        for j in 0..c {
            out.coeffs[idx * c + j] *= m;
        }
    }
    Ok(out)
}

/// Result of comparing `‖(1 - L)^α S(t)‖` with `C_α (1 + t^{-α})` on a
/// truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingBound {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
}

/// `C_α = max(1, 2^{α-1}) · max(1, α^α e^{-α})`, for which
/// `(1 + λ)^α e^{-λ t} ≤ C_α (1 + t^{-α})` holds for all `λ, t > 0`.
pub fn smoothing_constant(alpha: f64) -> f64 {
    let peak = if alpha > 0.0 { (alpha * alpha.ln() - alpha).exp() } else { 1.0 };
    2f64.powf(alpha - 1.0).max(1.0) * peak.max(1.0)
}

pub fn semigroup_smoothing_bound_check(generator: &DiagonalOperator, alpha: f64, t: f64) -> Result<SmoothingBound> {
    if !(alpha >= 0.0) {
        return Err(invalid("alpha", "must be non-negative"));
    }
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    let grid = generator.grid();
    let mut lhs = 0.0_f64;
    for (idx, m) in generator.symbol().iter().enumerate() {
        if !(m.re < 0.0) || m.im.abs() > 1e-14 * m.re.abs() {
            return Err(Error::NonNegativeSymbol(grid.wavevector(idx)));
        }
        lhs = lhs.max((1.0 + m.re.abs()).powf(alpha) * (m.re * t).exp());
    }
    let constant = smoothing_constant(alpha);
    Ok(SmoothingBound {
        lhs,
        rhs: constant * (1.0 + t.powf(-alpha)),
        constant,
    })
}

fn require_velocity(u: &SpectralField) -> Result<()> {
    if u.grid().dim() != 2 {
        return Err(Error::UnsupportedDimension(u.grid().dim()));
    }
    if u.components() != 2 {
        return Err(Error::ComponentMismatch {
            expected: 2,
            found: u.components(),
        });
    }
    Ok(())
}

fn require_planar_scalar(w: &SpectralField) -> Result<()> {
    if w.grid().dim() != 2 {
        return Err(Error::UnsupportedDimension(w.grid().dim()));
    }
    if w.components() != 1 {
        return Err(Error::ComponentMismatch {
            expected: 1,
            found: w.components(),
        });
    }
    Ok(())
}

/// Leray projection `(Πu)_k = u_k - k <k, u_k> / |k|^2`; the mean is kept.
pub fn leray_project(u: &SpectralField) -> Result<SpectralField> {
    require_velocity(u)?;
    let grid = *u.grid();
    let mut out = u.clone();
    for idx in 0..grid.len() {
        let k2 = grid.norm_sq(idx);
        if k2 == 0.0 {
            continue;
        }
        let [k1, kk2] = grid.wavevector(idx).map(|v| v as f64);
        let dot = u.get(idx, 0) * k1 + u.get(idx, 1) * kk2;
        out.set(idx, 0, u.get(idx, 0) - dot * (k1 / k2));
        out.set(idx, 1, u.get(idx, 1) - dot * (kk2 / k2));
    }
    Ok(out)
}

/// Velocity with vorticity `w`: `u_k = -i k^⊥ w_k / |k|^2`, `k^⊥ = (-k2, k1)`.
///
/// The phase `-i` makes `curl u = w` for the `exp(i<k,x>)` convention and
/// keeps `u` real.
pub fn biot_savart(w: &SpectralField) -> Result<SpectralField> {
    require_planar_scalar(w)?;
    let mean = w.mean();
    if mean.abs() > 1e-12 * (1.0 + w.norm_sq().sqrt()) {
        return Err(Error::NonZeroMean(mean));
    }
    let grid = *w.grid();
    let mut out = SpectralField::zeros(grid, 2);
    for idx in 0..grid.len() {
        let k2 = grid.norm_sq(idx);
        if k2 == 0.0 {
            continue;
        }
        let [k1, kk2] = grid.wavevector(idx).map(|v| v as f64);
        let wk = w.get(idx, 0) / k2;
        out.set(idx, 0, I * kk2 * wk);
        out.set(idx, 1, -I * k1 * wk);
    }
    Ok(out)
}

/// Scalar vorticity `∂_1 u_2 - ∂_2 u_1`.
pub fn curl(u: &SpectralField) -> Result<SpectralField> {
    require_velocity(u)?;
    let grid = *u.grid();
    let mut out = SpectralField::zeros(grid, 1);
    for idx in 0..grid.len() {
        let [k1, k2] = grid.wavevector(idx).map(|v| v as f64);
        out.set(idx, 0, I * (u.get(idx, 1) * k1 - u.get(idx, 0) * k2));
    }
    Ok(out)
}

/// Spectral gradient of a scalar field on a 2-D grid.
pub fn gradient(w: &SpectralField) -> Result<SpectralField> {
    require_planar_scalar(w)?;
    let grid = *w.grid();
    let mut out = SpectralField::zeros(grid, 2);
    for idx in 0..grid.len() {
        let [k1, k2] = grid.wavevector(idx).map(|v| v as f64);
        let wk = w.get(idx, 0);
        out.set(idx, 0, I * k1 * wk);
        out.set(idx, 1, I * k2 * wk);
    }
    Ok(out)
}

/// `max_k |<k, u_k>|`.
pub fn divergence_residual(u: &SpectralField) -> Result<f64> {
    require_velocity(u)?;
    let grid = *u.grid();
    Ok((0..grid.len())
        .map(|idx| {
            let [k1, k2] = grid.wavevector(idx).map(|v| v as f64);
            (u.get(idx, 0) * k1 + u.get(idx, 1) * k2).norm()
        })
        .fold(0.0, f64::max))
}

/// Fourier coefficients of the pointwise product `uv`, restricted to the grid
/// and computed without aliasing on a 3/2-padded physical grid.
pub fn dealiased_product(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    u.grid().check_same(v.grid())?;
    for f in [u, v] {
        if f.components() != 1 {
            return Err(Error::ComponentMismatch {
                expected: 1,
                found: f.components(),
            });
        }
    }
    let grid = *u.grid();
    let points = grid.dealias_points();
    let a = u.to_physical(0, points);
    let b = v.to_physical(0, points);
    let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    Ok(SpectralField::from_physical(grid, points, &prod))
}
