//! Transforms between truncated Fourier coefficients and values on a uniform
//! periodic grid with `points` samples per dimension.
//!
//! Convention: `u(x) = sum_k u_k exp(i <k, x>)` on `[0, 2π)^d`, so the forward
//! transform carries the `1 / points^d` factor.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::FourierGrid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

fn transpose(buf: &mut [Complex64], p: usize) {
    for i in 0..p {
        for j in (i + 1)..p {
            buf.swap(i * p + j, j * p + i);
        }
    }
}

fn fft_nd(buf: &mut [Complex64], dim: usize, points: usize, inverse: bool) {
    let fft = plan(points, inverse);
    fft.process(buf);
    if dim == 2 {
        transpose(buf, points);
        fft.process(buf);
        transpose(buf, points);
    }
}

#[inline]
fn wrap(k: i64, points: usize) -> usize {
    k.rem_euclid(points as i64) as usize
}

fn physical_offset(k: [i64; 2], dim: usize, points: usize) -> usize {
    if dim == 1 {
        wrap(k[0], points)
    } else {
        wrap(k[0], points) * points + wrap(k[1], points)
    }
}

/// Evaluate the trigonometric polynomial with coefficients `coeff(idx)` on the
/// uniform grid. `points` must be at least `modes_per_dim - 1`.
pub fn to_physical<F>(grid: &FourierGrid, points: usize, coeff: F) -> Vec<Complex64>
where
    F: Fn(usize) -> Complex64,
{
    assert!(points >= grid.side(), "physical grid too coarse for the truncation");
    let dim = grid.dim();
    let mut buf = vec![Complex64::new(0.0, 0.0); points.pow(dim as u32)];
    for idx in 0..grid.len() {
        buf[physical_offset(grid.wavevector(idx), dim, points)] = coeff(idx);
    }
    fft_nd(&mut buf, dim, points, true);
    buf
}

/// Project grid values onto the retained modes of `grid`.
pub fn from_physical(grid: &FourierGrid, points: usize, values: &[Complex64]) -> Vec<Complex64> {
    let dim = grid.dim();
    assert_eq!(values.len(), points.pow(dim as u32));
    assert!(points >= grid.side(), "physical grid too coarse for the truncation");
    let mut buf = values.to_vec();
    fft_nd(&mut buf, dim, points, false);
    let norm = 1.0 / buf.len() as f64;
    (0..grid.len())
        .map(|idx| buf[physical_offset(grid.wavevector(idx), dim, points)] * norm)
        .collect()
}

/// Sample positions of the uniform grid along one axis.
pub fn grid_coordinates(points: usize) -> Vec<f64> {
    (0..points).map(|j| 2.0 * std::f64::consts::PI * j as f64 / points as f64).collect()
}
