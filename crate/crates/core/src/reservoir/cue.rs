use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use super::{ReservoirError, Result};
use crate::seed::rng_from_seed;

/// Largest module dimension accepted by [`sample_cue`].
pub const MAX_CUE_DIM: usize = 1 << 13;

/// Draws a Haar-random `dim × dim` unitary.
///
/// A complex Ginibre matrix (i.i.d. entries `(x + iy)/√2`, `x, y ~ N(0, 1)`) is
/// QR-factorised and `Q` is multiplied column-wise by `R_ii / |R_ii|`, which
/// removes the phase ambiguity of the factorisation and makes the result
/// Haar-distributed. The same `seed` always yields the same matrix.
pub fn sample_cue(dim: usize, seed: u64) -> Result<DMatrix<Complex64>> {
    if !dim.is_power_of_two() || !(2..=MAX_CUE_DIM).contains(&dim) {
        return Err(ReservoirError::Size(format!(
            "CUE dimension must be a power of two in 2..={MAX_CUE_DIM}, got {dim}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // Filled row by row so the draw order is independent of storage layout.
    let mut entries = Vec::with_capacity(dim * dim);
    for _ in 0..dim * dim {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        entries.push(Complex64::new(re * scale, im * scale));
    }
    let ginibre = DMatrix::from_row_slice(dim, dim, &entries);
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { Complex64::new(1.0, 0.0) };
        col *= phase;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::unitarity_defect;

    #[test]
    fn cue_is_unitary() {
        for (dim, seed) in [(2, 0), (4, 1), (8, 9), (16, 3), (32, 77)] {
            assert!(unitarity_defect(&sample_cue(dim, seed).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn cue_seeds() {
        let a = sample_cue(4, 1).unwrap();
        let b = sample_cue(4, 2).unwrap();
        let largest = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(largest > 1e-3);
        assert_eq!(a, sample_cue(4, 1).unwrap());
    }

    #[test]
    fn cue_rejects_bad_dims() {
        for dim in [0, 1, 3, 6, MAX_CUE_DIM * 2] {
            assert!(matches!(sample_cue(dim, 0), Err(ReservoirError::Size(_))));
        }
    }

    #[test]
    fn diagonal_phases_are_uniform_on_average() {
        // Without the R_ii phase fix, Householder QR biases the diagonal of Q;
        // with it, E[U_ii] = 0 for Haar unitaries.
        let mut sum = Complex64::new(0.0, 0.0);
        let draws = 400;
        for seed in 0..draws {
            sum += sample_cue(2, seed).unwrap()[(0, 0)];
        }
        assert!((sum / draws as f64).norm() < 0.1);
    }
}
