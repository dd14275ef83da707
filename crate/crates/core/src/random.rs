//! Seeded generators for unitaries, unit vectors and positive contractions.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::{Matrix, Operator, Vector};

pub type LabRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` folded back into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Matrix {
    let g = Matrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for row in 0..dim {
            q[(row, k)] *= phase;
        }
    }
    q
}

pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vector {
    loop {
        let v = DVector::from_fn(dim, |_, _| complex_gaussian(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / Complex64::new(n, 0.0);
        }
    }
}

/// `U diag(values) U*` for a fresh random unitary `U`.
pub fn random_with_spectrum<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> Operator {
    let u = random_unitary(values.len(), rng);
    Operator::diagonal(values)
        .and_then(|d| d.conjugate_by(&u))
        .expect("finite spectrum")
}

/// Positive contraction with eigenvalues drawn uniformly from `[0, 1]`.
pub fn random_positive_contraction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    let values: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..=1.0)).collect();
    random_with_spectrum(&values, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::operator_norm;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = rng_from_seed(7);
        for dim in [1, 2, 5, 16] {
            let u = random_unitary(dim, &mut rng);
            let defect = operator_norm(&(u.adjoint() * &u - Matrix::identity(dim, dim)));
            assert!(defect < 1e-12, "dim {dim}: {defect}");
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let a = random_unit_vector(4, &mut rng_from_seed(3));
        let b = random_unit_vector(4, &mut rng_from_seed(3));
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-14);
    }
}
