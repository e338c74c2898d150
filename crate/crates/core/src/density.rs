//! Density matrices and the handful of linear-algebra operations the
//! simulator needs: Born-rule traces, partial traces, purity, fidelity, and
//! trace distance. Backed by nalgebra's complex Hermitian eigensolver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerances for the density-matrix invariants.
const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGENVALUE_TOL: f64 = 1e-10;

/// Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-12), unit trace (1e-12) and positivity
    /// (eigenvalues >= -1e-10).
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::NotDensityMatrix {
                reason: format!("not square: {}x{}", m.nrows(), m.ncols()),
            });
        }
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let d = m[(i, j)] - m[(j, i)].conj();
                if d.norm() > HERMITICITY_TOL {
                    return Err(Error::NotDensityMatrix {
                        reason: format!("not Hermitian at ({i},{j}): residual {:.3e}", d.norm()),
                    });
                }
            }
        }
        let trace: Complex64 = (0..m.nrows()).map(|i| m[(i, i)]).sum();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::NotDensityMatrix {
                reason: format!("trace {trace} != 1"),
            });
        }
        let out = Self { m };
        let min = out.min_eigenvalue();
        if min < -EIGENVALUE_TOL {
            return Err(Error::NotDensityMatrix {
                reason: format!("negative eigenvalue {min:.3e}"),
            });
        }
        Ok(out)
    }

    /// `|psi><psi|` from an unnormalized state vector.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if !(norm > 0.0) {
            return Err(Error::ZeroCoefficients);
        }
        let d = psi.len();
        let m = DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / norm);
        Ok(Self { m })
    }

    /// Convex mixture `sum_i w_i rho_i`; weights are normalized.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if !(total > 0.0) {
            return Err(Error::ZeroCoefficients);
        }
        let d = parts[0].1.dimension();
        let mut m = DMatrix::zeros(d, d);
        for (w, rho) in parts {
            if rho.dimension() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: rho.dimension(),
                });
            }
            m += rho.matrix() * Complex64::new(w / total, 0.0);
        }
        Self::new(m)
    }

    /// Maximally mixed state `I/d`.
    pub fn maximally_mixed(dimension: usize) -> Self {
        let m = DMatrix::from_diagonal_element(
            dimension,
            dimension,
            Complex64::new(1.0 / dimension as f64, 0.0),
        );
        Self { m }
    }

    pub fn dimension(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// `Tr[rho P]`, real part (the operator is assumed Hermitian).
    pub fn expectation(&self, op: &DMatrix<Complex64>) -> f64 {
        let mut acc = Complex64::ZERO;
        for i in 0..self.m.nrows() {
            for k in 0..self.m.ncols() {
                acc += self.m[(i, k)] * op[(k, i)];
            }
        }
        acc.re
    }

    /// Born-rule probability for a projector onto the unnormalized `state`.
    pub fn projection_probability(&self, state: &[Complex64]) -> Result<f64> {
        if state.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: state.len(),
            });
        }
        let norm: f64 = state.iter().map(|c| c.norm_sqr()).sum();
        let v = DVector::from_column_slice(state);
        let bra = v.adjoint();
        let p = (&bra * &self.m * &v)[(0, 0)].re / norm;
        Ok(p.max(0.0))
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.m.nrows() {
            for j in 0..self.m.ncols() {
                acc += (self.m[(i, j)] * self.m[(j, i)]).re;
            }
        }
        acc
    }

    /// Fidelity with a pure state: `<chi| rho |chi>`.
    pub fn fidelity_with_pure(&self, chi: &[Complex64]) -> Result<f64> {
        self.projection_probability(chi)
    }

    /// Uhlmann fidelity `[Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2`; symmetric in
    /// its arguments.
    pub fn fidelity(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dimension() != other.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: other.dimension(),
            });
        }
        let sqrt_rho = matrix_sqrt(&self.m);
        let inner = &sqrt_rho * other.matrix() * &sqrt_rho;
        // Hermitianize against rounding before taking eigenvalues
        let inner = (&inner + inner.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = inner.symmetric_eigen();
        let tr: f64 = eig
            .eigenvalues
            .iter()
            .map(|&l| l.max(0.0).sqrt())
            .sum();
        Ok((tr * tr).min(1.0 + 1e-12))
    }

    /// Trace distance `0.5 ||rho - sigma||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = &self.m - &other.m;
        0.5 * diff
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|l| l.abs())
            .sum::<f64>()
    }

    /// Partial trace over the second factor of a `da x db` system.
    pub fn partial_trace_second(&self, da: usize, db: usize) -> Result<DensityMatrix> {
        if da * db != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: da * db,
            });
        }
        let m = DMatrix::from_fn(da, da, |i, j| {
            (0..db).map(|k| self.m[(i * db + k, j * db + k)]).sum()
        });
        Ok(DensityMatrix { m })
    }

    /// Partial trace over the first factor of a `da x db` system.
    pub fn partial_trace_first(&self, da: usize, db: usize) -> Result<DensityMatrix> {
        if da * db != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: da * db,
            });
        }
        let m = DMatrix::from_fn(db, db, |i, j| {
            (0..da).map(|k| self.m[(k * db + i, k * db + j)]).sum()
        });
        Ok(DensityMatrix { m })
    }

    /// Conjugation `U rho U^dagger`.
    pub fn conjugate(&self, u: &DMatrix<Complex64>) -> DensityMatrix {
        DensityMatrix {
            m: u * &self.m * u.adjoint(),
        }
    }
}

/// Principal square root of a PSD Hermitian matrix; negative rounding noise in
/// the spectrum is clamped to zero.
fn matrix_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let d = m.nrows();
    let mut out = DMatrix::zeros(d, d);
    for k in 0..d {
        let l = eig.eigenvalues[k].max(0.0).sqrt();
        let v = eig.eigenvectors.column(k);
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += v[i] * v[j].conj() * Complex64::new(l, 0.0);
            }
        }
    }
    out
}

/// Kronecker product, `(a ⊗ b)`.
pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    DMatrix::from_fn(ra * rb, ca * cb, |i, j| {
        a[(i / rb, j / cb)] * b[(i % rb, j % cb)]
    })
}

/// Rank-1 projector `|v><v| / <v|v>`.
pub fn projector(v: &[Complex64]) -> DMatrix<Complex64> {
    let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    let d = v.len();
    DMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj() / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bell_phi_plus() -> Vec<Complex64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]
    }

    #[test]
    fn pure_state_has_unit_purity_and_self_fidelity() {
        let rho = DensityMatrix::from_pure(&bell_phi_plus()).unwrap();
        assert_relative_eq!(rho.purity(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(rho.fidelity(&rho).unwrap(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(
            rho.fidelity_with_pure(&bell_phi_plus()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn maximally_mixed_values() {
        let mixed = DensityMatrix::maximally_mixed(4);
        assert_relative_eq!(mixed.purity(), 0.25, epsilon = 1e-14);
        let bell = DensityMatrix::from_pure(&bell_phi_plus()).unwrap();
        assert_relative_eq!(bell.fidelity(&mixed).unwrap(), 0.25, epsilon = 1e-10);
        assert_relative_eq!(
            mixed.fidelity_with_pure(&bell_phi_plus()).unwrap(),
            0.25,
            epsilon = 1e-12
        );
    }

    #[test]
    fn fidelity_is_symmetric() {
        let a = DensityMatrix::mixture(&[
            (0.7, DensityMatrix::from_pure(&bell_phi_plus()).unwrap()),
            (0.3, DensityMatrix::maximally_mixed(4)),
        ])
        .unwrap();
        let b = DensityMatrix::mixture(&[
            (0.4, DensityMatrix::from_pure(&[c(1.0, 0.0), c(0.0, 0.5), c(0.2, 0.0), c(0.0, 0.0)]).unwrap()),
            (0.6, DensityMatrix::maximally_mixed(4)),
        ])
        .unwrap();
        let f_ab = a.fidelity(&b).unwrap();
        let f_ba = b.fidelity(&a).unwrap();
        assert!((f_ab - f_ba).abs() < 1e-10);
    }

    #[test]
    fn non_density_inputs_rejected() {
        // non-Hermitian
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.0, 0.0);
        m[(0, 1)] = c(0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        // wrong trace
        let m = DMatrix::from_diagonal_element(2, 2, c(1.0, 0.0));
        assert!(DensityMatrix::new(m).is_err());
        // negative eigenvalue
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn partial_traces_of_bell_state_are_maximally_mixed() {
        let rho = DensityMatrix::from_pure(&bell_phi_plus()).unwrap();
        let a = rho.partial_trace_second(2, 2).unwrap();
        let b = rho.partial_trace_first(2, 2).unwrap();
        for r in [a, b] {
            assert_relative_eq!(r.entry(0, 0).re, 0.5, epsilon = 1e-12);
            assert_relative_eq!(r.entry(1, 1).re, 0.5, epsilon = 1e-12);
            assert!(r.entry(0, 1).norm() < 1e-12);
        }
    }

    #[test]
    fn kron_and_projector_shapes() {
        let h = projector(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let d = projector(&[c(1.0, 0.0), c(1.0, 0.0)]);
        let hd = kron(&h, &d);
        assert_eq!(hd.shape(), (4, 4));
        // trace of a rank-1 projector is 1; kron multiplies traces
        let tr: Complex64 = (0..4).map(|i| hd[(i, i)]).sum();
        assert_relative_eq!(tr.re, 1.0, epsilon = 1e-12);
    }
}
