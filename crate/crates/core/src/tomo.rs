//! Iterative maximum-likelihood state tomography.
//!
//! Reconstruction follows the fixed-point iteration
//! `rho <- N[R(rho) rho R(rho)]` with `R(rho) = sum_i (f_i / p_i(rho)) Pi_i`,
//! observed frequencies `f_i` and Born probabilities `p_i = Tr[rho Pi_i]`.
//! The log-likelihood is non-decreasing along the iteration; convergence is
//! declared when the per-step trace distance drops below `tol`.
//!
//! Counts are treated as one equal-duration group: `f_i = n_i / sum(n)`. The
//! file formats emitted by the CLI document this normalization.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::density::{kron, projector, DensityMatrix};
use crate::entangle::IdlerBasis;
use crate::error::{Error, Result};
use crate::measure::ProjectorSpec;
use crate::par::par_map_indexed;
use crate::rng::stream_rng;

/// Floor applied to Born probabilities inside the iteration; hits are counted
/// and reported, never silently ignored.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Default stopping rule.
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Default Monte-Carlo resample count.
pub const DEFAULT_RESAMPLES: usize = 400;

/// One measurement setting: labels plus the joint projector.
#[derive(Debug, Clone)]
pub struct TomographyElement {
    pub idler_label: String,
    pub signal_label: String,
    pub operator: DMatrix<Complex64>,
}

/// A POVM-style measurement set with completeness metadata.
#[derive(Debug, Clone)]
pub struct TomographySet {
    elements: Vec<TomographyElement>,
    gram_rank: usize,
}

impl TomographySet {
    /// Validates positivity of every element and records the design-matrix
    /// rank (16 = complete for two qubits).
    pub fn new(elements: Vec<TomographyElement>) -> Result<Self> {
        for e in &elements {
            let h = (e.operator.clone() + e.operator.adjoint()) * Complex64::new(0.5, 0.0);
            let min = h
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if min < -1e-10 {
                return Err(Error::NotDensityMatrix {
                    reason: format!(
                        "measurement element {}x{} not positive (min eigenvalue {min:.3e})",
                        e.idler_label, e.signal_label
                    ),
                });
            }
        }
        let gram_rank = design_rank(&elements);
        Ok(Self {
            elements,
            gram_rank,
        })
    }

    pub fn elements(&self) -> &[TomographyElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Rank of the real design matrix; the set spans Hermitian operator space
    /// when this equals `d^2`.
    pub fn gram_rank(&self) -> usize {
        self.gram_rank
    }

    pub fn is_complete(&self) -> bool {
        let d = self
            .elements
            .first()
            .map(|e| e.operator.nrows())
            .unwrap_or(0);
        self.gram_rank == d * d
    }

    /// Expected Born probabilities for a state.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Vec<f64> {
        self.elements
            .iter()
            .map(|e| rho.expectation(&e.operator).max(0.0))
            .collect()
    }

    /// Applies `U . U^dagger` to every element (basis change).
    pub fn conjugated(&self, u: &DMatrix<Complex64>) -> Result<Self> {
        let elements = self
            .elements
            .iter()
            .map(|e| TomographyElement {
                idler_label: e.idler_label.clone(),
                signal_label: e.signal_label.clone(),
                operator: u * &e.operator * u.adjoint(),
            })
            .collect();
        Self::new(elements)
    }
}

/// Rank of the (n_elements x d^2) real representation of the set.
fn design_rank(elements: &[TomographyElement]) -> usize {
    let Some(first) = elements.first() else {
        return 0;
    };
    let d = first.operator.nrows();
    let cols = d * d;
    let mut design = nalgebra::DMatrix::<f64>::zeros(elements.len(), cols);
    for (r, e) in elements.iter().enumerate() {
        let mut c = 0;
        for i in 0..d {
            design[(r, c)] = e.operator[(i, i)].re;
            c += 1;
        }
        for i in 0..d {
            for j in (i + 1)..d {
                design[(r, c)] = e.operator[(i, j)].re;
                c += 1;
                design[(r, c)] = e.operator[(i, j)].im;
                c += 1;
            }
        }
    }
    let svd = design.svd(false, false);
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.singular_values
        .iter()
        .filter(|&&s| s > 1e-9 * max.max(1.0))
        .count()
}

/// The six standard signal (time-bin) measurement states: `|e>`, `|l>`, and
/// `(|e> + e^{i phi} |l>)/sqrt(2)` for `phi` in `{-pi/2, 0, pi/2, pi}`, each
/// shifted by `phase_offset` to model a fixed birefringence offset.
pub fn standard_signal_projectors(phase_offset: f64) -> Vec<(String, ProjectorSpec)> {
    let tau = 1e-12; // irrelevant to the two-qubit statistics
    let mut out = vec![
        ("e".to_string(), ProjectorSpec::early(tau)),
        ("l".to_string(), ProjectorSpec::late(tau)),
    ];
    for (name, phi) in [
        ("-0.5pi", -std::f64::consts::FRAC_PI_2),
        ("0pi", 0.0),
        ("+0.5pi", std::f64::consts::FRAC_PI_2),
        ("1pi", std::f64::consts::PI),
    ] {
        out.push((
            name.to_string(),
            ProjectorSpec::time_bin_phase(phi + phase_offset, tau),
        ));
    }
    out
}

/// The overcomplete 36-element set: all tensor products of the six standard
/// polarization projectors `{H,V,D,A,R,L}` with the six standard signal
/// projectors.
pub fn build_36_set() -> TomographySet {
    build_36_set_with_offset(0.0)
}

/// As [`build_36_set`], with a constant phase offset added to the
/// superposition signal states.
pub fn build_36_set_with_offset(phase_offset: f64) -> TomographySet {
    let mut elements = Vec::with_capacity(36);
    for (idler_label, idler) in IdlerBasis::standard_six() {
        let idler_proj = projector(&idler.state());
        for (signal_label, signal) in standard_signal_projectors(phase_offset) {
            let signal_proj = projector(signal.coefficients());
            elements.push(TomographyElement {
                idler_label: idler_label.to_string(),
                signal_label,
                operator: kron(&idler_proj, &signal_proj),
            });
        }
    }
    TomographySet::new(elements).expect("rank-1 projectors are positive")
}

/// Output of one maximum-likelihood reconstruction.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    /// Log-likelihood after each iteration.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Number of Born probabilities clamped at the floor during iteration.
    pub clamped_probabilities: usize,
}

/// Iterative maximum-likelihood reconstruction from a count table aligned
/// with `set.elements()`. Counts are normalized as one equal-duration group.
/// Never panics on difficult data: hitting `max_iter` returns
/// `converged = false`.
pub fn mle_reconstruct(
    counts: &[f64],
    set: &TomographySet,
    max_iter: usize,
    tol: f64,
) -> Result<ReconstructionResult> {
    if counts.len() != set.len() {
        return Err(Error::CountLengthMismatch {
            expected: set.len(),
            got: counts.len(),
        });
    }
    if counts.iter().any(|&c| c < 0.0 || !c.is_finite()) {
        return Err(Error::NotDensityMatrix {
            reason: "negative or non-finite count".into(),
        });
    }
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptyCounts);
    }
    let freqs: Vec<f64> = counts.iter().map(|c| c / total).collect();
    let d = set.elements()[0].operator.nrows();

    let mut rho = DMatrix::from_diagonal_element(d, d, Complex64::new(1.0 / d as f64, 0.0));
    let mut log_likelihood_trace = Vec::new();
    let mut clamped = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for _ in 0..max_iter {
        iterations += 1;
        // Born probabilities and the R operator
        let mut r = DMatrix::<Complex64>::zeros(d, d);
        let mut log_likelihood = 0.0;
        for (e, &f) in set.elements().iter().zip(&freqs) {
            let mut p = 0.0;
            for i in 0..d {
                for k in 0..d {
                    p += (rho[(i, k)] * e.operator[(k, i)]).re;
                }
            }
            if p < PROBABILITY_FLOOR {
                p = PROBABILITY_FLOOR;
                clamped += 1;
            }
            if f > 0.0 {
                log_likelihood += f * p.ln();
                r += &e.operator * Complex64::new(f / p, 0.0);
            }
        }
        log_likelihood_trace.push(log_likelihood);

        let mut next = &r * &rho * &r;
        // re-Hermitianize and normalize the trace
        next = (&next + next.adjoint()) * Complex64::new(0.5, 0.0);
        let trace: f64 = (0..d).map(|i| next[(i, i)].re).sum();
        if !(trace > 0.0) || !trace.is_finite() {
            return Ok(ReconstructionResult {
                rho: finalize_density(rho),
                log_likelihood_trace,
                iterations,
                converged: false,
                clamped_probabilities: clamped,
            });
        }
        next /= Complex64::new(trace, 0.0);

        let step = half_trace_norm(&(&next - &rho));
        rho = next;
        if step < tol {
            converged = true;
            break;
        }
    }

    Ok(ReconstructionResult {
        rho: finalize_density(rho),
        log_likelihood_trace,
        iterations,
        converged,
        clamped_probabilities: clamped,
    })
}

fn half_trace_norm(m: &DMatrix<Complex64>) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    0.5 * h
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .sum::<f64>()
}

/// Clean up rounding noise so the result satisfies the density-matrix
/// invariants exactly enough to validate.
fn finalize_density(mut m: DMatrix<Complex64>) -> DensityMatrix {
    let d = m.nrows();
    m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let trace: f64 = (0..d).map(|i| m[(i, i)].re).sum();
    m /= Complex64::new(trace, 0.0);
    DensityMatrix::new(m).expect("RrhoR iteration preserves positivity")
}

/// Metric evaluated on each Monte-Carlo resample.
#[derive(Debug, Clone)]
pub enum Metric {
    FidelityWithPure(Vec<Complex64>),
    FidelityWith(DensityMatrix),
    Purity,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::FidelityWithPure(_) => "fidelity_with_pure_state",
            Metric::FidelityWith(_) => "fidelity_with_density_matrix",
            Metric::Purity => "purity",
        }
    }

    pub fn evaluate(&self, rho: &DensityMatrix) -> Result<f64> {
        match self {
            Metric::FidelityWithPure(chi) => rho.fidelity_with_pure(chi),
            Metric::FidelityWith(target) => rho.fidelity(target),
            Metric::Purity => Ok(rho.purity()),
        }
    }
}

/// Mean and sample standard deviation of a metric over Poissonian resamples.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorEstimate {
    pub metric: String,
    pub mean: f64,
    pub std_dev: f64,
    pub resamples: usize,
    /// Resamples dropped because their reconstruction did not converge.
    pub excluded: usize,
    pub seed: u64,
}

/// Poissonian Monte-Carlo error bars: each resample redraws every count from
/// `Poisson(observed)`, re-runs the reconstruction, and evaluates `metric`.
/// Resamples run in parallel on independent generator streams, so the
/// estimate is reproducible by seed alone.
pub fn monte_carlo_errors(
    counts: &[f64],
    set: &TomographySet,
    metric: &Metric,
    n_resamples: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ErrorEstimate> {
    if n_resamples < 2 {
        return Err(Error::TooFewResamples { got: n_resamples });
    }
    if counts.len() != set.len() {
        return Err(Error::CountLengthMismatch {
            expected: set.len(),
            got: counts.len(),
        });
    }

    let values: Vec<Option<f64>> = par_map_indexed(n_resamples, |r| {
        let mut rng = stream_rng(seed, r as u64);
        let resampled: Vec<f64> = counts
            .iter()
            .map(|&c| {
                if c <= 0.0 {
                    0.0
                } else {
                    Poisson::new(c).expect("positive mean").sample(&mut rng).round()
                }
            })
            .collect();
        match mle_reconstruct(&resampled, set, max_iter, tol) {
            Ok(res) if res.converged => metric.evaluate(&res.rho).ok(),
            _ => None,
        }
    });

    let kept: Vec<f64> = values.iter().flatten().copied().collect();
    let excluded = n_resamples - kept.len();
    if kept.len() < 2 {
        return Err(Error::TooFewResamples { got: kept.len() });
    }
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    let var = kept.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (kept.len() - 1) as f64;
    Ok(ErrorEstimate {
        metric: metric.name().to_string(),
        mean,
        std_dev: var.sqrt(),
        resamples: kept.len(),
        excluded,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entangle::{make_phi_plus, phi_plus_vector};
    use approx::assert_relative_eq;

    #[test]
    fn standard_set_is_overcomplete() {
        let set = build_36_set();
        assert_eq!(set.len(), 36);
        assert_eq!(set.gram_rank(), 16);
        assert!(set.is_complete());
        // rank-1 projector elements have unit trace
        for e in set.elements() {
            let tr: Complex64 = (0..4).map(|i| e.operator[(i, i)]).sum();
            assert_relative_eq!(tr.re, 1.0, epsilon = 1e-12);
            assert!(tr.im.abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_bell_counts_reconstruct_to_bell() {
        let set = build_36_set();
        let rho = make_phi_plus(1.0).unwrap();
        let counts: Vec<f64> = set
            .probabilities(rho.density())
            .iter()
            .map(|p| (p * 1e6).round())
            .collect();
        let res = mle_reconstruct(&counts, &set, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let fid = res.rho.fidelity_with_pure(&phi_plus_vector()).unwrap();
        assert!(fid > 0.999, "fidelity {fid}");
        // likelihood is non-decreasing along the iteration
        for w in res.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn uniform_counts_reconstruct_to_maximally_mixed() {
        let set = build_36_set();
        let counts = vec![1000.0; 36];
        let res = mle_reconstruct(&counts, &set, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        assert!(res.converged);
        assert!(res.rho.purity() < 0.26, "purity {}", res.rho.purity());
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!(res.rho.trace_distance(&mixed) < 1e-6);
    }

    #[test]
    fn count_table_validation() {
        let set = build_36_set();
        assert!(matches!(
            mle_reconstruct(&[1.0; 35], &set, 100, 1e-6),
            Err(Error::CountLengthMismatch { .. })
        ));
        assert!(matches!(
            mle_reconstruct(&[0.0; 36], &set, 100, 1e-6),
            Err(Error::EmptyCounts)
        ));
        assert!(mle_reconstruct(&[-1.0; 36], &set, 100, 1e-6).is_err());
    }

    #[test]
    fn dephased_state_reconstruction_hits_closed_form_fidelity() {
        let set = build_36_set();
        let v = 0.88;
        let rho = make_phi_plus(v).unwrap();
        let counts: Vec<f64> = set
            .probabilities(rho.density())
            .iter()
            .map(|p| (p * 1e6).round())
            .collect();
        let res = mle_reconstruct(&counts, &set, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let fid = res.rho.fidelity_with_pure(&phi_plus_vector()).unwrap();
        assert_relative_eq!(fid, (1.0 + v) / 2.0, epsilon = 2e-3);
        assert_relative_eq!(res.rho.purity(), (1.0 + v * v) / 2.0, epsilon = 2e-3);
    }

    #[test]
    fn reconstruction_is_basis_covariant() {
        // conjugating every element by a local unitary conjugates the estimate
        let set = build_36_set();
        let rho = make_phi_plus(0.9).unwrap();
        let counts: Vec<f64> = set
            .probabilities(rho.density())
            .iter()
            .map(|p| (p * 1e6).round())
            .collect();
        let base = mle_reconstruct(&counts, &set, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();

        // U = U_pol ⊗ U_bin, a fixed pair of rotations with phases
        let u_pol = nalgebra::DMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.8, 0.0),
            Complex64::new(0.0, 0.6),
            Complex64::new(0.0, 0.6),
            Complex64::new(0.8, 0.0),
        ]);
        let theta: f64 = 0.37;
        let u_bin = nalgebra::DMatrix::from_row_slice(2, 2, &[
            Complex64::new(theta.cos(), 0.0),
            Complex64::new(-theta.sin(), 0.0),
            Complex64::new(theta.sin(), 0.0),
            Complex64::new(theta.cos(), 0.0),
        ]);
        let u = kron(&u_pol, &u_bin);
        let rotated_set = set.conjugated(&u).unwrap();
        let rotated = mle_reconstruct(&counts, &rotated_set, DEFAULT_MAX_ITER, DEFAULT_TOL)
            .unwrap();
        let expected = base.rho.conjugate(&u);
        for i in 0..4 {
            for j in 0..4 {
                let d = (rotated.rho.entry(i, j) - expected.entry(i, j)).norm();
                assert!(d < 1e-6, "entry ({i},{j}) differs by {d:.2e}");
            }
        }
    }

    #[test]
    fn monte_carlo_is_seeded_and_tight_for_huge_counts() {
        let set = build_36_set();
        let rho = make_phi_plus(0.9).unwrap();
        let counts: Vec<f64> = set
            .probabilities(rho.density())
            .iter()
            .map(|p| (p * 1e9).round())
            .collect();
        let metric = Metric::FidelityWithPure(phi_plus_vector());
        let run = |seed| {
            monte_carlo_errors(&counts, &set, &metric, 10, seed, DEFAULT_MAX_ITER, 1e-9)
                .unwrap()
        };
        let a = run(11);
        let b = run(11);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_dev.to_bits(), b.std_dev.to_bits());
        assert!(a.std_dev < 1e-3, "std {}", a.std_dev);
        let c = run(12);
        assert_ne!(a.mean.to_bits(), c.mean.to_bits());

        assert!(matches!(
            monte_carlo_errors(&counts, &set, &metric, 1, 0, 10, 1e-6),
            Err(Error::TooFewResamples { .. })
        ));
    }

    #[test]
    fn purity_never_exceeds_one() {
        let set = build_36_set();
        for seed in 0..8u64 {
            use rand::Rng;
            let mut rng = stream_rng(seed, 7);
            let counts: Vec<f64> =
                (0..36).map(|_| rng.random_range(0.0f64..200.0).round()).collect();
            if counts.iter().sum::<f64>() == 0.0 {
                continue;
            }
            let res = mle_reconstruct(&counts, &set, 20_000, 1e-9).unwrap();
            assert!(res.rho.purity() <= 1.0 + 1e-10);
        }
    }
}
