//! Polarization/time-bin entangled pair: coincidence and singles statistics,
//! fringe scans with sinusoid fits, CHSH evaluation, and Poissonian count
//! sampling.
//!
//! Basis order for the two-qubit density matrix is polarization ⊗ time-bin:
//! `|He>, |Hl>, |Ve>, |Vl>`. The dephased Bell mixture
//! `V |Phi+><Phi+| + (1-V) (|He><He| + |Vl><Vl|)/2` has coincidence fringe
//! visibility exactly `V` and collapses to the classically-correlated state at
//! `V = 0`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::density::{kron, projector, DensityMatrix};
use crate::error::{Error, Result};
use crate::measure::ProjectorSpec;
use crate::par::par_map_indexed;
use crate::rng::stream_rng;

/// Basis labels of the joint state, polarization ⊗ time-bin.
pub const BASIS_LABELS: [&str; 4] = ["He", "Hl", "Ve", "Vl"];

/// Two-qubit polarization/time-bin state.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: DensityMatrix,
}

impl TwoQubitState {
    pub fn new(rho: DensityMatrix) -> Result<Self> {
        if rho.dimension() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: rho.dimension(),
            });
        }
        Ok(Self { rho })
    }

    pub fn density(&self) -> &DensityMatrix {
        &self.rho
    }

    /// Reduced idler (polarization) state.
    pub fn idler_state(&self) -> DensityMatrix {
        self.rho
            .partial_trace_second(2, 2)
            .expect("4 = 2 x 2")
    }

    /// Reduced signal (time-bin) state.
    pub fn signal_state(&self) -> DensityMatrix {
        self.rho.partial_trace_first(2, 2).expect("4 = 2 x 2")
    }
}

/// `(|He> + |Vl>)/sqrt(2)` as a vector in the basis above.
pub fn phi_plus_vector() -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        Complex64::new(s, 0.0),
        Complex64::ZERO,
        Complex64::ZERO,
        Complex64::new(s, 0.0),
    ]
}

/// Dephased Bell mixture with fringe visibility exactly `V`.
pub fn make_phi_plus(visibility: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::VisibilityOutOfRange { value: visibility });
    }
    let pure = DensityMatrix::from_pure(&phi_plus_vector())?;
    let he = DensityMatrix::from_pure(&[
        Complex64::ONE,
        Complex64::ZERO,
        Complex64::ZERO,
        Complex64::ZERO,
    ])?;
    let vl = DensityMatrix::from_pure(&[
        Complex64::ZERO,
        Complex64::ZERO,
        Complex64::ZERO,
        Complex64::ONE,
    ])?;
    let rho = DensityMatrix::mixture(&[
        (visibility, pure),
        ((1.0 - visibility) / 2.0, he),
        ((1.0 - visibility) / 2.0, vl),
    ])?;
    TwoQubitState::new(rho)
}

/// Idler polarization measurement: the computational states or a
/// superposition `(|H> + e^{i gamma} |V>)/sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdlerBasis {
    H,
    V,
    /// `(|H> + e^{i gamma} |V>)/sqrt(2)`
    Phase(f64),
}

impl IdlerBasis {
    pub const D: IdlerBasis = IdlerBasis::Phase(0.0);
    pub const A: IdlerBasis = IdlerBasis::Phase(std::f64::consts::PI);
    pub const L: IdlerBasis = IdlerBasis::Phase(std::f64::consts::FRAC_PI_2);
    pub const R: IdlerBasis = IdlerBasis::Phase(3.0 * std::f64::consts::FRAC_PI_2);

    /// The six standard labels.
    pub fn standard_six() -> [(&'static str, IdlerBasis); 6] {
        [
            ("H", IdlerBasis::H),
            ("V", IdlerBasis::V),
            ("D", IdlerBasis::D),
            ("A", IdlerBasis::A),
            ("R", IdlerBasis::R),
            ("L", IdlerBasis::L),
        ]
    }

    pub fn label(&self) -> String {
        match self {
            IdlerBasis::H => "H".into(),
            IdlerBasis::V => "V".into(),
            IdlerBasis::Phase(g) => {
                let tau = std::f64::consts::TAU;
                let g = g.rem_euclid(tau);
                let named = [
                    (0.0, "D"),
                    (std::f64::consts::PI, "A"),
                    (std::f64::consts::FRAC_PI_2, "L"),
                    (3.0 * std::f64::consts::FRAC_PI_2, "R"),
                ];
                for (v, name) in named {
                    if (g - v).abs() < 1e-12 {
                        return name.into();
                    }
                }
                format!("phase({g:.6})")
            }
        }
    }

    /// Measurement state in the `{|H>, |V>}` basis.
    pub fn state(&self) -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            IdlerBasis::H => [Complex64::ONE, Complex64::ZERO],
            IdlerBasis::V => [Complex64::ZERO, Complex64::ONE],
            IdlerBasis::Phase(g) => {
                [Complex64::new(s, 0.0), Complex64::from_polar(s, *g)]
            }
        }
    }

    /// The orthogonal outcome.
    pub fn complement(&self) -> IdlerBasis {
        match self {
            IdlerBasis::H => IdlerBasis::V,
            IdlerBasis::V => IdlerBasis::H,
            IdlerBasis::Phase(g) => IdlerBasis::Phase(g + std::f64::consts::PI),
        }
    }
}

/// One joint setting: an idler polarization measurement and a signal time-bin
/// projector.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetting {
    pub idler: IdlerBasis,
    pub signal: ProjectorSpec,
}

impl MeasurementSetting {
    pub fn new(idler: IdlerBasis, signal: ProjectorSpec) -> Result<Self> {
        if signal.dimension() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: signal.dimension(),
            });
        }
        Ok(Self { idler, signal })
    }

    /// Joint projector `Pi_idler ⊗ Pi_signal`.
    pub fn joint_projector(&self) -> DMatrix<Complex64> {
        let idler = projector(&self.idler.state());
        let signal = projector(self.signal.coefficients());
        kron(&idler, &signal)
    }
}

/// `Tr[rho (Pi_idler ⊗ Pi_signal)]`; for the pure Bell state and
/// mutually-unbiased settings this is `cos^2((gamma + beta)/2) / 2`.
pub fn coincidence_probability(rho: &TwoQubitState, setting: &MeasurementSetting) -> f64 {
    rho.density()
        .expectation(&setting.joint_projector())
        .clamp(0.0, 1.0)
}

/// Which side a singles rate is measured on.
#[derive(Debug, Clone, PartialEq)]
pub enum OneSideSetting {
    Idler(IdlerBasis),
    Signal(ProjectorSpec),
}

/// Partial trace then Born rule; `1/2` for the Bell state at any phase.
pub fn singles_probability(rho: &TwoQubitState, side: &OneSideSetting) -> Result<f64> {
    match side {
        OneSideSetting::Idler(basis) => rho.idler_state().projection_probability(&basis.state()),
        OneSideSetting::Signal(proj) => {
            if proj.dimension() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    got: proj.dimension(),
                });
            }
            rho.signal_state()
                .projection_probability(proj.coefficients())
        }
    }
}

/// Least-squares sinusoid fit `offset + amplitude cos(beta + phase)`.
#[derive(Debug, Clone, Serialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub visibility: f64,
    /// Set when the data were too flat or degenerate to support a fit; the
    /// visibility is reported as 0.
    pub degenerate: bool,
}

/// Fits `y = a0 + ac cos(beta) + as sin(beta)` by linear least squares and
/// converts to offset/amplitude/phase form.
pub fn fit_sinusoid(betas: &[f64], values: &[f64]) -> SinusoidFit {
    assert_eq!(betas.len(), values.len());
    let n = betas.len() as f64;
    // normal equations for the basis {1, cos, sin}
    let (mut sc, mut ss, mut scc, mut sss, mut scs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut syc, mut sys) = (0.0, 0.0, 0.0);
    for (&b, &y) in betas.iter().zip(values) {
        let (s, c) = b.sin_cos();
        sc += c;
        ss += s;
        scc += c * c;
        sss += s * s;
        scs += c * s;
        sy += y;
        syc += y * c;
        sys += y * s;
    }
    let m = [
        [n, sc, ss],
        [sc, scc, scs],
        [ss, scs, sss],
    ];
    let rhs = [sy, syc, sys];
    let sol = solve3(m, rhs);
    match sol {
        Some([a0, ac, asn]) => {
            let amplitude = (ac * ac + asn * asn).sqrt();
            let phase = (-asn).atan2(ac);
            let degenerate = !(a0 > 0.0) || !amplitude.is_finite();
            let visibility = if degenerate { 0.0 } else { amplitude / a0 };
            SinusoidFit {
                offset: a0,
                amplitude,
                phase,
                visibility: if degenerate { 0.0 } else { visibility },
                degenerate,
            }
        }
        None => SinusoidFit {
            offset: 0.0,
            amplitude: 0.0,
            phase: 0.0,
            visibility: 0.0,
            degenerate: true,
        },
    }
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-12 * (m[0][0].abs() + 1.0) {
        return None;
    }
    let mut out = [0.0; 3];
    for k in 0..3 {
        let mut mk = m;
        for row in 0..3 {
            mk[row][k] = rhs[row];
        }
        out[k] = det(mk) / d;
    }
    Some(out)
}

/// One fringe curve: probabilities (or counts) against beta, with its fit.
#[derive(Debug, Clone, Serialize)]
pub struct FringeCurve {
    pub label: String,
    pub gamma: f64,
    pub betas: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: SinusoidFit,
}

/// Scans the signal phase `beta` over `beta_grid` for each idler phase in
/// `gammas`, fitting a sinusoid per curve. `beta_grid` must span at least
/// 2 pi. Noiseless probabilities; for counts see [`sample_counts`].
pub fn fringe_scan(rho: &TwoQubitState, gammas: &[f64], beta_grid: &[f64]) -> Result<Vec<FringeCurve>> {
    if beta_grid.len() < 4
        || beta_grid[beta_grid.len() - 1] - beta_grid[0] < std::f64::consts::TAU - 1e-9
    {
        return Err(Error::NonPositive {
            quantity: "beta grid span (must cover 2 pi)",
            value: beta_grid.last().copied().unwrap_or(0.0) - beta_grid.first().copied().unwrap_or(0.0),
        });
    }
    // bin spacing is irrelevant to the two-qubit statistics; pick 1 ps
    let tau = 1e-12;
    Ok(gammas
        .iter()
        .map(|&gamma| {
            let idler = IdlerBasis::Phase(gamma);
            let values: Vec<f64> = beta_grid
                .iter()
                .map(|&beta| {
                    let setting = MeasurementSetting::new(
                        idler,
                        ProjectorSpec::time_bin_phase(beta, tau),
                    )
                    .expect("qubit projector");
                    coincidence_probability(rho, &setting)
                })
                .collect();
            let fit = fit_sinusoid(beta_grid, &values);
            FringeCurve {
                label: idler.label(),
                gamma,
                betas: beta_grid.to_vec(),
                values,
                fit,
            }
        })
        .collect())
}

/// Correlation `E = P(++) + P(--) - P(+-) - P(-+)` for idler phase `xi` and
/// signal phase `zeta`, outcomes defined by the superposition states and
/// their orthogonal complements.
pub fn correlation(rho: &TwoQubitState, xi: f64, zeta: f64) -> f64 {
    let tau = 1e-12;
    let p = |idler: IdlerBasis, beta: f64, sign: f64| {
        sign * coincidence_probability(
            rho,
            &MeasurementSetting::new(idler, ProjectorSpec::time_bin_phase(beta, tau))
                .expect("qubit projector"),
        )
    };
    let plus = IdlerBasis::Phase(xi);
    let minus = plus.complement();
    p(plus, zeta, 1.0)
        + p(minus, zeta + std::f64::consts::PI, 1.0)
        + p(plus, zeta + std::f64::consts::PI, -1.0)
        + p(minus, zeta, -1.0)
}

/// CHSH combination `S = E(a,b) + E(a,b') + E(a',b) - E(a',b')`.
pub fn chsh_value(rho: &TwoQubitState, xi_a: f64, xi_a2: f64, zeta_b: f64, zeta_b2: f64) -> f64 {
    correlation(rho, xi_a, zeta_b) + correlation(rho, xi_a, zeta_b2)
        + correlation(rho, xi_a2, zeta_b)
        - correlation(rho, xi_a2, zeta_b2)
}

/// Phase set `(0, pi/2, -pi/4, pi/4)` maximizing S for the ideal state under
/// the `E = cos(xi + zeta)` correlation.
pub const CHSH_OPTIMAL_PHASES: (f64, f64, f64, f64) = (
    0.0,
    std::f64::consts::FRAC_PI_2,
    -std::f64::consts::FRAC_PI_4,
    std::f64::consts::FRAC_PI_4,
);

/// The four outcome probabilities of one CHSH setting pair, in the order
/// `(++, +-, -+, --)`.
pub fn chsh_outcome_probabilities(rho: &TwoQubitState, xi: f64, zeta: f64) -> [f64; 4] {
    let tau = 1e-12;
    let p = |idler: IdlerBasis, beta: f64| {
        coincidence_probability(
            rho,
            &MeasurementSetting::new(idler, ProjectorSpec::time_bin_phase(beta, tau))
                .expect("qubit projector"),
        )
    };
    let plus = IdlerBasis::Phase(xi);
    let minus = plus.complement();
    [
        p(plus, zeta),
        p(plus, zeta + std::f64::consts::PI),
        p(minus, zeta),
        p(minus, zeta + std::f64::consts::PI),
    ]
}

/// Correlation estimate from an outcome-count row `(++, +-, -+, --)`;
/// zero-total rows contribute `E = 0`.
pub fn correlation_from_counts(counts: &[u64; 4]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    (counts[0] as f64 + counts[3] as f64 - counts[1] as f64 - counts[2] as f64) / total as f64
}

/// CHSH estimate with Poissonian Monte-Carlo error bars.
#[derive(Debug, Clone, Serialize)]
pub struct ChshEstimate {
    pub s_noiseless: f64,
    pub violates_local_bound: bool,
    pub mc_mean: f64,
    pub mc_std_dev: f64,
    pub resamples: usize,
    pub counts_mean: f64,
    pub seed: u64,
}

/// Evaluates S exactly, then re-estimates it `n_resamples` times from
/// Poissonian counts (mean `noise.counts_per_setting_mean` per setting pair,
/// split over the four outcomes). Stream layout: resample `r`, setting pair
/// `s`, outcome `o` uses stream `r * 16 + s * 4 + o`.
pub fn chsh_monte_carlo(
    rho: &TwoQubitState,
    phases: (f64, f64, f64, f64),
    noise: &NoiseModel,
    n_resamples: usize,
) -> Result<ChshEstimate> {
    if n_resamples < 2 {
        return Err(Error::TooFewResamples { got: n_resamples });
    }
    let (xi_a, xi_a2, zeta_b, zeta_b2) = phases;
    let s_noiseless = chsh_value(rho, xi_a, xi_a2, zeta_b, zeta_b2);
    let pairs = [
        (xi_a, zeta_b, 1.0),
        (xi_a, zeta_b2, 1.0),
        (xi_a2, zeta_b, 1.0),
        (xi_a2, zeta_b2, -1.0),
    ];
    let tables: Vec<([f64; 4], f64)> = pairs
        .iter()
        .map(|&(xi, zeta, sign)| (chsh_outcome_probabilities(rho, xi, zeta), sign))
        .collect();

    let samples: Vec<f64> = par_map_indexed(n_resamples, |r| {
        let mut s = 0.0;
        for (si, (probs, sign)) in tables.iter().enumerate() {
            let mut counts = [0u64; 4];
            for (o, &p) in probs.iter().enumerate() {
                let mean = p * noise.counts_per_setting_mean;
                counts[o] = if mean > 0.0 {
                    let mut rng = stream_rng(noise.seed, (r * 16 + si * 4 + o) as u64);
                    Poisson::new(mean)
                        .expect("positive mean")
                        .sample(&mut rng)
                        .round()
                        .max(0.0) as u64
                } else {
                    0
                };
            }
            s += sign * correlation_from_counts(&counts);
        }
        s
    });

    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
        / (samples.len() - 1) as f64;
    Ok(ChshEstimate {
        s_noiseless,
        violates_local_bound: s_noiseless.abs() > 2.0,
        mc_mean: mean,
        mc_std_dev: var.sqrt(),
        resamples: n_resamples,
        counts_mean: noise.counts_per_setting_mean,
        seed: noise.seed,
    })
}

/// A fringe scan realized as Poissonian counts, with coincidence and singles
/// tables plus per-curve fits of the counts.
#[derive(Debug, Clone, Serialize)]
pub struct CountedFringeScan {
    pub curves: Vec<FringeCurve>,
    /// Upconverted-signal singles counts against beta, one per curve point.
    pub singles: Vec<FringeCurve>,
    pub seed: u64,
    pub counts_mean: f64,
}

/// Samples Poissonian coincidence counts along each fringe curve and fits a
/// sinusoid to the counts. Singles rates for the signal side are sampled on
/// the same beta grid. Stream layout: curve `i`, point `j` uses stream
/// `i * n + j` for coincidences and `(n_curves + i) * n + j` for singles.
pub fn fringe_scan_counts(
    rho: &TwoQubitState,
    gammas: &[f64],
    beta_grid: &[f64],
    noise: &NoiseModel,
) -> Result<CountedFringeScan> {
    let probability_curves = fringe_scan(rho, gammas, beta_grid)?;
    let n = beta_grid.len();
    let n_curves = gammas.len();
    let curves: Vec<FringeCurve> = probability_curves
        .iter()
        .enumerate()
        .map(|(i, curve)| {
            let values: Vec<f64> = par_map_indexed(n, |j| {
                let mean = curve.values[j] * noise.counts_per_setting_mean;
                if mean <= 0.0 {
                    return 0.0;
                }
                let mut rng = stream_rng(noise.seed, (i * n + j) as u64);
                Poisson::new(mean)
                    .expect("positive mean")
                    .sample(&mut rng)
                    .round()
                    .max(0.0)
            });
            let fit = fit_sinusoid(beta_grid, &values);
            FringeCurve {
                label: curve.label.clone(),
                gamma: curve.gamma,
                betas: beta_grid.to_vec(),
                values,
                fit,
            }
        })
        .collect();

    let tau = 1e-12;
    let singles: Vec<FringeCurve> = gammas
        .iter()
        .enumerate()
        .map(|(i, &gamma)| {
            let values: Vec<f64> = par_map_indexed(n, |j| {
                let p = singles_probability(
                    rho,
                    &OneSideSetting::Signal(ProjectorSpec::time_bin_phase(beta_grid[j], tau)),
                )
                .expect("qubit projector");
                let mean = p * noise.counts_per_setting_mean;
                let mut rng = stream_rng(noise.seed, ((n_curves + i) * n + j) as u64);
                Poisson::new(mean)
                    .expect("positive mean")
                    .sample(&mut rng)
                    .round()
                    .max(0.0)
            });
            let fit = fit_sinusoid(beta_grid, &values);
            FringeCurve {
                label: format!("singles({})", IdlerBasis::Phase(gamma).label()),
                gamma,
                betas: beta_grid.to_vec(),
                values,
                fit,
            }
        })
        .collect();

    Ok(CountedFringeScan {
        curves,
        singles,
        seed: noise.seed,
        counts_mean: noise.counts_per_setting_mean,
    })
}

/// Poissonian noise applied to probability tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    pub fringe_visibility: f64,
    pub counts_per_setting_mean: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(fringe_visibility: f64, counts_per_setting_mean: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fringe_visibility) {
            return Err(Error::VisibilityOutOfRange {
                value: fringe_visibility,
            });
        }
        if !(counts_per_setting_mean > 0.0) {
            return Err(Error::NonPositive {
                quantity: "counts per setting",
                value: counts_per_setting_mean,
            });
        }
        Ok(Self {
            fringe_visibility,
            counts_per_setting_mean,
            seed,
        })
    }
}

/// Independent Poisson draws with mean `probability x counts_per_setting_mean`,
/// one generator stream per entry so the table is reproducible bit-for-bit
/// for a fixed seed regardless of execution order.
pub fn sample_counts(probabilities: &[f64], noise: &NoiseModel) -> Vec<u64> {
    let means: Vec<f64> = probabilities
        .iter()
        .map(|p| p.clamp(0.0, 1.0) * noise.counts_per_setting_mean)
        .collect();
    par_map_indexed(means.len(), |i| {
        let mean = means[i];
        if mean <= 0.0 {
            return 0;
        }
        let mut rng = stream_rng(noise.seed, i as u64);
        let draw: f64 = Poisson::new(mean).expect("positive mean").sample(&mut rng);
        draw.round().max(0.0) as u64
    })
}
