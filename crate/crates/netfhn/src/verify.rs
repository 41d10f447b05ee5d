//! Statistical and deterministic checks that turn the structural properties
//! of the system into executable verdicts with quantified tolerances.
//!
//! Statistical passes use 3-standard-error bands. Monte Carlo loops are
//! parallel over per-path RNG streams but reduce sequentially over an
//! order-preserving collection, so a `(seed, config)` pair determines every
//! report bit-for-bit.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::DiscreteGenerator;
use crate::error::Result;
use crate::integrator::{
    coupled_simulate, simulate_from, stochastic_convolution, ProblemSpec, SchemeConfig,
};
use crate::levy::MarkDistribution;
use crate::mesh::StateVector;
use crate::spectral::SpectralDecomposition;

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const DISSIPATIVITY_TOL: f64 = 1e-12;
pub const KERNEL_TOL: f64 = 1e-10;
pub const CONTRACTION_MARGIN: f64 = 0.05;
pub const EXPLOSION_GUARD: f64 = 1e6;

/// Outcome of one check, carrying every number needed to recompute the
/// verdict.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub quantities: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CheckReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            quantities: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    fn record(&mut self, key: &str, value: f64) {
        self.quantities.insert(key.to_string(), value);
    }

    fn require(&mut self, condition: bool, note: &str) {
        if !condition {
            self.passed = false;
            self.notes.push(note.to_string());
        }
    }

    pub fn summary_line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!("{verdict} {}", self.name);
        if !self.passed {
            line.push_str(&format!(" [{}]", self.notes.join("; ")));
        }
        line
    }
}

fn random_state(dim: usize, rng: &mut ChaCha8Rng, scale: f64) -> StateVector {
    StateVector::from_fn(dim, |_, _| scale * (rng.random::<f64>() - 0.5))
}

/// M-symmetry, dissipativity and (for `b = 0`) the constant kernel of the
/// assembled generator, checked on random states.
pub fn check_dissipativity(gen: &DiscreteGenerator, n_samples: usize, seed: u64) -> Result<CheckReport> {
    let mut report = CheckReport::new("operator_structure");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = gen.mesh.n_dofs();

    let mut worst_sym = 0.0f64;
    let mut worst_diss = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let x = random_state(dim, &mut rng, 1.0);
        let y = random_state(dim, &mut rng, 1.0);
        let ax = gen.apply(&x)?;
        let ay = gen.apply(&y)?;
        let asym = (gen.m_inner(&ax, &y) - gen.m_inner(&x, &ay)).abs()
            / (gen.m_norm(&x) * gen.m_norm(&y));
        worst_sym = worst_sym.max(asym);
        worst_diss = worst_diss.max(gen.m_inner(&ax, &x) / gen.m_inner(&x, &x));
    }
    report.record("n_samples", n_samples as f64);
    report.record("worst_relative_asymmetry", worst_sym);
    report.record("worst_rayleigh_quotient", worst_diss);
    report.require(worst_sym <= SYMMETRY_TOL, "M-symmetry violated");
    report.require(worst_diss <= DISSIPATIVITY_TOL, "dissipativity violated");

    let dec = SpectralDecomposition::decompose(gen)?;
    let bound = dec.spectral_bound();
    report.record("spectral_bound", bound);
    let b_all_zero = gen.vertex_params.b.iter().all(|&b| b == 0.0);
    let connected = gen.mesh.graph().is_connected();
    if b_all_zero && connected {
        report.require(bound.abs() <= KERNEL_TOL, "spectral bound should be 0 for b = 0");
        let second = dec.eigenvalues()[1];
        report.record("second_eigenvalue", second);
        report.require(second < -KERNEL_TOL, "kernel should be one-dimensional");
    } else if connected && gen.vertex_params.b.iter().any(|&b| b > 0.0) {
        report.require(bound < 0.0, "spectral bound should be strictly negative");
    }
    Ok(report)
}

/// Closed-form `E |Z(T)|_M^2` by eigen-quadrature:
/// `sum_bands rate * E_mark sum_i <(0, sigma x), v_i>_M^2 (e^{2 lambda_i T} - 1)/(2 lambda_i)`.
pub fn convolution_second_moment(problem: &ProblemSpec, t_final: f64) -> f64 {
    let dec = &problem.dec;
    let gen = &problem.gen;
    let n = gen.mesh.n_vertices();
    let sigma = &gen.vertex_params.sigma;

    // w_i[v] = sigma_v * (M v_i)[v]: the vertex pairing of mode i.
    let dim = dec.dim();
    let mut pairings: Vec<DVector<f64>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let mv = &gen.mass * dec.eigenvectors().column(i);
        pairings.push(DVector::from_fn(n, |v, _| sigma[v] * mv[v]));
    }
    let time_factor = |lam: f64| {
        if lam.abs() * t_final < 1e-12 {
            t_final
        } else {
            (2.0 * lam * t_final).exp_m1() / (2.0 * lam)
        }
    };

    let mut total = 0.0;
    for band in problem.noise.bands() {
        for (i, w) in pairings.iter().enumerate() {
            let lam = dec.eigenvalues()[i];
            // E (x^T w)^2 under the mark distribution.
            let e_sq = match &band.marks {
                MarkDistribution::Atoms { points, probs } => points
                    .iter()
                    .zip(probs)
                    .map(|(x, p)| p * x.dot(w).powi(2))
                    .sum::<f64>(),
                MarkDistribution::Gaussian { std } => std * std * w.norm_squared(),
                MarkDistribution::UniformBall { radius } => {
                    radius * radius / (n as f64 + 2.0) * w.norm_squared()
                }
            };
            total += band.rate * e_sq * time_factor(lam);
        }
    }
    total
}

/// Monte Carlo `E |Z(T)|_M^2` against the closed-form eigen-quadrature, plus
/// a mean-square-continuity trend check on dyadically shrinking gaps.
pub fn check_isometry(problem: &ProblemSpec, n_paths: usize, seed: u64) -> Result<CheckReport> {
    let mut report = CheckReport::new("stochastic_convolution_isometry");
    let t_final = problem.horizon;
    let exact = convolution_second_moment(problem, t_final);
    report.record("closed_form", exact);
    report.record("n_paths", n_paths as f64);

    let values: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let path = problem.noise.sample_jumps(t_final, seed, k)?;
            let z = stochastic_convolution(problem, &path, t_final)?;
            Ok(problem.gen.m_inner(&z, &z))
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = n_paths as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let z_score = if se > 0.0 { (mean - exact) / se } else { 0.0 };
    report.record("monte_carlo", mean);
    report.record("standard_error", se);
    report.record("z_score", z_score);
    if exact == 0.0 {
        report.require(mean == 0.0, "zero-noise convolution should vanish exactly");
    } else {
        report.require(z_score.abs() <= 3.0, "Monte Carlo outside the 3-SE band");
    }

    // Mean-square continuity proxy: E|Z(t0 + d) - Z(t0)|^2 must shrink along
    // a dyadic refinement of d (trend only; no rate is asserted).
    if exact > 0.0 {
        let t0 = t_final / 2.0;
        let n_cont = n_paths.min(2000);
        let gaps: Vec<f64> = (0..5).map(|k| t_final / 4.0 / (1 << k) as f64).collect();
        let sums: Vec<f64> = (0..n_cont as u64)
            .into_par_iter()
            .map(|k| {
                let path = problem.noise.sample_jumps(t_final, seed ^ 0x5eed, k)?;
                let z0 = stochastic_convolution(problem, &path, t0)?;
                let mut per_gap = Vec::with_capacity(gaps.len());
                for &d in &gaps {
                    let z1 = stochastic_convolution(problem, &path, t0 + d)?;
                    let diff = &z1 - &z0;
                    per_gap.push(problem.gen.m_inner(&diff, &diff));
                }
                Ok(per_gap)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(vec![0.0; gaps.len()], |mut acc, row| {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
                acc
            });
        for (k, sum) in sums.iter().enumerate() {
            report.record(&format!("ms_increment_gap_{k}"), sum / n_cont as f64);
        }
        let decreasing = sums.windows(2).all(|w| w[1] < w[0]);
        report.require(decreasing, "mean-square increments do not shrink with the gap");
    }
    Ok(report)
}

/// Pathwise quasi-contraction under common noise: every ratio
/// `|dX(T)|_M / |dx0|_M` stays below `e^{eta* T} (1 + margin)`, and the
/// mean-square version holds with the same margin.
pub fn check_contraction(
    problem: &ProblemSpec,
    scheme: &SchemeConfig,
    n_pairs: usize,
    seed: u64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("pathwise_quasi_contraction");
    let t_final = problem.horizon;
    let eta = problem.shift.eta_star();
    let bound = (eta * t_final).exp() * (1.0 + CONTRACTION_MARGIN);
    report.record("eta_star", eta);
    report.record("ratio_bound", bound);
    report.record("n_pairs", n_pairs as f64);

    let results: Vec<(f64, f64, f64)> = (0..n_pairs as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2 * k + 1);
            let dim = problem.gen.mesh.n_dofs();
            let x0 = random_state(dim, &mut rng, 1.0);
            let y0 = random_state(dim, &mut rng, 1.0);
            let path = problem.noise.sample_jumps(t_final, seed, k)?;
            let (a, b) = coupled_simulate(problem, scheme, &x0, &y0, &path)?;
            let d0 = problem.gen.m_norm(&(&x0 - &y0));
            let dt_norm = problem.gen.m_norm(&(a.terminal() - b.terminal()));
            let ratio = if d0 > 0.0 { dt_norm / d0 } else { 0.0 };
            Ok((ratio, dt_norm * dt_norm, d0 * d0))
        })
        .collect::<Result<Vec<_>>>()?;

    let worst = results.iter().map(|r| r.0).fold(0.0f64, f64::max);
    let mean_sq_final = results.iter().map(|r| r.1).sum::<f64>() / n_pairs as f64;
    let mean_sq_init = results.iter().map(|r| r.2).sum::<f64>() / n_pairs as f64;
    let ms_bound = (2.0 * eta * t_final).exp() * (1.0 + CONTRACTION_MARGIN).powi(2);
    report.record("worst_ratio", worst);
    report.record("mean_square_ratio", mean_sq_final / mean_sq_init);
    report.record("mean_square_bound", ms_bound);
    report.require(worst <= bound, "a pathwise ratio exceeded the quasi-contraction bound");
    report.require(
        mean_sq_final <= ms_bound * mean_sq_init,
        "mean-square growth exceeded the bound",
    );
    Ok(report)
}

/// Stability of the running-supremum second moment: the estimate must agree
/// between `n` and `n/2` paths within 3 combined standard errors, and no path
/// may cross the explosion guard.
pub fn check_sup_moment(
    problem: &ProblemSpec,
    scheme: &SchemeConfig,
    n_paths: usize,
    seed: u64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("sup_moment_stability");
    report.record("n_paths", n_paths as f64);
    report.record("explosion_guard", EXPLOSION_GUARD);
    let t_final = problem.horizon;

    let mut record_all = *scheme;
    record_all.record_every = 1;

    let sups: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|k| {
            let path = problem.noise.sample_jumps(t_final, seed, k)?;
            let traj = simulate_from(problem, &record_all, &problem.x0, &path)?;
            let sup = traj
                .states
                .iter()
                .map(|s| problem.gen.m_inner(s, s))
                .fold(0.0f64, f64::max);
            Ok(sup)
        })
        .collect::<Result<Vec<_>>>()?;

    let exploded = sups.iter().filter(|&&s| !s.is_finite() || s > EXPLOSION_GUARD).count();
    report.record("n_exploded", exploded as f64);
    report.require(exploded == 0, "a path crossed the explosion guard");

    let stats = |vals: &[f64]| {
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    };
    let (mean_full, se_full) = stats(&sups);
    let (mean_half, se_half) = stats(&sups[..n_paths / 2]);
    let combined_se = (se_full * se_full + se_half * se_half).sqrt();
    report.record("estimate_full", mean_full);
    report.record("estimate_half", mean_half);
    report.record("combined_se", combined_se);
    if mean_full > 0.0 {
        report.require(
            (mean_full - mean_half).abs() <= 3.0 * combined_se,
            "estimates at n and n/2 paths disagree beyond 3 combined SE",
        );
    }
    Ok(report)
}

/// Strong self-convergence in `dt` against a finest-grid common-noise
/// reference, and monotone Yosida errors against a small-lambda reference.
pub fn convergence_study(
    problem: &ProblemSpec,
    scheme: &SchemeConfig,
    dt_list: &[f64],
    lambda_list: &[f64],
    seed: u64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("convergence_study");
    let t_final = problem.horizon;
    let path = problem.noise.sample_jumps(t_final, seed, 0)?;

    if !dt_list.is_empty() {
        let dt_ref = dt_list.iter().cloned().fold(f64::INFINITY, f64::min) / 4.0;
        let mut ref_scheme = *scheme;
        ref_scheme.dt = dt_ref;
        let reference = simulate_from(problem, &ref_scheme, &problem.x0, &path)?;
        let mut errors = Vec::new();
        for (i, &dt) in dt_list.iter().enumerate() {
            let mut s = *scheme;
            s.dt = dt;
            let traj = simulate_from(problem, &s, &problem.x0, &path)?;
            let err = problem.gen.m_norm(&(traj.terminal() - reference.terminal()));
            report.record(&format!("dt_{i}_error"), err);
            errors.push(err);
        }
        let linear = matches!(
            problem.shift.params().mode(),
            crate::nonlinearity::DriftMode::Zero
        );
        if linear {
            let worst = errors.iter().cloned().fold(0.0f64, f64::max);
            report.require(worst <= 1e-10, "linear runs should be exact at any dt");
        } else {
            for (i, w) in errors.windows(2).enumerate() {
                let order = (w[0] / w[1]).ln() / (dt_list[i] / dt_list[i + 1]).ln();
                report.record(&format!("dt_order_{i}"), order);
                // Matches an error ratio of at least 1.8 per halving of dt.
                let min_order = 1.8f64.ln() / 2f64.ln();
                report.require(
                    order >= min_order,
                    "empirical dt-order fell below log2(1.8)",
                );
            }
        }
    }

    if !lambda_list.is_empty() {
        let lam_ref = lambda_list.iter().cloned().fold(f64::INFINITY, f64::min) / 10.0;
        let mut ref_scheme = SchemeConfig::yosida(scheme.dt, lam_ref);
        ref_scheme.record_every = scheme.record_every;
        let reference = simulate_from(problem, &ref_scheme, &problem.x0, &path)?;
        let mut errors = Vec::new();
        for (i, &lam) in lambda_list.iter().enumerate() {
            let s = SchemeConfig::yosida(scheme.dt, lam);
            let traj = simulate_from(problem, &s, &problem.x0, &path)?;
            let err = problem.gen.m_norm(&(traj.terminal() - reference.terminal()));
            report.record(&format!("lambda_{i}_error"), err);
            errors.push(err);
        }
        let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
        report.require(decreasing, "Yosida errors do not decrease with lambda");
    }
    Ok(report)
}

/// The default verification battery run by the CLI.
pub fn run_battery(
    problem: &ProblemSpec,
    scheme: &SchemeConfig,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    reports.push(check_dissipativity(&problem.gen, 100, seed)?);
    reports.push(check_isometry(problem, n_paths, seed.wrapping_add(1))?);
    reports.push(check_contraction(problem, scheme, 50, seed.wrapping_add(2))?);
    reports.push(check_sup_moment(problem, scheme, n_paths.min(1000), seed.wrapping_add(3))?);
    let dt = scheme.dt;
    reports.push(convergence_study(
        problem,
        scheme,
        &[4.0 * dt, 2.0 * dt, dt],
        &[1e-1, 1e-2, 1e-3],
        seed.wrapping_add(4),
    )?);
    Ok(reports)
}
