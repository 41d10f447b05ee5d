//! JSON configuration: parsing, exhaustive validation, and construction of a
//! ready-to-run problem.
//!
//! Indices are 1-based in configs and 0-based internally; the conversion
//! happens here and nowhere else. Validation collects *all* violations before
//! reporting, so a bad config is fixed in one round trip.

use nalgebra::DVector;
use serde::Deserialize;

use crate::assembly::DiscreteGenerator;
use crate::coeffs::{EdgeCoefficients, PiecewisePoly, VertexParams};
use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::integrator::{DriftScheme, ProblemSpec, SchemeConfig};
use crate::levy::{Band, LevyMeasureSpec, MarkDistribution};
use crate::mesh::{Mesh, StateVector};
use crate::nonlinearity::{DriftMode, FhnParams, MonotoneShift};
use crate::spectral::SpectralDecomposition;

pub const INITIAL_CONTINUITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub graph: GraphCfg,
    pub edges: Vec<EdgeCfg>,
    pub vertices: Vec<VertexCfg>,
    pub noise: NoiseCfg,
    pub initial: Vec<FunctionCfg>,
    pub mesh: MeshCfg,
    pub scheme: SchemeCfg,
    #[serde(default)]
    pub drift: DriftCfg,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default)]
    pub require_invertible: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphCfg {
    pub n_vertices: usize,
    /// 1-based (tail, head) pairs.
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeCfg {
    pub c: FunctionCfg,
    #[serde(default = "one")]
    pub mu: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexCfg {
    pub b: f64,
    pub sigma: f64,
}

/// A scalar function of x in [0, 1]: a constant, an ascending-power
/// polynomial, or a piecewise-polynomial table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FunctionCfg {
    Constant(f64),
    Polynomial { polynomial: Vec<f64> },
    Piecewise { breaks: Vec<f64>, pieces: Vec<Vec<f64>> },
}

impl FunctionCfg {
    fn to_poly(&self) -> Result<PiecewisePoly> {
        match self {
            FunctionCfg::Constant(v) => Ok(PiecewisePoly::constant(*v)),
            FunctionCfg::Polynomial { polynomial } => Ok(PiecewisePoly::polynomial(polynomial.clone())),
            FunctionCfg::Piecewise { breaks, pieces } => {
                PiecewisePoly::piecewise(breaks.clone(), pieces.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseCfg {
    /// A single compound-Poisson band.
    CompoundPoisson {
        rate: f64,
        jump_distribution: JumpDistributionCfg,
    },
    /// A finite list of bands approximating an infinite-activity measure;
    /// every band is mean-compensated.
    TruncatedSeries { bands: Vec<BandCfg> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandCfg {
    pub rate: f64,
    pub jump_distribution: JumpDistributionCfg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpDistributionCfg {
    Atoms { points: Vec<Vec<f64>>, probs: Vec<f64> },
    Gaussian { std: f64 },
    UniformBall { radius: f64 },
}

impl JumpDistributionCfg {
    fn to_marks(&self) -> MarkDistribution {
        match self {
            JumpDistributionCfg::Atoms { points, probs } => MarkDistribution::Atoms {
                points: points.iter().map(|p| DVector::from_vec(p.clone())).collect(),
                probs: probs.clone(),
            },
            JumpDistributionCfg::Gaussian { std } => MarkDistribution::Gaussian { std: *std },
            JumpDistributionCfg::UniformBall { radius } => {
                MarkDistribution::UniformBall { radius: *radius }
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshCfg {
    pub points_per_edge: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeCfg {
    pub dt: f64,
    #[serde(default)]
    pub drift_mode: DriftModeCfg,
    #[serde(default = "default_lambda")]
    pub yosida_lambda: f64,
    #[serde(default = "one_usize")]
    pub record_every: usize,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DriftModeCfg {
    #[default]
    ExplicitExponential,
    YosidaSemiImplicit,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftCfg {
    pub mode: ReactionCfg,
    #[serde(default = "default_clip_radius")]
    pub clip_radius: f64,
}

impl Default for DriftCfg {
    fn default() -> Self {
        Self {
            mode: ReactionCfg::Fhn,
            clip_radius: default_clip_radius(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ReactionCfg {
    /// No reaction term: the linear problem.
    Linear,
    Fhn,
    LipschitzClipped,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_lambda() -> f64 {
    1e-3
}
fn default_clip_radius() -> f64 {
    3.0
}

/// Everything a subcommand needs, built from a validated config.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub problem: ProblemSpec,
    pub scheme: SchemeConfig,
    pub seed: u64,
}

/// Parses and fully validates a JSON config document, reporting every
/// violation rather than stopping at the first.
pub fn parse_config(text: &str) -> Result<SimulationConfig> {
    let config: SimulationConfig = serde_json::from_str(text)?;
    config.validate()?;
    Ok(config)
}

impl SimulationConfig {
    /// Re-checks every structural requirement of the model; returns the full
    /// list of violations on failure.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = Vec::new();
        let n = self.graph.n_vertices;
        let m = self.graph.edges.len();

        if n == 0 {
            errs.push("graph.n_vertices must be positive".into());
        }
        if m == 0 {
            errs.push("graph.edges must be nonempty".into());
        }
        for (j, &(t, h)) in self.graph.edges.iter().enumerate() {
            if t == 0 || h == 0 || t > n || h > n {
                errs.push(format!(
                    "edge {}: endpoints ({t}, {h}) must be 1-based vertex indices in 1..={n}",
                    j + 1
                ));
            } else if t == h {
                errs.push(format!("edge {}: self-loops are not allowed", j + 1));
            }
        }

        if self.edges.len() != m {
            errs.push(format!(
                "expected {m} entries in `edges` (one per graph edge), got {}",
                self.edges.len()
            ));
        }
        if self.vertices.len() != n {
            errs.push(format!(
                "expected {n} entries in `vertices` (one per graph vertex), got {}",
                self.vertices.len()
            ));
        }
        if self.initial.len() != m {
            errs.push(format!(
                "expected {m} entries in `initial` (one per edge), got {}",
                self.initial.len()
            ));
        }

        let points = self.mesh.points_per_edge;
        if points < 2 {
            errs.push(format!(
                "mesh.points_per_edge must be at least 2, got {points}"
            ));
        }

        for (j, e) in self.edges.iter().enumerate() {
            if !(e.a > 0.0 && e.a < 1.0) {
                errs.push(format!(
                    "edge {}: the cubic's middle root a must lie strictly between 0 and 1, got {}",
                    j + 1,
                    e.a
                ));
            }
            if !(e.mu > 0.0) {
                errs.push(format!(
                    "edge {}: the weight mu must be positive, got {}",
                    j + 1,
                    e.mu
                ));
            }
            match e.c.to_poly() {
                Err(err) => errs.push(format!("edge {}: conductance table invalid: {err}", j + 1)),
                Ok(poly) => {
                    // Sample on mesh nodes and midpoints: the conductance must
                    // be uniformly positive on [0, 1].
                    let samples = 2 * points.max(2);
                    for k in 0..=samples {
                        let x = k as f64 / samples as f64;
                        if poly.eval(x) <= 0.0 {
                            errs.push(format!(
                                "edge {}: conductance c must be positive on [0, 1]; c({x}) = {}",
                                j + 1,
                                poly.eval(x)
                            ));
                            break;
                        }
                    }
                }
            }
        }

        for (i, v) in self.vertices.iter().enumerate() {
            if !(v.b >= 0.0) {
                errs.push(format!(
                    "vertex {}: the leak rate b must be nonnegative, got {}",
                    i + 1,
                    v.b
                ));
            }
            if !(v.sigma > 0.0) {
                errs.push(format!(
                    "vertex {}: the noise amplitude sigma must be positive, got {}",
                    i + 1,
                    v.sigma
                ));
            }
        }
        if self.require_invertible && !self.vertices.iter().any(|v| v.b > 0.0) {
            errs.push(
                "invertibility requested, but every leak rate is zero; at least one vertex needs b > 0"
                    .into(),
            );
        }

        self.validate_noise(n, &mut errs);
        self.validate_initial(n, &mut errs);

        if !(self.horizon > 0.0) {
            errs.push(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.scheme.dt > 0.0) {
            errs.push(format!("scheme.dt must be positive, got {}", self.scheme.dt));
        }
        if !(self.scheme.yosida_lambda > 0.0) {
            errs.push(format!(
                "scheme.yosida_lambda must be positive, got {}",
                self.scheme.yosida_lambda
            ));
        }
        if self.scheme.record_every == 0 {
            errs.push("scheme.record_every must be at least 1".into());
        }
        if !(self.drift.clip_radius > 0.0) {
            errs.push(format!(
                "drift.clip_radius must be positive, got {}",
                self.drift.clip_radius
            ));
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn noise_bands(&self) -> Vec<(f64, JumpDistributionCfg)> {
        match &self.noise {
            NoiseCfg::CompoundPoisson { rate, jump_distribution } => {
                vec![(*rate, jump_distribution.clone())]
            }
            NoiseCfg::TruncatedSeries { bands } => bands
                .iter()
                .map(|b| (b.rate, b.jump_distribution.clone()))
                .collect(),
        }
    }

    fn validate_noise(&self, n: usize, errs: &mut Vec<String>) {
        for (k, (rate, dist)) in self.noise_bands().iter().enumerate() {
            let band = format!("noise band {}", k + 1);
            if !(*rate >= 0.0) || !rate.is_finite() {
                errs.push(format!("{band}: rate must be a finite nonnegative real, got {rate}"));
            }
            match dist {
                JumpDistributionCfg::Atoms { points, probs } => {
                    if points.is_empty() {
                        errs.push(format!("{band}: atom list must be nonempty"));
                    }
                    if points.len() != probs.len() {
                        errs.push(format!(
                            "{band}: {} atoms but {} probabilities",
                            points.len(),
                            probs.len()
                        ));
                    }
                    for (i, p) in points.iter().enumerate() {
                        if p.len() != n {
                            errs.push(format!(
                                "{band}: atom {} has dimension {}, expected {n} (one entry per vertex)",
                                i + 1,
                                p.len()
                            ));
                        }
                    }
                    let total: f64 = probs.iter().sum();
                    if probs.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-12 {
                        errs.push(format!(
                            "{band}: probabilities must be nonnegative and sum to 1, got sum {total}"
                        ));
                    }
                }
                JumpDistributionCfg::Gaussian { std } => {
                    if !(*std > 0.0) {
                        errs.push(format!("{band}: Gaussian std must be positive, got {std}"));
                    }
                }
                JumpDistributionCfg::UniformBall { radius } => {
                    if !(*radius > 0.0) {
                        errs.push(format!("{band}: ball radius must be positive, got {radius}"));
                    }
                }
            }
        }
    }

    fn validate_initial(&self, n: usize, errs: &mut Vec<String>) {
        // Node continuity: every edge endpoint meeting at a vertex must carry
        // the same initial value.
        let mut vertex_values: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (j, init) in self.initial.iter().enumerate() {
            let poly = match init.to_poly() {
                Ok(p) => p,
                Err(err) => {
                    errs.push(format!("initial data, edge {}: {err}", j + 1));
                    continue;
                }
            };
            if let Some(&(t, h)) = self.graph.edges.get(j) {
                if t >= 1 && t <= n {
                    vertex_values[t - 1].push((j, poly.eval(0.0)));
                }
                if h >= 1 && h <= n {
                    vertex_values[h - 1].push((j, poly.eval(1.0)));
                }
            }
        }
        for (i, vals) in vertex_values.iter().enumerate() {
            if vals.len() < 2 {
                continue;
            }
            let lo = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
            let hi = vals.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > INITIAL_CONTINUITY_TOL * (1.0 + hi.abs().max(lo.abs())) {
                errs.push(format!(
                    "initial data is discontinuous at vertex {}: incident edge endpoints take values between {lo} and {hi}, but node continuity requires a single value",
                    i + 1
                ));
            }
        }
    }

    /// Assembles the discretized problem. Assumes `validate` has passed.
    pub fn build(&self) -> Result<BuiltProblem> {
        let graph = NetworkGraph::build(self.graph.n_vertices, &self.graph.edges)?;
        let mesh = Mesh::build(&graph, self.mesh.points_per_edge)?;

        let coeffs = EdgeCoefficients {
            c: self
                .edges
                .iter()
                .map(|e| e.c.to_poly())
                .collect::<Result<Vec<_>>>()?,
            mu: self.edges.iter().map(|e| e.mu).collect(),
        };
        let vp = VertexParams {
            b: self.vertices.iter().map(|v| v.b).collect(),
            sigma: self.vertices.iter().map(|v| v.sigma).collect(),
        };
        vp.validate(graph.n_vertices(), self.require_invertible)?;
        let gen = DiscreteGenerator::assemble(&mesh, &coeffs, &vp)?;
        let dec = SpectralDecomposition::decompose(&gen)?;

        let mode = match self.drift.mode {
            ReactionCfg::Linear => DriftMode::Zero,
            ReactionCfg::Fhn => DriftMode::Fhn,
            ReactionCfg::LipschitzClipped => DriftMode::LipschitzClipped {
                radius: self.drift.clip_radius,
            },
        };
        let params = FhnParams::new(self.edges.iter().map(|e| e.a).collect(), mode)?;
        let shift = MonotoneShift::new(&params)?;

        let bands = self
            .noise_bands()
            .into_iter()
            .map(|(rate, dist)| Band {
                rate,
                marks: dist.to_marks(),
            })
            .collect();
        let noise = LevyMeasureSpec::new(graph.n_vertices(), bands)?;

        let x0 = self.build_initial(&mesh)?;
        let problem = ProblemSpec::new(gen, dec, shift, noise, x0, self.horizon)?;

        let drift_scheme = match self.scheme.drift_mode {
            DriftModeCfg::ExplicitExponential => DriftScheme::ExplicitExponential,
            DriftModeCfg::YosidaSemiImplicit => DriftScheme::YosidaSemiImplicit,
        };
        let scheme = SchemeConfig {
            dt: self.scheme.dt,
            drift_scheme,
            yosida_lambda: self.scheme.yosida_lambda,
            record_every: self.scheme.record_every,
        };
        scheme.validate()?;

        Ok(BuiltProblem {
            problem,
            scheme,
            seed: self.seed,
        })
    }

    fn build_initial(&self, mesh: &Mesh) -> Result<StateVector> {
        let mut x0 = mesh.zero_state();
        let cells = mesh.cells_per_edge();
        for j in 0..mesh.n_edges() {
            let poly = self.initial[j].to_poly()?;
            for k in 0..=cells {
                let x = k as f64 / cells as f64;
                // Endpoints of different edges may write the same vertex dof;
                // validation guarantees the values agree.
                x0[mesh.node_index(j, k)] = poly.eval(x);
            }
        }
        Ok(x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config() -> String {
        r#"{
            "graph": {"n_vertices": 2, "edges": [[1, 2]]},
            "edges": [{"c": 1.0, "mu": 1.0, "a": 0.5}],
            "vertices": [{"b": 1.0, "sigma": 1.0}, {"b": 0.0, "sigma": 1.0}],
            "noise": {
                "variant": "compound_poisson",
                "rate": 2.0,
                "jump_distribution": {"atoms": {"points": [[1.0, 0.0], [-1.0, 0.0]], "probs": [0.5, 0.5]}}
            },
            "initial": [0.0],
            "mesh": {"points_per_edge": 4},
            "scheme": {"dt": 0.001},
            "horizon": 1.0,
            "seed": 42
        }"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses_and_builds() {
        let config = parse_config(&minimal_config()).unwrap();
        let built = config.build().unwrap();
        assert_eq!(built.problem.gen.mesh.n_dofs(), 5);
        assert_eq!(built.seed, 42);
        assert_eq!(built.scheme.record_every, 1);
        assert!(matches!(
            built.problem.shift.params().mode(),
            DriftMode::Fhn
        ));
    }

    #[test]
    fn bad_a_reports_the_constraint() {
        let text = minimal_config().replace("\"a\": 0.5", "\"a\": 1.2");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("strictly between 0 and 1"), "{msg}");
    }

    #[test]
    fn all_violations_are_collected() {
        let text = minimal_config()
            .replace("\"a\": 0.5", "\"a\": 1.2")
            .replace("\"b\": 1.0", "\"b\": -1.0")
            .replace("\"dt\": 0.001", "\"dt\": 0.0");
        match parse_config(&text) {
            Err(Error::Config(errs)) => {
                assert!(errs.len() >= 3, "{errs:?}");
                assert!(errs.iter().any(|e| e.contains("leak rate")));
                assert!(errs.iter().any(|e| e.contains("dt")));
            }
            other => panic!("expected a config error list, got {other:?}"),
        }
    }

    #[test]
    fn discontinuous_initial_data_is_rejected() {
        let text = minimal_config()
            .replace(
                "\"edges\": [[1, 2]]",
                "\"edges\": [[1, 2], [2, 1]]",
            )
            .replace(
                "\"edges\": [{\"c\": 1.0, \"mu\": 1.0, \"a\": 0.5}]",
                "\"edges\": [{\"c\": 1.0, \"mu\": 1.0, \"a\": 0.5}, {\"c\": 1.0, \"mu\": 1.0, \"a\": 0.5}]",
            )
            .replace("\"initial\": [0.0]", "\"initial\": [0.0, {\"polynomial\": [1.0, -1.0]}]");
        // Second edge starts at 1 at vertex 2 while the first edge ends at 0 there.
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("node continuity"), "{err}");
    }

    #[test]
    fn negative_conductance_sampled_on_mesh_is_rejected() {
        // c(x) = 1 - 2x dips negative on (1/2, 1].
        let text = minimal_config().replace("\"c\": 1.0", "\"c\": {\"polynomial\": [1.0, -2.0]}");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("positive on [0, 1]"), "{err}");
    }

    #[test]
    fn invertibility_flag_requires_a_leak() {
        let text = minimal_config()
            .replace("\"b\": 1.0", "\"b\": 0.0")
            .replace("\"seed\": 42", "\"seed\": 42, \"require_invertible\": true");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("b > 0"), "{err}");
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(
            parse_config("{ not json"),
            Err(Error::ConfigParse(_))
        ));
    }

    #[test]
    fn initial_polynomial_fills_nodes_and_vertices() {
        let text = minimal_config().replace(
            "\"initial\": [0.0]",
            "\"initial\": [{\"polynomial\": [0.0, 1.0]}]",
        );
        let config = parse_config(&text).unwrap();
        let built = config.build().unwrap();
        let x0 = &built.problem.x0;
        let mesh = &built.problem.gen.mesh;
        // u(x) = x on the single edge: tail vertex 0, head vertex 1.
        assert_eq!(x0[mesh.node_index(0, 0)], 0.0);
        assert_eq!(x0[mesh.node_index(0, 4)], 1.0);
        assert!((x0[mesh.node_index(0, 2)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn truncated_series_builds_multiple_bands() {
        let text = minimal_config().replace(
            r#""variant": "compound_poisson",
                "rate": 2.0,
                "jump_distribution": {"atoms": {"points": [[1.0, 0.0], [-1.0, 0.0]], "probs": [0.5, 0.5]}}"#,
            r#""variant": "truncated_series",
                "bands": [
                    {"rate": 1.0, "jump_distribution": {"gaussian": {"std": 0.5}}},
                    {"rate": 4.0, "jump_distribution": {"uniform_ball": {"radius": 0.25}}}
                ]"#,
        );
        let config = parse_config(&text).unwrap();
        let built = config.build().unwrap();
        assert_eq!(built.problem.noise.bands().len(), 2);
    }
}
