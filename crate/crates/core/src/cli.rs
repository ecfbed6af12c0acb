//! Command-line front end. Every subcommand produces a JSON report, a CSV table and a list of
//! checks; the process exits nonzero when a check fails.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graph::{cut_star, MetricGraph, PerturbationPoint};
use crate::output::{fmt_f64, to_json, Table};
use crate::perturbation::{
    basis_vectors, first_order_cluster, lambda1_finite_difference, lambda1_slope, qdot_matrix,
    qdot_quadrature_check,
};
use crate::prescriber::{prescribe_distinct, prescribe_multiplicities, MultiplicityTarget, NewtonConfig};
use crate::robin::{overlap_bounds, robin_dirichlet_sweep, Profile, RobinInterval, WeightedForm1D};
use crate::secular::reference::{cut_star_mu2, lemma21_reference};
use crate::secular::{find_eigenvalues, ScanConfig, SpectralCluster};
use crate::spectral_distance::{cluster_sweep, lambda2_cluster_comparison};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "qgraph", version, about = "Quantum graph spectra, perturbation and prescription, 1D Robin lab")]
pub struct RunConfig {
    /// Override the default threshold of the subcommand's main check.
    #[arg(long, global = true, env = "QGRAPH_TOL")]
    pub tol: Option<f64>,
    /// Upper bound on the root scan step in k.
    #[arg(long, global = true, default_value_t = 0.1)]
    pub scan_step: f64,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Eigenvalues of a graph given as JSON.
    Spectrum {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        lambda_max: f64,
        /// Include eigenfunction coefficients.
        #[arg(long)]
        dump_functions: bool,
    },
    /// Lowest two eigenvalues of G_N against the closed form.
    Lemma21 {
        #[arg(long)]
        n: usize,
    },
    /// Second eigenvalue of the cut star.
    CutStar {
        #[arg(long)]
        n: usize,
    },
    /// Form derivative along a direction, closed form against quadrature.
    Qdot {
        #[arg(long)]
        n: usize,
        /// `pendant:K`, `interior:I,J` (0-based) or `x:v1,v2,...` (interior then pendant).
        #[arg(long)]
        direction: String,
    },
    /// Rank of the form-derivative vectors.
    RankCert {
        #[arg(long)]
        n: usize,
    },
    /// First eigenvalue slope against Richardson finite differences.
    Lambda1Slope {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        direction: String,
    },
    /// First-order cluster prediction at one step.
    FirstOrder {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        direction: String,
        #[arg(long, default_value_t = 1e-3)]
        s: f64,
    },
    /// N-spectral differences along a step sweep.
    SpectralDiff {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        direction: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-2, 1e-3, 1e-4])]
        steps: Vec<f64>,
    },
    /// Closeness-criterion measurements between the cluster and its perturbation.
    Critere {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        direction: String,
        #[arg(long, default_value_t = 1e-3)]
        s: f64,
    },
    /// Scaled union with prescribed simple leading eigenvalues.
    PrescribeDistinct {
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<f64>,
        /// Also write the graph JSON here.
        #[arg(long)]
        graph_out: Option<PathBuf>,
    },
    /// Lengths of G_N realizing a multiplicity pattern in the second cluster.
    PrescribeMult {
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        pattern: Vec<usize>,
        #[arg(long, default_value_t = 0.02)]
        gap: f64,
        #[arg(long)]
        graph_out: Option<PathBuf>,
    },
    /// Robin to Dirichlet gaps and overlaps along a ladder of parameters.
    RobinSweep {
        #[arg(long, value_parser = parse_length, default_value = "pi")]
        length: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 100.0, 1000.0])]
        ladder: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Dirichlet/Robin eigenfunction overlaps against their lower bounds.
    Overlap {
        #[arg(long, value_parser = parse_length, default_value = "pi")]
        length: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 3)]
        n_cluster: usize,
    },
    /// Spectrum of the conformally weighted form; a collar profile when `--epsilon` is given.
    WeightedForm {
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long, value_parser = parse_length, default_value = "pi")]
        length: f64,
        #[arg(long, default_value_t = 10.0)]
        rho: f64,
        #[arg(long, default_value_t = 20.0)]
        rho_bar: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 3)]
        count: usize,
    },
}

fn parse_length(s: &str) -> std::result::Result<f64, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "pi" => Ok(std::f64::consts::PI),
        t => t.parse::<f64>().map_err(|e| format!("expected a number or PI: {e}")),
    }
}

/// One assertion, reported with its measured value and threshold.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, measured: f64, threshold: f64) -> Self {
        Self { name: name.into(), measured, threshold, passed: measured <= threshold }
    }

    pub fn at_least(name: &str, measured: f64, threshold: f64) -> Self {
        Self { name: name.into(), measured, threshold, passed: measured >= threshold }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), measured: f64::from(u8::from(ok)), threshold: 1.0, passed: ok }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: &'static str,
    pub report: Value,
    pub table: Table,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => to_json(&json!({
                "command": self.command,
                "passed": self.passed(),
                "checks": self.checks,
                "result": self.report,
            })),
            Format::Csv => self.table.to_csv(),
        }
    }
}

fn direction(n: usize, text: &str) -> Result<PerturbationPoint> {
    let bad = || Error::InvalidArgument(format!("direction {text:?}: expected pendant:K, interior:I,J or x:v1,..."));
    let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
    let ints = || -> Result<Vec<usize>> { rest.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect() };
    match kind.trim() {
        "pendant" => match ints()?.as_slice() {
            [k] => PerturbationPoint::pendant_direction(n, *k),
            _ => Err(bad()),
        },
        "interior" => match ints()?.as_slice() {
            [i, j] => PerturbationPoint::interior_direction(n, *i, *j),
            _ => Err(bad()),
        },
        "x" => {
            let x = rest.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<Vec<f64>>>()?;
            PerturbationPoint::from_vector(n, x)
        }
        _ => Err(bad()),
    }
}

fn value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn spectrum_table(c: &SpectralCluster) -> Table {
    let mut t = Table::new(["eigenvalue", "multiplicity"]);
    for e in &c.entries {
        t.push(vec![fmt_f64(e.eigenvalue), e.multiplicity.to_string()]);
    }
    t
}

fn write_graph(path: &Option<PathBuf>, g: &MetricGraph) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, g.to_json()?)?;
    }
    Ok(())
}

/// Runs one subcommand. Errors are invalid input or failed computations; failed checks are
/// reported in the outcome.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    if let Some(t) = cfg.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {t}")));
        }
    }
    let scan = ScanConfig { scan_step: cfg.scan_step, ..ScanConfig::default() };
    scan.validate()?;
    let tol = |default: f64| cfg.tol.unwrap_or(default);

    match &cfg.command {
        Command::Spectrum { graph, lambda_max, dump_functions } => {
            let g = MetricGraph::from_json(&std::fs::read_to_string(graph)?)?;
            let c = find_eigenvalues(&g, *lambda_max, &scan)?;
            let mut worst: f64 = 0.0;
            let mut entries = Vec::new();
            for e in &c.entries {
                let mut functions = Vec::new();
                for f in &e.eigenspace {
                    worst = worst.max(f.residuals(&g, e.eigenvalue)?.max());
                    if *dump_functions {
                        let coeffs: Vec<Value> = f
                            .coeffs()
                            .iter()
                            .enumerate()
                            .map(|(edge, [a, b])| json!({"edge": edge, "A": a, "B": b}))
                            .collect();
                        functions.push(Value::Array(coeffs));
                    }
                }
                let mut v = json!({"eigenvalue": e.eigenvalue, "multiplicity": e.multiplicity});
                if *dump_functions {
                    v["functions"] = Value::Array(functions);
                }
                entries.push(v);
            }
            Ok(Outcome {
                command: "spectrum",
                report: Value::Array(entries),
                table: spectrum_table(&c),
                checks: vec![Check::at_most("eigenfunction residual", worst, tol(1e-8))],
            })
        }
        Command::Lemma21 { n } => {
            let r = lemma21_reference(*n)?;
            let g = r.graph()?;
            let c = find_eigenvalues(&g, 12.0, &scan)?;
            let found: Vec<(f64, usize)> = c.entries.iter().map(|e| (e.eigenvalue, e.multiplicity)).collect();
            let get = |i: usize| found.get(i).copied().unwrap_or((f64::NAN, 0));
            let ((l1, m1), (l2, m2), (next, _)) = (get(0), get(1), get(2));
            let mut res: f64 = r.psi0.residuals(&g, r.lambda1)?.max();
            for p in &r.psi {
                res = res.max(p.residuals(&g, r.lambda2)?.max());
            }
            let report = json!({
                "n": n,
                "lambda1": r.lambda1,
                "lambda2": r.lambda2,
                "computed": found.iter().map(|(v, m)| json!({"eigenvalue": v, "multiplicity": m})).collect::<Vec<_>>(),
                "multiplicity2": m2,
                "lambda_next": next,
                "psi_residual": res,
            });
            Ok(Outcome {
                command: "lemma21",
                report,
                table: spectrum_table(&c),
                checks: vec![
                    Check::at_most("|lambda1 - arccos((N-1)/N)^2|", (l1 - r.lambda1).abs(), tol(1e-8)),
                    Check::at_most("|lambda2 - arccos(-1/N)^2|", (l2 - r.lambda2).abs(), tol(1e-8)),
                    Check::holds("lambda1 simple", m1 == 1),
                    Check::holds("lambda2 multiplicity N-1", m2 == n - 1),
                    Check::at_least("lambda_{N+1} - lambda2", next - l2, f64::MIN_POSITIVE),
                    Check::at_most("closed-form eigenfunction residual", res, 1e-10),
                ],
            })
        }
        Command::CutStar { n } => {
            let g = cut_star(*n)?;
            let c = find_eigenvalues(&g, 12.0, &scan)?;
            let mu2 = c.expanded().get(1).copied().unwrap_or(f64::NAN);
            let reference = cut_star_mu2(*n)?;
            Ok(Outcome {
                command: "cut-star",
                report: json!({"n": n, "mu2": mu2, "reference": reference, "spectrum": c.expanded()}),
                table: spectrum_table(&c),
                checks: vec![Check::at_most("|mu2 - pi^2|", (mu2 - reference).abs(), tol(1e-8))],
            })
        }
        Command::Qdot { n, direction: d } => {
            let p = direction(*n, d)?;
            let q = qdot_matrix(&p)?;
            let dev = qdot_quadrature_check(&p)?;
            let mut t = Table::new(["l", "m", "qdot", "gram"]);
            for l in 0..q.dim() {
                for m in 0..q.dim() {
                    t.push(vec![l.to_string(), m.to_string(), fmt_f64(q.form()[(l, m)]), fmt_f64(q.gram()[(l, m)])]);
                }
            }
            Ok(Outcome {
                command: "qdot",
                report: json!({"direction": p.x(), "form": value(&q)?, "quadrature_deviation": dev}),
                table: t,
                checks: vec![Check::at_most("closed form vs quadrature", dev, tol(1e-9))],
            })
        }
        Command::RankCert { n } => {
            let rc = basis_vectors(*n)?;
            // one row per F-vector, then the singular values, over columns indexed by form pairs
            let mut headers = vec!["vector".to_string()];
            headers.extend(rc.pairs.iter().map(|(l, m)| format!("({l},{m})")));
            let mut t = Table::new(headers);
            let floats = |name: String, v: &[f64]| std::iter::once(name).chain(v.iter().map(|x| fmt_f64(*x))).collect();
            for (k, v) in rc.pendant.iter().enumerate() {
                t.push(floats(format!("F_{k}"), v));
            }
            for ((i, j), v) in &rc.interior {
                t.push(floats(format!("F_{i}{j}"), v));
            }
            t.push(floats("singular_values".into(), &rc.singular_values));
            let want = n * (n - 1) / 2;
            Ok(Outcome {
                command: "rank-cert",
                report: value(&rc)?,
                table: t,
                checks: vec![
                    Check::holds("rank N(N-1)/2", rc.rank == want),
                    Check::at_most("sum identity residual", rc.sum_identity_residual, tol(1e-10)),
                    Check::at_most("pair identity residual", rc.pair_identity_residual, tol(1e-10)),
                ],
            })
        }
        Command::Lambda1Slope { n, direction: d } => {
            let p = direction(*n, d)?;
            let slope = lambda1_slope(&p)?;
            let fd = lambda1_finite_difference(&p, &[1e-2, 1e-3, 1e-4])?;
            let mut t = Table::new(["step", "centered"]);
            for (h, c) in fd.steps.iter().zip(&fd.centered) {
                t.push_floats(&[*h, *c]);
            }
            Ok(Outcome {
                command: "lambda1-slope",
                report: json!({"slope": slope, "finite_difference": value(&fd)?}),
                table: t,
                checks: vec![Check::at_most("|slope - extrapolated difference|", (slope - fd.best()).abs(), tol(1e-6))],
            })
        }
        Command::FirstOrder { n, direction: d, s } => {
            let fo = first_order_cluster(&direction(*n, d)?, *s)?;
            let mut t = Table::new(["predicted", "computed"]);
            for (a, b) in fo.predicted.iter().zip(&fo.computed) {
                t.push_floats(&[*a, *b]);
            }
            Ok(Outcome {
                command: "first-order",
                report: value(&fo)?,
                table: t,
                // the remainder is quadratic in s; the constant stays below 10 for unit directions
                checks: vec![Check::at_most("deviation", fo.deviation, tol(10.0 * s * s))],
            })
        }
        Command::SpectralDiff { n, direction: d, steps } => {
            let rep = cluster_sweep(&direction(*n, d)?, steps)?;
            let mut t = Table::new(["s", "difference"]);
            for (s, v) in steps.iter().zip(&rep.differences) {
                t.push_floats(&[*s, *v]);
            }
            Ok(Outcome {
                command: "spectral-diff",
                report: json!({"steps": steps, "sweep": value(&rep)?}),
                table: t,
                checks: vec![Check::holds("monotone decrease", rep.monotone)],
            })
        }
        Command::Critere { n, direction: d, s } => {
            let p = direction(*n, d)?.scaled(*s)?;
            let c = lambda2_cluster_comparison(&p)?;
            let rec = c.critere(cfg.seed)?;
            let mut t = Table::new(["quantity", "value"]);
            for (k, v) in [
                ("norm_q1", rec.norm_q1),
                ("dev_A0", rec.dev_a0),
                ("dev_A1", rec.dev_a1),
                ("norm_B", rec.norm_b),
                ("eig_gap", rec.eig_gap),
                ("form_violation", rec.form_violation),
            ] {
                t.push(vec![k.to_string(), fmt_f64(v)]);
            }
            Ok(Outcome {
                command: "critere",
                report: json!({"s": s, "record": value(&rec)?, "n_spectral_difference": c.n_spectral_difference()?}),
                table: t,
                checks: vec![Check::at_most("isometry defect", c.transport.isometry_defect(), 1e-10)],
            })
        }
        Command::PrescribeDistinct { targets, graph_out } => {
            let (g, rep) = prescribe_distinct(targets, &scan)?;
            write_graph(graph_out, &g)?;
            let mut t = Table::new(["eigenvalue", "multiplicity"]);
            for (v, m) in rep.eigenvalues.iter().zip(&rep.multiplicities) {
                t.push(vec![fmt_f64(*v), m.to_string()]);
            }
            let a_m = targets[targets.len() - 1];
            Ok(Outcome {
                command: "prescribe-distinct",
                report: json!({"graph": serde_json::from_str::<Value>(&g.to_json()?)?, "report": value(&rep)?}),
                table: t,
                checks: vec![
                    Check::at_most("relative eigenvalue error", rep.max_relative_error, tol(1e-8)),
                    Check::holds("leading eigenvalues simple", rep.all_simple),
                    Check::at_least("lambda_{m+1} - a_m", rep.lambda_next - a_m, 1.0),
                ],
            })
        }
        Command::PrescribeMult { n, pattern, gap, graph_out } => {
            let (p, rep) = prescribe_multiplicities(*n, &MultiplicityTarget::new(pattern.clone(), *gap), &NewtonConfig::default())?;
            let g = p.graph()?;
            write_graph(graph_out, &g)?;
            let mut t = Table::new(["eigenvalue"]);
            for v in &rep.cluster {
                t.push_floats(&[*v]);
            }
            let spread = rep.groups.iter().map(|g| g.spread).fold(0.0, f64::max);
            let gap_err = rep.inter_group_gaps.iter().map(|d| (d - gap).abs()).fold(0.0, f64::max);
            Ok(Outcome {
                command: "prescribe-mult",
                report: json!({"graph": serde_json::from_str::<Value>(&g.to_json()?)?, "report": value(&rep)?}),
                table: t,
                checks: vec![
                    Check::at_most("Newton iterations", rep.iterations as f64, 50.0),
                    Check::at_most("intra-group spread", spread, tol(1e-8)),
                    Check::at_most("inter-group gap error", gap_err, tol(1e-8)),
                    Check::at_most("|x|_inf", rep.x_max_abs, 0.1),
                    Check::holds("grouping reproduced at half scan step", rep.reverified),
                ],
            })
        }
        Command::RobinSweep { length, ladder, k } => {
            let rep = robin_dirichlet_sweep(*length, ladder, *k)?;
            let mut t = Table::new(["rho", "k", "lambda_robin", "lambda_dirichlet", "gap", "overlap", "bound"]);
            for r in &rep.rows {
                t.push(vec![
                    fmt_f64(r.rho),
                    r.k.to_string(),
                    fmt_f64(r.lambda_robin),
                    fmt_f64(r.lambda_dirichlet),
                    fmt_f64(r.gap),
                    fmt_f64(r.overlap),
                    fmt_f64(r.bound),
                ]);
            }
            Ok(Outcome {
                command: "robin-sweep",
                report: value(&rep)?,
                table: t,
                checks: vec![
                    Check::holds("gaps positive", rep.gaps_positive),
                    Check::holds("gaps decreasing", rep.gaps_decreasing),
                    Check::holds("overlap bounds", rep.bounds_hold),
                    Check::holds("overlaps increasing", rep.overlaps_increasing),
                ],
            })
        }
        Command::Overlap { length, rho, n_cluster } => {
            let rep = overlap_bounds(&RobinInterval::symmetric(*length, *rho)?, *n_cluster)?;
            let mut t = Table::new(["k", "overlap", "bound"]);
            for r in &rep.rows {
                t.push(vec![r.k.to_string(), fmt_f64(r.overlap), fmt_f64(r.bound)]);
            }
            Ok(Outcome {
                command: "overlap",
                report: value(&rep)?,
                table: t,
                checks: vec![Check::holds("overlap bounds", rep.holds)],
            })
        }
        Command::WeightedForm { n, length, rho, rho_bar, epsilon, count } => {
            let wf = match epsilon {
                Some(eps) => WeightedForm1D::collar(*n, *length, *rho, *rho_bar, *eps)?,
                None => WeightedForm1D::new(*n, *length, Profile::Uniform, [*rho_bar; 2])?,
            };
            let fem = wf.spectrum_to(*count, tol(1e-7))?;
            let limit: Vec<f64> =
                crate::robin::robin_spectrum(&RobinInterval::symmetric(*length, *rho_bar)?, *count)?
                    .iter()
                    .map(|p| p.eigenvalue)
                    .collect();
            let ne = wf.norm_equivalence(200, cfg.seed)?;
            let mut t = Table::new(["k", "eigenvalue", "limit"]);
            for (i, (a, b)) in fem.eigenvalues.iter().zip(&limit).enumerate() {
                t.push(vec![(i + 1).to_string(), fmt_f64(*a), fmt_f64(*b)]);
            }
            Ok(Outcome {
                command: "weighted-form",
                report: json!({"form": value(&wf)?, "spectrum": value(&fem)?, "limit": limit, "norm_equivalence": value(&ne)?}),
                table: t,
                checks: vec![Check::holds("norm equivalence within weight bounds", ne.holds())],
            })
        }
    }
}

/// Runs `cfg`, writes the rendered output and returns the process exit code:
/// 0 when every check passes, 1 when a check fails, 2 on errors.
pub fn main_with(cfg: &RunConfig) -> i32 {
    let outcome = match run(cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let text = match outcome.render(cfg.format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let written = match &cfg.output {
        Some(p) => std::fs::write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return 2;
    }
    for c in outcome.checks.iter().filter(|c| !c.passed) {
        eprintln!("check failed: {} = {} (threshold {})", c.name, fmt_f64(c.measured), fmt_f64(c.threshold));
    }
    if outcome.passed() {
        0
    } else {
        1
    }
}
