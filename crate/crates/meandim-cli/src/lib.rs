//! Experiment orchestration for the `meandim` binary: JSON configs, the four
//! sweep runners, and deterministic CSV/SVG emission.
//!
//! Every runner is a pure function of (config, data files): identical inputs
//! produce byte-identical CSV bytes regardless of the parallelism degree,
//! because work is partitioned by d value and merged in rank order.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use meandim::{
    estimate_gaussian_product_nu, estimate_mean_dimension_generic, estimate_mean_dimension_log_sum,
    estimate_mean_dimension_radial, exact_anova, exact_jansen_check, exact_total_index,
    gaussian_product_nu, load_direction_table, tune_theta, CoordinateLaw, DirectionTable,
    EstimateReport, FunctionSpec, InputModel,
};

pub const DEFAULT_DIRECTION_FILE: &str = "data/new-joe-kuo-6.21201.txt";

/// One discrete test instance for `oracle-compare`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleInstance {
    pub name: String,
    pub spec: FunctionSpec,
    pub laws: Vec<CoordinateLaw>,
}

/// A single JSON document drives every experiment; CLI flags override the
/// corresponding fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// explicit d list; wins over d_range when present
    pub d_values: Option<Vec<usize>>,
    /// inclusive [lo, hi]
    pub d_range: [usize; 2],
    pub p_values: Vec<f64>,
    pub theta_targets: Vec<f64>,
    /// dimension the theta tuner works in
    pub tuner_d: usize,
    /// common center shift c for multiquadric and Gaussian families
    pub center: f64,
    /// multiquadric offset a, folded into the first z coordinate for bounds
    pub a: f64,
    pub n: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub z3_df: f64,
    pub direction_file: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub log_transform: bool,
    pub oracle_instances: Option<Vec<OracleInstance>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::from("default"),
            d_values: None,
            d_range: [2, 1000],
            p_values: vec![-1.0, -0.5, 0.5],
            theta_targets: vec![1.5, 3.0, 7.0, 9.9],
            tuner_d: 10,
            center: 0.0,
            a: 1.0,
            n: 1 << 14,
            replicates: 5,
            master_seed: 2024,
            out_dir: PathBuf::from("out"),
            z3_df: 1.0,
            direction_file: None,
            jobs: None,
            log_transform: false,
            oracle_instances: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.n.is_power_of_two() {
            bail!("n = {} must be a power of two for the QMC paths", self.n);
        }
        if self.replicates == 0 {
            bail!("replicates must be >= 1");
        }
        if self.z3_df != 1.0 && self.z3_df != 2.0 {
            bail!("z3_df must be 1 or 2, got {}", self.z3_df);
        }
        for &d in self.d_list().iter() {
            if d == 0 {
                bail!("d values must be >= 1");
            }
        }
        if self.d_range[0] > self.d_range[1] {
            bail!("d_range lo > hi");
        }
        Ok(())
    }

    pub fn d_list(&self) -> Vec<usize> {
        match &self.d_values {
            Some(v) => v.clone(),
            None => (self.d_range[0]..=self.d_range[1]).collect(),
        }
    }
}

/// Read a config file, or start from defaults when none is given.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    Ok(cfg)
}

/// Direction-file precedence: `--dirs` flag, then the config field, then the
/// MEANDIM_DIRS environment variable, then the bundled default path.
pub fn resolve_direction_file(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.direction_file {
        return p.clone();
    }
    if let Ok(p) = std::env::var("MEANDIM_DIRS") {
        return PathBuf::from(p);
    }
    PathBuf::from(DEFAULT_DIRECTION_FILE)
}

pub fn load_table(path: &Path) -> Result<DirectionTable> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    load_direction_table(BufReader::new(file))
        .with_context(|| format!("parsing direction numbers from {}", path.display()))
}

/// 17 significant digits, '.' decimal, stable across platforms.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') || s.contains('\r') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// RFC 4180: CRLF line endings, quoting only where needed.
pub fn render_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(","));
    out.push_str("\r\n");
    for row in rows {
        out.push_str(&row.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","));
        out.push_str("\r\n");
    }
    out
}

fn write_out(dir: &Path, name: &str, bytes: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn run_in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(j).build()?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn report_rows(d_label: String, report: &EstimateReport, master_seed: u64) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                d_label.clone(),
                r.replicate.to_string(),
                report.n.to_string(),
                fmt_float(r.sigma2),
                fmt_float(r.sum_tau2),
                fmt_float(r.nu),
                r.seed.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        d_label,
        String::from("pooled"),
        report.n.to_string(),
        fmt_float(report.pooled_sigma2),
        fmt_float(report.pooled_sum_tau2),
        fmt_float(report.pooled_nu),
        master_seed.to_string(),
    ]);
    rows
}

pub struct KeisterSweepOutput {
    pub csv_path: PathBuf,
    pub svg_path: PathBuf,
    pub reports: Vec<EstimateReport>,
}

/// Figure-1 style sweep: nu of the Keister function versus sqrt(d), five
/// replicate traces, dotted reference lines at 1 and 2.
pub fn cmd_keister_sweep(cfg: &ExperimentConfig, table: &DirectionTable) -> Result<KeisterSweepOutput> {
    cfg.validate()?;
    let ds = cfg.d_list();
    let fradial = |s: f64| (s.sqrt() * 0.5).cos();
    let reports: Vec<EstimateReport> = run_in_pool(cfg.jobs, || {
        ds.par_iter()
            .map(|&d| {
                estimate_mean_dimension_radial(
                    table,
                    fradial,
                    d,
                    cfg.n,
                    cfg.replicates,
                    cfg.master_seed,
                    cfg.z3_df,
                )
            })
            .collect::<Result<Vec<_>, _>>()
    })??;

    let mut rows = Vec::new();
    for (d, report) in ds.iter().zip(&reports) {
        rows.extend(report_rows(d.to_string(), report, cfg.master_seed));
    }
    let csv = render_csv(
        &["d", "replicate", "n", "sigma2", "sum_tau2", "nu", "seed"],
        &rows,
    );
    let csv_path = write_out(&cfg.out_dir, "keister_sweep.csv", &csv)?;
    let svg = render_keister_svg(&ds, &reports, cfg.replicates);
    let svg_path = write_out(&cfg.out_dir, "keister_sweep.svg", &svg)?;
    Ok(KeisterSweepOutput {
        csv_path,
        svg_path,
        reports,
    })
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 500.0;
const TRACE_COLORS: [&str; 5] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

/// Fixed-viewBox SVG so golden-file comparison works after stripping the
/// one timestamp comment line.
pub fn render_keister_svg(ds: &[usize], reports: &[EstimateReport], replicates: usize) -> String {
    let (x_lo, x_hi) = (0.0f64, (1024.0f64).sqrt());
    let (y_lo, y_hi) = (0.9f64, 2.4f64);
    let x = |d: usize| 60.0 + ((d as f64).sqrt() - x_lo) / (x_hi - x_lo) * (SVG_W - 100.0);
    let y = |nu: f64| {
        let clamped = nu.clamp(y_lo, y_hi);
        SVG_H - 40.0 - (clamped - y_lo) / (y_hi - y_lo) * (SVG_H - 80.0)
    };
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|t| t.as_secs())
        .unwrap_or(0);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SVG_W} {SVG_H}\" width=\"{SVG_W}\" height=\"{SVG_H}\">\n"
    ));
    svg.push_str(&format!("<!-- generated-at: {stamp} -->\n"));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>\n"
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"60\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        SVG_H - 40.0,
        SVG_W - 40.0
    ));
    svg.push_str(&format!(
        "<line x1=\"60\" y1=\"40\" x2=\"60\" y2=\"{}\" stroke=\"black\"/>\n",
        SVG_H - 40.0
    ));
    svg.push_str(
        "<text x=\"400\" y=\"492\" font-size=\"14\" text-anchor=\"middle\">sqrt(d)</text>\n",
    );
    svg.push_str(
        "<text x=\"18\" y=\"250\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 250)\">mean dimension</text>\n",
    );
    // dotted reference lines at nu = 1 and nu = 2
    for r in [1.0f64, 2.0] {
        svg.push_str(&format!(
            "<line x1=\"60\" y1=\"{0:.2}\" x2=\"{1}\" y2=\"{0:.2}\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n",
            y(r),
            SVG_W - 40.0
        ));
    }
    // one polyline per replicate
    for rep in 0..replicates {
        let pts: Vec<String> = ds
            .iter()
            .zip(reports)
            .map(|(&d, report)| format!("{:.2},{:.2}", x(d), y(report.rows[rep].nu)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"{}\"/>\n",
            TRACE_COLORS[rep % TRACE_COLORS.len()],
            pts.join(" ")
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// z-coordinate laws for a multiquadric cell: noncentral chi-square(1) with
/// shift c, the offset a folded into the first coordinate.
pub fn multiquadric_z_laws(d: usize, c: f64, a: f64) -> Vec<CoordinateLaw> {
    let base = CoordinateLaw::NormalShift { c };
    let mut laws = vec![base.clone(); d];
    if a != 0.0 {
        laws[0] = CoordinateLaw::Offset {
            a,
            inner: Box::new(base),
        };
    }
    laws
}

pub struct BoundRow {
    pub p: f64,
    pub d: usize,
    pub report: EstimateReport,
    pub nu_bound: f64,
    pub moment_expansion: f64,
    pub variance_expansion: f64,
    /// undefined at p = 1, where the corrections vanish in the limit
    pub tau_sum_bound: Option<f64>,
    pub gap_scaled: f64,
    pub nu_log: Option<f64>,
}

pub struct MultiquadricBoundOutput {
    pub csv_path: PathBuf,
    pub rows: Vec<BoundRow>,
}

/// Estimated nu for generalized multiquadrics against the closed-form bound
/// and expansions, over the (p, d) grid.
pub fn cmd_multiquadric_bound(
    cfg: &ExperimentConfig,
    table: &DirectionTable,
) -> Result<MultiquadricBoundOutput> {
    cfg.validate()?;
    let ds = cfg.d_list();
    let mut cells = Vec::new();
    for &p in &cfg.p_values {
        if p == 0.0 || p > 1.0 {
            bail!("p values must be nonzero and <= 1, got {p}");
        }
        for &d in &ds {
            cells.push((p, d));
        }
    }
    let rows: Vec<BoundRow> = run_in_pool(cfg.jobs, || {
        cells
            .par_iter()
            .map(|&(p, d)| -> Result<BoundRow> {
                // With all centers at 0 the integrand is radial: |x|^2 is
                // chi-square(d) and the coordinates are exchangeable, so the
                // three-dimensional radial Jansen pipeline applies and
                // resolves nu - 1 = O(1/d) far below the noise floor of the
                // 2d-dimensional generic estimator.
                let a = cfg.a;
                let report = if cfg.center == 0.0 && d >= 2 {
                    estimate_mean_dimension_radial(
                        table,
                        move |s: f64| (a + s).powf(p),
                        d,
                        cfg.n,
                        cfg.replicates,
                        cfg.master_seed,
                        cfg.z3_df,
                    )?
                } else {
                    let spec = FunctionSpec::Multiquadric {
                        p,
                        a,
                        centers: vec![cfg.center; d],
                    };
                    let inputs = InputModel::new(vec![CoordinateLaw::StandardNormal; d])?;
                    estimate_mean_dimension_generic(
                        table,
                        &spec,
                        &inputs,
                        cfg.n,
                        cfg.replicates,
                        cfg.master_seed,
                    )?
                };
                let z_model = InputModel::new(multiquadric_z_laws(d, cfg.center, cfg.a))?;
                let summary = z_model.summary();
                let nu_bound = meandim::theorem_nu_bound(&summary, p)?;
                let moment = meandim::moment_expansion_p(&summary, p)?;
                let variance = meandim::variance_expansion(&summary, p)?;
                let tau_bound = if p < 1.0 {
                    Some(meandim::tau_sum_bound(&summary, p)?)
                } else {
                    None
                };
                let nu_log = if cfg.log_transform {
                    Some(
                        estimate_mean_dimension_log_sum(
                            table,
                            &z_model,
                            cfg.n,
                            cfg.replicates,
                            cfg.master_seed,
                        )?
                        .pooled_nu,
                    )
                } else {
                    None
                };
                Ok(BoundRow {
                    p,
                    d,
                    gap_scaled: (report.pooled_nu - 1.0) * d as f64,
                    nu_bound,
                    moment_expansion: moment,
                    variance_expansion: variance,
                    tau_sum_bound: tau_bound,
                    report,
                    nu_log,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut out_rows = Vec::new();
    for row in &rows {
        out_rows.push(vec![
            fmt_float(row.p),
            row.d.to_string(),
            row.report.n.to_string(),
            fmt_float(row.report.pooled_sigma2),
            fmt_float(row.report.pooled_sum_tau2),
            fmt_float(row.report.pooled_nu),
            fmt_float(row.report.se_nu),
            fmt_float(row.nu_bound),
            fmt_float(row.moment_expansion),
            fmt_float(row.variance_expansion),
            row.tau_sum_bound.map(fmt_float).unwrap_or_default(),
            fmt_float(row.gap_scaled),
            row.nu_log.map(fmt_float).unwrap_or_default(),
        ]);
    }
    let csv = render_csv(
        &[
            "p",
            "d",
            "n",
            "sigma2",
            "sum_tau2",
            "nu",
            "se_nu",
            "nu_bound",
            "moment_expansion",
            "variance_expansion",
            "tau_sum_bound",
            "gap_scaled",
            "nu_log",
        ],
        &out_rows,
    );
    let csv_path = write_out(&cfg.out_dir, "multiquadric_bound.csv", &csv)?;
    Ok(MultiquadricBoundOutput { csv_path, rows })
}

pub struct TuneRow {
    pub target: f64,
    pub theta: f64,
    pub nu_closed: f64,
    pub report: EstimateReport,
}

pub struct GaussianTuneOutput {
    pub csv_path: PathBuf,
    pub rows: Vec<TuneRow>,
}

/// Solve for theta hitting each target mean dimension, then confirm by both
/// the closed form and the per-coordinate RQMC estimator.
pub fn cmd_gaussian_tune(cfg: &ExperimentConfig, table: &DirectionTable) -> Result<GaussianTuneOutput> {
    cfg.validate()?;
    let d = cfg.tuner_d;
    let centers = vec![cfg.center; d];
    for &t in &cfg.theta_targets {
        if !(t > 1.0 && t < d as f64) {
            bail!("target nu {t} must lie strictly inside (1, {d})");
        }
    }
    let rows: Vec<TuneRow> = run_in_pool(cfg.jobs, || {
        cfg.theta_targets
            .par_iter()
            .map(|&target| -> Result<TuneRow> {
                let theta = tune_theta(d, &centers, target, 1e-9)?;
                let nu_closed = gaussian_product_nu(theta, &centers)?;
                let report = estimate_gaussian_product_nu(
                    table,
                    theta,
                    &centers,
                    cfg.n,
                    cfg.replicates,
                    cfg.master_seed,
                )?;
                Ok(TuneRow {
                    target,
                    theta,
                    nu_closed,
                    report,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let out_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt_float(r.target),
                fmt_float(r.theta),
                fmt_float(r.nu_closed),
                fmt_float(r.report.pooled_nu),
                fmt_float(r.report.se_nu),
                r.report.n.to_string(),
            ]
        })
        .collect();
    let csv = render_csv(
        &["target", "theta", "nu_closed", "nu_hat", "se_nu", "n"],
        &out_rows,
    );
    let csv_path = write_out(&cfg.out_dir, "gaussian_tune.csv", &csv)?;
    Ok(GaussianTuneOutput { csv_path, rows })
}

pub struct OracleRow {
    pub name: String,
    pub d: usize,
    pub nu_exact: f64,
    pub report: EstimateReport,
    pub gap: f64,
    pub pass: bool,
    /// max relative disagreement between Jansen-by-enumeration and the
    /// subset-sum total index, over all coordinates
    pub jansen_gap: f64,
}

pub struct OracleCompareOutput {
    pub csv_path: PathBuf,
    pub rows: Vec<OracleRow>,
}

/// The built-in battery of discrete instances: mixed supports, d <= 6, every
/// integrand family represented.
pub fn default_oracle_instances() -> Vec<OracleInstance> {
    fn uniform(values: &[f64]) -> CoordinateLaw {
        CoordinateLaw::FiniteDiscrete {
            values: values.to_vec(),
            probs: vec![1.0 / values.len() as f64; values.len()],
        }
    }
    let pm_one = uniform(&[-1.0, 1.0]);
    let z12 = uniform(&[1.0, 2.0]);
    let mqz = |p: f64, law: &CoordinateLaw, d: usize| -> (FunctionSpec, Vec<CoordinateLaw>) {
        let laws = vec![law.clone(); d];
        let mu_sum = InputModel::new(laws.clone()).unwrap().summary().mu_sum;
        (FunctionSpec::MultiquadricZ { p, d, mu_sum }, laws)
    };
    let mut out = Vec::new();
    let mut push = |name: &str, spec: FunctionSpec, laws: Vec<CoordinateLaw>| {
        out.push(OracleInstance {
            name: name.to_string(),
            spec,
            laws,
        });
    };

    push(
        "additive_d4",
        FunctionSpec::SyntheticAdditive { d: 4 },
        vec![pm_one.clone(); 4],
    );
    push(
        "product_d3",
        FunctionSpec::SyntheticProduct { d: 3 },
        vec![pm_one.clone(); 3],
    );
    let (s, l) = mqz(0.5, &z12, 2);
    push("mqz_half_d2", s, l);
    let (s, l) = mqz(0.5, &z12, 3);
    push("mqz_half_d3", s, l);
    let (s, l) = mqz(0.5, &z12, 6);
    push("mqz_half_d6", s, l);
    let (s, l) = mqz(-0.5, &uniform(&[0.5, 1.5, 3.0]), 3);
    push("mqz_neg_half_d3", s, l);
    let (s, l) = mqz(-1.0, &uniform(&[1.0, 2.0, 4.0]), 2);
    push("mqz_neg_one_d2", s, l);
    let disc_normal = CoordinateLaw::FiniteDiscrete {
        values: vec![-1.5, 0.0, 1.5],
        probs: vec![0.25, 0.5, 0.25],
    };
    push(
        "gaussian_theta1_d3",
        FunctionSpec::GaussianProduct {
            theta: 1.0,
            centers: vec![0.0; 3],
        },
        vec![disc_normal.clone(); 3],
    );
    push(
        "gaussian_theta06_d4",
        FunctionSpec::GaussianProduct {
            theta: 0.6,
            centers: vec![0.0; 4],
        },
        vec![uniform(&[-1.0, 0.0, 1.0]); 4],
    );
    push(
        "keister_d3",
        FunctionSpec::Keister { d: 3 },
        vec![uniform(&[-2.0, -0.5, 0.5, 2.0]); 3],
    );
    push(
        "keister_d5",
        FunctionSpec::Keister { d: 5 },
        vec![disc_normal; 5],
    );
    push(
        "multiquadric_x_d4",
        FunctionSpec::Multiquadric {
            p: 0.5,
            a: 1.0,
            centers: vec![0.0; 4],
        },
        vec![
            CoordinateLaw::FiniteDiscrete {
                values: vec![-1.0, 0.0, 1.0],
                probs: vec![0.3, 0.4, 0.3],
            };
            4
        ],
    );
    out
}

/// Exact ANOVA versus the generic estimator on every discrete instance;
/// pass means |nu_hat - nu_exact| <= max(0.01, 3 SE).
pub fn cmd_oracle_compare(cfg: &ExperimentConfig, table: &DirectionTable) -> Result<OracleCompareOutput> {
    cfg.validate()?;
    let instances = cfg
        .oracle_instances
        .clone()
        .unwrap_or_else(default_oracle_instances);
    let rows: Vec<OracleRow> = run_in_pool(cfg.jobs, || {
        instances
            .par_iter()
            .map(|inst| -> Result<OracleRow> {
                let inputs = InputModel::new(inst.laws.clone())?;
                let exact = exact_anova(&inst.spec, &inputs)?;
                let mut jansen_gap = 0.0f64;
                for j in 0..exact.d {
                    let a = exact_total_index(&exact, j)?;
                    let b = exact_jansen_check(&inst.spec, &inputs, j)?;
                    jansen_gap = jansen_gap.max((a - b).abs() / a.abs().max(1e-300));
                }
                let report = estimate_mean_dimension_generic(
                    table,
                    &inst.spec,
                    &inputs,
                    cfg.n,
                    cfg.replicates,
                    cfg.master_seed,
                )?;
                let gap = (report.pooled_nu - exact.nu).abs();
                let pass = gap <= (3.0 * report.se_nu).max(0.01);
                Ok(OracleRow {
                    name: inst.name.clone(),
                    d: exact.d,
                    nu_exact: exact.nu,
                    gap,
                    pass,
                    jansen_gap,
                    report,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let out_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.d.to_string(),
                fmt_float(r.nu_exact),
                fmt_float(r.report.pooled_nu),
                fmt_float(r.report.se_nu),
                fmt_float(r.gap),
                fmt_float(r.jansen_gap),
                if r.pass { "pass" } else { "fail" }.to_string(),
            ]
        })
        .collect();
    let csv = render_csv(
        &[
            "name",
            "d",
            "nu_exact",
            "nu_hat",
            "se_nu",
            "gap",
            "jansen_gap",
            "status",
        ],
        &out_rows,
    );
    let csv_path = write_out(&cfg.out_dir, "oracle_compare.csv", &csv)?;
    Ok(OracleCompareOutput { csv_path, rows })
}
