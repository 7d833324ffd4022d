use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use fraccontrol::biorthogonal::{MomentFamily, DEFAULT_TRUNC, FAMILY_PRODUCT_TOL};
use fraccontrol::exec::{self, Mode};
use fraccontrol::experiments::{constant_audit, cost_sweep, SweepConfig, AUDIT_ALPHA, AUDIT_S};
use fraccontrol::simulator::evolve;
use fraccontrol::synthesis::{
    default_truncation, min_norm_control, moment_control, ControlSignal, InversionOptions, ModalState,
    MomentOptions, MP_COST_TOL,
};
use fraccontrol::{Error, FracModel, ModelKind, Result};

#[derive(Parser)]
#[command(name = "fraccontrol", version, about = "Boundary null-controls for fractional heat and Schrödinger equations")]
struct Cli {
    /// Run every data-parallel loop sequentially.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Heat,
    Schrodinger,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Heat => ModelKind::Heat,
            Model::Schrodinger => ModelKind::Schrodinger,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Moment,
    Gramian,
}

#[derive(Args)]
struct ModelArgs {
    /// Fractional order s in (1/2, 1].
    #[arg(long)]
    s: f64,
    /// Control horizon.
    #[arg(long = "T", alias = "t")]
    t: f64,
    #[arg(long, value_enum)]
    model: Model,
}

impl ModelArgs {
    fn frac_model(&self) -> Result<FracModel> {
        FracModel::new(self.s, self.model.into())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form constants against quadrature, as CSV.
    Constants {
        #[arg(long, value_delimiter = ',', default_values_t = AUDIT_S.to_vec())]
        s_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = AUDIT_ALPHA.to_vec())]
        alpha_list: Vec<f64>,
        /// Output file (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kronecker errors |g_n(node_k) − δ_nk| of the biorthogonal family, as CSV.
    VerifyBiorthogonal {
        #[command(flatten)]
        model: ModelArgs,
        /// Largest n and k checked.
        #[arg(long, default_value_t = 20)]
        size: usize,
        /// Explicit factors in the product.
        #[arg(long, default_value_t = DEFAULT_TRUNC)]
        trunc: usize,
        /// Multiplier parameter g0 = νT/2.
        #[arg(long, default_value_t = 1.0)]
        g0: f64,
        /// Exit with failure when an error exceeds this bound.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds a null-control and writes it as CSV (t, re_u, im_u) with a JSON manifest.
    Synthesize {
        #[command(flatten)]
        model: ModelArgs,
        /// `modal:<k>` for the k-th eigenfunction, or a JSON ModalState file.
        #[arg(long)]
        y0: String,
        #[arg(long, value_enum, default_value = "moment")]
        method: Method,
        /// Gramian truncation (default: dissipation rule for heat, support of y0 for Schrödinger).
        #[arg(long)]
        n: Option<usize>,
        /// Samples of u on [0, T] (default 2^16 + 1; 2^20 + 1 for the heat Gramian).
        #[arg(long)]
        samples: Option<usize>,
        /// Multiplier parameter g0; calibrated when absent.
        #[arg(long)]
        g0: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_TRUNC)]
        trunc: usize,
        #[arg(long)]
        out: PathBuf,
        /// Manifest path (default: the output path with a .json extension).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Evolves y0 under a control file and reports the terminal state as JSON.
    Simulate {
        #[arg(long)]
        control: PathBuf,
        #[arg(long)]
        s: f64,
        /// Horizon; must match the control file when given.
        #[arg(long = "T", alias = "t")]
        t: Option<f64>,
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long, default_value_t = 30)]
        n_modes: usize,
        #[arg(long, default_value = "modal:1")]
        y0: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cost-vs-T sweep with a scaling-law fit.
    CostSweep {
        /// Flat JSON config; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base path for the CSV and JSON outputs (overrides output_path).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every constant check and the counting-product asymptotics, as JSON.
    Audit {
        #[arg(long, value_delimiter = ',', default_values_t = AUDIT_S.to_vec())]
        s_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = AUDIT_ALPHA.to_vec())]
        alpha_list: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_y0(spec: &str) -> Result<ModalState> {
    match spec.strip_prefix("modal:") {
        Some(k) => {
            let k: usize = k
                .parse()
                .map_err(|_| Error::Config(format!("bad mode index in `{spec}`")))?;
            ModalState::eigenmode(k, k)
        }
        None => ModalState::load(spec),
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Serialize)]
struct KroneckerRow {
    n: usize,
    k: usize,
    error: f64,
}

#[derive(Serialize)]
struct SynthesisManifest<'a> {
    s: f64,
    #[serde(rename = "T")]
    t: f64,
    model: ModelKind,
    y0: &'a str,
    method: Method,
    samples: usize,
    output: String,
    log_cost: f64,
    cost: f64,
    tolerances: serde_json::Value,
    diagnostics: serde_json::Value,
}

#[allow(clippy::too_many_arguments)]
fn synthesize(
    margs: &ModelArgs,
    y0_spec: &str,
    method: Method,
    n: Option<usize>,
    samples: Option<usize>,
    g0: Option<f64>,
    trunc: usize,
    out: &Path,
    manifest: Option<&Path>,
) -> Result<()> {
    let model = margs.frac_model()?;
    let y0 = parse_y0(y0_spec)?;
    let (control, log_cost, tolerances, diagnostics) = match method {
        Method::Moment => {
            let inversion = InversionOptions {
                n_t: samples.unwrap_or((1 << 16) + 1),
                ..Default::default()
            };
            let opts = MomentOptions {
                g0,
                trunc,
                inversion,
                ..Default::default()
            };
            let m = moment_control(&y0, margs.t, &model, &opts)?;
            let tol = serde_json::json!({
                "tail_tol": inversion.tail_tol,
                "family_product_tol": FAMILY_PRODUCT_TOL,
                "trunc": trunc,
            });
            let diag = serde_json::json!({
                "g0": m.g0,
                "calibration": m.calibration,
                "inversion": m.inversion,
            });
            (m.control, m.log_cost, tol, diag)
        }
        Method::Gramian => {
            let n = n.unwrap_or_else(|| default_truncation(&y0, margs.t, &model));
            let default_samples = match model.kind {
                ModelKind::Heat => (1 << 20) + 1,
                ModelKind::Schrodinger => (1 << 16) + 1,
            };
            let g = min_norm_control(&y0, margs.t, n, &model, samples.unwrap_or(default_samples))?;
            let tol = serde_json::json!({ "mp_cost_tol": MP_COST_TOL });
            let diag = serde_json::json!({
                "n": g.n,
                "precision_bits": g.precision_bits,
                "min_pivot": g.min_pivot,
            });
            (g.control, g.log_cost, tol, diag)
        }
    };
    control.save_csv(out)?;
    let m = SynthesisManifest {
        s: margs.s,
        t: margs.t,
        model: model.kind,
        y0: y0_spec,
        method,
        samples: control.len(),
        output: out.display().to_string(),
        log_cost,
        cost: log_cost.exp(),
        tolerances,
        diagnostics,
    };
    let path = manifest.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("json"));
    write_json(&m, Some(&path))
}

fn run(cli: Cli) -> Result<bool> {
    if cli.sequential {
        exec::set_mode(Mode::Sequential);
    }
    match cli.command {
        Command::Constants {
            s_list,
            alpha_list,
            out,
        } => {
            let report = constant_audit(&s_list, &alpha_list)?;
            let mut wr = csv::Writer::from_writer(sink(out.as_deref())?);
            for row in &report.constants {
                wr.serialize(row)?;
            }
            wr.flush()?;
            Ok(report.constants.iter().all(|r| r.pass))
        }
        Command::VerifyBiorthogonal {
            model,
            size,
            trunc,
            g0,
            tol,
            out,
        } => {
            let fam = MomentFamily::new(&model.frac_model()?, model.t, g0, trunc, size)?;
            let errs = fam.kronecker_errors(size)?;
            let mut wr = csv::Writer::from_writer(sink(out.as_deref())?);
            let mut worst: f64 = 0.0;
            for (i, row) in errs.iter().enumerate() {
                for (k, e) in row.iter().enumerate() {
                    wr.serialize(KroneckerRow { n: i + 1, k: k + 1, error: *e })?;
                    worst = worst.max(*e);
                }
            }
            wr.flush()?;
            eprintln!("max |g_n(node_k) - delta_nk| = {worst:e}");
            Ok(worst <= tol)
        }
        Command::Synthesize {
            model,
            y0,
            method,
            n,
            samples,
            g0,
            trunc,
            out,
            manifest,
        } => {
            synthesize(&model, &y0, method, n, samples, g0, trunc, &out, manifest.as_deref())?;
            Ok(true)
        }
        Command::Simulate {
            control,
            s,
            t,
            model,
            n_modes,
            y0,
            out,
        } => {
            let u = ControlSignal::load_csv(&control)?;
            if let Some(t) = t {
                if (t - u.t_end).abs() > 1e-9 * t {
                    return Err(Error::Config(format!(
                        "--T {t} disagrees with the control horizon {}",
                        u.t_end
                    )));
                }
            }
            let m = FracModel::new(s, model.into())?;
            let report = evolve(&parse_y0(&y0)?, &u, &m, n_modes)?;
            write_json(&report, out.as_deref())?;
            Ok(true)
        }
        Command::CostSweep { config, out } => {
            let mut cfg = match config {
                Some(p) => SweepConfig::load(p)?,
                None => SweepConfig::default(),
            };
            if let Some(o) = out {
                cfg.output_path = Some(o.display().to_string());
            }
            let report = cost_sweep(&cfg)?;
            if let Some(base) = &report.config.output_path {
                report.save(base)?;
            }
            write_json(&report.fit, None)?;
            Ok(true)
        }
        Command::Audit {
            s_list,
            alpha_list,
            out,
        } => {
            let report = constant_audit(&s_list, &alpha_list)?;
            write_json(&report, out.as_deref())?;
            Ok(report.all_pass)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
