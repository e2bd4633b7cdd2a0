use clap::{Args, Parser, Subcommand};
use gotd::pipeline::{
    emit_report, evaluate_qois, run_pipeline, synth_generate, write_tensor, DataSource, ModelFamily, OptimizerKind,
    Overrides, RunConfig, RunReport, Stage,
};
use gotd::Error;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

/// Goal-oriented CP and Tucker decompositions.
///
/// Exit status: 0 on success, 2 for configuration or input errors,
/// 3 for numerical failures.
#[derive(Parser)]
#[command(name = "gotd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a low-rank-plus-noise tensor file (`--out` is the file).
    Synth(Common),
    /// Fit a CP model by alternating least squares.
    CpAls(Common),
    /// Fit a Tucker model by sequentially truncated HOSVD.
    Sthosvd(Common),
    /// CP-ALS followed by goal-oriented refinement.
    GoCp(Common),
    /// ST-HOSVD followed by goal-oriented refinement.
    GoTucker(Common),
    /// Evaluate the configured QoIs on the input data.
    QoiEval(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (flat key = value file).
    #[arg(long)]
    config: PathBuf,
    /// CP rank (`synth`: rank of the generated tensor).
    #[arg(long)]
    rank: Option<usize>,
    /// ST-HOSVD tolerance for Tucker runs, ALS stopping tolerance for CP runs.
    #[arg(long)]
    tol: Option<f64>,
    /// Outer optimizer iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// tr-newton or lbfgs.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (`synth`: output tensor file).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self, model: Option<ModelFamily>) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(m) = model {
            if cfg.model.is_some_and(|c| c != m) {
                return Err(Error::Config(format!("config sets model = {:?}, subcommand needs {m:?}", cfg.model.unwrap())));
            }
            cfg.model = Some(m);
            if m == ModelFamily::Tucker && self.rank.is_some() {
                return Err(Error::Config("--rank applies to CP; use --tol or ranks = … for Tucker".into()));
            }
        }
        let optimizer = self.optimizer.as_deref().map(str::parse::<OptimizerKind>).transpose()?;
        cfg.apply(&Overrides {
            rank: self.rank,
            tol: self.tol,
            iters: self.iters,
            optimizer,
            seed: self.seed,
            out: self.out.clone(),
        });
        cfg.opt.validate()?;
        Ok(cfg)
    }
}

fn print_report(r: &RunReport) {
    let s = &r.summary;
    let model = match s.model {
        ModelFamily::Cp => "CP",
        ModelFamily::Tucker => "Tucker",
    };
    println!(
        "{model} ranks {:?}, {} parameters, compression {:.1}x",
        s.ranks, s.param_count, s.compression_ratio
    );
    let te = &s.tensor_error;
    println!(
        "tensor error  scaled {:.4e} -> {:.4e}  unscaled {:.4e} -> {:.4e}",
        te.scaled_initial, te.scaled_final, te.unscaled_initial, te.unscaled_final
    );
    if let (Some(f0), Some(f1), Some(b)) = (s.f_go_initial, s.f_go_final, s.f_go_lower_bound) {
        println!("f_go {f0:.6} -> {f1:.6} (1/(Q+1) = {b:.6}), {} accepted of {}", s.accepted_iterations, s.iteration_budget);
    }
    for q in &s.qois {
        println!(
            "qoi {:<16} rel err {:.4e} -> {:.4e}{}",
            q.name,
            q.relative_error_initial,
            q.relative_error_final,
            if q.in_objective { "" } else { "  (already preserved)" }
        );
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (common, stage, model) = match &cli.command {
        Command::Synth(c) => return synth(c),
        Command::QoiEval(c) => return qoi_eval(c),
        Command::CpAls(c) => (c, Stage::ClassicFit, ModelFamily::Cp),
        Command::Sthosvd(c) => (c, Stage::ClassicFit, ModelFamily::Tucker),
        Command::GoCp(c) => (c, Stage::GoalOriented, ModelFamily::Cp),
        Command::GoTucker(c) => (c, Stage::GoalOriented, ModelFamily::Tucker),
    };
    let cfg = common.load(Some(model))?;
    let report = run_pipeline(&cfg, stage)?;
    print_report(&report);
    if let Some(out) = &cfg.out {
        emit_report(&report, out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn synth(c: &Common) -> Result<(), Error> {
    if c.tol.is_some() || c.iters.is_some() || c.optimizer.is_some() {
        return Err(Error::Config("synth takes only --rank, --seed and --out".into()));
    }
    let mut cfg = RunConfig::load(&c.config)?;
    let Some(DataSource::Synth(spec)) = &mut cfg.data else {
        return Err(Error::Config("synth needs synth.dims in the config".into()));
    };
    if let Some(r) = c.rank {
        spec.rank = r;
    }
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    let out = c.out.clone().or(cfg.out.clone()).ok_or_else(|| Error::Config("synth needs --out or out".into()))?;
    let x = synth_generate(spec).map_err(|e| Error::Config(e.to_string()))?;
    write_tensor(&out, &x)?;
    println!("wrote {:?} tensor to {}", x.dims(), out.display());
    Ok(())
}

fn qoi_eval(c: &Common) -> Result<(), Error> {
    let cfg = c.load(None)?;
    let values = evaluate_qois(&cfg)?;
    let mut csv = String::from("time,qoi_name,value\n");
    for (name, traj) in &values {
        for (t, v) in traj.iter().enumerate() {
            let _ = writeln!(csv, "{t},{name},{v:.16e}");
        }
    }
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("qoi_values.csv"), csv)?;
            println!("wrote {}", dir.join("qoi_values.csv").display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
