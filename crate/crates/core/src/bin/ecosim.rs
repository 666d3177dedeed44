use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ecosim::{
    config::validate_config, replicate_figure, run_experiment, ChiSquareReport, EcoError, ExperimentConfig,
    ExperimentSummary, Overrides, Profile,
};

#[derive(Parser)]
#[command(name = "ecosim", version, about = "Evolving service ecosystem simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Worker threads; the output is identical for any value.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            runs: self.runs,
            seed: self.seed,
            steps: self.steps,
            workers: self.workers,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Run the preset experiment behind one of figures 5-10.
    ReplicateFigure {
        #[arg(long)]
        figure: u32,
        #[arg(long, default_value = "desk")]
        profile: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Check a config file and list every problem.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn print_report(label: &str, report: &Option<ChiSquareReport>) {
    match report {
        Some(r) => println!(
            "{label}: chi2 {:.3} dof {} p {:.4} lower-5% critical {:.3} standard_pass {} paper_style_pass {}",
            r.statistic, r.dof, r.upper_p_value, r.lower_critical_005, r.standard_pass, r.paper_style_pass
        ),
        None => println!("{label}: no observations"),
    }
}

fn print_summary(s: &ExperimentSummary) {
    println!(
        "requests {} (succeeded {}, failed {}), {} runs in {:.1}s",
        s.issued_requests,
        s.successful_requests,
        s.failed_requests,
        s.seeds.len(),
        s.elapsed_seconds
    );
    print_report("size", &s.size_report);
    print_report("attributes", &s.attr_report);
}

fn execute(cli: Cli) -> Result<(), EcoError> {
    match cli.command {
        Command::Run { config, args } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            args.overrides().apply(&mut cfg);
            cfg.validate()?;
            let out = args
                .out
                .clone()
                .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
                .ok_or_else(|| EcoError::Usage("no --out given and the config has no output_dir".into()))?;
            let outcome = run_experiment(&cfg, args.workers)?;
            outcome.write(&out)?;
            print_summary(&outcome.summary);
        }
        Command::ReplicateFigure {
            figure,
            profile,
            args,
        } => {
            let profile: Profile = profile.parse()?;
            let out = args
                .out
                .clone()
                .ok_or_else(|| EcoError::Usage("replicate-figure needs --out".into()))?;
            let outcome = replicate_figure(figure, profile, &args.overrides(), &out)?;
            print_summary(&outcome.summary);
        }
        Command::ValidateConfig { config } => {
            let diags = validate_config(&config)?;
            if diags.is_empty() {
                println!("{}: ok", config.display());
            } else {
                for d in &diags {
                    println!("{d}");
                }
                return Err(EcoError::Config(format!("{} problem(s) found", diags.len())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ecosim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
