use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use interference::experiment::{
    cmd_double_slit, cmd_meanfield, cmd_policy_dump, cmd_tables, cmd_train_eval, RunConfig,
};
use interference::trainer::Schedule;

#[derive(Parser)]
#[command(name = "interference", version, about = "Route-learning classifier experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Few-shot training and test accuracy, with the backpropagation baseline.
    TrainEval(Common),
    /// Similarity, arrival-time and entropy tables of a trained route table.
    Tables(Common),
    /// Rotating-source phase classification.
    DoubleSlit(Common),
    /// Mean-field activation curves and the critical neighbour count.
    Meanfield(Common),
    /// Per-row summary of a saved route table.
    PolicyDump(Common),
}

/// Flags mirror the fields of the JSON run configuration; a `--config`
/// file is applied last and wins.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<u8>>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    schedules: Option<Vec<Schedule>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Skip the backpropagation baseline.
    #[arg(long)]
    no_baseline: bool,
    #[arg(long)]
    bp_lr: Option<f64>,
    #[arg(long)]
    eta_plus: Option<f64>,
    #[arg(long)]
    eta_minus: Option<f64>,
    #[arg(long)]
    eta_minus_minus: Option<f64>,
    #[arg(long)]
    sim_threshold: Option<f64>,
    #[arg(long)]
    pixel_threshold: Option<u8>,
    #[arg(long)]
    row_offset: Option<usize>,
    #[arg(long)]
    col_offset: Option<usize>,
    #[arg(long)]
    test_limit: Option<usize>,
    #[arg(long)]
    trace_images: Option<usize>,
    #[arg(long)]
    images_per_label: Option<usize>,
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    ds_omega: Option<f64>,
    #[arg(long)]
    ds_emit_len: Option<u32>,
    #[arg(long)]
    ds_noise: Option<f64>,
    #[arg(long)]
    ds_train_per_class: Option<usize>,
    #[arg(long)]
    ds_eval_episodes: Option<usize>,
    #[arg(long)]
    ds_seed: Option<u64>,
    #[arg(long)]
    mf_beta: Option<f64>,
    #[arg(long)]
    mf_coupling: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    mf_n_bars: Option<Vec<f64>>,
    #[arg(long)]
    mf_b_min: Option<f64>,
    #[arg(long)]
    mf_b_max: Option<f64>,
    #[arg(long)]
    mf_b_step: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Common {
    fn into_config(self) -> interference::Result<RunConfig> {
        let mut c = RunConfig::default();
        c.data_dir = self.data_dir.or(c.data_dir);
        set(&mut c.out_dir, self.out_dir);
        set(&mut c.labels, self.labels);
        set(&mut c.shots, self.shots);
        set(&mut c.epochs, self.epochs);
        set(&mut c.schedules, self.schedules);
        set(&mut c.seed, self.seed);
        set(&mut c.repeats, self.repeats);
        c.baseline = !self.no_baseline;
        set(&mut c.bp_lr, self.bp_lr);
        set(&mut c.rates.eta_plus, self.eta_plus);
        set(&mut c.rates.eta_minus, self.eta_minus);
        set(&mut c.rates.eta_minus_minus, self.eta_minus_minus);
        set(&mut c.rates.sim_threshold, self.sim_threshold);
        set(&mut c.preprocess.threshold, self.pixel_threshold);
        set(&mut c.preprocess.row_offset, self.row_offset);
        set(&mut c.preprocess.col_offset, self.col_offset);
        c.test_limit = self.test_limit.or(c.test_limit);
        set(&mut c.trace_images, self.trace_images);
        set(&mut c.images_per_label, self.images_per_label);
        c.policy = self.policy.or(c.policy);
        let ds = &mut c.double_slit;
        set(&mut ds.omega, self.ds_omega);
        set(&mut ds.emit_len, self.ds_emit_len);
        set(&mut ds.noise, self.ds_noise);
        set(&mut ds.train_per_class, self.ds_train_per_class);
        set(&mut ds.eval_episodes, self.ds_eval_episodes);
        set(&mut ds.seed, self.ds_seed);
        let mf = &mut c.meanfield;
        set(&mut mf.beta, self.mf_beta);
        set(&mut mf.coupling, self.mf_coupling);
        set(&mut mf.n_bars, self.mf_n_bars);
        set(&mut mf.b_min, self.mf_b_min);
        set(&mut mf.b_max, self.mf_b_max);
        set(&mut mf.b_step, self.mf_b_step);
        match &self.config {
            Some(path) => c.with_file(path),
            None => Ok(c),
        }
    }
}

fn run(cli: Cli) -> interference::Result<()> {
    match cli.command {
        Command::TrainEval(a) => {
            let cfg = a.into_config()?;
            let report = cmd_train_eval(&cfg)?;
            for s in &report.summaries {
                println!(
                    "{} {} runs={} mean={:.4} std={:.4}",
                    s.method, s.schedule, s.runs, s.mean, s.std
                );
            }
        }
        Command::Tables(a) => {
            let cfg = a.into_config()?;
            let report = cmd_tables(&cfg)?;
            print!("{}", report.similarity.to_csv(4));
            print!("{}", report.arrival.to_csv(2));
        }
        Command::DoubleSlit(a) => {
            let cfg = a.into_config()?;
            let report = cmd_double_slit(&cfg)?;
            println!("episodes={} accuracy={:.4}", report.episodes.len(), report.accuracy);
        }
        Command::Meanfield(a) => {
            let cfg = a.into_config()?;
            let report = cmd_meanfield(&cfg)?;
            for (n, g, area) in &report.curves {
                println!("n_bar={n} gain={g} hysteresis_area={area:.6}");
            }
            println!("critical n_bar={}", report.critical_n_bar);
        }
        Command::PolicyDump(a) => {
            let cfg = a.into_config()?;
            print!("{}", cmd_policy_dump(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
