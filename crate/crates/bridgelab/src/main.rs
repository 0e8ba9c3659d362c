use bridgelab::cli::{
    cmd_eval, cmd_make_data, cmd_sample, cmd_sweep, cmd_train_bridge, cmd_train_cut, EvalArgs,
    MakeDataArgs, SampleArgs, SweepArgs, TrainBridgeArgs, TrainCutArgs,
};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

/// Desk-scale diffusion-bridge laboratory on synthetic paired data.
#[derive(Parser)]
#[command(name = "bridgelab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired dataset (PGM/PPM files plus manifest).
    MakeData {
        /// Task tag: sar2eo | sar2rgb | sar2ir | rgb2ir
        #[arg(long)]
        task: Option<String>,
        /// Number of pairs
        #[arg(long)]
        n: Option<usize>,
        /// Image resolution (16, 32, or 64)
        #[arg(long)]
        res: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// key=value config file (flags take precedence)
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the bridge denoiser with the weighted objective.
    TrainBridge {
        /// Task tag: gaussian | sar2eo | sar2rgb | sar2ir | rgb2ir
        #[arg(long)]
        task: Option<String>,
        /// Existing dataset directory (otherwise synthesized)
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        /// sgd-momentum | adaptive-moments
        #[arg(long)]
        optimizer: Option<String>,
        /// Synthetic dataset size when --data is absent
        #[arg(long)]
        n: Option<usize>,
        /// Synthetic dataset resolution when --data is absent
        #[arg(long)]
        res: Option<usize>,
        #[arg(long = "beta-d")]
        beta_d: Option<f64>,
        #[arg(long = "beta-min")]
        beta_min: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the contrastive (adversarial + PatchNCE) translator.
    TrainCut {
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        res: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sample translations from a trained bridge checkpoint.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        res: Option<usize>,
        /// Number of reverse steps (denoiser evaluations)
        #[arg(long)]
        nfe: Option<usize>,
        /// Stochasticity in [0, 1]; 0 is the deterministic sampler
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also dump the one-shot prediction D(x, T, x) per source
        #[arg(long)]
        dump_direct: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a checkpoint across a list of step counts.
    Sweep {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        res: Option<usize>,
        /// Comma-separated step counts, e.g. 1,2,5,10,20,100
        #[arg(long)]
        steps: Option<String>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score predictions or published metric rows into a report.
    Eval {
        /// CSV of task,fid_norm,lpips,l1 rows to score directly
        #[arg(long = "from-csv")]
        from_csv: Option<PathBuf>,
        /// Penalty count for domains without a submission
        #[arg(long)]
        unattempted: Option<usize>,
        /// Directory of prediction images written by `sample`
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Reference dataset directory
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    std::process::exit(0);
                }
                _ => {
                    eprint!("{err}");
                    std::process::exit(1);
                }
            }
        }
    };
    let result = match cli.command {
        Command::MakeData { task, n, res, seed, out, config } => cmd_make_data(&MakeDataArgs {
            task,
            n,
            res,
            seed,
            out,
            config,
        }),
        Command::TrainBridge {
            task,
            data,
            iters,
            seed,
            lr,
            batch,
            optimizer,
            n,
            res,
            beta_d,
            beta_min,
            out,
            config,
        } => cmd_train_bridge(&TrainBridgeArgs {
            task,
            data,
            iters,
            seed,
            lr,
            batch,
            optimizer,
            n,
            res,
            beta_d,
            beta_min,
            out,
            config,
        }),
        Command::TrainCut { task, data, iters, seed, lr, batch, n, res, out, config } => {
            cmd_train_cut(&TrainCutArgs {
                task,
                data,
                iters,
                seed,
                lr,
                batch,
                n,
                res,
                out,
                config,
            })
        }
        Command::Sample {
            ckpt,
            data,
            task,
            n,
            res,
            nfe,
            eta,
            seed,
            dump_direct,
            out,
            config,
        } => cmd_sample(&SampleArgs {
            ckpt,
            data,
            task,
            n,
            res,
            nfe,
            eta,
            seed,
            dump_direct,
            out,
            config,
        }),
        Command::Sweep { ckpt, data, task, n, res, steps, eta, seed, out, config } => {
            cmd_sweep(&SweepArgs {
                ckpt,
                data,
                task,
                n,
                res,
                steps,
                eta,
                seed,
                out,
                config,
            })
        }
        Command::Eval { from_csv, unattempted, pred, data, task, out, config } => cmd_eval(&EvalArgs {
            from_csv,
            unattempted,
            pred,
            data,
            task,
            out,
            config,
        }),
    };
    match result {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {}", err.message());
            std::process::exit(err.exit_code());
        }
    }
}
