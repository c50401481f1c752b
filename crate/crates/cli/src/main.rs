use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gtg_core::pipeline::{self, with_threads, PipelineConfig};
use gtg_core::{Error, ErrorCategory};

const FILES_HELP: &str = "\
FILES
  network.json      {\"name\": str, \"segments\": [{\"id\", \"length_m\", \"road_type\" (0..8),
                    \"direction_deg\", \"midpoint\": [x, y], \"geometry\"?}], \"adjacency\": [[id, id]]}
                    Segment ids may be sparse; they are re-indexed densely in ascending order.
  trajectories.txt  one per line: traj_id,time_slice,s;s;s[,t;t;t]   (t = seconds per segment;
                    travel-time labels need them). Lines starting with # are ignored.
  demands.csv       od_id,origin,destination,time_slice
  *_features.csv    segment_id,time_slice,total_depth,integration,connectivity,choice,length,
                    road_type,direction   (24 rows per segment)
  *_partition.csv   segment_id,cluster_id
  source_labels.csv segment_id,time_slice,travel_time_s,speed_mps,sample_count
  cost_loss.csv     epoch,l_mse,l_rank,l_dis_s,l_dis_d,l_og,l_total
  pref_loss.csv     epoch,l_pref
  cost_model.json, preference.json   parameter name -> {shape, values}
  generated.txt     trajectory format above, traj_id = od_id
  infeasible.csv    od_id,status
  report.json       JSD (distance, radius, loc-freq) and mean Hausdorff, DTW, EDT, EDR
  pairs.csv, histograms.csv, baselines.json (model vs uniform-weight and random-walk routes)
  manifest.json     version, root seed, stage seeds, SHA-256 of config and every artifact

CONFIG (TOML; every key optional, unknown keys are errors, paths relative to the file)
  seed = 42                 root seed; every stage derives its own from it
  threads = 0               worker threads, 0 = all cores; results do not depend on it
  output_dir = \"out\"
  [source] / [target]       network, trajectories, demands   (default: <output_dir>/<city>/...)
  [synth]                   source_seed, target_seed (derived when unset), rows = 10, cols = 10,
                            jitter = 0.1, trips = 1500
  [cost]                    layers = 6, hidden_dim = 64, latent_dim = 32, lambda_r = 50,
                            lambda_d = 100, lambda_g = 5, lr = 1e-5, epochs = 600, k = 3,
                            clusters = 0 (auto), pairs_per_node = 4,
                            steps_per_epoch = 0 (auto: ceil(K/k) * 24)
  [preference]              hidden_dim = 32, lr = 1e-2, epochs = 100, batch_size = 64
  [fine_tune]               cost_epochs = 20, preference_epochs = 20
  [eval]                    edr_epsilon = 100, bins = 50, random_walk_max_len = 200

EXIT CODES
  0 success, 2 configuration error, 3 data error, 4 numerical failure";

#[derive(Parser)]
#[command(
    name = "gtg",
    version,
    about = "Cross-city trajectory generation from road-network topology",
    after_long_help = FILES_HELP
)]
struct Cli {
    /// Pipeline config file (TOML).
    #[arg(short, long, global = true, default_value = "gtg.toml")]
    config: PathBuf,

    /// Override a config key, e.g. `--set cost.epochs=50`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic source and target city (network and trajectories).
    SynthCity,
    /// Compute Space Syntax features for both cities.
    Features,
    /// Partition both road networks into balanced connected clusters.
    Partition,
    /// Train the travel-cost model on the source city.
    TrainCost,
    /// Learn travel preferences from source trajectories.
    TrainPref,
    /// Continue training on target-city trajectories.
    FineTune,
    /// Generate trajectories for the target-city demands.
    Generate {
        /// Use the fine-tuned checkpoints.
        #[arg(long)]
        fine_tuned: bool,
    },
    /// Compare generated and real target trajectories, with baselines.
    Evaluate,
    /// Run every stage in order and write the manifest.
    RunAll,
}

fn run(cli: &Cli) -> gtg_core::Result<()> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::Config(format!("{}: {e}", cli.config.display())))?;
    let cfg = PipelineConfig::load(&cli.config, &cli.overrides)?;
    with_threads(cfg.threads, || match &cli.command {
        Command::SynthCity => pipeline::stage_synth_city(&cfg),
        Command::Features => pipeline::stage_features(&cfg),
        Command::Partition => pipeline::stage_partition(&cfg),
        Command::TrainCost => pipeline::stage_train_cost(&cfg),
        Command::TrainPref => pipeline::stage_train_pref(&cfg),
        Command::FineTune => pipeline::stage_fine_tune(&cfg),
        Command::Generate { fine_tuned } => {
            let g = pipeline::stage_generate(&cfg, *fine_tuned)?;
            log::info!(
                "generated {} trajectories, {} infeasible",
                g.trajectories.len(),
                g.infeasible.len()
            );
            Ok(())
        }
        Command::Evaluate => {
            let r = pipeline::stage_evaluate(&cfg)?;
            log::info!("mean EDR {:.4}, distance JSD {:.4}", r.edr, r.distance_jsd);
            Ok(())
        }
        Command::RunAll => pipeline::run_all(&cfg, &text).map(|_| ()),
    })?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Config => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::Numerical => 4,
            })
        }
    }
}
