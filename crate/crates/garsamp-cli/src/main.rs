use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use garsamp::bounds::{
    bm1_bound, bm2_bound_model, convex_tangent_bound_model, generic_transform_bound,
    lp_transform_bound, quadratic_bound_model, BoundOptions, SplitRule,
};
use garsamp::samplers::{
    ars_run, gars_run, gibbs_fixed_rs, gibbs_gars, rejection_sample_fixed, ExtraPointRule,
    RandomSource,
};
use garsamp::{Error, Result};

use garsamp_cli::config::ModelConfig;
use garsamp_cli::experiments::{self, two_coord_model, BM2_ITERS};
use garsamp_cli::report::{self, BoundRow};
use garsamp_cli::verify::verify_suite;
use garsamp_cli::{builtin, oracle};

/// Likelihood bounds and generalized adaptive rejection sampling.
#[derive(Parser)]
#[command(name = "garsamp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundMethod {
    Bm1,
    Bm2,
    Quad,
    Lp,
    Transform,
    Tangent,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Rs,
    Ars,
    Gars,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Midpoint,
    Uniform,
}

impl From<Rule> for ExtraPointRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Midpoint => ExtraPointRule::Midpoint,
            Rule::Uniform => ExtraPointRule::UniformRandom,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GibbsMethod {
    Gars,
    Rs,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a lower bound on the system potential.
    Bound {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        method: BoundMethod,
        /// Subdivision iterations for the iterative method.
        #[arg(long, default_value_t = BM2_ITERS)]
        iters: usize,
    },
    /// Draw posterior samples and write CSV reports.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        algorithm: Algorithm,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        replications: u64,
        /// Override the potential bound used by the fixed-bound sampler.
        #[arg(long)]
        gamma: Option<f64>,
        /// Placement rule for the extra initial support point.
        #[arg(long, value_enum, default_value_t = Rule::Midpoint)]
        rule: Rule,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the two-coordinate Gibbs sampler.
    Gibbs {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Discard this many leading chain states.
        #[arg(long, default_value_t = 0)]
        burn: usize,
        #[arg(long, value_enum, default_value_t = GibbsMethod::Gars)]
        method: GibbsMethod,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the validation suite against a configuration.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a built-in experiment end to end.
    Experiment {
        #[arg(long)]
        id: u8,
        #[arg(long)]
        out: PathBuf,
        /// Replace the built-in configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    if let Ok(v) = std::env::var("GARSAMP_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Model(_) | Error::Parameter(_) | Error::Contract(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Bound {
            config,
            method,
            iters,
        } => {
            let cfg = ModelConfig::from_path(&config)?;
            let model = cfg.build()?;
            let opts = BoundOptions::default();
            let row = match method {
                BoundMethod::Bm1 => {
                    let r = bm1_bound(&model, &opts)?;
                    let best = r
                        .regions
                        .iter()
                        .min_by(|a, b| a.gamma.partial_cmp(&b.gamma).unwrap())
                        .expect("regions nonempty");
                    BoundRow {
                        method: "bm1".into(),
                        gamma: r.gamma,
                        region: Some(best.region),
                        minimizer: best.minimizer,
                    }
                }
                BoundMethod::Bm2 => {
                    let r = bm2_bound_model(&model, iters, SplitRule::Midpoint, &opts)?;
                    let best = r
                        .regions
                        .iter()
                        .min_by(|a, b| a.gamma.partial_cmp(&b.gamma).unwrap())
                        .expect("regions nonempty");
                    BoundRow {
                        method: "bm2".into(),
                        gamma: r.gamma,
                        region: Some(best.region),
                        minimizer: best.minimizer,
                    }
                }
                BoundMethod::Quad => {
                    let (g2, x) = quadratic_bound_model(&model, &opts)?;
                    BoundRow {
                        method: "quad".into(),
                        gamma: g2,
                        region: None,
                        minimizer: x,
                    }
                }
                BoundMethod::Lp => {
                    let lp = cfg
                        .lp
                        .as_ref()
                        .ok_or_else(|| Error::Parameter("config has no lp section".into()))?;
                    let (g2, x) = quadratic_bound_model(&model, &opts)?;
                    BoundRow {
                        method: "lp".into(),
                        gamma: lp_transform_bound(g2, lp.p, model.len())?,
                        region: None,
                        minimizer: x,
                    }
                }
                BoundMethod::Transform => {
                    let r_inv = cfg.r_inverse()?.ok_or_else(|| {
                        Error::Parameter("config has no transform section".into())
                    })?;
                    let (g2, x) = quadratic_bound_model(&model, &opts)?;
                    BoundRow {
                        method: "transform".into(),
                        gamma: generic_transform_bound(g2, &r_inv)?,
                        region: None,
                        minimizer: x,
                    }
                }
                BoundMethod::Tangent => BoundRow {
                    method: "tangent".into(),
                    gamma: convex_tangent_bound_model(&model, &opts)?,
                    region: None,
                    minimizer: f64::NAN,
                },
            };
            print!("{}", report::bound_table_text(&[row]));
            Ok(true)
        }
        Command::Sample {
            config,
            algorithm,
            n,
            seed,
            replications,
            gamma,
            rule,
            out,
        } => {
            let cfg = ModelConfig::from_path(&config)?;
            let model = cfg.build()?;
            for rep in 0..replications {
                let mut rng = RandomSource::derive(seed, rep);
                let trace = match algorithm {
                    Algorithm::Rs => {
                        let g = match gamma {
                            Some(g) => g,
                            None => {
                                bm2_bound_model(
                                    &model,
                                    12,
                                    SplitRule::Midpoint,
                                    &BoundOptions::default(),
                                )?
                                .gamma
                            }
                        };
                        let prior = cfg.prior.as_ref().ok_or_else(|| {
                            Error::Model("fixed-bound sampling needs a prior".into())
                        })?;
                        let sampler = prior.sampler()?;
                        let mut draw = |r: &mut RandomSource| sampler(r);
                        rejection_sample_fixed(&model, &mut draw, (-g).exp(), n, &mut rng)?
                    }
                    Algorithm::Ars => {
                        let o = experiments::oracle_for(&cfg, &model)?;
                        let s0 = [o.grid_argmin() - 1.0, o.grid_argmin() + 1.0];
                        let potential = |x: f64| model.system_potential(x).unwrap_or(f64::INFINITY);
                        ars_run(&potential, &s0, n, &mut rng)?
                    }
                    Algorithm::Gars => gars_run(&model, n, rule.into(), &mut rng)?,
                };
                let suffix = if replications == 1 {
                    String::new()
                } else {
                    format!(".{rep:03}")
                };
                report::write_samples(&out.join(format!("samples{suffix}.csv")), &trace.samples)?;
                report::write_trace(
                    &out.join(format!("trace{suffix}.csv")),
                    &trace.proposals_per_sample,
                )?;
            }
            Ok(true)
        }
        Command::Gibbs {
            config,
            n,
            seed,
            burn,
            method,
            out,
        } => {
            let cfg = ModelConfig::from_path(&config)?;
            let model = two_coord_model(&cfg)?;
            let mut rng = RandomSource::new(seed);
            let (chain, trace) = match method {
                GibbsMethod::Gars => gibbs_gars(&model, n, ExtraPointRule::Midpoint, &mut rng)?,
                GibbsMethod::Rs => {
                    let bound = |cond: &garsamp::model::ObservationModel| {
                        quadratic_bound_model(cond, &BoundOptions::default()).map(|(g2, _)| g2)
                    };
                    gibbs_fixed_rs(&model, n, &bound, &mut rng)?
                }
            };
            let kept = &chain[burn.min(chain.len())..];
            report::write_samples_2d(&out.join("chain.csv"), kept)?;
            report::write_histogram_2d(&out.join("histogram2d.csv"), kept, -4.0, 5.0, 60)?;
            println!("acceptance_rate,{}", trace.acceptance_rate());
            Ok(true)
        }
        Command::Verify { config } => {
            let cfg = ModelConfig::from_path(&config)?;
            let suite = verify_suite(&cfg);
            println!(
                "{}",
                serde_json::to_string_pretty(&suite).expect("report serializes")
            );
            Ok(suite.all_pass())
        }
        Command::Experiment { id, out, config } => {
            let cfg = match config {
                Some(path) => ModelConfig::from_path(&path)?,
                None => {
                    let text = builtin::by_id(id).ok_or_else(|| {
                        Error::Parameter(format!("no built-in experiment with id {id}"))
                    })?;
                    ModelConfig::from_str(text)?
                }
            };
            let outcome = experiments::run_example(id, &cfg, &out)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.summary).expect("summary serializes")
            );
            Ok(true)
        }
    }
}

// The oracle module is exercised through experiments; re-export silences the
// unused-import lint when features shuffle.
#[allow(unused_imports)]
use oracle as _oracle;
