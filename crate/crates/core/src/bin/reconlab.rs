use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use reconlab::accounting::PrivacyParams;
use reconlab::config::{DataSource, ExperimentConfig, FeaturizerSpec, Profile};
use reconlab::experiment::{self, build_featurizer, prepare, shadow_options, train_probe_classifier, Roles};
use reconlab::glm::{self, GlmFamily, GlmParams, GlmSpec};
use reconlab::mia::{self, Challenger};
use reconlab::nn::{FreshSeeds, ModelParams};
use reconlab::persist::{load_params, provenance, save_params};
use reconlab::rero::{self, BoundRow, HighDimPrior};
use reconlab::shadow::{gen_shadows, ShadowSet};
use reconlab::{Error, Result};

#[derive(Parser)]
#[command(name = "reconlab", version, about = "Reconstruction attacks, informed MIA, DP training and ReRo bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file (`key = value` with `[section]` headers).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Profile used when no config file is given.
    #[arg(long, default_value = "desk-synthetic")]
    profile: String,
    /// Extra `section.key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::profile(Profile::parse(&self.profile)?),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        let needed = cfg.required_points();
        if let DataSource::Synthetic(s) = &mut cfg.data {
            s.n = s.n.max(needed);
        }
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.out_dir)?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one released model per test target.
    TrainReleased {
        #[command(flatten)]
        common: Common,
        /// Only the first N targets.
        #[arg(long)]
        targets: Option<usize>,
    },
    /// Train shadow models and write the attack training set.
    GenShadows {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k: Option<usize>,
        /// CSV of out-of-distribution shadow targets (column `label`).
        #[arg(long)]
        ood_pool: Option<PathBuf>,
        #[arg(long)]
        random_init: bool,
        /// `whitebox`, `blackbox` or `layers=I,J`.
        #[arg(long)]
        featurizer: Option<String>,
        /// Layer indices; shorthand for `--featurizer layers=...`.
        #[arg(long, value_delimiter = ',')]
        layers: Vec<usize>,
        #[arg(long)]
        probe_size: Option<usize>,
        /// Header path; the matrix goes to `<path>.bin`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train the reconstructor and attack every released model.
    Attack {
        #[command(flatten)]
        common: Common,
        /// Shadow set written by `gen-shadows`.
        #[arg(long)]
        shadows: Option<PathBuf>,
        /// Directory written by `train-released`.
        #[arg(long)]
        released: Option<PathBuf>,
    },
    /// Closed-form attack on a GLM trained on a CSV.
    GlmAttack {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "y")]
        label_column: String,
        #[arg(long, default_value = "linear")]
        family: String,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Row treated as the unknown target (default: last).
        #[arg(long)]
        target_row: Option<usize>,
        /// Least squares without intercept; needs `--label`.
        #[arg(long)]
        no_intercept: bool,
        /// Known label of the target.
        #[arg(long)]
        label: Option<f64>,
    },
    /// Informed membership inference game.
    Mia {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// `trivial` or `random`.
        #[arg(long, default_value = "trivial")]
        attack: String,
        /// The release uses a shuffle seed the adversary does not know.
        #[arg(long)]
        unknown_shuffle: bool,
    },
    /// Attack error and accuracy across DP budgets.
    DpSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate one ReRo formula.
    #[command(group(ArgGroup::new("formula").required(true).args(["thm2", "cor1", "cor2", "thm3", "prop1", "prop2"])))]
    ReroBound {
        /// RDP: needs --alpha, --eps, --kappa.
        #[arg(long)]
        thm2: bool,
        /// Pure DP: needs --eps, --kappa.
        #[arg(long)]
        cor1: bool,
        /// zCDP: needs --rho, --kappa.
        #[arg(long)]
        cor2: bool,
        /// ReRo to DP: needs --eps, --gamma.
        #[arg(long)]
        thm3: bool,
        /// Uniform unit ball: --d, --eta and --eps or --rho.
        #[arg(long)]
        prop1: bool,
        /// Gaussian prior: --d, --eta, --sigma and --eps or --rho.
        #[arg(long)]
        prop2: bool,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Append the bound to this CSV table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Monte-Carlo soundness check of the zCDP bound.
    ReroCheck {
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("missing --{flag}")))
}

fn header(cfg: &ExperimentConfig) -> String {
    provenance(&cfg.hash())
}

fn released_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("target_{i:05}.params"))
}

fn train_released_cmd(common: &Common, limit: Option<usize>) -> Result<()> {
    let mut cfg = common.load()?;
    if let Some(n) = limit {
        cfg.targets = cfg.targets.min(n);
    }
    let roles = prepare(&cfg)?;
    let models = experiment::train_released(&cfg, &cfg.train, &roles)?;
    let dir = cfg.out_dir.join("released");
    std::fs::create_dir_all(&dir)?;
    for (i, m) in models.iter().enumerate() {
        let seeds = experiment::release_config(&cfg, &cfg.train, i);
        save_params(
            released_path(&dir, i),
            m,
            &[
                ("config_hash", cfg.hash()),
                ("target", i.to_string()),
                ("init_seed", seeds.init_seed.to_string()),
                ("shuffle_seed", seeds.shuffle_seed.to_string()),
            ],
        )?;
    }
    println!("{}", header(&cfg));
    println!("wrote {} released models to {}", models.len(), dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn gen_shadows_cmd(
    common: &Common,
    k: Option<usize>,
    ood: &Option<PathBuf>,
    random_init: bool,
    featurizer: &Option<String>,
    layers: &[usize],
    probe_size: Option<usize>,
    output: &Option<PathBuf>,
) -> Result<()> {
    let mut cfg = common.load()?;
    if let Some(k) = k {
        if k == 0 {
            return Err(Error::InvalidArgument("--k must be positive".into()));
        }
        cfg.shadows = k;
    }
    if let Some(p) = probe_size {
        cfg.probes = p;
    }
    if let Some(path) = ood {
        cfg.ood_pool = Some(DataSource::Csv {
            path: path.clone(),
            label_column: "label".into(),
        });
    }
    cfg.random_init |= random_init;
    if let Some(f) = featurizer {
        cfg.featurizer = FeaturizerSpec::parse(f)?;
    }
    if !layers.is_empty() {
        cfg.featurizer = FeaturizerSpec::Layers(layers.to_vec());
    }
    let needed = cfg.required_points();
    if let DataSource::Synthetic(s) = &mut cfg.data {
        s.n = s.n.max(needed);
    }
    cfg.validate()?;
    let roles = prepare(&cfg)?;
    let feat = build_featurizer(&cfg.featurizer, &roles);
    let set = gen_shadows(&roles.fixed, &roles.pool, &cfg.arch, &cfg.train, &feat, &shadow_options(&cfg))?;
    let path = output.clone().unwrap_or_else(|| cfg.out_dir.join("shadows.txt"));
    set.save(&path, Some(&header(&cfg)))?;
    println!("{}", header(&cfg));
    println!(
        "wrote {} shadow pairs ({} features, {} target dims, featurizer {}) to {}",
        set.len(),
        set.feature_len(),
        set.target_dim(),
        set.featurizer,
        path.display()
    );
    Ok(())
}

fn load_released(dir: &Path, n: usize) -> Result<Vec<ModelParams>> {
    (0..n).map(|i| load_params(released_path(dir, i)).map(|(m, _)| m)).collect()
}

fn attack_cmd(common: &Common, shadows: &Option<PathBuf>, released: &Option<PathBuf>) -> Result<()> {
    let cfg = common.load()?;
    let roles: Roles = prepare(&cfg)?;
    let (set, feat) = match shadows {
        Some(p) => {
            let set = ShadowSet::load(p)?;
            let feat = build_featurizer(&FeaturizerSpec::parse(&set.featurizer)?, &roles);
            (set, feat)
        }
        None => {
            let feat = build_featurizer(&cfg.featurizer, &roles);
            let set = gen_shadows(&roles.fixed, &roles.pool, &cfg.arch, &cfg.train, &feat, &shadow_options(&cfg))?;
            (set, feat)
        }
    };
    let models = match released {
        Some(dir) => load_released(dir, roles.targets.len())?,
        None => experiment::train_released(&cfg, &cfg.train, &roles)?,
    };
    let probe = train_probe_classifier(&cfg, &roles)?;
    let report = experiment::evaluate(&set, &cfg.reconn, &feat, &models, &roles, Some(&probe))?;
    let h = header(&cfg);
    report.write_csv(cfg.out_dir.join("attack.csv"), &h)?;
    report.write_summary(cfg.out_dir.join("attack_summary.txt"), &h)?;
    println!("{h}");
    println!("targets          {}", report.rows.len());
    println!("mean mse         {:.6} (se {:.6})", report.mean_mse, report.se_mse);
    println!("oracle threshold {:.6}", report.threshold());
    println!("mean kl          {:.3e}", report.mean_kl());
    println!("success          {}", report.success());
    Ok(())
}

fn glm_attack_cmd(
    data: &Path,
    label_column: &str,
    family: &str,
    lambda: f64,
    target_row: Option<usize>,
    no_intercept: bool,
    label: Option<f64>,
) -> Result<()> {
    let all = glm::load_regression_csv(data, label_column)?;
    let t = target_row.unwrap_or(all.len() - 1);
    if t >= all.len() {
        return Err(Error::InvalidArgument(format!("--target-row {t} out of range")));
    }
    let keep: Vec<usize> = (0..all.len()).filter(|&i| i != t).collect();
    let fixed = glm::RegressionData::new(
        keep.iter().map(|&i| all.x[i].clone()).collect(),
        keep.iter().map(|&i| all.y[i]).collect(),
    )?;
    let (tx, ty) = (all.x[t].clone(), all.y[t]);
    let training = fixed.with_point(&tx, ty);
    if no_intercept {
        let y = need(label, "label (required with --no-intercept)")?;
        let spec = GlmSpec::new(GlmFamily::Linear, 0.0, false);
        let params = glm::fit_glm(&training, &spec, glm::DEFAULT_FIT_TOL)?;
        let [plus, minus] = glm::reconstruct_linreg_no_intercept(&params.theta, &fixed, y)?;
        let err = |c: &[f64]| c.iter().zip(&tx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("root+ {:?}  max_abs_error {:.3e}", plus, err(&plus));
        println!("root- {:?}  max_abs_error {:.3e}", minus, err(&minus));
        return Ok(());
    }
    let spec = GlmSpec::new(GlmFamily::parse(family)?, lambda, true);
    let params: GlmParams = glm::fit_glm(&training, &spec, glm::DEFAULT_FIT_TOL)?;
    let rec = glm::reconstruct_glm(&params, &fixed, &spec, glm::DEFAULT_FIT_TOL)?;
    let x = &rec.x[1..];
    let err = x
        .iter()
        .zip(&tx)
        .map(|(a, b)| (a - b).abs())
        .fold((rec.y - ty).abs(), f64::max);
    println!("target row        {t}");
    println!("recovered x       {x:?}");
    println!("recovered y       {}", rec.y);
    println!("label rule        {:?}", rec.rule);
    println!("optimality        {:.3e}", rec.optimality_residual);
    println!("max_abs_error     {err:.3e}");
    Ok(())
}

fn mia_cmd(common: &Common, trials: usize, attack: &str, unknown_shuffle: bool) -> Result<()> {
    let cfg = common.load()?;
    let roles = prepare(&cfg)?;
    if roles.targets.len() < 2 {
        return Err(Error::InvalidArgument("mia needs at least two targets".into()));
    }
    let (z0, z1) = (roles.targets.get(0).clone(), roles.targets.get(1).clone());
    let challenger = Challenger {
        arch: cfg.arch.clone(),
        config: cfg.train.clone(),
        fresh: FreshSeeds {
            shuffle: unknown_shuffle,
            ..FreshSeeds::default()
        },
    };
    let log = match attack {
        "trivial" => {
            let f = |t: &ModelParams, a: &_, b: &_| mia::trivial_deterministic_mia(t, &roles.fixed, &cfg.arch, &cfg.train, a, b);
            mia::run_trials(&challenger, &f, &roles.fixed, &z0, &z1, trials, cfg.seed)?
        }
        "random" => {
            let rng = std::cell::RefCell::new(reconlab::rng::Rng::new(cfg.seed).named("coin").stream());
            let f = |_: &ModelParams, _: &_, _: &_| {
                use rand::Rng as _;
                Ok(u8::from(rng.borrow_mut().random::<bool>()))
            };
            mia::run_trials(&challenger, &f, &roles.fixed, &z0, &z1, trials, cfg.seed)?
        }
        other => return Err(Error::InvalidArgument(format!("unknown attack {other:?}"))),
    };
    let h = header(&cfg);
    mia::write_trials(&log, Some(&h), cfg.out_dir.join("mia_trials.csv"))?;
    let acc = mia::accuracy(&log);
    println!("{h}");
    println!(
        "accuracy {:.4} over {} trials (99% CI {:.4}..{:.4})",
        acc.estimate, acc.trials, acc.lower, acc.upper
    );
    Ok(())
}

fn dp_sweep_cmd(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let rows = experiment::dp_sweep(&cfg)?;
    let h = header(&cfg);
    experiment::write_dp_rows(&rows, cfg.out_dir.join("dp_sweep.csv"), &h)?;
    println!("{h}");
    println!("{:>10} {:>9} {:>10} {:>10} {:>10} {:>9}", "target_eps", "sigma", "epsilon", "mean_mse", "se", "accuracy");
    for r in &rows {
        println!(
            "{:>10} {:>9.4} {:>10.4} {:>10.6} {:>10.6} {:>9.4}",
            r.target_epsilon, r.noise_multiplier, r.epsilon, r.mean_mse, r.se_mse, r.test_accuracy
        );
    }
    println!("oracle threshold {:.6}", rows.first().map_or(f64::NAN, |r| r.threshold));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn rero_bound_cmd(
    which: [bool; 6],
    alpha: Option<f64>,
    eps: Option<f64>,
    rho: Option<f64>,
    kappa: Option<f64>,
    gamma: Option<f64>,
    eta: f64,
    d: Option<usize>,
    sigma: Option<f64>,
    csv: &Option<PathBuf>,
) -> Result<()> {
    let [thm2, cor1, cor2, thm3, prop1, prop2] = which;
    if thm3 {
        let delta = rero::rero_to_dp(need(eps, "eps")?, need(gamma, "gamma")?)?;
        println!("delta = {delta}");
        return Ok(());
    }
    let privacy = match (eps, rho) {
        (Some(_), Some(_)) => return Err(Error::InvalidArgument("give --eps or --rho, not both".into())),
        (Some(e), None) if thm2 => PrivacyParams::Rdp {
            alpha: need(alpha, "alpha")?,
            epsilon: e,
        },
        (Some(e), None) => PrivacyParams::PureDp { epsilon: e },
        (None, Some(r)) => PrivacyParams::Zcdp { rho: r },
        (None, None) => return Err(Error::InvalidArgument("missing --eps or --rho".into())),
    };
    let (bound, dim, prior) = if prop1 || prop2 {
        let d = need(d, "d")?;
        let prior = if prop1 {
            HighDimPrior::UniformBall { eta }
        } else {
            HighDimPrior::Gaussian {
                eta,
                sigma: need(sigma, "sigma")?,
            }
        };
        (rero::prop_gamma(d, privacy, prior)?, d, if prop1 { "uniform_ball" } else { "gaussian" })
    } else {
        let k = need(kappa, "kappa")?;
        let b = match privacy {
            PrivacyParams::Rdp { alpha, epsilon } if thm2 => rero::rdp_to_rero(alpha, epsilon, k, eta)?,
            PrivacyParams::PureDp { epsilon } if cor1 => rero::puredp_to_rero(epsilon, k, eta)?,
            PrivacyParams::Zcdp { rho } if cor2 => rero::zcdp_to_rero(rho, k, eta)?,
            _ => return Err(Error::InvalidArgument("privacy flags do not match the chosen formula".into())),
        };
        (b, d.unwrap_or(0), "given_kappa")
    };
    println!("kappa = {}", bound.kappa);
    println!("gamma = {}", bound.gamma);
    if let Some(path) = csv {
        rero::write_bound_table(
            &[BoundRow {
                dim,
                prior: prior.into(),
                privacy,
                bound,
            }],
            None,
            path,
        )?;
    }
    Ok(())
}

fn rero_check_cmd(trials: usize, seed: u64, csv: &Option<PathBuf>) -> Result<bool> {
    let rows = rero::soundness_suite(&[0.1, 0.5, 2.0], &[0.05, 0.2, 0.4], 9, trials, seed)?;
    println!("{:<10} {:>5} {:>5} {:>8} {:>8} {:>8} {:>8}  sound", "prior", "rho", "eta", "kappa", "gamma", "rate", "ci");
    let mut ok = true;
    for r in &rows {
        ok &= r.sound();
        println!(
            "{:<10} {:>5} {:>5} {:>8.4} {:>8.4} {:>8.4} {:>8.4}  {}",
            r.prior,
            r.rho,
            r.eta,
            r.kappa,
            r.gamma,
            r.rate.estimate,
            r.rate.half_width(),
            r.sound()
        );
    }
    if let Some(path) = csv {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["prior", "rho", "eta", "kappa", "gamma", "rate", "lower", "upper", "sound"])?;
        for r in &rows {
            w.write_record([
                r.prior.clone(),
                r.rho.to_string(),
                r.eta.to_string(),
                r.kappa.to_string(),
                r.gamma.to_string(),
                r.rate.estimate.to_string(),
                r.rate.lower.to_string(),
                r.rate.upper.to_string(),
                r.sound().to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::TrainReleased { common, targets } => train_released_cmd(common, *targets)?,
        Command::GenShadows {
            common,
            k,
            ood_pool,
            random_init,
            featurizer,
            layers,
            probe_size,
            output,
        } => gen_shadows_cmd(common, *k, ood_pool, *random_init, featurizer, layers, *probe_size, output)?,
        Command::Attack {
            common,
            shadows,
            released,
        } => attack_cmd(common, shadows, released)?,
        Command::GlmAttack {
            data,
            label_column,
            family,
            lambda,
            target_row,
            no_intercept,
            label,
        } => glm_attack_cmd(data, label_column, family, *lambda, *target_row, *no_intercept, *label)?,
        Command::Mia {
            common,
            trials,
            attack,
            unknown_shuffle,
        } => mia_cmd(common, *trials, attack, *unknown_shuffle)?,
        Command::DpSweep { common } => dp_sweep_cmd(common)?,
        Command::ReroBound {
            thm2,
            cor1,
            cor2,
            thm3,
            prop1,
            prop2,
            alpha,
            eps,
            rho,
            kappa,
            gamma,
            eta,
            d,
            sigma,
            csv,
        } => rero_bound_cmd(
            [*thm2, *cor1, *cor2, *thm3, *prop1, *prop2],
            *alpha,
            *eps,
            *rho,
            *kappa,
            *gamma,
            *eta,
            *d,
            *sigma,
            csv,
        )?,
        Command::ReroCheck { trials, seed, csv } => return rero_check_cmd(*trials, *seed, csv),
    }
    Ok(true)
}

fn main() -> ExitCode {
    if let Ok(n) = std::env::var("RECONLAB_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: RECONLAB_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: soundness violation");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
