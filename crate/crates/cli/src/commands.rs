//! Subcommand execution.

use std::path::{Path, PathBuf};
use std::time::Instant;

use chandis::analysis::{self, CorrelationStudy, GridMaps};
use chandis::channels::{ChannelSpec, KrausChannel};
use chandis::ksvm::{self, InputPolicy, Interval, IntervalSpec};
use chandis::seeds;
use chandis::vardisc::{self, Strategy, StrategySpec, TrainReport};
use chandis::vclass::{self, AnsatzId, HeatmapCell};
use thiserror::Error;

use crate::config::RunConfig;
use crate::output::{num, Outputs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(clap::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] chandis::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Config(_) => 2,
            Self::Runtime(_) | Self::Io(_) => 1,
        }
    }
}

type Res<T> = Result<T, CliError>;

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required value '{key}' (flag --{key} or config key)"))
}

fn cfg_err(e: chandis::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Runs the configured subcommand and writes its outputs and manifest.
pub fn execute(cfg: RunConfig) -> Res<()> {
    let t0 = Instant::now();
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let sub = cfg.subcommand.clone().ok_or_else(|| missing("subcommand"))?;
    let mut resolved = cfg.clone();
    resolved.seed = Some(cfg.seed.unwrap_or(0));
    resolved.output_dir = Some(dir.clone());
    let mut out = Outputs::new(&dir)?;
    match sub.as_str() {
        "discriminate" => discriminate(&mut resolved, &mut out)?,
        "sweep" => sweep(&mut resolved, &mut out)?,
        "diamond" => diamond(&mut resolved, &mut out)?,
        "classify-var" => classify_var(&mut resolved, &mut out)?,
        "classify-kernel" => classify_kernel(&mut resolved, &mut out)?,
        "analyze" => analyze(&mut resolved, &mut out)?,
        other => return Err(CliError::Config(format!("unknown subcommand '{other}'"))),
    }
    let text = resolved.to_toml().map_err(CliError::Config)?;
    std::fs::write(dir.join("config.toml"), text)?;
    let path = out.manifest(&resolved, t0.elapsed().as_secs_f64())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn seconds(cfg: &RunConfig, s: f64) -> String {
    if cfg.no_timing.unwrap_or(false) {
        "0".into()
    } else {
        num(s)
    }
}

fn load_channel(s: &str) -> Res<KrausChannel> {
    let path = Path::new(s);
    let spec = if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        let parsed = if s.ends_with(".json") {
            serde_json::from_str::<ChannelSpec>(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str::<ChannelSpec>(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::Config(format!("{s}: {e}")))?
    } else {
        ChannelSpec::parse_short(s).map_err(cfg_err)?
    };
    spec.build().map_err(cfg_err)
}

/// Channels from `channel-a/b`, falling back to depolarizing `alpha0/1`.
fn channel_pair(cfg: &RunConfig) -> Res<(KrausChannel, KrausChannel)> {
    let pick = |ch: &Option<String>, alpha: Option<f64>, key: &str| -> Res<KrausChannel> {
        match (ch, alpha) {
            (Some(s), _) => load_channel(s),
            (None, Some(a)) => KrausChannel::depolarizing(a).map_err(cfg_err),
            (None, None) => Err(missing(key)),
        }
    };
    Ok((pick(&cfg.channel_a, cfg.alpha0, "channel-a")?, pick(&cfg.channel_b, cfg.alpha1, "channel-b")?))
}

const RESTART_HEADER: [&str; 10] = ["strategy", "p", "r", "l", "alpha0", "alpha1", "restart", "best_value", "iters", "seconds"];

fn restart_rows(cfg: &RunConfig, spec: &StrategySpec, alphas: (Option<f64>, Option<f64>), report: &TrainReport) -> Vec<Vec<String>> {
    let opt = |a: Option<f64>| a.map(num).unwrap_or_default();
    report
        .per_restart
        .iter()
        .map(|r| {
            vec![
                spec.strategy.to_string(),
                spec.p.to_string(),
                spec.r.to_string(),
                spec.l.to_string(),
                opt(alphas.0),
                opt(alphas.1),
                r.restart.to_string(),
                r.value.map(num).unwrap_or_else(|| "nan".into()),
                r.iterations.to_string(),
                seconds(cfg, r.seconds),
            ]
        })
        .collect()
}

fn strategy_spec(cfg: &mut RunConfig, p: usize, r: usize, l: usize, restarts: usize) -> Res<StrategySpec> {
    let strategy = cfg.strategy.ok_or_else(|| missing("strategy"))?;
    let spec = StrategySpec::new(strategy, cfg.p.unwrap_or(p), cfg.r.unwrap_or(r), cfg.l.unwrap_or(l))
        .with_restarts(cfg.restarts.unwrap_or(restarts))
        .with_seed(cfg.seed.unwrap_or(0));
    cfg.p = Some(spec.p);
    cfg.r = Some(spec.r);
    cfg.l = Some(spec.l);
    cfg.restarts = Some(spec.restarts);
    Ok(spec)
}

fn discriminate(cfg: &mut RunConfig, out: &mut Outputs) -> Res<()> {
    let (c0, c1) = channel_pair(cfg)?;
    let spec = strategy_spec(cfg, 1, 0, 1, 10)?;
    let report = vardisc::train(&c0, &c1, &spec)?;
    let alphas = if cfg.channel_a.is_none() { (cfg.alpha0, cfg.alpha1) } else { (None, None) };
    out.csv("discriminate.csv", &RESTART_HEADER, &restart_rows(cfg, &spec, alphas, &report))?;
    println!("best success probability {:.6} ({} restarts)", report.best_value, spec.restarts);
    Ok(())
}

fn sweep(cfg: &mut RunConfig, out: &mut Outputs) -> Res<()> {
    let default_r = match cfg.strategy {
        Some(Strategy::Parallel) => 3,
        _ => 4,
    };
    let spec = strategy_spec(cfg, 2, default_r, 14, 2)?;
    let pass = cfg.pass.clone().unwrap_or_else(|| "both".into());
    let passes: Vec<Vec<(f64, f64)>> = match pass.as_str() {
        "forward" => vec![vardisc::forward_pairs()],
        "backward" => vec![vardisc::backward_pairs()],
        "both" => vec![vardisc::forward_pairs(), vardisc::backward_pairs()],
        other => return Err(CliError::Config(format!("pass must be forward, backward or both, got '{other}'"))),
    };
    let warm = cfg.warm_start.unwrap_or(true);
    let dr = cfg.diamond_restarts.unwrap_or(chandis::diamond::DEFAULT_RESTARTS);
    cfg.pass = Some(pass);
    cfg.warm_start = Some(warm);
    cfg.diamond_restarts = Some(dr);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for pairs in &passes {
        for point in vardisc::sweep_depolarizing(&spec, pairs, warm)? {
            rows.extend(restart_rows(cfg, &spec, (Some(point.alpha0), Some(point.alpha1)), &point.report));
            let c0 = KrausChannel::depolarizing(point.alpha0)?;
            let c1 = KrausChannel::depolarizing(point.alpha1)?;
            let bound = chandis::diamond::p_diamond(&c0, &c1, spec.p, dr, spec.seed)?;
            println!("({}, {}) best {:.6}  p_diamond {:.6}", point.alpha0, point.alpha1, point.report.best_value, bound);
            summary.push(vec![
                num(point.alpha0),
                num(point.alpha1),
                num(point.report.best_value),
                num(bound),
                num(bound - point.report.best_value),
            ]);
        }
    }
    out.csv("sweep.csv", &RESTART_HEADER, &rows)?;
    out.csv("sweep_summary.csv", &["alpha0", "alpha1", "best_value", "p_diamond", "gap"], &summary)?;
    Ok(())
}

fn diamond(cfg: &mut RunConfig, out: &mut Outputs) -> Res<()> {
    let a = cfg.channel_a.clone().ok_or_else(|| missing("channel-a"))?;
    let b = cfg.channel_b.clone().ok_or_else(|| missing("channel-b"))?;
    let (c0, c1) = (load_channel(&a)?, load_channel(&b)?);
    let p = cfg.p.unwrap_or(1);
    let restarts = cfg.restarts.unwrap_or(chandis::diamond::DEFAULT_RESTARTS);
    cfg.p = Some(p);
    cfg.restarts = Some(restarts);
    let (est, prob) = chandis::diamond::p_diamond_estimate(&c0, &c1, p, restarts, cfg.seed.unwrap_or(0))?;
    let finite: Vec<f64> = est.per_restart_values.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("diamond norm     {:.6}", est.value);
    println!("choi bound       {:.6}", est.choi_lower_bound);
    println!("p_diamond        {prob:.6}");
    println!("restart spread   [{lo:.6}, {hi:.6}] over {} restarts", est.restarts_used);
    let rows: Vec<Vec<String>> =
        est.per_restart_values.iter().enumerate().map(|(k, v)| vec![k.to_string(), num(*v)]).collect();
    out.csv("diamond_restarts.csv", &["restart", "value"], &rows)?;
    out.csv(
        "diamond.csv",
        &["channel_a", "channel_b", "p", "restarts", "norm", "choi_lower_bound", "p_diamond", "spread_min", "spread_max"],
        &[vec![a, b, p.to_string(), restarts.to_string(), num(est.value), num(est.choi_lower_bound), num(prob), num(lo), num(hi)]],
    )?;
    Ok(())
}

fn classify_var(cfg: &mut RunConfig, out: &mut Outputs) -> Res<()> {
    let which = cfg.ansatz.clone().unwrap_or_else(|| "all".into());
    let ansatze: Vec<AnsatzId> = if which.eq_ignore_ascii_case("all") {
        vec![AnsatzId::U1, AnsatzId::U2, AnsatzId::U3]
    } else {
        vec![which.parse::<AnsatzId>().map_err(cfg_err)?]
    };
    let n_train = cfg.n_train.unwrap_or(vclass::DEFAULT_SIZE);
    let n_test = cfg.n_test.unwrap_or(vclass::DEFAULT_SIZE);
    let restarts = cfg.restarts.unwrap_or(vclass::DEFAULT_RESTARTS);
    let seed = cfg.seed.unwrap_or(0);
    cfg.ansatz = Some(which);
    cfg.n_train = Some(n_train);
    cfg.n_test = Some(n_test);
    cfg.restarts = Some(restarts);
    let mut cells: Vec<HeatmapCell> = Vec::new();
    for (k, &ans) in ansatze.iter().enumerate() {
        let aseed = seeds::derive_seed(seed, &[k as u64]);
        match (cfg.alpha0, cfg.alpha1) {
            (Some(a0), Some(a1)) => cells.push(vclass::classify_cell(ans, (0, 0), (a0, a1), n_train, n_test, restarts, aseed)?),
            (None, None) => {
                let grid = cfg.alphas.clone().unwrap_or_else(vclass::default_grid);
                cfg.alphas = Some(grid.clone());
                cells.extend(vclass::accuracy_heatmap(ans, &grid, n_train, n_test, restarts, aseed)?);
            }
            _ => return Err(CliError::Config("alpha0 and alpha1 must be given together".into())),
        }
    }
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.ansatz.to_string(),
                num(c.alpha0),
                num(c.alpha1),
                num(c.train_acc),
                num(c.test_acc),
                num(c.b),
                seconds(cfg, c.seconds),
            ]
        })
        .collect();
    if let [c] = cells.as_slice() {
        println!("{} ({}, {}): train {:.4}  test {:.4}", c.ansatz, c.alpha0, c.alpha1, c.train_acc, c.test_acc);
    } else {
        for &ans in &ansatze {
            let accs: Vec<f64> = cells.iter().filter(|c| c.ansatz == ans).map(|c| c.test_acc).collect();
            println!("{ans}: {} cells, mean test accuracy {:.4}", accs.len(), accs.iter().sum::<f64>() / accs.len() as f64);
        }
    }
    out.csv("classify_var.csv", &["ansatz", "alpha0", "alpha1", "train_acc", "test_acc", "b", "seconds"], &rows)?;
    Ok(())
}

fn interval_spec(cfg: &RunConfig) -> Res<IntervalSpec> {
    match (&cfg.intervals, &cfg.neg, &cfg.pos) {
        (Some(name), None, None) => {
            let k = name
                .trim()
                .trim_start_matches(['i', 'I'])
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("interval set must be i1..i4, got '{name}'")))?;
            ksvm::intervals_i(k).map_err(cfg_err)
        }
        (None, Some(neg), Some(pos)) => {
            let conv = |v: &[[f64; 2]]| v.iter().map(|&[lo, hi]| Interval::closed(lo, hi)).collect::<Vec<_>>();
            IntervalSpec::new(conv(neg), conv(pos)).map_err(cfg_err)
        }
        (None, None, None) => Err(missing("intervals")),
        _ => Err(CliError::Config("give either intervals or both neg and pos".into())),
    }
}

fn classify_kernel(cfg: &mut RunConfig, out: &mut Outputs) -> Res<()> {
    let spec = interval_spec(cfg)?;
    let policy = cfg.input.unwrap_or(InputPolicy::Plus);
    let n = cfg.n_copies.unwrap_or(1);
    let n_train = cfg.n_train.unwrap_or(100);
    let n_test = cfg.n_test.unwrap_or(1000);
    let c = cfg.c.unwrap_or(ksvm::DEFAULT_C);
    let seed = cfg.seed.unwrap_or(0);
    if n == 0 {
        return Err(CliError::Config("n-copies must be at least 1".into()));
    }
    cfg.input = Some(policy);
    cfg.n_copies = Some(n);
    cfg.n_train = Some(n_train);
    cfg.n_test = Some(n_test);
    cfg.c = Some(c);
    let train_set = ksvm::make_interval_dataset(&spec, policy, n_train, &mut seeds::task_rng(seed, &[0]))?;
    let test_set = ksvm::make_interval_dataset(&spec, policy, n_test, &mut seeds::task_rng(seed, &[1]))?;
    let model = ksvm::train(&train_set, n, c.is_finite().then_some(c))?;
    let eval = ksvm::evaluate(&model, &test_set)?;
    let rows: Vec<Vec<String>> = eval
        .items
        .iter()
        .map(|i| vec![num(i.alpha), i.true_label.to_string(), num(i.score), i.pred_label.to_string(), num(i.normalized)])
        .collect();
    out.csv("classify_kernel.csv", &["alpha", "true_label", "score", "pred_label", "normalized_score"], &rows)?;
    out.csv(
        "classify_kernel_summary.csv",
        &["n_copies", "n_train", "n_test", "support_vectors", "bias", "solver_status", "accuracy"],
        &[vec![
            n.to_string(),
            n_train.to_string(),
            n_test.to_string(),
            model.theta.len().to_string(),
            num(model.b),
            format!("{:?}", model.status),
            num(eval.accuracy),
        ]],
    )?;
    println!("accuracy {:.4} with {} support vectors ({:?})", eval.accuracy, model.theta.len(), model.status);
    Ok(())
}

fn matrix_rows(grid: &[f64], m: &[Vec<f64>]) -> Vec<Vec<String>> {
    grid.iter().zip(m).map(|(a, row)| std::iter::once(num(*a)).chain(row.iter().map(|v| num(*v))).collect()).collect()
}

fn write_maps(out: &mut Outputs, maps: &GridMaps) -> Res<()> {
    let header: Vec<String> = std::iter::once("alpha0\\alpha1".to_string()).chain(maps.grid.iter().map(|a| num(*a))).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("trace_map.csv", &header, &matrix_rows(&maps.grid, &maps.trace))?;
    out.csv("diamond_map.csv", &header, &matrix_rows(&maps.grid, &maps.p_diamond))?;
    Ok(())
}

fn write_study(out: &mut Outputs, study: &CorrelationStudy) -> Res<()> {
    let mut header = vec!["l".to_string(), "pearson_trace".into(), "pearson_diamond".into()];
    header.extend(study.pairs.iter().map(|(a, b)| format!("success_{a}_{b}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.l.to_string(), num(r.pearson_trace), num(r.pearson_diamond)];
            row.extend(r.mean_success.iter().map(|v| num(*v)));
            row
        })
        .collect();
    out.csv("correlation.csv", &header, &rows)?;

    let ls: Vec<f64> = study.rows.iter().map(|r| r.l as f64).collect();
    let fit = |name: &str, vs: Vec<f64>, f: fn(&[f64], &[f64]) -> chandis::Result<analysis::FitResult>| match f(&ls, &vs) {
        Ok(r) => vec![name.to_string(), num(r.parameter), num(r.residual_sum)],
        Err(e) => {
            log::warn!("{name} fit failed: {e}");
            vec![name.to_string(), "nan".into(), "nan".into()]
        }
    };
    let fits = vec![
        fit("power_trace", study.rows.iter().map(|r| r.pearson_trace).collect(), analysis::fit_power),
        fit("exp_diamond", study.rows.iter().map(|r| r.pearson_diamond).collect(), analysis::fit_exp),
    ];
    out.csv("correlation_fits.csv", &["model", "parameter", "residual_sum"], &fits)?;
    for r in &study.rows {
        println!("l={:<3} pearson(trace) {:+.4}  pearson(p_diamond) {:+.4}", r.l, r.pearson_trace, r.pearson_diamond);
    }
    Ok(())
}

fn analyze(cfg: &mut RunConfig, out: &mut Outputs) -> Res<()> {
    let grid = cfg.alphas.clone().unwrap_or_else(vclass::default_grid);
    let p = cfg.p.unwrap_or(2);
    let dr = cfg.diamond_restarts.unwrap_or(chandis::diamond::DEFAULT_RESTARTS);
    let seed = cfg.seed.unwrap_or(0);
    cfg.alphas = Some(grid.clone());
    cfg.p = Some(p);
    cfg.diamond_restarts = Some(dr);
    let maps = analysis::grid_maps(&grid, p, dr, seed)?;
    write_maps(out, &maps)?;
    println!("maps over {} × {} grid written", grid.len(), grid.len());
    if let Some(layers) = cfg.layers.clone() {
        let strategy = cfg.strategy.unwrap_or(Strategy::Parallel);
        let r = cfg.r.unwrap_or(if strategy == Strategy::Parallel { 3 } else { 4 });
        let runs = cfg.runs.unwrap_or(5);
        cfg.strategy = Some(strategy);
        cfg.r = Some(r);
        cfg.runs = Some(runs);
        let base = StrategySpec::new(strategy, p, r, 1).with_seed(seed);
        let study = analysis::correlation_study(&base, &layers, &analysis::desk_pairs(), runs, dr)?;
        write_study(out, &study)?;
    }
    Ok(())
}
