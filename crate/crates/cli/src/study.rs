// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use qdmd::dmd::{hankel_singular_values, is_stable, Decomposition, Readout};
use qdmd::ed::{
    entropy_traces, evolve, exact_entropy_density, extrapolate, max_entropy_over_window, ExtrapolationFit, FitModel,
    InitialState, Method, Partition, QuenchSpec, SizeSample, SpinSystem,
};
use qdmd::gpr::{baseline_comparison, optimize_hyperparameters, training_set, GpModel, HyperoptConfig};
use qdmd::ising::{correlator, generate_series, CriticalChainSpec, Observable};
use qdmd::signal::{
    add_noise_stream, error_differences, estimate_noise_level, running_envelope, ErrorStats, ErrorStudyConfig,
    OriginResult, TruthSource,
};
use qdmd::TimeSeries;
use serde::Serialize;
use serde_json::json;

use crate::analyze::overlap;
use crate::config::{require, StudyArgs};
use crate::error::{CliError, Context, Result};
use crate::forecast::{parse_readout, predict, read_series};
use crate::generate::parse_noise;
use crate::manifest::Run;

pub fn run(run: Run, a: StudyArgs) -> Result<PathBuf> {
    match require(&a.kind, "kind", "study")?.as_str() {
        "error" => error(run, &a),
        "noise-calibration" => noise_calibration(run, &a),
        "entanglement" => entanglement(run, &a),
        "gpr" => gpr(run, &a),
        "cutoff-ladder" => cutoff_ladder(run, &a),
        other => Err(CliError::config(format!(
            "unknown study `{other}` (error, noise-calibration, entanglement, gpr, cutoff-ladder)"
        ))),
    }
}

fn write_text(run: &mut Run, name: &str, text: String) -> Result<()> {
    let path = run.path(name);
    std::fs::write(&path, text).context(|| format!("writing {}", path.display()))?;
    run.record(&path);
    Ok(())
}

/// The stored series named by `truth`/`input`, else `n` samples of the exact
/// critical-chain modulus from `t = 0`.
fn source_series(run: &Run, a: &StudyArgs, n: usize) -> Result<TimeSeries> {
    match a.truth.as_deref().or(a.input.as_deref()) {
        Some(p) => read_series(run, p),
        None => {
            let spec = CriticalChainSpec::new(a.j.unwrap_or(1.0), 0.5 * a.j.unwrap_or(1.0), a.r.unwrap_or(0))?;
            Ok(generate_series(&spec, 0.0, require(&a.dt, "dt", "study")?, n, Observable::Modulus)?)
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorResolved {
    kind: &'static str,
    truth: String,
    study: ErrorStudyConfig,
    n_origins: usize,
    origin_spacing: f64,
    subsets: Vec<usize>,
    envelope_width: usize,
}

fn error(mut run: Run, a: &StudyArgs) -> Result<PathBuf> {
    let stored = a.truth.as_deref().map(|p| read_series(&run, p)).transpose()?;
    let dt = match (&stored, a.dt) {
        (Some(s), _) => s.dt(),
        (None, Some(dt)) => dt,
        (None, None) => return Err(CliError::config("missing `dt` (or a stored `truth`)")),
    };
    let n_origins = a.n_origins.unwrap_or(100);
    let spacing = a.origin_spacing.unwrap_or(dt);
    let r = ErrorResolved {
        kind: "error",
        truth: a.truth.clone().unwrap_or_else(|| format!("exact |C(r={}, t)|", a.r.unwrap_or(0))),
        study: ErrorStudyConfig {
            dt,
            snapshot_length: require(&a.m, "M", "study")?,
            input_length: require(&a.n, "N", "study")?,
            cutoff: a.epsilon.unwrap_or(0.0),
            rank_upper_bound: a.r_upper,
            readout: parse_readout(a.readout.as_deref())?,
            horizon: require(&a.horizon, "horizon", "study")?,
            noise: parse_noise(a.noise_kind.as_deref(), a.noise_epsilon, run.seed)?,
        },
        n_origins,
        origin_spacing: spacing,
        subsets: a.subsets.clone().unwrap_or_default(),
        envelope_width: a.envelope_width.unwrap_or(0),
    };
    if n_origins == 0 || !(spacing > 0.0) {
        return Err(CliError::config("need n_origins >= 1 and origin_spacing > 0"));
    }
    if r.study.snapshot_length == 0 || r.study.snapshot_length >= r.study.input_length {
        return Err(CliError::config("need 1 <= M < N"));
    }
    let t0 = stored.as_ref().map_or(0.0, TimeSeries::t0);
    let origins: Vec<f64> = (0..n_origins).map(|k| t0 + k as f64 * spacing).collect();
    let (offsets, results) = match &stored {
        Some(s) => error_differences(s, &r.study, &origins)?,
        None => {
            let spec = CriticalChainSpec::new(a.j.unwrap_or(1.0), 0.5 * a.j.unwrap_or(1.0), a.r.unwrap_or(0))?;
            let exact = move |t: f64| correlator(&spec, t).abs_value;
            error_differences(&exact as &dyn TruthSource, &r.study, &origins)?
        }
    };
    let stats = ErrorStats::from_results(&results, offsets.clone());
    let path = run.path("error_stats.csv");
    stats.write_csv(&path)?;
    run.record(&path);

    for &k in &r.subsets {
        if k == 0 || k > results.len() {
            return Err(CliError::config(format!("subset {k} outside 1..={}", results.len())));
        }
        let sub = ErrorStats::from_results(&results[..k], offsets.clone());
        let path = run.path(&format!("error_stats_K{k}.csv"));
        sub.write_csv(&path)?;
        run.record(&path);
    }
    if r.envelope_width > 0 {
        let (smax, smin) = running_envelope(&stats.systematic, r.envelope_width);
        let (dmax, dmin) = running_envelope(&stats.statistical, r.envelope_width);
        let mut text = String::from("offset,systematic_max,systematic_min,statistical_max,statistical_min\n");
        for i in 0..offsets.len() {
            text += &format!("{},{},{},{},{}\n", offsets[i], smax[i], smin[i], dmax[i], dmin[i]);
        }
        write_text(&mut run, "error_envelope.csv", text)?;
    }
    let mut text = String::from("origin,rank,max_modulus\n");
    for OriginResult { origin, rank, max_modulus, .. } in &results {
        text += &format!("{origin},{rank},{max_modulus}\n");
    }
    write_text(&mut run, "origins.csv", text)?;
    run.finish("study", &r)
}

#[derive(Debug, Serialize)]
struct CalibrationResolved {
    kind: &'static str,
    source: String,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    noise_kind: String,
    noise_levels: Vec<f64>,
    trials: usize,
}

#[derive(Debug, Serialize)]
struct LinearFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    LinearFit { slope, intercept: my - slope * mx, r_squared: if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 } }
}

fn noise_calibration(mut run: Run, a: &StudyArgs) -> Result<PathBuf> {
    let m = require(&a.m, "M", "study")?;
    let n = a.n.unwrap_or(2 * m);
    let r = CalibrationResolved {
        kind: "noise-calibration",
        source: a.truth.clone().or(a.input.clone()).unwrap_or_else(|| "exact critical chain".into()),
        m,
        n,
        noise_kind: a.noise_kind.clone().unwrap_or_else(|| "additive".into()),
        noise_levels: a.noise_levels.clone().unwrap_or_else(|| vec![0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06]),
        trials: a.trials.unwrap_or(10),
    };
    if m == 0 || m >= n || r.trials == 0 || r.noise_levels.len() < 2 {
        return Err(CliError::config("need 1 <= M < N, trials >= 1 and at least two noise levels"));
    }
    let series = source_series(&run, a, n)?;
    if series.len() < n {
        return Err(CliError::config(format!("source has {} samples, N = {n}", series.len())));
    }
    let clean = series.window(0, n)?;
    let mut text = String::from("epsilon_noise,trial,ratio,estimate,plateau\n");
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &eps in &r.noise_levels {
        let spec = parse_noise(Some(&r.noise_kind), Some(eps), run.seed)?.expect("epsilon given");
        for trial in 0..r.trials {
            let noisy = add_noise_stream(&clean, &spec, trial as u64)?;
            let sv = hankel_singular_values(&noisy, m)?;
            let (ratio, estimate, plateau) = match estimate_noise_level(&sv, m, n) {
                Ok(e) => (e.ratio, e.epsilon, e.plateau),
                Err(_) => (sv.get(m / 2).map_or(f64::NAN, |s| s / sv[0]), f64::NAN, false),
            };
            text += &format!("{eps},{trial},{ratio},{estimate},{}\n", u8::from(plateau));
            xs.push(eps);
            ys.push(ratio);
        }
    }
    write_text(&mut run, "calibration.csv", text)?;
    let fit = linear_fit(&xs, &ys);
    run.write_json("calibration.json", &json!({ "ratio_vs_epsilon": fit, "samples": xs.len() }))?;
    run.finish("study", &r)
}

#[derive(Debug, Serialize)]
struct EntanglementResolved {
    kind: &'static str,
    geometry: String,
    sizes: Vec<usize>,
    #[serde(rename = "Lx")]
    lx: Option<usize>,
    partition: Option<Vec<usize>>,
    #[serde(rename = "J")]
    j: f64,
    #[serde(rename = "Gamma0", serialize_with = "crate::config::field")]
    gamma0: f64,
    #[serde(rename = "Gamma")]
    gamma: f64,
    dt: f64,
    t_max: f64,
}

#[derive(Debug, Serialize)]
struct EntanglementRow {
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "L_A")]
    l_a: usize,
    n_a: usize,
    s_max: f64,
    density: f64,
}

fn entanglement(mut run: Run, a: &StudyArgs) -> Result<PathBuf> {
    let geometry = a.geometry.clone().unwrap_or_else(|| "chain".into());
    let rect = match geometry.as_str() {
        "chain" => false,
        "rectangle" => true,
        other => return Err(CliError::config(format!("unknown geometry `{other}` (chain, rectangle)"))),
    };
    let r = EntanglementResolved {
        kind: "entanglement",
        sizes: require(&a.sizes, "sizes", "study")?,
        lx: if rect { Some(require(&a.lx, "Lx", "study")?) } else { None },
        partition: a.partition.clone(),
        j: a.j.unwrap_or(1.0),
        gamma0: a.gamma0.unwrap_or(f64::INFINITY),
        gamma: require(&a.gamma, "gamma", "study")?,
        dt: require(&a.dt, "dt", "study")?,
        t_max: require(&a.t_max, "t_max", "study")?,
        geometry,
    };
    let n_steps = (r.t_max / r.dt).round() as usize + 1;
    let initial = if r.gamma0.is_infinite() { InitialState::XPolarized } else { InitialState::GroundState };
    let quench = QuenchSpec { initial, gamma_post: r.gamma, dt: r.dt, n_steps };
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    let g0 = if r.gamma0.is_finite() { r.gamma0 } else { r.gamma };
    for &l in &r.sizes {
        let sys = match r.lx {
            Some(lx) => SpinSystem::rectangle(lx, l, r.j, g0)?,
            None => SpinSystem::chain(l, r.j, g0)?,
        };
        let width = r.lx.unwrap_or(1);
        let cuts: Vec<usize> = match &r.partition {
            Some(p) => p.iter().copied().filter(|&la| 2 * la <= l).collect(),
            None => (1..=l / 2).collect(),
        };
        let partitions: Vec<Partition> =
            cuts.iter().map(|&la| if rect { Partition::rectangle(width, la) } else { Partition::chain(la) }).collect();
        let traj = evolve(&sys, &quench, Method::Auto)?;
        for (trace, &la) in entropy_traces(traj, sys.n_sites(), &partitions)?.iter().zip(&cuts) {
            let s_max = max_entropy_over_window(trace, 0.0, r.t_max)?;
            let n_a = trace.partition.n_a;
            let density = s_max / n_a as f64;
            rows.push(EntanglementRow { l, l_a: la, n_a, s_max, density });
            samples.push(SizeSample { l: l as f64, l_a: la as f64, lx: width as f64, value: density });
        }
        eprintln!("size {l}: {} cuts", cuts.len());
    }
    let mut text = String::from("L,L_A,N_A,S_max,density\n");
    for row in &rows {
        text += &format!("{},{},{},{},{}\n", row.l, row.l_a, row.n_a, row.s_max, row.density);
    }
    write_text(&mut run, "entanglement.csv", text)?;
    let model = if rect { FitModel::Fit2d } else { FitModel::Fit1d };
    let fit: Option<ExtrapolationFit> = match extrapolate(&samples, model) {
        Ok(f) => Some(f),
        Err(e) => {
            eprintln!("warning: no extrapolation: {e}");
            None
        }
    };
    let exact = (!rect).then(|| exact_entropy_density(2.0 * r.gamma0 / r.j, 2.0 * r.gamma / r.j));
    run.write_json(
        "entanglement.json",
        &json!({
            "rows": rows,
            "fit": fit,
            "s_inf": fit.as_ref().map(ExtrapolationFit::s_inf),
            "s_inf_stderr": fit.as_ref().map(ExtrapolationFit::s_inf_stderr),
            "exact_density": exact,
        }),
    )?;
    run.finish("study", &r)
}

#[derive(Debug, Serialize)]
struct GprResolved {
    kind: &'static str,
    input: String,
    n_kernels: Vec<usize>,
    hyperopt: HyperoptConfig,
    dmd_forecast: Option<String>,
    threshold: f64,
}

fn gpr(mut run: Run, a: &StudyArgs) -> Result<PathBuf> {
    let defaults = HyperoptConfig::default();
    let r = GprResolved {
        kind: "gpr",
        input: a.input.clone().or(a.truth.clone()).ok_or_else(|| CliError::config("missing `input`"))?,
        n_kernels: a.n_kernels.clone().unwrap_or_else(|| vec![1]),
        hyperopt: HyperoptConfig {
            initial_points: a.initial_points.unwrap_or(defaults.initial_points),
            iterations: a.iterations.unwrap_or(defaults.iterations),
            stride: a.stride.unwrap_or(defaults.stride),
            seed: run.seed,
            ..defaults
        },
        dmd_forecast: a.dmd_forecast.clone(),
        threshold: a.threshold.unwrap_or(0.05),
    };
    let truth = read_series(&run, &r.input)?;
    let dmd = r.dmd_forecast.as_deref().map(|p| read_series(&run, p)).transpose()?;
    let mut summary = Vec::new();
    for &k in &r.n_kernels {
        let cfg = HyperoptConfig { n_kernels: k, ..r.hyperopt.clone() };
        let report = optimize_hyperparameters(&truth, &cfg)?;
        run.write_json(&format!("gpr_report_K{k}.json"), &report)?;

        let (tt, yy) = training_set(&truth, &cfg);
        let times: Vec<f64> = truth.times().collect();
        let post = GpModel::fit(&tt, &yy, &report.kernel)?.predict(&times)?;
        let pred = TimeSeries::from_real(truth.t0(), truth.dt(), &post.mean, format!("gpr K={k}"))?;
        let path = run.path(&format!("gpr_K{k}.csv"));
        pred.write_csv(&path, &pred.meta(json!({ "source": "gpr", "kernel": report.kernel }), Some(run.seed)))?;
        run.record(&path);

        let comparison = match &dmd {
            Some(d) => {
                let (t, d) = overlap(&truth, d, None, None)?;
                let (_, g) = overlap(&t, &pred, None, None)?;
                let c = baseline_comparison(&t, &d, &g, r.threshold)?;
                run.write_json(&format!("comparison_K{k}.json"), &c)?;
                Some(c)
            }
            None => None,
        };
        summary.push(json!({
            "n_kernels": k,
            "validation_error": report.validation_error,
            "log_marginal_likelihood": report.log_marginal_likelihood,
            "comparison": comparison,
        }));
    }
    run.write_json("gpr_summary.json", &summary)?;
    run.finish("study", &r)
}

#[derive(Debug, Serialize)]
struct LadderResolved {
    kind: &'static str,
    input: String,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    epsilons: Vec<f64>,
    #[serde(rename = "R_upper")]
    r_upper: Option<usize>,
    readout: Readout,
    tolerance: f64,
}

#[derive(Debug, Serialize)]
struct Rung {
    epsilon: f64,
    rank: usize,
    max_modulus: f64,
    stable: bool,
    /// First forecast time with `|f̂ − f| ≥ tolerance·|f|`.
    horizon: Option<f64>,
}

fn cutoff_ladder(mut run: Run, a: &StudyArgs) -> Result<PathBuf> {
    let r = LadderResolved {
        kind: "cutoff-ladder",
        input: a.input.clone().or(a.truth.clone()).ok_or_else(|| CliError::config("missing `input`"))?,
        m: require(&a.m, "M", "study")?,
        n: require(&a.n, "N", "study")?,
        epsilons: require(&a.epsilons, "epsilons", "study")?,
        r_upper: a.r_upper,
        readout: parse_readout(a.readout.as_deref())?,
        tolerance: a.tolerance.unwrap_or(0.05),
    };
    let truth = read_series(&run, &r.input)?;
    if r.m == 0 || r.m >= r.n || r.n >= truth.len() {
        return Err(CliError::config(format!("need 1 <= M < N < {} (input length)", truth.len())));
    }
    let dec = Decomposition::new(&truth.window(0, r.n)?, r.m)?;
    let mut rungs = Vec::new();
    for &eps in &r.epsilons {
        let model = dec.fit(eps, r.r_upper)?;
        let (pred, _) = predict(&model, truth.len(), r.readout)?;
        let horizon = (r.n..truth.len())
            .find(|&k| {
                let (p, t) = (pred.values()[k], truth.values()[k]);
                !((p - t).norm() < r.tolerance * t.norm())
            })
            .map(|k| truth.time(k));
        rungs.push(Rung { epsilon: eps, rank: model.rank(), max_modulus: model.max_modulus(), stable: is_stable(&model), horizon });
    }
    let mut text = String::from("epsilon,rank,max_modulus,stable,horizon\n");
    for g in &rungs {
        let h = g.horizon.map_or("none".to_string(), |h| h.to_string());
        text += &format!("{},{},{},{},{h}\n", g.epsilon, g.rank, g.max_modulus, u8::from(g.stable));
    }
    write_text(&mut run, "ladder.csv", text)?;
    run.write_json("ladder.json", &rungs)?;
    run.finish("study", &r)
}
