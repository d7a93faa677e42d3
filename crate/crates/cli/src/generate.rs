// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use qdmd::ed::{
    entropy_traces, equal_time_corr, evolve, unequal_time_corr, Displacement, InitialState, Method,
    Partition, QuenchSpec, SpinConvention, SpinSystem,
};
use qdmd::ising::{generate_series, generator_meta, CriticalChainSpec, Observable};
use qdmd::signal::{add_noise, NoiseSpec};
use qdmd::TimeSeries;
use serde::Serialize;
use serde_json::json;

use crate::config::{require, GenerateArgs};
use crate::error::{CliError, Context, Result};
use crate::manifest::Run;

#[derive(Debug, Clone, Serialize)]
struct Resolved {
    model: String,
    #[serde(rename = "L")]
    l: Option<usize>,
    #[serde(rename = "Lx")]
    lx: Option<usize>,
    #[serde(rename = "J")]
    j: f64,
    #[serde(rename = "Gamma0", serialize_with = "crate::config::opt_field")]
    gamma0: Option<f64>,
    #[serde(rename = "Gamma")]
    gamma: f64,
    dt: f64,
    n: usize,
    t0: f64,
    r: i64,
    observable: String,
    partition: Vec<usize>,
    method: Method,
    convention: SpinConvention,
    output: String,
    noise: Option<NoiseSpec>,
}

pub fn parse_method(s: Option<&str>) -> Result<Method> {
    match s.unwrap_or("auto") {
        "auto" => Ok(Method::Auto),
        "spectral" => Ok(Method::Spectral),
        "krylov" => Ok(Method::Krylov),
        other => Err(CliError::config(format!("unknown method `{other}` (auto, spectral, krylov)"))),
    }
}

fn parse_convention(s: Option<&str>) -> Result<SpinConvention> {
    match s.unwrap_or("spin-half") {
        "spin-half" => Ok(SpinConvention::SpinHalf),
        "pauli" => Ok(SpinConvention::Pauli),
        other => Err(CliError::config(format!("unknown convention `{other}` (spin-half, pauli)"))),
    }
}

pub fn parse_noise(kind: Option<&str>, epsilon: Option<f64>, seed: u64) -> Result<Option<NoiseSpec>> {
    let Some(eps) = epsilon else { return Ok(None) };
    match kind.unwrap_or("additive") {
        "additive" => Ok(Some(NoiseSpec::additive(eps, seed))),
        "relative" => Ok(Some(NoiseSpec::relative_power_law(eps, seed))),
        other => Err(CliError::config(format!("unknown noise kind `{other}` (additive, relative)"))),
    }
}

fn resolve(a: &GenerateArgs, seed: u64) -> Result<Resolved> {
    let model = require(&a.model, "model", "generate")?;
    let exact = model == "ising1d-critical";
    if !exact && model != "ising1d" && model != "ising2d" {
        return Err(CliError::config(format!("unknown model `{model}` (ising1d-critical, ising1d, ising2d)")));
    }
    let j = a.j.unwrap_or(1.0);
    let l = if exact { None } else { Some(require(&a.l, "L", "generate")?) };
    let lx = if model == "ising2d" { Some(require(&a.lx, "Lx", "generate")?) } else { None };
    let gamma = if exact { a.gamma.unwrap_or(0.5 * j) } else { require(&a.gamma, "gamma", "generate")? };
    let observable = a.observable.clone().unwrap_or_else(|| if exact { "cxx".into() } else { "czz".into() });
    let n_sites = l.unwrap_or(0) * lx.unwrap_or(1);
    Ok(Resolved {
        l,
        lx,
        j,
        gamma0: if exact { None } else { Some(a.gamma0.unwrap_or(f64::INFINITY)) },
        gamma,
        dt: require(&a.dt, "dt", "generate")?,
        n: require(&a.n, "n", "generate")?,
        t0: a.t0.unwrap_or(0.0),
        r: a.r.unwrap_or(if exact || observable != "czz" { 0 } else { 1 }),
        partition: a.partition.clone().unwrap_or_else(|| vec![(l.unwrap_or(2) / 2).max(1)]),
        method: parse_method(a.method.as_deref())?,
        convention: parse_convention(a.convention.as_deref())?,
        output: a.output.clone().unwrap_or_else(|| "series.csv".into()),
        noise: parse_noise(a.noise_kind.as_deref(), a.noise_epsilon, a.noise_seed.unwrap_or(seed))?,
        observable,
        model,
    })
    .and_then(|r| {
        if r.n == 0 {
            return Err(CliError::config("`n` must be at least 1"));
        }
        if !exact && n_sites == 0 {
            return Err(CliError::config("lattice has no sites"));
        }
        Ok(r)
    })
}

fn system(r: &Resolved) -> Result<SpinSystem> {
    let l = r.l.expect("lattice models carry L");
    // the x-polarised start has no finite pre-quench field
    let g0 = r.gamma0.filter(|g| g.is_finite()).unwrap_or(r.gamma);
    let s = match r.lx {
        Some(lx) => SpinSystem::rectangle(lx, l, r.j, g0)?,
        None => SpinSystem::chain(l, r.j, g0)?,
    };
    Ok(s.with_convention(r.convention))
}

fn quench(r: &Resolved) -> QuenchSpec {
    let initial = if r.gamma0.is_some_and(f64::is_infinite) { InitialState::XPolarized } else { InitialState::GroundState };
    QuenchSpec { initial, gamma_post: r.gamma, dt: r.dt, n_steps: r.n }
}

fn write_series(run: &mut Run, r: &Resolved, series: TimeSeries, generator: serde_json::Value) -> Result<PathBuf> {
    let (series, seed) = match &r.noise {
        Some(spec) => (add_noise(&series, spec)?, Some(spec.seed)),
        None => (series, None),
    };
    let generator = json!({ "source": generator, "noise": r.noise });
    let path = run.path(&r.output);
    series.write_csv(&path, &series.meta(generator, seed)).context(|| format!("writing {}", path.display()))?;
    run.record(&path);
    run.record(&qdmd::series::meta_path(&path));
    Ok(path)
}

pub fn run(mut run: Run, args: GenerateArgs) -> Result<PathBuf> {
    let r = resolve(&args, run.seed)?;
    if r.model == "ising1d-critical" {
        let spec = CriticalChainSpec::new(r.j, r.gamma, r.r)?;
        let observable = match r.observable.as_str() {
            "cxx" | "cxx-abs" => Observable::Modulus,
            "cxx-complex" => Observable::Complex,
            other => return Err(CliError::config(format!("observable `{other}` is not available for the exact chain"))),
        };
        let series = generate_series(&spec, r.t0, r.dt, r.n, observable)?;
        write_series(&mut run, &r, series, generator_meta(&spec, observable))?;
        return run.finish("generate", &r);
    }

    let sys = system(&r)?;
    let generator = json!({
        "model": r.model, "geometry": sys.geometry, "J": r.j, "Gamma0": r.gamma0.map(|g| if g.is_finite() { json!(g) } else { json!(g.to_string()) }),
        "Gamma": r.gamma, "observable": r.observable, "r": r.r, "method": r.method, "convention": r.convention,
    });
    match r.observable.as_str() {
        "czz" => {
            if r.t0 != 0.0 {
                return Err(CliError::config("quench series start at t0 = 0"));
            }
            let displacement = match r.r {
                1 => Displacement::NearestNeighbour,
                d => Displacement::Vector { dx: d, dy: 0 },
            };
            let post = sys.with_gamma(r.gamma);
            let traj = evolve(&sys, &quench(&r), r.method)?;
            let mut series = equal_time_corr(traj, &post, displacement, r.dt)?;
            series.label = format!("{} C^zz r={}", r.model, r.r);
            write_series(&mut run, &r, series, generator)?;
        }
        "cxx" | "cxx-abs" | "cxx-complex" => {
            let site = usize::try_from(r.r).map_err(|_| CliError::config("r must be a site index for cxx"))?;
            let post = sys.with_gamma(r.gamma);
            let c = unequal_time_corr(&post, site, r.t0, r.dt, r.n, r.method)?;
            let series = if r.observable == "cxx-complex" {
                c
            } else {
                TimeSeries::from_real(c.t0(), c.dt(), &c.moduli(), c.label.clone())?
            };
            write_series(&mut run, &r, series, generator)?;
        }
        "entropy" => {
            let partitions: Vec<Partition> = r
                .partition
                .iter()
                .map(|&la| match r.lx {
                    Some(lx) => Partition::rectangle(lx, la),
                    None => Partition::chain(la),
                })
                .collect();
            let traj = evolve(&sys, &quench(&r), r.method)?;
            let n_sites = sys.n_sites();
            for (tr, la) in entropy_traces(traj, n_sites, &partitions)?.iter().zip(&r.partition) {
                let stem = r.output.strip_suffix(".csv").unwrap_or(&r.output);
                let path = run.path(&format!("{stem}_LA{la}.csv"));
                tr.write_csv(&path).context(|| format!("writing {}", path.display()))?;
                run.record(&path);
            }
        }
        other => return Err(CliError::config(format!("unknown observable `{other}` (czz, cxx, cxx-complex, entropy)"))),
    }
    run.finish("generate", &r)
}
