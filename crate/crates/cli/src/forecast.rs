// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use qdmd::dmd::{fit, fit_randomized, forecast_with, is_stable, Divergence, DmdModel, Readout, STABILITY_TOL};
use qdmd::TimeSeries;
use serde::Serialize;
use serde_json::json;

use crate::config::{require, ForecastArgs};
use crate::error::{CliError, Context, Result};
use crate::manifest::Run;

#[derive(Debug, Clone, Serialize)]
struct Resolved {
    input: String,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    epsilon: f64,
    #[serde(rename = "R_upper")]
    r_upper: Option<usize>,
    readout: Readout,
    t_shift: f64,
    t_end: f64,
    randomized: bool,
    oversampling: usize,
    model_out: String,
    forecast_out: String,
}

#[derive(Debug, Serialize)]
struct Stability {
    rank: usize,
    max_modulus: f64,
    stable: bool,
    tolerance: f64,
    eigvec_condition: f64,
    reconstruction_error: f64,
    first_discarded_singular_value: f64,
    divergence: Option<Divergence>,
}

pub fn parse_readout(s: Option<&str>) -> Result<Readout> {
    match s.unwrap_or("first-row") {
        "first-row" => Ok(Readout::FirstRow),
        "average" => Ok(Readout::Average),
        other => Err(CliError::config(format!("unknown readout `{other}` (first-row, average)"))),
    }
}

/// Index of the sample at time `t`; `t` must sit on the grid.
pub fn time_index(series: &TimeSeries, t: f64, what: &str) -> Result<usize> {
    let x = (t - series.t0()) / series.dt();
    let n = x.round();
    if !(n >= 0.0) || (x - n).abs() > 1e-6 {
        return Err(CliError::config(format!("{what} = {t} is not on the sample grid t0 + n·{}", series.dt())));
    }
    Ok(n as usize)
}

pub fn read_series(run: &Run, name: &str) -> Result<TimeSeries> {
    let path = run.path(name);
    let (s, _) = TimeSeries::read_csv(&path).context(|| format!("reading {}", path.display()))?;
    Ok(s)
}

/// A fitted model's samples `0..n_to` from the start of its training
/// window, real when the input was real.
pub fn predict(model: &DmdModel, n_to: usize, readout: Readout) -> Result<(TimeSeries, Option<Divergence>)> {
    let f = forecast_with(model, 0, n_to, readout)?;
    let series = if model.real_input { f.real_series()? } else { f.series.clone() };
    Ok((series, f.divergence))
}

pub fn run(mut run: Run, a: ForecastArgs) -> Result<PathBuf> {
    let input = require(&a.input, "input", "forecast")?;
    let series = read_series(&run, &input)?;
    let t_shift = a.t_shift.unwrap_or(series.t0());
    let start = time_index(&series, t_shift, "t_shift")?;
    let t_end = a.t_end.unwrap_or(series.time(series.len()));
    let r = Resolved {
        m: require(&a.m, "M", "forecast")?,
        n: require(&a.n, "N", "forecast")?,
        epsilon: a.epsilon.unwrap_or(0.0),
        r_upper: a.r_upper,
        readout: parse_readout(a.readout.as_deref())?,
        t_shift,
        t_end,
        randomized: a.randomized.unwrap_or(false),
        oversampling: a.oversampling.unwrap_or(10),
        model_out: a.model_out.clone().unwrap_or_else(|| "model.json".into()),
        forecast_out: a.forecast_out.clone().unwrap_or_else(|| "forecast.csv".into()),
        input,
    };
    if r.m == 0 || r.m >= r.n {
        return Err(CliError::config(format!("need 1 <= M < N, got M = {}, N = {}", r.m, r.n)));
    }
    if start + r.n > series.len() {
        return Err(CliError::config(format!(
            "training window of N = {} samples from t = {} overruns the {}-sample input",
            r.n,
            t_shift,
            series.len()
        )));
    }
    let train = series.window(start, start + r.n)?;
    let model = if r.randomized {
        let k = r.r_upper.ok_or_else(|| CliError::config("the randomized SVD needs `R_upper`"))?;
        fit_randomized(&train, r.m, r.epsilon, k, r.oversampling, run.seed)?
    } else {
        fit(&train, r.m, r.epsilon, r.r_upper)?
    };
    let n_to = ((t_end - train.t0()) / train.dt()).round();
    if !(n_to >= r.n as f64) {
        return Err(CliError::config(format!("t_end = {t_end} lies inside the training window")));
    }
    let (pred, divergence) = predict(&model, n_to as usize, r.readout)?;

    let model_path = run.path(&r.model_out);
    model.save(&model_path).context(|| format!("writing {}", model_path.display()))?;
    run.record(&model_path);

    let fpath = run.path(&r.forecast_out);
    let meta = pred.meta(json!({ "source": "dmd", "model": r.model_out, "training": [start, start + r.n] }), None);
    pred.write_csv(&fpath, &meta).context(|| format!("writing {}", fpath.display()))?;
    run.record(&fpath);
    run.record(&qdmd::series::meta_path(&fpath));

    let sv = &model.truncation.singular_values;
    let sv_path = run.path("singular_values.csv");
    let mut text = String::from("index,sigma,ratio,kept\n");
    for (i, s) in sv.iter().enumerate() {
        text += &format!("{i},{s},{},{}\n", s / sv[0], u8::from(i < model.rank()));
    }
    std::fs::write(&sv_path, text).context(|| format!("writing {}", sv_path.display()))?;
    run.record(&sv_path);

    let stability = Stability {
        rank: model.rank(),
        max_modulus: model.max_modulus(),
        stable: is_stable(&model),
        tolerance: STABILITY_TOL,
        eigvec_condition: model.eigvec_condition,
        reconstruction_error: model.reconstruction_error,
        first_discarded_singular_value: model.truncation.first_discarded(),
        divergence,
    };
    if !stability.stable {
        eprintln!(
            "warning: max |λ| = {:.12} exceeds 1 + {:e}; the forecast grows without bound",
            stability.max_modulus, STABILITY_TOL
        );
    }
    run.write_json("stability.json", &stability)?;
    run.finish("forecast", &r)
}
