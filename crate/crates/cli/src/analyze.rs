// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use qdmd::dmd::hankel_singular_values;
use qdmd::signal::{
    compare_spectra, dft, estimate_noise_level, fit_envelope_exponent, match_peaks, peak_table, EnvelopeFit,
    NoiseEstimate, Peak,
};
use qdmd::TimeSeries;
use serde::Serialize;

use crate::config::{require, AnalyzeArgs};
use crate::error::{CliError, Context, Result};
use crate::forecast::{read_series, time_index};
use crate::manifest::Run;

#[derive(Debug, Clone, Serialize)]
struct Resolved {
    truth: String,
    prediction: Option<String>,
    from: Option<f64>,
    to: Option<f64>,
    threshold: f64,
    asymptote: Option<f64>,
    envelope_window: Option<(f64, f64)>,
    #[serde(rename = "M")]
    m: Option<usize>,
    #[serde(rename = "N")]
    n: Option<usize>,
    prefix: String,
}

#[derive(Debug, Serialize)]
struct Summary {
    t_start: f64,
    t_end: f64,
    n_samples: usize,
    spectral_max_difference: Option<f64>,
    spectral_median_difference: Option<f64>,
    spectral_normalization: Option<f64>,
    truth_peaks: usize,
    matched_peaks: Option<usize>,
    max_abs_error: Option<f64>,
    max_relative_error: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Envelopes {
    asymptote: f64,
    window: (f64, f64),
    truth: EnvelopeFit,
    prediction: Option<EnvelopeFit>,
}

/// `[lo, hi)` restricted to the samples both series cover.
pub fn overlap(a: &TimeSeries, b: &TimeSeries, lo: Option<f64>, hi: Option<f64>) -> Result<(TimeSeries, TimeSeries)> {
    if (a.dt() - b.dt()).abs() > 1e-9 * a.dt() {
        return Err(CliError::config(format!("series have different steps: {} vs {}", a.dt(), b.dt())));
    }
    let start = a.t0().max(b.t0()).max(lo.unwrap_or(f64::NEG_INFINITY));
    let end = a.time(a.len()).min(b.time(b.len())).min(hi.unwrap_or(f64::INFINITY));
    let take = |s: &TimeSeries| -> Result<TimeSeries> {
        let i0 = ((start - s.t0()) / s.dt() - 1e-9).ceil().max(0.0) as usize;
        let i1 = (((end - s.t0()) / s.dt()) - 1e-9).ceil().max(0.0) as usize;
        if i1 <= i0 {
            return Err(CliError::config(format!("no common samples in [{start}, {end})")));
        }
        Ok(s.window(i0, i1.min(s.len()))?)
    };
    let (wa, wb) = (take(a)?, take(b)?);
    if wa.len() != wb.len() || (wa.t0() - wb.t0()).abs() > 1e-6 * a.dt() {
        return Err(CliError::config("series sample different grids"));
    }
    Ok((wa, wb))
}

fn half_peaks(spectrum: &[f64], threshold: f64) -> Result<Vec<Peak>> {
    let half = spectrum.len() / 2;
    Ok(peak_table(spectrum, threshold)?.into_iter().filter(|p| p.omega <= half).collect())
}

fn spectrum_of(s: &TimeSeries) -> Vec<f64> {
    dft(s).iter().map(|v| v.norm()).collect()
}

pub fn run(mut run: Run, a: AnalyzeArgs) -> Result<PathBuf> {
    let envelope_window = match a.envelope_window.as_deref() {
        None => None,
        Some([lo, hi]) => Some((*lo, *hi)),
        Some(w) => return Err(CliError::config(format!("envelope_window needs two values, got {}", w.len()))),
    };
    let r = Resolved {
        truth: require(&a.truth, "truth", "analyze")?,
        prediction: a.prediction.clone(),
        from: a.from,
        to: a.to,
        threshold: a.threshold.unwrap_or(0.05),
        asymptote: a.asymptote,
        envelope_window,
        m: a.m,
        n: a.n,
        prefix: a.prefix.clone().unwrap_or_default(),
    };
    let name = |s: &str| format!("{}{s}", r.prefix);
    let truth_full = read_series(&run, &r.truth)?;
    let prediction_full = r.prediction.as_deref().map(|p| read_series(&run, p)).transpose()?;
    let (truth, prediction) = match &prediction_full {
        Some(p) => {
            let (t, p) = overlap(&truth_full, p, r.from, r.to)?;
            (t, Some(p))
        }
        None => (overlap(&truth_full, &truth_full, r.from, r.to)?.0, None),
    };

    let truth_peaks = half_peaks(&spectrum_of(&truth), r.threshold)?;
    let mut summary = Summary {
        t_start: truth.t0(),
        t_end: truth.time(truth.len()),
        n_samples: truth.len(),
        spectral_max_difference: None,
        spectral_median_difference: None,
        spectral_normalization: None,
        truth_peaks: truth_peaks.len(),
        matched_peaks: None,
        max_abs_error: None,
        max_relative_error: None,
    };
    let mut peak_rows: Vec<(String, Peak)> = truth_peaks.iter().map(|&p| ("truth".to_string(), p)).collect();

    if let Some(pred) = &prediction {
        let cmp = compare_spectra(&truth, pred)?;
        let path = run.path(&name("spectrum.csv"));
        cmp.write_csv(&path)?;
        run.record(&path);
        let pred_peaks = half_peaks(&spectrum_of(pred), r.threshold)?;
        summary.spectral_max_difference = Some(cmp.max_difference());
        summary.spectral_median_difference = Some(cmp.median_difference());
        summary.spectral_normalization = Some(cmp.normalization);
        summary.matched_peaks = Some(match_peaks(&truth_peaks, &pred_peaks));
        peak_rows.extend(pred_peaks.iter().map(|&p| ("prediction".to_string(), p)));

        let scale = truth.max_abs();
        let abs = truth.values().iter().zip(pred.values()).map(|(t, p)| (p - t).norm()).fold(0.0, f64::max);
        summary.max_abs_error = Some(abs);
        summary.max_relative_error = Some(if scale > 0.0 { abs / scale } else { abs });

        let path = run.path(&name("errors.csv"));
        let mut text = String::from("t,truth,prediction,abs_error\n");
        for (k, (t, p)) in truth.values().iter().zip(pred.values()).enumerate() {
            text += &format!("{},{},{},{}\n", truth.time(k), t.re, p.re, (p - t).norm());
        }
        std::fs::write(&path, text).context(|| format!("writing {}", path.display()))?;
        run.record(&path);
    }

    let path = run.path(&name("peaks.csv"));
    let mut text = String::from("source,omega,intensity\n");
    for (src, p) in &peak_rows {
        text += &format!("{src},{},{}\n", p.omega, p.intensity);
    }
    std::fs::write(&path, text).context(|| format!("writing {}", path.display()))?;
    run.record(&path);

    if let Some(c) = r.asymptote {
        let window = r.envelope_window.unwrap_or((truth.t0().max(truth.dt()), truth.time(truth.len() - 1)));
        let env = Envelopes {
            asymptote: c,
            window,
            truth: fit_envelope_exponent(&truth, c, window)?,
            prediction: prediction.as_ref().map(|p| fit_envelope_exponent(p, c, window)).transpose()?,
        };
        if !env.truth.power_law {
            eprintln!(
                "warning: truth envelope is not a power law on [{}, {}] (curvature {:.3})",
                window.0, window.1, env.truth.relative_curvature
            );
        }
        run.write_json(&name("envelope.json"), &env)?;
    }

    // written before the noise estimate, which fails on noise-free input
    run.write_json(&name("summary.json"), &summary)?;

    if let Some(m) = r.m {
        let n = r.n.unwrap_or(2 * m);
        let start = time_index(&truth_full, truth.t0(), "from")?;
        if start + n > truth_full.len() {
            return Err(CliError::config(format!("noise estimate needs N = {n} samples from t = {}", truth.t0())));
        }
        let sv = hankel_singular_values(&truth_full.window(start, start + n)?, m)?;
        let est: NoiseEstimate = estimate_noise_level(&sv, m, n)?;
        run.write_json(&name("noise.json"), &est)?;
    }

    run.finish("analyze", &r)
}
