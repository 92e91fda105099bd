//! Reservoir-quality probes: node-state distributions, per-sub-reservoir
//! frequency spectra under the MSO12 drive, and memory capacity.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fft_magnitude, ridge_solve, squared_correlation, SeededRng};
use crate::reservoir::ReservoirNetwork;
use crate::tasks::{gen_mso12, MSO12_FREQS};

/// Steps discarded at the start of every probe run.
const PROBE_WASHOUT: usize = 100;

/// Mean and standard deviation of one node's state over a run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NodeStat {
    pub mean: f64,
    pub std: f64,
}

/// Per-sub-reservoir node statistics, each group sorted ascending by mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDistribution {
    pub per_sub: Vec<Vec<NodeStat>>,
}

/// Record the node states over a test sequence (after a washout), then
/// return per-node mean and standard deviation grouped by sub-reservoir and
/// sorted ascending by mean within each group.
pub fn node_state_distribution(
    net: &mut ReservoirNetwork,
    inputs: ndarray::ArrayView2<f64>,
    washout: usize,
) -> Result<StateDistribution> {
    if inputs.nrows() < washout + 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 scored steps after the {washout}-step washout, got {}",
            inputs.nrows().saturating_sub(washout)
        )));
    }
    let trace = net.run_sequence(inputs, true)?;
    let scored = trace.states().slice(s![washout.., ..]);
    let n = scored.nrows() as f64;

    let mut per_sub = Vec::with_capacity(trace.n_subs());
    for l in 0..trace.n_subs() {
        let range = trace.sub_range(l);
        let mut stats: Vec<NodeStat> = range
            .map(|col| {
                let column = scored.column(col);
                let mean = column.sum() / n;
                let var = column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                NodeStat {
                    mean,
                    std: var.sqrt(),
                }
            })
            .collect();
        stats.sort_by(|a, b| a.mean.total_cmp(&b.mean));
        per_sub.push(stats);
    }
    Ok(StateDistribution { per_sub })
}

/// Averaged magnitude spectrum of one sub-reservoir plus the twelve MSO
/// component peaks, min-normalized so the smallest peak is exactly 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubSpectrum {
    pub magnitudes: Vec<f64>,
    pub peak_bins: [usize; 12],
    pub normalized_peaks: [f64; 12],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumProfile {
    pub fft_len: usize,
    pub per_sub: Vec<SubSpectrum>,
}

/// Expected FFT bin of MSO component `i` for a given transform length.
pub fn mso_component_bin(fft_len: usize, component: usize) -> usize {
    (fft_len as f64 * MSO12_FREQS[component] / (2.0 * std::f64::consts::PI)).round() as usize
}

/// Drive the network with the MSO12 signal, FFT each node's state after a
/// 100-step washout, average the magnitude spectra within each
/// sub-reservoir, and extract the twelve component peaks (searching within
/// +/-2 bins of each expected bin). Peaks are normalized by the smallest of
/// the twelve.
pub fn sub_reservoir_spectrum(
    net: &mut ReservoirNetwork,
    mso_length: usize,
    fft_len: usize,
) -> Result<SpectrumProfile> {
    if mso_length < fft_len + PROBE_WASHOUT {
        return Err(Error::InvalidArgument(format!(
            "mso_length must cover fft_len + washout = {}",
            fft_len + PROBE_WASHOUT
        )));
    }
    let drive = gen_mso12(mso_length);
    let inputs = drive
        .values
        .into_shape_with_order((mso_length, 1))
        .expect("length matches");
    let trace = net.run_sequence(inputs.view(), true)?;

    let mut per_sub = Vec::with_capacity(trace.n_subs());
    for l in 0..trace.n_subs() {
        let range = trace.sub_range(l);
        let width = range.len() as f64;
        let mut avg = Array1::<f64>::zeros(fft_len / 2 + 1);
        let mut node_buf = vec![0.0; fft_len];
        for col in range {
            for (b, v) in node_buf
                .iter_mut()
                .zip(trace.states().slice(s![PROBE_WASHOUT.., col]).iter())
            {
                *b = *v;
            }
            let mags = fft_magnitude(&node_buf, fft_len)?;
            avg += &mags;
        }
        avg /= width;

        let mut peak_bins = [0usize; 12];
        let mut peaks = [0.0f64; 12];
        for i in 0..12 {
            let center = mso_component_bin(fft_len, i);
            let lo = center.saturating_sub(2);
            let hi = (center + 2).min(avg.len() - 1);
            let (bin, value) = (lo..=hi)
                .map(|b| (b, avg[b]))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("window is nonempty");
            peak_bins[i] = bin;
            peaks[i] = value;
        }
        let min_peak = peaks.iter().copied().fold(f64::INFINITY, f64::min);
        if min_peak <= 0.0 {
            return Err(Error::DegenerateInput(
                "sub-reservoir spectrum has a zero component peak".into(),
            ));
        }
        let mut normalized = [0.0f64; 12];
        for (n, p) in normalized.iter_mut().zip(peaks.iter()) {
            *n = p / min_peak;
        }
        per_sub.push(SubSpectrum {
            magnitudes: avg.to_vec(),
            peak_bins,
            normalized_peaks: normalized,
        });
    }
    Ok(SpectrumProfile { fft_len, per_sub })
}

/// Memory-capacity probe settings: i.i.d. input uniform over
/// `[input_low, input_high)`, a washout, a training segment and a held-out
/// evaluation segment, delays `1..=max_delay`, and the ridge coefficient
/// for the reconstruction readouts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McConfig {
    pub max_delay: usize,
    pub washout: usize,
    pub train: usize,
    pub eval: usize,
    pub lambda: f64,
    pub input_low: f64,
    pub input_high: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            max_delay: 100,
            washout: 200,
            train: 1000,
            eval: 1000,
            lambda: 1e-8,
            input_low: -0.5,
            input_high: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemoryCapacityResult {
    /// Squared correlation per delay, index 0 holding delay 1.
    pub r_squared: Vec<f64>,
    /// Total memory capacity: the sum over delays.
    pub total: f64,
}

/// Measure memory capacity: drive the network with i.i.d. uniform input,
/// train one linear reconstruction per delay `k` on the training segment
/// (all of them share one state trace and one ridge factorization), and sum
/// the squared correlations between reconstruction and delayed input on the
/// held-out segment.
///
/// Delay `k = 1` refers to the most recent input consumed by the state the
/// readout sees, so a memoryless reservoir in its linear regime still scores
/// close to 1 on the first delay. Degenerate correlations count as 0.
pub fn memory_capacity(
    net: &mut ReservoirNetwork,
    cfg: &McConfig,
    mc_seed: u64,
) -> Result<MemoryCapacityResult> {
    if cfg.max_delay == 0 {
        return Err(Error::InvalidArgument("max_delay must be >= 1".into()));
    }
    if cfg.washout < cfg.max_delay {
        return Err(Error::InvalidArgument(format!(
            "washout ({}) must cover max_delay ({})",
            cfg.washout, cfg.max_delay
        )));
    }
    if cfg.train < 2 || cfg.eval < 2 {
        return Err(Error::InvalidArgument(
            "train and eval segments need at least 2 steps".into(),
        ));
    }
    if !cfg.input_low.is_finite() || !cfg.input_high.is_finite() || cfg.input_high <= cfg.input_low
    {
        return Err(Error::InvalidArgument("empty input range".into()));
    }

    let total = cfg.washout + cfg.train + cfg.eval;
    let mut rng = SeededRng::new(mc_seed);
    let u = Array1::from_shape_fn(total, |_| rng.uniform(cfg.input_low, cfg.input_high));
    let inputs = u
        .view()
        .into_shape_with_order((total, 1))
        .expect("length matches");
    let trace = net.run_sequence(inputs, true)?;

    let k = cfg.max_delay;
    let rows = cfg.washout..total;
    let n_rows = rows.len();
    let n_nodes = trace.total_nodes();

    // Features: [states | bias] over the post-washout rows.
    let mut features = Array2::zeros((n_rows, n_nodes + 1));
    features
        .slice_mut(s![.., ..n_nodes])
        .assign(&trace.states().slice(s![rows.clone(), ..]));
    features.slice_mut(s![.., n_nodes]).fill(1.0);

    // Delayed-input targets: column k-1 holds u(t - k + 1) for feature row
    // x(t); the same Gram factorization serves every delay.
    let mut targets = Array2::zeros((n_rows, k));
    for (r, t) in rows.clone().enumerate() {
        for d in 1..=k {
            targets[[r, d - 1]] = u[t + 1 - d];
        }
    }

    let train_rows = 0..cfg.train;
    let eval_rows = cfg.train..n_rows;
    let w = ridge_solve(
        &features.slice(s![train_rows.clone(), ..]).to_owned(),
        &targets.slice(s![train_rows, ..]).to_owned(),
        cfg.lambda,
    )?;

    let eval_features = features.slice(s![eval_rows.clone(), ..]);
    let reconstructions = eval_features.dot(&w.t());
    let eval_targets = targets.slice(s![eval_rows, ..]);

    let mut r_squared = Vec::with_capacity(k);
    for d in 0..k {
        let r2 = match squared_correlation(reconstructions.column(d), eval_targets.column(d)) {
            Ok(v) => v,
            Err(Error::DegenerateInput(_)) => 0.0,
            Err(e) => return Err(e),
        };
        r_squared.push(r2);
    }
    let total_mc = r_squared.iter().sum();
    Ok(MemoryCapacityResult {
        r_squared,
        total: total_mc,
    })
}

/// `sub_reservoir,node_rank,mean,std` rows, plot-ready.
pub fn write_state_distribution_csv(
    dist: &StateDistribution,
    w: &mut impl std::io::Write,
) -> std::io::Result<()> {
    writeln!(w, "sub_reservoir,node_rank,mean,std")?;
    for (l, stats) in dist.per_sub.iter().enumerate() {
        for (rank, stat) in stats.iter().enumerate() {
            writeln!(w, "{},{},{},{}", l + 1, rank, stat.mean, stat.std)?;
        }
    }
    Ok(())
}

/// `sub_reservoir,bin,magnitude` rows.
pub fn write_spectrum_csv(
    profile: &SpectrumProfile,
    w: &mut impl std::io::Write,
) -> std::io::Result<()> {
    writeln!(w, "sub_reservoir,bin,magnitude")?;
    for (l, sub) in profile.per_sub.iter().enumerate() {
        for (bin, mag) in sub.magnitudes.iter().enumerate() {
            writeln!(w, "{},{},{}", l + 1, bin, mag)?;
        }
    }
    Ok(())
}

/// `sub_reservoir,component_index,phi,normalized_peak` rows.
pub fn write_spectrum_peaks_csv(
    profile: &SpectrumProfile,
    w: &mut impl std::io::Write,
) -> std::io::Result<()> {
    writeln!(w, "sub_reservoir,component_index,phi,normalized_peak")?;
    for (l, sub) in profile.per_sub.iter().enumerate() {
        for (i, (phi, peak)) in MSO12_FREQS
            .iter()
            .zip(sub.normalized_peaks.iter())
            .enumerate()
        {
            writeln!(w, "{},{},{},{}", l + 1, i + 1, phi, peak)?;
        }
    }
    Ok(())
}

/// `k,r2` rows.
pub fn write_memory_capacity_csv(
    result: &MemoryCapacityResult,
    w: &mut impl std::io::Write,
) -> std::io::Result<()> {
    writeln!(w, "k,r2")?;
    for (i, r2) in result.r_squared.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, r2)?;
    }
    Ok(())
}
