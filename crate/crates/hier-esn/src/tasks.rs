//! Benchmark signal generators and dataset splitting.
//!
//! Four signals: the NARMA10 nonlinear autoregressive system driven by
//! uniform noise, the Mackey-Glass delay differential equation, the MSO12
//! sum of twelve sinusoids, and the Santa Fe laser recording loaded from
//! disk. Each series is split into contiguous washout / train / validation /
//! test segments; the network state runs through the whole series once, so
//! every scored segment is preceded by at least the washout-length stretch
//! of already-consumed data.

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// A named scalar series sampled at fixed intervals (`dt = 1.0` for the
/// discrete-time tasks).
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub name: String,
    pub values: Array1<f64>,
    pub dt: f64,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, values: Array1<f64>, dt: f64) -> Self {
        Self {
            name: name.into(),
            values,
            dt,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Settling prefix generated and discarded ahead of the returned NARMA10
/// samples, so zero-history boundary conventions cannot leak into results.
const NARMA_SETTLE: usize = 200;

/// Evaluate the NARMA10 recurrence over a full input sequence.
///
/// Returns `y` with the same indexing as `u`; terms with negative indices
/// are zero, so `y[0] = 0` and `y[1] = 0.1` when the early inputs vanish.
pub fn narma10_series(u: &Array1<f64>) -> Array1<f64> {
    let n = u.len();
    let mut y = Array1::zeros(n);
    for t in 0..n.saturating_sub(1) {
        let mut window = 0.0;
        for i in 0..=9usize {
            if t >= i {
                window += y[t - i];
            }
        }
        let u_back = if t >= 9 { u[t - 9] } else { 0.0 };
        y[t + 1] = 0.3 * y[t] + 0.05 * y[t] * window + 1.5 * u_back * u[t] + 0.1;
    }
    y
}

/// Generate a NARMA10 input/target pair.
///
/// The input is i.i.d. uniform over `[0, 0.5]`; the target at position `t`
/// is the system output one step ahead, `y(t+1)`. A 200-step settling
/// prefix is generated and discarded.
pub fn gen_narma10(length: usize, seed: u64) -> Result<(TimeSeries, TimeSeries)> {
    if length < 11 {
        return Err(Error::InvalidArgument(format!(
            "narma10 needs length >= 11, got {length}"
        )));
    }
    let (u, y) = narma10_raw(length + 1, seed)?;
    let input = Array1::from_iter(u.values.iter().copied().take(length));
    let target = Array1::from_iter(y.values.iter().copied().skip(1).take(length));
    Ok((
        TimeSeries::new("narma10_u", input, 1.0),
        TimeSeries::new("narma10_y_next", target, 1.0),
    ))
}

/// NARMA10 input and same-index output series (no prediction shift); the
/// harness splits these with an explicit horizon.
pub fn narma10_raw(length: usize, seed: u64) -> Result<(TimeSeries, TimeSeries)> {
    if length < 1 {
        return Err(Error::InvalidArgument("narma10 needs length >= 1".into()));
    }
    let mut rng = SeededRng::new(seed);
    let total = NARMA_SETTLE + length;
    let u_full = Array1::from_shape_fn(total, |_| rng.uniform(0.0, 0.5));
    let y_full = narma10_series(&u_full);
    // The recurrence has rare diverging realizations; report them instead
    // of returning non-finite samples.
    if y_full.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput(format!(
            "narma10 realization diverged for seed {seed}; use a different seed"
        )));
    }
    let u = u_full.slice(ndarray::s![NARMA_SETTLE..]).to_owned();
    let y = y_full.slice(ndarray::s![NARMA_SETTLE..]).to_owned();
    Ok((
        TimeSeries::new("narma10_u", u, 1.0),
        TimeSeries::new("narma10_y", y, 1.0),
    ))
}

/// Mackey-Glass integrator configuration. The defaults integrate
/// `dy/dt = 0.2 y(t-tau) / (1 + y(t-tau)^10) - 0.1 y(t)` at `tau = 17` with
/// fixed-step RK4, `dt = 0.1`, one output sample per unit time, a
/// 1000-unit-time discarded transient, and history `1.2` plus a seeded
/// perturbation of amplitude `1e-4`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MackeyGlass {
    pub tau: f64,
    pub dt: f64,
    pub subsample: usize,
    pub transient: f64,
    pub history: f64,
    pub perturbation: f64,
}

impl Default for MackeyGlass {
    fn default() -> Self {
        Self {
            tau: 17.0,
            dt: 0.1,
            subsample: 10,
            transient: 1000.0,
            history: 1.2,
            perturbation: 1e-4,
        }
    }
}

impl MackeyGlass {
    pub fn generate(&self, length: usize, seed: u64) -> Result<TimeSeries> {
        if !self.tau.is_finite() || self.tau <= 0.0 {
            return Err(Error::InvalidArgument("tau must be > 0".into()));
        }
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(Error::InvalidArgument("dt must be > 0".into()));
        }
        if self.subsample == 0 {
            return Err(Error::InvalidArgument("subsample must be >= 1".into()));
        }
        if (self.subsample as f64 * self.dt - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "subsample * dt must equal 1.0 (one sample per unit time), got {}",
                self.subsample as f64 * self.dt
            )));
        }
        if length == 0 {
            return Err(Error::InvalidArgument("length must be >= 1".into()));
        }

        let h = self.dt;
        let delay_steps = (self.tau / h).ceil() as usize + 1;
        let transient_steps = (self.transient / h).round() as usize;
        let total_steps = transient_steps + length * self.subsample;

        // One flat buffer: history on [-tau, 0] followed by the trajectory.
        let mut rng = SeededRng::new(seed);
        let mut y = Vec::with_capacity(delay_steps + total_steps + 1);
        for _ in 0..=delay_steps {
            let p = if self.perturbation > 0.0 {
                self.perturbation * rng.uniform(-1.0, 1.0)
            } else {
                0.0
            };
            y.push(self.history + p);
        }
        let t0 = delay_steps; // index of time zero

        // Delayed value at a (possibly fractional) number of steps back,
        // by linear interpolation between grid samples.
        let delayed = |y: &[f64], idx: usize, back: f64| -> f64 {
            let pos = idx as f64 - back;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            if frac == 0.0 {
                y[lo]
            } else {
                y[lo] * (1.0 - frac) + y[lo + 1] * frac
            }
        };
        let f = |y_now: f64, y_del: f64| 0.2 * y_del / (1.0 + y_del.powi(10)) - 0.1 * y_now;

        let tau_steps = self.tau / h;
        for n in 0..total_steps {
            let idx = t0 + n;
            let yn = y[idx];
            let d0 = delayed(&y, idx, tau_steps);
            let dh = delayed(&y, idx, tau_steps - 0.5);
            let d1 = delayed(&y, idx, tau_steps - 1.0);
            let k1 = f(yn, d0);
            let k2 = f(yn + 0.5 * h * k1, dh);
            let k3 = f(yn + 0.5 * h * k2, dh);
            let k4 = f(yn + h * k3, d1);
            y.push(yn + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        }

        let start = t0 + transient_steps;
        let values = Array1::from_iter((1..=length).map(|k| y[start + k * self.subsample]));
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "mackey-glass trajectory diverged; check parameters".into(),
            ));
        }
        Ok(TimeSeries::new("mackey_glass", values, 1.0))
    }
}

/// Generate a Mackey-Glass series with the default transient and history.
pub fn gen_mackey_glass(
    length: usize,
    tau: f64,
    dt: f64,
    subsample: usize,
    seed: u64,
) -> Result<TimeSeries> {
    MackeyGlass {
        tau,
        dt,
        subsample,
        ..MackeyGlass::default()
    }
    .generate(length, seed)
}

/// Angular frequencies of the twelve MSO components.
pub const MSO12_FREQS: [f64; 12] = [
    0.2, 0.331, 0.42, 0.51, 0.63, 0.74, 0.85, 0.97, 1.08, 1.19, 1.27, 1.32,
];

/// Multiple superimposed oscillator: `u(t) = sum_i sin(phi_i t)` evaluated
/// at integer `t = 0 .. length-1`.
pub fn gen_mso12(length: usize) -> TimeSeries {
    let values = Array1::from_shape_fn(length, |t| {
        let t = t as f64;
        MSO12_FREQS.iter().map(|&phi| (phi * t).sin()).sum()
    });
    TimeSeries::new("mso12", values, 1.0)
}

/// Load the Santa Fe laser series: UTF-8 text, one numeric sample per line,
/// blank lines ignored. Values are min-max normalized to `[0, 1]`.
pub fn load_santa_fe(path: &Path) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let v: f64 = s.parse().map_err(|_| {
            Error::DataFormat(format!(
                "{}:{}: not a number: {s:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        if !v.is_finite() {
            return Err(Error::DataFormat(format!(
                "{}:{}: non-finite sample",
                path.display(),
                lineno + 1
            )));
        }
        values.push(v);
    }
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: {} samples, need at least 2",
            path.display(),
            values.len()
        )));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(Error::DegenerateInput(format!(
            "{}: constant series cannot be normalized",
            path.display()
        )));
    }
    let range = max - min;
    let values = Array1::from_iter(values.into_iter().map(|v| (v - min) / range));
    Ok(TimeSeries::new("santa_fe", values, 1.0))
}

/// Segment lengths of a dataset split, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitLengths {
    pub washout: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitLengths {
    pub fn new(washout: usize, train: usize, validation: usize, test: usize) -> Self {
        Self {
            washout,
            train,
            validation,
            test,
        }
    }

    pub fn total(&self) -> usize {
        self.washout + self.train + self.validation + self.test
    }
}

/// An input/label pair cut into contiguous washout, train, validation and
/// test segments. The stored label at position `t` is the raw target at
/// `t + horizon`.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub input: TimeSeries,
    pub target: TimeSeries,
    pub lengths: SplitLengths,
    pub horizon: usize,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.lengths.total()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn washout_range(&self) -> Range<usize> {
        0..self.lengths.washout
    }

    pub fn train_range(&self) -> Range<usize> {
        let start = self.lengths.washout;
        start..start + self.lengths.train
    }

    pub fn validation_range(&self) -> Range<usize> {
        let start = self.lengths.washout + self.lengths.train;
        start..start + self.lengths.validation
    }

    pub fn test_range(&self) -> Range<usize> {
        let start = self.lengths.washout + self.lengths.train + self.lengths.validation;
        start..start + self.lengths.test
    }

    /// Rows needed to score the validation segment.
    pub fn through_validation(&self) -> usize {
        self.validation_range().end
    }

    /// Input as a `T x 1` matrix.
    pub fn input_matrix(&self) -> ndarray::Array2<f64> {
        let n = self.len();
        self.input
            .values
            .slice(ndarray::s![..n])
            .to_owned()
            .into_shape_with_order((n, 1))
            .expect("row count matches")
    }

    /// Labels as a `T x 1` matrix.
    pub fn target_matrix(&self) -> ndarray::Array2<f64> {
        let n = self.len();
        self.target
            .values
            .slice(ndarray::s![..n])
            .to_owned()
            .into_shape_with_order((n, 1))
            .expect("row count matches")
    }
}

/// Cut an input/target pair into washout / train / validation / test
/// segments with a prediction horizon: the label for `input(t)` is
/// `target(t + horizon)`.
///
/// Scoring a segment never resets the network state, so validation and test
/// are each preceded by the previous segment's steps acting as their
/// transient; those steps are excluded from scoring by construction.
pub fn split_dataset(
    input: &TimeSeries,
    target: &TimeSeries,
    lengths: SplitLengths,
    horizon: usize,
) -> Result<DatasetSplit> {
    let total = lengths.total();
    if lengths.train == 0 || lengths.test == 0 {
        return Err(Error::InvalidArgument(
            "train and test segments must be nonempty".into(),
        ));
    }
    let need_input = total;
    let need_target = total + horizon;
    if input.len() < need_input {
        return Err(Error::InsufficientData(format!(
            "input series has {} samples, split needs {} (short by {})",
            input.len(),
            need_input,
            need_input - input.len()
        )));
    }
    if target.len() < need_target {
        return Err(Error::InsufficientData(format!(
            "target series has {} samples, split needs {} including horizon {horizon} (short by {})",
            target.len(),
            need_target,
            need_target - target.len()
        )));
    }
    let input_values = input.values.slice(ndarray::s![..total]).to_owned();
    let target_values = target
        .values
        .slice(ndarray::s![horizon..horizon + total])
        .to_owned();
    Ok(DatasetSplit {
        input: TimeSeries::new(input.name.clone(), input_values, input.dt),
        target: TimeSeries::new(target.name.clone(), target_values, target.dt),
        lengths,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    #[test]
    fn narma_first_step_from_zero_history() {
        let u = Array1::zeros(5);
        let y = narma10_series(&u);
        assert_eq!(y[0], 0.0);
        assert_relative_eq!(y[1], 0.1, max_relative = 1e-15);
    }

    #[test]
    fn narma_zero_input_converges_to_fixed_point() {
        // With u = 0 the recurrence settles at the stable root of
        // 0.5 y^2 - 0.7 y + 0.1 = 0.
        let u = Array1::zeros(10_000);
        let y = narma10_series(&u);
        let fixed = 0.7 - 0.29_f64.sqrt();
        assert!((y[9_999] - fixed).abs() < 1e-6);
    }

    #[test]
    fn narma_is_deterministic() {
        let (u1, y1) = gen_narma10(500, 7).unwrap();
        let (u2, y2) = gen_narma10(500, 7).unwrap();
        assert_eq!(u1.values, u2.values);
        assert_eq!(y1.values, y2.values);
    }

    #[test]
    fn narma_target_is_one_step_ahead_of_raw() {
        let (u, y_next) = gen_narma10(100, 3).unwrap();
        let (u_raw, y_raw) = narma10_raw(101, 3).unwrap();
        assert_eq!(
            u.values.as_slice().unwrap(),
            &u_raw.values.as_slice().unwrap()[..100]
        );
        for t in 0..100 {
            assert_eq!(y_next.values[t], y_raw.values[t + 1]);
        }
    }

    #[test]
    fn narma_stays_bounded() {
        // The recurrence has rare diverging realizations (rejected by the
        // generator, tested below); stable realizations stay below 1.
        for seed in [0u64, 1, 4, 5, 6, 7, 8, 9, 12, 13] {
            let (_, y) = narma10_raw(10_000, seed).unwrap();
            for &v in y.values.iter() {
                assert!(v.abs() < 1.0, "seed {seed}: |y| = {v}");
            }
        }
    }

    #[test]
    fn narma_divergent_realization_is_reported() {
        // Seed 2 drives the recurrence past its stability basin within
        // 10^4 steps.
        assert!(matches!(
            narma10_raw(10_000, 2),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn mackey_glass_fixed_points() {
        // y == 1 solves 0.2/(1+1) - 0.1 = 0; y == 0 trivially.
        for level in [1.0, 0.0] {
            let mg = MackeyGlass {
                history: level,
                perturbation: 0.0,
                transient: 0.0,
                ..MackeyGlass::default()
            };
            let series = mg.generate(50, 0).unwrap();
            for &v in series.values.iter() {
                assert!((v - level).abs() < 1e-9, "level {level}: drifted to {v}");
            }
        }
    }

    #[test]
    fn mackey_glass_matches_fine_step_euler_oracle() {
        // Both integrators start from the same constant history with no
        // transient discarded; over 200 units the trajectories must agree.
        let mg = MackeyGlass {
            perturbation: 0.0,
            transient: 0.0,
            ..MackeyGlass::default()
        };
        let rk4 = mg.generate(200, 0).unwrap();

        // Independent oracle: forward Euler at dt = 0.01.
        let h = 0.01;
        let delay_steps = (17.0 / h) as usize;
        let mut y: Vec<f64> = vec![1.2; delay_steps + 1];
        let t0 = delay_steps;
        let mut euler_samples = Vec::new();
        for n in 0..200 * 100 {
            let idx = t0 + n;
            let y_del = y[idx - delay_steps];
            let dy = 0.2 * y_del / (1.0 + y_del.powi(10)) - 0.1 * y[idx];
            y.push(y[idx] + h * dy);
            if (n + 1) % 100 == 0 {
                euler_samples.push(y[idx + 1]);
            }
        }

        let mut max_diff = 0.0f64;
        for (a, b) in rk4.values.iter().zip(euler_samples.iter()) {
            max_diff = max_diff.max((a - b).abs());
        }
        assert!(max_diff < 1e-2, "max trajectory gap {max_diff}");

        // The sample autocorrelation structure agrees as well.
        let acf = |v: &[f64], lag: usize| {
            let n = v.len() - lag;
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
            let cov: f64 = (0..n).map(|i| (v[i] - mean) * (v[i + lag] - mean)).sum();
            cov / var
        };
        let rk4_slice = rk4.values.as_slice().unwrap();
        for lag in 0..=50 {
            let diff = (acf(rk4_slice, lag) - acf(&euler_samples, lag)).abs();
            assert!(diff < 1e-2, "lag {lag}: acf gap {diff}");
        }
    }

    #[test]
    fn mackey_glass_is_aperiodic() {
        let series = gen_mackey_glass(2000, 17.0, 0.1, 10, 42).unwrap();
        let v = series.values.as_slice().unwrap();
        for period in 1..=500usize {
            let mut max_gap = 0.0f64;
            for t in 0..(2000 - period) {
                max_gap = max_gap.max((v[t] - v[t + period]).abs());
            }
            assert!(max_gap >= 1e-3, "period {period} repeats within {max_gap}");
        }
    }

    #[test]
    fn mackey_glass_rejects_bad_arguments() {
        assert!(gen_mackey_glass(10, -1.0, 0.1, 10, 0).is_err());
        assert!(gen_mackey_glass(10, 17.0, 0.0, 10, 0).is_err());
        assert!(gen_mackey_glass(10, 17.0, 0.2, 10, 0).is_err());
    }

    #[test]
    fn mso12_matches_direct_evaluation() {
        let series = gen_mso12(500);
        assert_eq!(series.values[0], 0.0);
        for (t, &v) in series.values.iter().enumerate() {
            let direct: f64 = MSO12_FREQS.iter().map(|&phi| (phi * t as f64).sin()).sum();
            assert!((v - direct).abs() < 1e-12);
            assert!(v.abs() <= 12.0);
        }
        let expected_u1: f64 = MSO12_FREQS.iter().map(|&phi| phi.sin()).sum();
        assert_relative_eq!(series.values[1], expected_u1, max_relative = 1e-15);
    }

    #[test]
    fn santa_fe_normalizes_to_unit_interval() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "0\n\n5\n10").unwrap();
        let series = load_santa_fe(file.path()).unwrap();
        assert_eq!(series.values.as_slice().unwrap(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn santa_fe_rejects_bad_files() {
        assert!(matches!(
            load_santa_fe(Path::new("/nonexistent/laser.txt")),
            Err(Error::Io(_))
        ));

        let mut constant = tempfile::NamedTempFile::new().unwrap();
        writeln!(constant, "3\n3\n3").unwrap();
        assert!(matches!(
            load_santa_fe(constant.path()),
            Err(Error::DegenerateInput(_))
        ));

        let mut garbage = tempfile::NamedTempFile::new().unwrap();
        writeln!(garbage, "1\ntwo\n3").unwrap();
        assert!(matches!(
            load_santa_fe(garbage.path()),
            Err(Error::DataFormat(_))
        ));

        let mut short = tempfile::NamedTempFile::new().unwrap();
        writeln!(short, "1").unwrap();
        assert!(matches!(
            load_santa_fe(short.path()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn split_produces_contiguous_segments() {
        let (u, y) = narma10_raw(4300, 1).unwrap();
        let lengths = SplitLengths::new(100, 3000, 100, 1000);
        let split = split_dataset(&u, &y, lengths, 1).unwrap();
        assert_eq!(split.len(), 4200);
        assert_eq!(split.washout_range(), 0..100);
        assert_eq!(split.train_range(), 100..3100);
        assert_eq!(split.validation_range(), 3100..3200);
        assert_eq!(split.test_range(), 3200..4200);
        // Label alignment: target(t) = y_raw(t + 1).
        for t in [0, 100, 3100, 4199] {
            assert_eq!(split.target.values[t], y.values[t + 1]);
            assert_eq!(split.input.values[t], u.values[t]);
        }
    }

    #[test]
    fn split_reports_shortfall() {
        let (u, y) = narma10_raw(1000, 1).unwrap();
        let lengths = SplitLengths::new(100, 3000, 100, 1000);
        let err = split_dataset(&u, &y, lengths, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("4200"), "message should name the need: {msg}");
    }
}
