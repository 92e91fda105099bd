//! Linear readout training and scoring.
//!
//! The readout maps a feature vector built from the concatenated reservoir
//! state (optionally extended with the raw input and a bias term) to the
//! outputs through a single weight matrix trained by ridge regression.

use ndarray::{s, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::ridge_solve;
use crate::reservoir::StateTrace;

/// Which features feed the readout.
///
/// By default every sub-reservoir's state is used; `include_last_layer:
/// false` drops the last sub-reservoir's columns, for probing how much the
/// final stage contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// Always true; the reservoir state is the core feature block.
    pub use_reservoir_state: bool,
    /// Append the raw input columns to the features.
    pub append_raw_input: bool,
    /// Append a constant 1.0 bias column.
    pub append_bias: bool,
    /// Keep the last sub-reservoir's state columns (default true).
    pub include_last_layer: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            use_reservoir_state: true,
            append_raw_input: false,
            append_bias: true,
            include_last_layer: true,
        }
    }
}

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.use_reservoir_state {
            return Err(Error::InvalidArgument(
                "use_reservoir_state must be true".into(),
            ));
        }
        Ok(())
    }

    fn state_width(&self, trace: &StateTrace) -> usize {
        if self.include_last_layer || trace.n_subs() == 1 {
            trace.total_nodes()
        } else {
            trace.sub_range(trace.n_subs() - 1).start
        }
    }

    pub fn feature_width(&self, trace: &StateTrace, input_dim: usize) -> usize {
        self.state_width(trace)
            + if self.append_raw_input { input_dim } else { 0 }
            + usize::from(self.append_bias)
    }
}

/// Trained readout weights plus the feature layout they expect.
#[derive(Debug, Clone)]
pub struct Readout {
    pub w_out: Array2<f64>,
    pub spec: FeatureSpec,
    pub lambda: f64,
}

#[derive(Serialize, Deserialize)]
struct ReadoutDoc {
    version: String,
    rows: usize,
    cols: usize,
    w_out: Vec<f64>,
    spec: FeatureSpec,
    lambda: f64,
}

impl Readout {
    pub fn outputs(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ReadoutDoc {
            version: env!("CARGO_PKG_VERSION").to_string(),
            rows: self.w_out.nrows(),
            cols: self.w_out.ncols(),
            w_out: self.w_out.iter().copied().collect(),
            spec: self.spec,
            lambda: self.lambda,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ReadoutDoc = serde_json::from_str(text)?;
        let w_out = Array2::from_shape_vec((doc.rows, doc.cols), doc.w_out)
            .map_err(|e| Error::DataFormat(format!("readout weights: {e}")))?;
        Ok(Self {
            w_out,
            spec: doc.spec,
            lambda: doc.lambda,
        })
    }
}

/// Assemble the `rows x feature_width` design matrix for the given rows:
/// `[state | raw input | bias]` in that column order.
fn assemble_features(
    trace: &StateTrace,
    inputs: ArrayView2<f64>,
    rows: Range<usize>,
    spec: &FeatureSpec,
) -> Result<Array2<f64>> {
    spec.validate()?;
    if inputs.nrows() != trace.steps() {
        return Err(Error::Dimension(format!(
            "trace has {} rows but inputs have {}",
            trace.steps(),
            inputs.nrows()
        )));
    }
    if rows.end > trace.steps() || rows.start >= rows.end {
        return Err(Error::InvalidArgument(format!(
            "row range {rows:?} outside trace of {} steps",
            trace.steps()
        )));
    }

    let state_width = spec.state_width(trace);
    let width = spec.feature_width(trace, inputs.ncols());
    let n = rows.end - rows.start;
    let mut features = Array2::zeros((n, width));

    features
        .slice_mut(s![.., ..state_width])
        .assign(&trace.states().slice(s![rows.clone(), ..state_width]));
    let mut offset = state_width;
    if spec.append_raw_input {
        features
            .slice_mut(s![.., offset..offset + inputs.ncols()])
            .assign(&inputs.slice(s![rows.clone(), ..]));
        offset += inputs.ncols();
    }
    if spec.append_bias {
        features.slice_mut(s![.., offset]).fill(1.0);
    }
    Ok(features)
}

/// Train a readout on the design rows `[washout, T)` of a trace.
pub fn train_readout(
    trace: &StateTrace,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    washout: usize,
    spec: FeatureSpec,
    lambda: f64,
) -> Result<Readout> {
    if washout >= trace.steps() {
        return Err(Error::InvalidArgument(format!(
            "washout {washout} leaves no training rows in a {}-step trace",
            trace.steps()
        )));
    }
    train_readout_rows(trace, inputs, targets, washout..trace.steps(), spec, lambda)
}

/// Train a readout on an explicit row range of a trace. The targets must be
/// aligned with the trace rows.
pub fn train_readout_rows(
    trace: &StateTrace,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    rows: Range<usize>,
    spec: FeatureSpec,
    lambda: f64,
) -> Result<Readout> {
    if targets.nrows() != trace.steps() {
        return Err(Error::Dimension(format!(
            "trace has {} rows but targets have {}",
            trace.steps(),
            targets.nrows()
        )));
    }
    let features = assemble_features(trace, inputs, rows.clone(), &spec)?;
    let target_rows = targets.slice(s![rows, ..]).to_owned();
    let w_out = ridge_solve(&features, &target_rows, lambda)?;
    Ok(Readout {
        w_out,
        spec,
        lambda,
    })
}

/// Apply a trained readout to every row of a trace.
pub fn predict_sequence(
    readout: &Readout,
    trace: &StateTrace,
    inputs: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let features = assemble_features(trace, inputs, 0..trace.steps(), &readout.spec)?;
    if features.ncols() != readout.w_out.ncols() {
        return Err(Error::Dimension(format!(
            "readout expects {} features, trace yields {}",
            readout.w_out.ncols(),
            features.ncols()
        )));
    }
    Ok(features.dot(&readout.w_out.t()))
}

/// Normalized root mean squared error: RMS error over the RMS deviation of
/// the target from its mean.
///
/// Returns 0 for a perfect prediction and exactly 1 for the constant
/// mean-of-target predictor. A constant target makes the denominator zero
/// and is reported as [`Error::DegenerateInput`].
pub fn nrmse(predicted: ArrayView1<f64>, target: ArrayView1<f64>) -> Result<f64> {
    if predicted.len() != target.len() {
        return Err(Error::Dimension(format!(
            "predicted has {} samples, target has {}",
            predicted.len(),
            target.len()
        )));
    }
    if target.len() < 2 {
        return Err(Error::InvalidArgument(
            "nrmse needs at least 2 samples".into(),
        ));
    }
    let mean = target.sum() / target.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&p, &y) in predicted.iter().zip(target.iter()) {
        num += (y - p) * (y - p);
        den += (y - mean) * (y - mean);
    }
    if den == 0.0 {
        return Err(Error::DegenerateInput("constant target in nrmse".into()));
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};

    fn random_trace(steps: usize, sub_sizes: &[usize], seed: u64) -> StateTrace {
        let total: usize = sub_sizes.iter().sum();
        let mut rng = SeededRng::new(seed);
        let states = Array2::from_shape_fn((steps, total), |_| rng.uniform(-1.0, 1.0));
        StateTrace::new(states, sub_sizes).unwrap()
    }

    #[test]
    fn zero_targets_give_zero_weights() {
        let trace = random_trace(50, &[10], 1);
        let inputs = Array2::zeros((50, 1));
        let targets = Array2::zeros((50, 1));
        let readout = train_readout(
            &trace,
            inputs.view(),
            targets.view(),
            5,
            FeatureSpec::default(),
            1e-6,
        )
        .unwrap();
        for &w in readout.w_out.iter() {
            assert!(w.abs() < 1e-12);
        }
    }

    #[test]
    fn identity_trace_interpolates_targets() {
        // Trace columns form the identity over the train rows.
        let states = Array2::eye(6);
        let trace = StateTrace::new(states, &[6]).unwrap();
        let inputs = Array2::zeros((6, 1));
        let mut targets = Array2::zeros((6, 1));
        for i in 0..6 {
            targets[[i, 0]] = (i as f64) - 2.5;
        }
        let spec = FeatureSpec {
            append_bias: false,
            ..FeatureSpec::default()
        };
        let readout = train_readout(&trace, inputs.view(), targets.view(), 0, spec, 0.0).unwrap();
        let preds = predict_sequence(&readout, &trace, inputs.view()).unwrap();
        for i in 0..6 {
            assert_relative_eq!(preds[[i, 0]], targets[[i, 0]], epsilon = 1e-10);
        }
    }

    #[test]
    fn training_matches_normal_equations_oracle() {
        let trace = random_trace(500, &[50], 3);
        let inputs = Array2::zeros((500, 1));
        let mut rng = SeededRng::new(4);
        let targets = Array2::from_shape_fn((500, 1), |_| rng.uniform(-1.0, 1.0));
        let spec = FeatureSpec {
            append_bias: false,
            ..FeatureSpec::default()
        };
        let lambda = 1e-6;
        let readout =
            train_readout(&trace, inputs.view(), targets.view(), 0, spec, lambda).unwrap();

        let x = trace.states();
        let xn = nalgebra::DMatrix::from_row_iterator(500, 50, x.iter().copied());
        let yn = nalgebra::DMatrix::from_row_iterator(500, 1, targets.iter().copied());
        let gram = xn.transpose() * &xn + nalgebra::DMatrix::identity(50, 50) * lambda;
        let oracle = gram.try_inverse().unwrap() * xn.transpose() * yn;
        for j in 0..50 {
            assert_relative_eq!(readout.w_out[[0, j]], oracle[(j, 0)], max_relative = 1e-8);
        }
    }

    #[test]
    fn zero_readout_predicts_zero() {
        let trace = random_trace(20, &[5], 9);
        let inputs = Array2::zeros((20, 1));
        let readout = Readout {
            w_out: Array2::zeros((1, 6)),
            spec: FeatureSpec::default(),
            lambda: 0.0,
        };
        let preds = predict_sequence(&readout, &trace, inputs.view()).unwrap();
        assert!(preds.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_readout_is_a_dot_product() {
        let states = array![[3.0]];
        let trace = StateTrace::new(states, &[1]).unwrap();
        let inputs = Array2::zeros((1, 1));
        let readout = Readout {
            w_out: array![[2.0]],
            spec: FeatureSpec {
                append_bias: false,
                ..FeatureSpec::default()
            },
            lambda: 0.0,
        };
        let preds = predict_sequence(&readout, &trace, inputs.view()).unwrap();
        assert_relative_eq!(preds[[0, 0]], 6.0, max_relative = 1e-15);
    }

    #[test]
    fn washout_must_leave_rows() {
        let trace = random_trace(10, &[4], 2);
        let inputs = Array2::zeros((10, 1));
        let targets = Array2::zeros((10, 1));
        assert!(matches!(
            train_readout(
                &trace,
                inputs.view(),
                targets.view(),
                10,
                FeatureSpec::default(),
                1e-8
            ),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn nrmse_identities() {
        let target = array![1.0, 2.0, 3.0, 4.0];
        assert_eq!(nrmse(target.view(), target.view()).unwrap(), 0.0);

        let mean = target.sum() / 4.0;
        let mean_pred = array![mean, mean, mean, mean];
        assert_eq!(nrmse(mean_pred.view(), target.view()).unwrap(), 1.0);
    }

    #[test]
    fn nrmse_matches_hand_evaluation() {
        let target = array![1.0, 2.0, 3.0];
        let predicted = array![1.0, 2.0, 4.0];
        let v = nrmse(predicted.view(), target.view()).unwrap();
        assert_relative_eq!(v, (0.5f64).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn nrmse_is_affine_invariant() {
        let mut rng = SeededRng::new(8);
        let target = ndarray::Array1::from_shape_fn(100, |_| rng.uniform(-1.0, 1.0));
        let predicted = ndarray::Array1::from_shape_fn(100, |_| rng.uniform(-1.0, 1.0));
        let base = nrmse(predicted.view(), target.view()).unwrap();
        let (a, b) = (-3.7, 0.9);
        let target2 = target.mapv(|v| a * v + b);
        let predicted2 = predicted.mapv(|v| a * v + b);
        let scaled = nrmse(predicted2.view(), target2.view()).unwrap();
        assert_relative_eq!(base, scaled, max_relative = 1e-10);
    }

    #[test]
    fn constant_target_is_degenerate() {
        let target = array![2.0, 2.0, 2.0];
        let predicted = array![1.0, 2.0, 3.0];
        assert!(matches!(
            nrmse(predicted.view(), target.view()),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn smaller_lambda_never_fits_train_worse() {
        let trace = random_trace(200, &[30], 5);
        let inputs = Array2::zeros((200, 1));
        let mut rng = SeededRng::new(6);
        let targets = Array2::from_shape_fn((200, 1), |_| rng.uniform(-1.0, 1.0));
        let mut last = f64::INFINITY;
        for lambda in [1.0, 1e-2, 1e-4, 1e-6, 1e-8] {
            let readout = train_readout(
                &trace,
                inputs.view(),
                targets.view(),
                0,
                FeatureSpec::default(),
                lambda,
            )
            .unwrap();
            let preds = predict_sequence(&readout, &trace, inputs.view()).unwrap();
            let err = nrmse(preds.column(0), targets.column(0)).unwrap();
            assert!(err <= last + 1e-9, "lambda {lambda}: {err} > {last}");
            last = err;
        }
    }

    #[test]
    fn include_last_layer_flag_drops_columns() {
        let trace = random_trace(40, &[6, 4], 12);
        let inputs = Array2::zeros((40, 1));
        let spec_all = FeatureSpec::default();
        let spec_head = FeatureSpec {
            include_last_layer: false,
            ..FeatureSpec::default()
        };
        assert_eq!(spec_all.feature_width(&trace, 1), 11);
        assert_eq!(spec_head.feature_width(&trace, 1), 7);
        let mut rng = SeededRng::new(3);
        let targets = Array2::from_shape_fn((40, 1), |_| rng.uniform(-1.0, 1.0));
        let readout =
            train_readout(&trace, inputs.view(), targets.view(), 0, spec_head, 1e-8).unwrap();
        assert_eq!(readout.w_out.ncols(), 7);
    }

    #[test]
    fn readout_json_round_trip() {
        let readout = Readout {
            w_out: array![[1.0, -2.0, 0.5]],
            spec: FeatureSpec::default(),
            lambda: 1e-8,
        };
        let doc = readout.to_json().unwrap();
        let restored = Readout::from_json(&doc).unwrap();
        assert_eq!(restored.w_out, readout.w_out);
        assert_eq!(restored.spec, readout.spec);
        assert_eq!(restored.lambda, readout.lambda);
    }
}
