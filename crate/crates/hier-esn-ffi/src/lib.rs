//! C ABI for the hier-esn library.
//!
//! Handles are opaque pointers created and destroyed by this crate; every
//! fallible call returns a [`HierEsnStatus`] and leaves a human-readable
//! message retrievable with [`hier_esn_last_error`] on failure. Array
//! arguments are caller-allocated `double` buffers in row-major order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hier_esn::error::Error;
use hier_esn::readout::{self, FeatureSpec, Readout};
use hier_esn::reservoir::{ArchKind, HyperParams, ReservoirNetwork, Topology};
use hier_esn::tasks;
use ndarray::{Array2, ArrayView1, ArrayView2};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HierEsnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Convergence = 4,
    Singular = 5,
    Degenerate = 6,
    InsufficientData = 7,
    DataFormat = 8,
    Io = 9,
    /// Unexpected internal failure (a panic caught at the boundary).
    Internal = 10,
}

/// A built reservoir network.
pub struct HierEsnNetwork {
    inner: ReservoirNetwork,
}

/// A trained readout.
pub struct HierEsnReadout {
    inner: Readout,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> HierEsnStatus {
    match err {
        Error::Dimension(_) => HierEsnStatus::Dimension,
        Error::InvalidArgument(_) => HierEsnStatus::InvalidArgument,
        Error::Convergence { .. } => HierEsnStatus::Convergence,
        Error::Singular(_) => HierEsnStatus::Singular,
        Error::DegenerateInput(_) => HierEsnStatus::Degenerate,
        Error::Build(_) => HierEsnStatus::InvalidArgument,
        Error::InsufficientData(_) => HierEsnStatus::InsufficientData,
        Error::DataFormat(_) => HierEsnStatus::DataFormat,
        Error::Io(_) => HierEsnStatus::Io,
        Error::Serde(_) => HierEsnStatus::DataFormat,
    }
}

fn fail(err: Error) -> HierEsnStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null_arg(name: &str) -> HierEsnStatus {
    set_error(&format!("{name} is null"));
    HierEsnStatus::NullPointer
}

/// Run a closure, converting panics into `Internal`.
fn guard(f: impl FnOnce() -> HierEsnStatus) -> HierEsnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            HierEsnStatus::Internal
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hier_esn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hier_esn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by a `hier_esn_*` call that
/// documents this deallocator, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn arch_from_code(kind: u32) -> Result<ArchKind, Error> {
    match kind {
        0 => Ok(ArchKind::Shallow),
        1 => Ok(ArchKind::Wide),
        2 => Ok(ArchKind::Deep),
        other => Err(Error::InvalidArgument(format!(
            "architecture code {other} (expected 0 = shallow, 1 = wide, 2 = deep)"
        ))),
    }
}

/// Build a network.
///
/// `sub_sizes` holds `n_subs` node counts; `hyper` holds `3 * n_subs`
/// values laid out as (input scaling, spectral radius, leaky rate) per
/// sub-reservoir, each in (0, 1].
///
/// # Safety
/// `sub_sizes` must point to `n_subs` readable elements, `hyper` to
/// `3 * n_subs`, and `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_network_new(
    kind: u32,
    sub_sizes: *const usize,
    n_subs: usize,
    input_dim: usize,
    hyper: *const f64,
    seed: u64,
    out: *mut *mut HierEsnNetwork,
) -> HierEsnStatus {
    if out.is_null() {
        return null_arg("out");
    }
    if sub_sizes.is_null() {
        return null_arg("sub_sizes");
    }
    if hyper.is_null() {
        return null_arg("hyper");
    }
    if n_subs == 0 {
        set_error("n_subs must be >= 1");
        return HierEsnStatus::InvalidArgument;
    }
    let sizes = std::slice::from_raw_parts(sub_sizes, n_subs).to_vec();
    let hyper = std::slice::from_raw_parts(hyper, 3 * n_subs);
    guard(|| {
        let build = || -> Result<ReservoirNetwork, Error> {
            let kind = arch_from_code(kind)?;
            let hyper: Result<Vec<HyperParams>, Error> = hyper
                .chunks_exact(3)
                .map(|c| HyperParams::new(c[0], c[1], c[2]))
                .collect();
            let topology = Topology::new(kind, sizes.clone(), input_dim, hyper?)?;
            ReservoirNetwork::build(&topology, seed)
        };
        match build() {
            Ok(net) => {
                *out = Box::into_raw(Box::new(HierEsnNetwork { inner: net }));
                HierEsnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Rebuild a network from the JSON document produced by
/// [`hier_esn_network_to_json`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_network_from_json(
    json: *const c_char,
    out: *mut *mut HierEsnNetwork,
) -> HierEsnStatus {
    if json.is_null() {
        return null_arg("json");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("json is not valid UTF-8");
            return HierEsnStatus::DataFormat;
        }
    };
    guard(|| match ReservoirNetwork::from_json(text) {
        Ok(net) => {
            *out = Box::into_raw(Box::new(HierEsnNetwork { inner: net }));
            HierEsnStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Serialize a network as JSON (topology, hyperparameters and build seed).
/// The returned string must be freed with [`hier_esn_string_free`].
///
/// # Safety
/// `net` must be a live handle from this library and `out` a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_network_to_json(
    net: *const HierEsnNetwork,
    out: *mut *mut c_char,
) -> HierEsnStatus {
    if net.is_null() {
        return null_arg("net");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let net = &(*net).inner;
    guard(|| match net.to_json() {
        Ok(json) => match CString::new(json) {
            Ok(c) => {
                *out = c.into_raw();
                HierEsnStatus::Ok
            }
            Err(_) => {
                set_error("serialized JSON contained a NUL byte");
                HierEsnStatus::Internal
            }
        },
        Err(e) => fail(e),
    })
}

/// Destroy a network handle.
///
/// # Safety
/// `net` must be a pointer from `hier_esn_network_new`/`_from_json` that
/// has not been freed yet; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_network_free(net: *mut HierEsnNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Total node count across all sub-reservoirs.
///
/// # Safety
/// `net` must be a live handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_network_total_nodes(
    net: *const HierEsnNetwork,
    out: *mut usize,
) -> HierEsnStatus {
    if net.is_null() {
        return null_arg("net");
    }
    if out.is_null() {
        return null_arg("out");
    }
    *out = (*net).inner.total_nodes();
    HierEsnStatus::Ok
}

/// Input dimension the network expects.
///
/// # Safety
/// `net` must be a live handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_network_input_dim(
    net: *const HierEsnNetwork,
    out: *mut usize,
) -> HierEsnStatus {
    if net.is_null() {
        return null_arg("net");
    }
    if out.is_null() {
        return null_arg("out");
    }
    *out = (*net).inner.input_dim();
    HierEsnStatus::Ok
}

/// Zero every sub-reservoir state.
///
/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_network_reset(net: *mut HierEsnNetwork) -> HierEsnStatus {
    if net.is_null() {
        return null_arg("net");
    }
    (*net).inner.reset();
    HierEsnStatus::Ok
}

/// Advance the network one step and write the concatenated state.
///
/// # Safety
/// `input` must hold `input_len` readable doubles and `state_out` must
/// have room for `state_len == total_nodes` doubles.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_network_step(
    net: *mut HierEsnNetwork,
    input: *const f64,
    input_len: usize,
    state_out: *mut f64,
    state_len: usize,
) -> HierEsnStatus {
    if net.is_null() {
        return null_arg("net");
    }
    if input.is_null() {
        return null_arg("input");
    }
    if state_out.is_null() {
        return null_arg("state_out");
    }
    let net = &mut (*net).inner;
    if state_len != net.total_nodes() {
        set_error(&format!(
            "state_out holds {state_len} values, network has {} nodes",
            net.total_nodes()
        ));
        return HierEsnStatus::Dimension;
    }
    let input = std::slice::from_raw_parts(input, input_len);
    let out = std::slice::from_raw_parts_mut(state_out, state_len);
    guard(|| match net.step(input) {
        Ok(state) => {
            for (o, v) in out.iter_mut().zip(state.iter()) {
                *o = *v;
            }
            HierEsnStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Drive the network over `steps` rows of input (row-major
/// `steps x input_dim`) and write every concatenated state (row-major
/// `steps x total_nodes`).
///
/// # Safety
/// `inputs` must hold `steps * input_dim` readable doubles and
/// `states_out` must have room for `states_len == steps * total_nodes`.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_network_run(
    net: *mut HierEsnNetwork,
    inputs: *const f64,
    steps: usize,
    input_dim: usize,
    reset: bool,
    states_out: *mut f64,
    states_len: usize,
) -> HierEsnStatus {
    if net.is_null() {
        return null_arg("net");
    }
    if inputs.is_null() {
        return null_arg("inputs");
    }
    if states_out.is_null() {
        return null_arg("states_out");
    }
    let net = &mut (*net).inner;
    if states_len != steps * net.total_nodes() {
        set_error(&format!(
            "states_out holds {states_len} values, need steps * total_nodes = {}",
            steps * net.total_nodes()
        ));
        return HierEsnStatus::Dimension;
    }
    let inputs = std::slice::from_raw_parts(inputs, steps * input_dim);
    let out = std::slice::from_raw_parts_mut(states_out, states_len);
    guard(|| {
        let inputs = match ArrayView2::from_shape((steps, input_dim), inputs) {
            Ok(v) => v,
            Err(e) => return fail(Error::Dimension(e.to_string())),
        };
        match net.run_sequence(inputs, reset) {
            Ok(trace) => {
                for (o, v) in out.iter_mut().zip(trace.states().iter()) {
                    *o = *v;
                }
                HierEsnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Run the network from a zero state over a training sequence and fit a
/// ridge readout on the rows at and after `washout`.
///
/// `targets` is row-major `steps x n_outputs`.
///
/// # Safety
/// `inputs` must hold `steps * input_dim` doubles, `targets`
/// `steps * n_outputs`, and `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_readout_train(
    net: *mut HierEsnNetwork,
    inputs: *const f64,
    steps: usize,
    input_dim: usize,
    targets: *const f64,
    n_outputs: usize,
    washout: usize,
    append_raw_input: bool,
    append_bias: bool,
    lambda: f64,
    out: *mut *mut HierEsnReadout,
) -> HierEsnStatus {
    if net.is_null() {
        return null_arg("net");
    }
    if inputs.is_null() {
        return null_arg("inputs");
    }
    if targets.is_null() {
        return null_arg("targets");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let net = &mut (*net).inner;
    let inputs = std::slice::from_raw_parts(inputs, steps * input_dim);
    let targets = std::slice::from_raw_parts(targets, steps * n_outputs);
    guard(|| {
        let mut train = || -> Result<Readout, Error> {
            let inputs = ArrayView2::from_shape((steps, input_dim), inputs)
                .map_err(|e| Error::Dimension(e.to_string()))?;
            let targets = ArrayView2::from_shape((steps, n_outputs), targets)
                .map_err(|e| Error::Dimension(e.to_string()))?;
            let trace = net.run_sequence(inputs, true)?;
            let spec = FeatureSpec {
                append_raw_input,
                append_bias,
                ..FeatureSpec::default()
            };
            readout::train_readout(&trace, inputs, targets, washout, spec, lambda)
        };
        match train() {
            Ok(r) => {
                *out = Box::into_raw(Box::new(HierEsnReadout { inner: r }));
                HierEsnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of outputs a readout produces per step.
///
/// # Safety
/// `readout` must be a live handle and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_readout_outputs(
    readout: *const HierEsnReadout,
    out: *mut usize,
) -> HierEsnStatus {
    if readout.is_null() {
        return null_arg("readout");
    }
    if out.is_null() {
        return null_arg("out");
    }
    *out = (*readout).inner.outputs();
    HierEsnStatus::Ok
}

/// Drive the network over an input sequence and apply the readout to every
/// step. `predictions_out` is row-major `steps x n_outputs`.
///
/// # Safety
/// `inputs` must hold `steps * input_dim` doubles and `predictions_out`
/// room for `predictions_len == steps * n_outputs`.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_readout_predict(
    readout: *const HierEsnReadout,
    net: *mut HierEsnNetwork,
    inputs: *const f64,
    steps: usize,
    input_dim: usize,
    reset: bool,
    predictions_out: *mut f64,
    predictions_len: usize,
) -> HierEsnStatus {
    if readout.is_null() {
        return null_arg("readout");
    }
    if net.is_null() {
        return null_arg("net");
    }
    if inputs.is_null() {
        return null_arg("inputs");
    }
    if predictions_out.is_null() {
        return null_arg("predictions_out");
    }
    let readout = &(*readout).inner;
    let net = &mut (*net).inner;
    if predictions_len != steps * readout.outputs() {
        set_error(&format!(
            "predictions_out holds {predictions_len} values, need steps * outputs = {}",
            steps * readout.outputs()
        ));
        return HierEsnStatus::Dimension;
    }
    let inputs = std::slice::from_raw_parts(inputs, steps * input_dim);
    let out = std::slice::from_raw_parts_mut(predictions_out, predictions_len);
    guard(|| {
        let mut predict = || -> Result<Array2<f64>, Error> {
            let inputs = ArrayView2::from_shape((steps, input_dim), inputs)
                .map_err(|e| Error::Dimension(e.to_string()))?;
            let trace = net.run_sequence(inputs, reset)?;
            readout::predict_sequence(readout, &trace, inputs)
        };
        match predict() {
            Ok(p) => {
                for (o, v) in out.iter_mut().zip(p.iter()) {
                    *o = *v;
                }
                HierEsnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Destroy a readout handle.
///
/// # Safety
/// `readout` must be a pointer from `hier_esn_readout_train` not yet
/// freed; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_readout_free(readout: *mut HierEsnReadout) {
    if !readout.is_null() {
        drop(Box::from_raw(readout));
    }
}

/// Normalized root mean squared error between two series.
///
/// # Safety
/// `predicted` and `target` must each hold `len` readable doubles and
/// `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_nrmse(
    predicted: *const f64,
    target: *const f64,
    len: usize,
    out: *mut f64,
) -> HierEsnStatus {
    if predicted.is_null() {
        return null_arg("predicted");
    }
    if target.is_null() {
        return null_arg("target");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let predicted = std::slice::from_raw_parts(predicted, len);
    let target = std::slice::from_raw_parts(target, len);
    guard(
        || match readout::nrmse(ArrayView1::from(predicted), ArrayView1::from(target)) {
            Ok(v) => {
                *out = v;
                HierEsnStatus::Ok
            }
            Err(e) => fail(e),
        },
    )
}

/// Generate a NARMA10 input/target pair. `u_out` receives the drive and
/// `target_out` the one-step-ahead system output, `length` values each.
///
/// # Safety
/// `u_out` and `target_out` must each have room for `length` doubles.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_narma10(
    length: usize,
    seed: u64,
    u_out: *mut f64,
    target_out: *mut f64,
) -> HierEsnStatus {
    if u_out.is_null() {
        return null_arg("u_out");
    }
    if target_out.is_null() {
        return null_arg("target_out");
    }
    let u_out = std::slice::from_raw_parts_mut(u_out, length);
    let target_out = std::slice::from_raw_parts_mut(target_out, length);
    guard(|| match tasks::gen_narma10(length, seed) {
        Ok((u, y)) => {
            for (o, v) in u_out.iter_mut().zip(u.values.iter()) {
                *o = *v;
            }
            for (o, v) in target_out.iter_mut().zip(y.values.iter()) {
                *o = *v;
            }
            HierEsnStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Generate the MSO12 series (sum of twelve sinusoids).
///
/// # Safety
/// `out` must have room for `length` doubles.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_mso12(length: usize, out: *mut f64) -> HierEsnStatus {
    if out.is_null() {
        return null_arg("out");
    }
    let out = std::slice::from_raw_parts_mut(out, length);
    let series = tasks::gen_mso12(length);
    for (o, v) in out.iter_mut().zip(series.values.iter()) {
        *o = *v;
    }
    HierEsnStatus::Ok
}

/// Generate a Mackey-Glass series at unit sampling (RK4, dt = 0.1).
///
/// # Safety
/// `out` must have room for `length` doubles.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_mackey_glass(
    length: usize,
    tau: f64,
    seed: u64,
    out: *mut f64,
) -> HierEsnStatus {
    if out.is_null() {
        return null_arg("out");
    }
    let out = std::slice::from_raw_parts_mut(out, length);
    guard(
        || match tasks::gen_mackey_glass(length, tau, 0.1, 10, seed) {
            Ok(series) => {
                for (o, v) in out.iter_mut().zip(series.values.iter()) {
                    *o = *v;
                }
                HierEsnStatus::Ok
            }
            Err(e) => fail(e),
        },
    )
}

/// Estimate the spectral radius of a square row-major `n x n` matrix.
///
/// # Safety
/// `matrix` must hold `n * n` readable doubles and `out` must be a valid
/// destination.
#[no_mangle]
pub unsafe extern "C" fn hier_esn_spectral_radius(
    matrix: *const f64,
    n: usize,
    out: *mut f64,
) -> HierEsnStatus {
    if matrix.is_null() {
        return null_arg("matrix");
    }
    if out.is_null() {
        return null_arg("out");
    }
    let data = std::slice::from_raw_parts(matrix, n * n);
    guard(|| {
        let m = match Array2::from_shape_vec((n, n), data.to_vec()) {
            Ok(m) => m,
            Err(e) => return fail(Error::Dimension(e.to_string())),
        };
        match hier_esn::numerics::spectral_radius_estimate(&m, 1e-10, 100_000) {
            Ok(rho) => {
                *out = rho;
                HierEsnStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
