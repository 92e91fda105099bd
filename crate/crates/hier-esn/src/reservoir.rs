//! Reservoir construction and state updates for the three architectures.
//!
//! A network is a list of sub-reservoirs. Shallow networks have exactly one.
//! Wide networks run several sub-reservoirs in parallel, each fed by the raw
//! input with no coupling between them. Deep networks stack sub-reservoirs
//! in series: only the first sees the input, every later one is driven by
//! the previous sub-reservoir's freshly updated state.
//!
//! Per sub-reservoir the state update is the leaky-integrator tanh rule
//! `x = (1 - alpha) * x_prev + alpha * tanh(W_in * in + W_res * x_prev)`,
//! with `W_in` drawn uniform over `[-IS, IS]` and `W_res` drawn uniform over
//! `[-1, 1]` then rescaled so its spectral radius equals `SR`.

use ndarray::linalg::general_mat_vec_mul;
use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::{spectral_radius_estimate, SeededRng};

/// Tolerance used when estimating the spectral radius of raw weight draws.
/// Tight enough that the post-rescaling radius stays within 1e-3 relative
/// of the requested value.
const BUILD_RHO_TOL: f64 = 1e-10;
const BUILD_RHO_MAX_ITER: usize = 100_000;

/// Per-sub-reservoir hyperparameters. All three lie in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub input_scaling: f64,
    pub spectral_radius: f64,
    pub leaky_rate: f64,
}

impl HyperParams {
    pub fn new(input_scaling: f64, spectral_radius: f64, leaky_rate: f64) -> Result<Self> {
        let hp = Self {
            input_scaling,
            spectral_radius,
            leaky_rate,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_scaling", self.input_scaling),
            ("spectral_radius", self.spectral_radius),
            ("leaky_rate", self.leaky_rate),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Network architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Shallow,
    Wide,
    Deep,
}

impl std::fmt::Display for ArchKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArchKind::Shallow => write!(f, "shallow"),
            ArchKind::Wide => write!(f, "wide"),
            ArchKind::Deep => write!(f, "deep"),
        }
    }
}

/// Shape and hyperparameters of a network: architecture kind, sub-reservoir
/// sizes, input dimension and one [`HyperParams`] per sub-reservoir.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub kind: ArchKind,
    pub sub_sizes: Vec<usize>,
    pub input_dim: usize,
    pub hyper: Vec<HyperParams>,
}

impl Topology {
    pub fn new(
        kind: ArchKind,
        sub_sizes: Vec<usize>,
        input_dim: usize,
        hyper: Vec<HyperParams>,
    ) -> Result<Self> {
        let t = Self {
            kind,
            sub_sizes,
            input_dim,
            hyper,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn shallow(size: usize, input_dim: usize, hyper: HyperParams) -> Result<Self> {
        Self::new(ArchKind::Shallow, vec![size], input_dim, vec![hyper])
    }

    /// Split `total_nodes` into `n_subs` sub-reservoirs as evenly as
    /// possible, giving the remainder to earlier sub-reservoirs.
    pub fn equal_split(
        kind: ArchKind,
        total_nodes: usize,
        n_subs: usize,
        input_dim: usize,
        hyper: Vec<HyperParams>,
    ) -> Result<Self> {
        if n_subs == 0 {
            return Err(Error::InvalidArgument("n_subs must be >= 1".into()));
        }
        if total_nodes < n_subs {
            return Err(Error::InvalidArgument(format!(
                "cannot split {total_nodes} nodes into {n_subs} sub-reservoirs"
            )));
        }
        let base = total_nodes / n_subs;
        let rem = total_nodes % n_subs;
        let sizes = (0..n_subs).map(|i| base + usize::from(i < rem)).collect();
        Self::new(kind, sizes, input_dim, hyper)
    }

    /// Same shape with different hyperparameters.
    pub fn with_hyper(&self, hyper: Vec<HyperParams>) -> Result<Self> {
        Self::new(self.kind, self.sub_sizes.clone(), self.input_dim, hyper)
    }

    pub fn n_subs(&self) -> usize {
        self.sub_sizes.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.sub_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sub_sizes.is_empty() {
            return Err(Error::InvalidArgument("at least one sub-reservoir".into()));
        }
        if self.kind == ArchKind::Shallow && self.sub_sizes.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "shallow networks have exactly one sub-reservoir, got {}",
                self.sub_sizes.len()
            )));
        }
        if self.sub_sizes.contains(&0) {
            return Err(Error::InvalidArgument(
                "sub-reservoir sizes must be >= 1".into(),
            ));
        }
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("input_dim must be >= 1".into()));
        }
        if self.hyper.len() != self.sub_sizes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} hyperparameter sets for {} sub-reservoirs",
                self.hyper.len(),
                self.sub_sizes.len()
            )));
        }
        for hp in &self.hyper {
            hp.validate()?;
        }
        Ok(())
    }

    /// Number of input columns feeding sub-reservoir `l`.
    fn input_width(&self, l: usize) -> usize {
        match self.kind {
            ArchKind::Shallow | ArchKind::Wide => self.input_dim,
            ArchKind::Deep => {
                if l == 0 {
                    self.input_dim
                } else {
                    self.sub_sizes[l - 1]
                }
            }
        }
    }
}

/// Raw weight draws for a topology shape, before hyperparameters are
/// applied: `W_in` candidates in `[-1, 1)` and `W_res` candidates with their
/// measured spectral radii.
///
/// Instantiating a template only scales matrices, so a hyperparameter search
/// can reuse one template across every genome evaluated under the same
/// build seed. `ReservoirNetwork::build` is equivalent to
/// `WeightTemplate::generate` + `instantiate`.
#[derive(Debug, Clone)]
pub struct WeightTemplate {
    kind: ArchKind,
    sub_sizes: Vec<usize>,
    input_dim: usize,
    seed: u64,
    raw_in: Vec<Array2<f64>>,
    raw_res: Vec<Array2<f64>>,
    raw_rho: Vec<f64>,
}

impl WeightTemplate {
    /// Draw raw weights for the shape of `topology` (its hyperparameters are
    /// ignored). Deterministic in `(shape, seed)`: matrices are drawn
    /// sub-reservoir by sub-reservoir, `W_in` first then `W_res`, entries in
    /// row-major order, from one ChaCha8 stream keyed with `seed`.
    pub fn generate(topology: &Topology, seed: u64) -> Result<Self> {
        topology.validate()?;
        let mut rng = SeededRng::new(seed);
        let n_subs = topology.n_subs();
        let mut raw_in = Vec::with_capacity(n_subs);
        let mut raw_res = Vec::with_capacity(n_subs);
        let mut raw_rho = Vec::with_capacity(n_subs);

        for l in 0..n_subs {
            let size = topology.sub_sizes[l];
            let in_width = topology.input_width(l);
            raw_in.push(Array2::from_shape_fn((size, in_width), |_| {
                rng.uniform(-1.0, 1.0)
            }));
            let res = Array2::from_shape_fn((size, size), |_| rng.uniform(-1.0, 1.0));
            let rho = spectral_radius_estimate(&res, BUILD_RHO_TOL, BUILD_RHO_MAX_ITER)
                .map_err(|e| Error::Build(format!("sub-reservoir {l}: {e}")))?;
            if rho == 0.0 {
                return Err(Error::Build(format!(
                    "sub-reservoir {l}: raw recurrent matrix has zero spectral radius"
                )));
            }
            raw_res.push(res);
            raw_rho.push(rho);
        }

        Ok(Self {
            kind: topology.kind,
            sub_sizes: topology.sub_sizes.clone(),
            input_dim: topology.input_dim,
            seed,
            raw_in,
            raw_res,
            raw_rho,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Apply hyperparameters: `W_in = IS * raw`, `W_res = (SR / rho(raw)) * raw`.
    pub fn instantiate(&self, hyper: &[HyperParams]) -> Result<ReservoirNetwork> {
        if hyper.len() != self.sub_sizes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} hyperparameter sets for {} sub-reservoirs",
                hyper.len(),
                self.sub_sizes.len()
            )));
        }
        let topology = Topology::new(
            self.kind,
            self.sub_sizes.clone(),
            self.input_dim,
            hyper.to_vec(),
        )?;

        let mut w_in = Vec::with_capacity(hyper.len());
        let mut w_res = Vec::with_capacity(hyper.len());
        for (l, hp) in hyper.iter().enumerate() {
            w_in.push(&self.raw_in[l] * hp.input_scaling);
            w_res.push(&self.raw_res[l] * (hp.spectral_radius / self.raw_rho[l]));
        }

        ReservoirNetwork::from_weights(topology, w_in, w_res, self.seed, true)
    }
}

/// A built reservoir network: fixed weights plus mutable per-sub states.
#[derive(Debug, Clone)]
pub struct ReservoirNetwork {
    topology: Topology,
    build_seed: u64,
    /// True when the weights were drawn from `build_seed`, so the network
    /// can be serialized as `(topology, seed)`.
    seeded: bool,
    w_in: Vec<Array2<f64>>,
    w_res: Vec<Array2<f64>>,
    state: Vec<Array1<f64>>,
    scratch: Vec<Array1<f64>>,
}

/// Serialized form: matrices are regenerated from the seed, not stored.
#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    version: String,
    topology: Topology,
    build_seed: u64,
}

impl ReservoirNetwork {
    /// Build a network from a topology and a seed. Deterministic: the same
    /// arguments produce bit-identical weight matrices.
    pub fn build(topology: &Topology, seed: u64) -> Result<Self> {
        WeightTemplate::generate(topology, seed)?.instantiate(&topology.hyper)
    }

    /// Assemble a network from explicit weight matrices. Intended for tests
    /// and custom wiring; such a network cannot be serialized as
    /// `(topology, seed)`.
    pub fn from_parts(
        topology: Topology,
        w_in: Vec<Array2<f64>>,
        w_res: Vec<Array2<f64>>,
    ) -> Result<Self> {
        Self::from_weights(topology, w_in, w_res, 0, false)
    }

    fn from_weights(
        topology: Topology,
        w_in: Vec<Array2<f64>>,
        w_res: Vec<Array2<f64>>,
        build_seed: u64,
        seeded: bool,
    ) -> Result<Self> {
        topology.validate()?;
        let n_subs = topology.n_subs();
        if w_in.len() != n_subs || w_res.len() != n_subs {
            return Err(Error::Dimension(format!(
                "expected {n_subs} weight matrices per kind, got {} input and {} recurrent",
                w_in.len(),
                w_res.len()
            )));
        }
        for l in 0..n_subs {
            let size = topology.sub_sizes[l];
            let want_in = (size, topology.input_width(l));
            if w_in[l].dim() != want_in {
                return Err(Error::Dimension(format!(
                    "sub-reservoir {l}: W_in is {:?}, expected {want_in:?}",
                    w_in[l].dim()
                )));
            }
            if w_res[l].dim() != (size, size) {
                return Err(Error::Dimension(format!(
                    "sub-reservoir {l}: W_res is {:?}, expected {:?}",
                    w_res[l].dim(),
                    (size, size)
                )));
            }
        }
        let state = topology
            .sub_sizes
            .iter()
            .map(|&s| Array1::zeros(s))
            .collect();
        let scratch = topology
            .sub_sizes
            .iter()
            .map(|&s| Array1::zeros(s))
            .collect();
        Ok(Self {
            topology,
            build_seed,
            seeded,
            w_in,
            w_res,
            state,
            scratch,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn build_seed(&self) -> u64 {
        self.build_seed
    }

    pub fn total_nodes(&self) -> usize {
        self.topology.total_nodes()
    }

    pub fn input_dim(&self) -> usize {
        self.topology.input_dim
    }

    pub fn w_in(&self, l: usize) -> &Array2<f64> {
        &self.w_in[l]
    }

    pub fn w_res(&self, l: usize) -> &Array2<f64> {
        &self.w_res[l]
    }

    /// Zero every sub-reservoir state.
    pub fn reset(&mut self) {
        for s in &mut self.state {
            s.fill(0.0);
        }
    }

    /// Concatenated state, sub-reservoir 1 first.
    pub fn state_concat(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.total_nodes());
        let mut offset = 0;
        for s in &self.state {
            out.slice_mut(ndarray::s![offset..offset + s.len()])
                .assign(s);
            offset += s.len();
        }
        out
    }

    /// Overwrite the concatenated state. Entries must lie in `[-1, 1]` to
    /// preserve the state-range invariant.
    pub fn set_state(&mut self, concat: &[f64]) -> Result<()> {
        if concat.len() != self.total_nodes() {
            return Err(Error::Dimension(format!(
                "state has {} entries, network has {} nodes",
                concat.len(),
                self.total_nodes()
            )));
        }
        if concat.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "state entries must lie in [-1, 1]".into(),
            ));
        }
        let mut offset = 0;
        for s in &mut self.state {
            let len = s.len();
            s.assign(&ArrayView1::from(&concat[offset..offset + len]));
            offset += len;
        }
        Ok(())
    }

    /// Advance every sub-reservoir by one step and return the concatenated
    /// state. Sub-reservoirs update in architecture order; in a deep network
    /// sub-reservoir `l > 1` sees the already-updated state of `l - 1` from
    /// the current step.
    pub fn step(&mut self, input: &[f64]) -> Result<Array1<f64>> {
        self.step_inner(input)?;
        Ok(self.state_concat())
    }

    fn step_inner(&mut self, input: &[f64]) -> Result<()> {
        if input.len() != self.topology.input_dim {
            return Err(Error::Dimension(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.topology.input_dim
            )));
        }
        let n_subs = self.topology.n_subs();
        for l in 0..n_subs {
            match self.topology.kind {
                ArchKind::Shallow | ArchKind::Wide => {
                    self.update_layer(l, ArrayView1::from(input));
                }
                ArchKind::Deep => {
                    if l == 0 {
                        self.update_layer(l, ArrayView1::from(input));
                    } else {
                        // Feed the freshly updated upstream state.
                        let (head, tail) = self.state.split_at_mut(l);
                        let upstream = head[l - 1].view();
                        let pre = &mut self.scratch[l];
                        pre.fill(0.0);
                        general_mat_vec_mul(1.0, &self.w_in[l], &upstream, 0.0, pre);
                        general_mat_vec_mul(1.0, &self.w_res[l], &tail[0].view(), 1.0, pre);
                        leaky_tanh_update(&mut tail[0], pre, self.topology.hyper[l].leaky_rate);
                    }
                }
            }
        }
        Ok(())
    }

    fn update_layer(&mut self, l: usize, input: ArrayView1<f64>) {
        let pre = &mut self.scratch[l];
        pre.fill(0.0);
        general_mat_vec_mul(1.0, &self.w_in[l], &input, 0.0, pre);
        general_mat_vec_mul(1.0, &self.w_res[l], &self.state[l].view(), 1.0, pre);
        leaky_tanh_update(&mut self.state[l], pre, self.topology.hyper[l].leaky_rate);
    }

    /// Drive the network over a `T x N_U` input sequence and collect every
    /// concatenated state. With `reset` the states are zeroed first;
    /// otherwise the run continues from the current state.
    pub fn run_sequence(
        &mut self,
        inputs: ndarray::ArrayView2<f64>,
        reset: bool,
    ) -> Result<StateTrace> {
        if inputs.ncols() != self.topology.input_dim {
            return Err(Error::Dimension(format!(
                "inputs have {} columns, network expects {}",
                inputs.ncols(),
                self.topology.input_dim
            )));
        }
        if inputs.nrows() == 0 {
            return Err(Error::InvalidArgument("empty input sequence".into()));
        }
        if reset {
            self.reset();
        }
        let steps = inputs.nrows();
        let total = self.total_nodes();
        let mut states = Array2::zeros((steps, total));
        let mut row_buf = vec![0.0; self.topology.input_dim];
        for t in 0..steps {
            for (b, v) in row_buf.iter_mut().zip(inputs.row(t).iter()) {
                *b = *v;
            }
            self.step_inner(&row_buf)?;
            let mut offset = 0;
            for s in &self.state {
                states
                    .slice_mut(ndarray::s![t, offset..offset + s.len()])
                    .assign(s);
                offset += s.len();
            }
        }
        StateTrace::new(states, &self.topology.sub_sizes)
    }

    /// Serialize as a JSON document holding topology, hyperparameters and
    /// build seed; the weight matrices are regenerated from the seed when
    /// loading.
    pub fn to_json(&self) -> Result<String> {
        if !self.seeded {
            return Err(Error::InvalidArgument(
                "network was assembled from explicit matrices and has no generating seed".into(),
            ));
        }
        Ok(serde_json::to_string_pretty(&NetworkDoc {
            version: env!("CARGO_PKG_VERSION").to_string(),
            topology: self.topology.clone(),
            build_seed: self.build_seed,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_str(text)?;
        Self::build(&doc.topology, doc.build_seed)
    }
}

fn leaky_tanh_update(state: &mut Array1<f64>, pre: &Array1<f64>, alpha: f64) {
    for (x, &p) in state.iter_mut().zip(pre.iter()) {
        *x = (1.0 - alpha) * *x + alpha * p.tanh();
    }
}

/// States collected over a run: one row per step, columns ordered
/// sub-reservoir 1 first.
#[derive(Debug, Clone)]
pub struct StateTrace {
    states: Array2<f64>,
    offsets: Vec<usize>,
}

impl StateTrace {
    pub fn new(states: Array2<f64>, sub_sizes: &[usize]) -> Result<Self> {
        let total: usize = sub_sizes.iter().sum();
        if states.ncols() != total {
            return Err(Error::Dimension(format!(
                "trace has {} columns, sub-reservoir sizes sum to {total}",
                states.ncols()
            )));
        }
        let mut offsets = Vec::with_capacity(sub_sizes.len() + 1);
        offsets.push(0);
        for &s in sub_sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Ok(Self { states, offsets })
    }

    pub fn steps(&self) -> usize {
        self.states.nrows()
    }

    pub fn total_nodes(&self) -> usize {
        self.states.ncols()
    }

    pub fn n_subs(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn states(&self) -> &Array2<f64> {
        &self.states
    }

    /// Column range occupied by sub-reservoir `l`.
    pub fn sub_range(&self, l: usize) -> Range<usize> {
        self.offsets[l]..self.offsets[l + 1]
    }

    /// Columns of sub-reservoir `l`.
    pub fn sub_states(&self, l: usize) -> ndarray::ArrayView2<'_, f64> {
        self.states.slice(ndarray::s![.., self.sub_range(l)])
    }

    /// Copy of the first `t` rows.
    pub fn truncated(&self, t: usize) -> Result<StateTrace> {
        if t > self.steps() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate {}-step trace to {t}",
                self.steps()
            )));
        }
        Ok(StateTrace {
            states: self.states.slice(ndarray::s![..t, ..]).to_owned(),
            offsets: self.offsets.clone(),
        })
    }
}
