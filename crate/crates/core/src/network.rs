//! Feed-forward autoencoder whose designated layers receive tied session and
//! speaker factors through their own loading matrices:
//!
//! ```text
//! x_l = σ(W_l x_{l-1} + b_l + V1_l z1 + V2_l z2)
//! ```
//!
//! Layers without factors drop the last two terms. The last layer is linear so
//! that its output can be read as the mean of a Gaussian regression model.
//! Gradients are hand-derived for this topology, including the gradients with
//! respect to the injected factors that the tied updates aggregate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dot, sigmoid, softplus, Matrix};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Softplus,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => softplus(x),
            Activation::Linear => x,
        }
    }

    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Softplus => sigmoid(pre),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Receives the session and speaker factors.
    pub tf2: bool,
    /// Dropout may be applied to this layer's output.
    pub dropout_site: bool,
}

/// Autoencoder layout: encoder hidden layers, bottleneck, decoder hidden layers
/// and a final linear layer back to the feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub feature_dim: usize,
    pub encoder: Vec<usize>,
    pub bottleneck: usize,
    pub decoder: Vec<usize>,
    pub bottleneck_activation: Activation,
    pub session_rank: usize,
    pub speaker_rank: usize,
    /// Indices of layers that receive factors. Empty gives a plain DNN.
    pub tf2_layers: Vec<usize>,
    pub dropout_sites: Vec<usize>,
}

impl Architecture {
    /// 60 → 500 → 500 → 15 → 500 → 500 → 60 with factors injected into the
    /// first decoder layer.
    pub fn reference() -> Self {
        Self::symmetric(60, 500, 2, 15, 15, 50)
    }

    /// Symmetric autoencoder with `depth` softplus layers of `hidden` units on
    /// each side of a linear bottleneck. Factors enter the first decoder layer;
    /// dropout sites are the first encoder layer and the first decoder layer.
    pub fn symmetric(
        feature_dim: usize,
        hidden: usize,
        depth: usize,
        bottleneck: usize,
        session_rank: usize,
        speaker_rank: usize,
    ) -> Self {
        let first_decoder = depth + 1;
        let mut dropout_sites = vec![first_decoder];
        if depth > 0 {
            dropout_sites.insert(0, 0);
        }
        Self {
            feature_dim,
            encoder: vec![hidden; depth],
            bottleneck,
            decoder: vec![hidden; depth],
            bottleneck_activation: Activation::Linear,
            session_rank,
            speaker_rank,
            tf2_layers: vec![first_decoder],
            dropout_sites,
        }
    }

    /// Same layout with every factor connection removed.
    pub fn without_factors(&self) -> Self {
        Self {
            tf2_layers: Vec::new(),
            ..self.clone()
        }
    }

    pub fn num_layers(&self) -> usize {
        self.encoder.len() + self.decoder.len() + 2
    }

    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>> {
        if self.feature_dim == 0 || self.bottleneck == 0 {
            return Err(Error::InvalidInput("layer widths must be non-zero".into()));
        }
        let mut widths = vec![self.feature_dim];
        widths.extend(&self.encoder);
        widths.push(self.bottleneck);
        widths.extend(&self.decoder);
        widths.push(self.feature_dim);
        if widths.contains(&0) {
            return Err(Error::InvalidInput("layer widths must be non-zero".into()));
        }
        let n = widths.len() - 1;
        for &i in self.tf2_layers.iter().chain(&self.dropout_sites) {
            if i >= n {
                return Err(Error::InvalidInput(format!(
                    "layer index {i} out of range for a {n}-layer network"
                )));
            }
        }
        if self.dropout_sites.contains(&(n - 1)) {
            return Err(Error::InvalidInput(
                "the output layer cannot be a dropout site".into(),
            ));
        }
        let bottleneck_idx = self.encoder.len();
        Ok((0..n)
            .map(|l| LayerSpec {
                in_dim: widths[l],
                out_dim: widths[l + 1],
                activation: if l == n - 1 {
                    Activation::Linear
                } else if l == bottleneck_idx {
                    self.bottleneck_activation
                } else {
                    Activation::Softplus
                },
                tf2: self.tf2_layers.contains(&l),
                dropout_site: self.dropout_sites.contains(&l),
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    /// `out_dim × in_dim`.
    pub w: Matrix,
    pub b: Vec<f64>,
    /// `out_dim × session_rank`, present on factor layers only.
    pub v_session: Option<Matrix>,
    /// `out_dim × speaker_rank`, present on factor layers only.
    pub v_speaker: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layers: Vec<Layer>,
    session_rank: usize,
    speaker_rank: usize,
}

impl NetworkParams {
    pub fn zeros(specs: &[LayerSpec], session_rank: usize, speaker_rank: usize) -> Result<Self> {
        validate_specs(specs)?;
        let layers = specs
            .iter()
            .map(|s| Layer {
                spec: *s,
                w: Matrix::zeros(s.out_dim, s.in_dim),
                b: vec![0.0; s.out_dim],
                v_session: s.tf2.then(|| Matrix::zeros(s.out_dim, session_rank)),
                v_speaker: s.tf2.then(|| Matrix::zeros(s.out_dim, speaker_rank)),
            })
            .collect();
        Ok(Self {
            layers,
            session_rank,
            speaker_rank,
        })
    }

    /// Weights and loading matrices drawn from `N(0, stddev²)`, biases zero.
    pub fn random(
        specs: &[LayerSpec],
        session_rank: usize,
        speaker_rank: usize,
        stddev: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut p = Self::zeros(specs, session_rank, speaker_rank)?;
        // weights first, so a network and its factor-free twin share them
        for layer in &mut p.layers {
            fill_gaussian(&mut layer.w, stddev, rng);
        }
        for layer in &mut p.layers {
            if let Some(v) = layer.v_session.as_mut() {
                fill_gaussian(v, stddev, rng);
            }
            if let Some(v) = layer.v_speaker.as_mut() {
                fill_gaussian(v, stddev, rng);
            }
        }
        Ok(p)
    }

    /// Assembles parameters from explicit layers, checking every shape.
    pub fn from_layers(
        layers: Vec<Layer>,
        session_rank: usize,
        speaker_rank: usize,
    ) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        validate_specs(&specs)?;
        for l in &layers {
            let s = l.spec;
            check_dim("layer weight rows", s.out_dim, l.w.rows())?;
            check_dim("layer weight cols", s.in_dim, l.w.cols())?;
            check_dim("layer bias", s.out_dim, l.b.len())?;
            if l.b.iter().any(|v| !v.is_finite()) || !l.w.is_finite() {
                return Err(Error::NonFinite("layer parameters"));
            }
            match (s.tf2, &l.v_session, &l.v_speaker) {
                (true, Some(v1), Some(v2)) => {
                    check_dim("session loading rows", s.out_dim, v1.rows())?;
                    check_dim("session loading cols", session_rank, v1.cols())?;
                    check_dim("speaker loading rows", s.out_dim, v2.rows())?;
                    check_dim("speaker loading cols", speaker_rank, v2.cols())?;
                }
                (false, None, None) => {}
                _ => {
                    return Err(Error::InvalidInput(
                        "loading matrices must be present exactly on factor layers".into(),
                    ))
                }
            }
        }
        Ok(Self {
            layers,
            session_rank,
            speaker_rank,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn session_rank(&self) -> usize {
        self.session_rank
    }

    pub fn speaker_rank(&self) -> usize {
        self.speaker_rank
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    /// Width of the layer feeding the output layer.
    pub fn penultimate_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.in_dim
    }

    pub fn has_factors(&self) -> bool {
        self.layers.iter().any(|l| l.spec.tf2)
    }

    /// Copy with every loading matrix deleted.
    pub fn without_factors(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                spec: LayerSpec {
                    tf2: false,
                    ..l.spec
                },
                w: l.w.clone(),
                b: l.b.clone(),
                v_session: None,
                v_speaker: None,
            })
            .collect();
        Self {
            layers,
            session_rank: self.session_rank,
            speaker_rank: self.speaker_rank,
        }
    }

    /// Every trainable tensor in a fixed order: per layer `W`, `b`, `V1`, `V2`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.w.as_slice());
            out.push(&l.b[..]);
            if let Some(v) = &l.v_session {
                out.push(v.as_slice());
            }
            if let Some(v) = &l.v_speaker {
                out.push(v.as_slice());
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(l.w.as_mut_slice());
            out.push(&mut l.b[..]);
            if let Some(v) = &mut l.v_session {
                out.push(v.as_mut_slice());
            }
            if let Some(v) = &mut l.v_speaker {
                out.push(v.as_mut_slice());
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

fn fill_gaussian(m: &mut Matrix, stddev: f64, rng: &mut Rng) {
    for v in m.as_mut_slice() {
        *v = stddev * rng.standard_normal();
    }
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    let last = specs.last().ok_or(Error::Empty("layer list"))?;
    if last.activation != Activation::Linear {
        return Err(Error::InvalidInput(
            "the output layer must be linear".into(),
        ));
    }
    if last.dropout_site {
        return Err(Error::InvalidInput(
            "the output layer cannot be a dropout site".into(),
        ));
    }
    for pair in specs.windows(2) {
        check_dim("layer chaining", pair[0].out_dim, pair[1].in_dim)?;
    }
    Ok(())
}

/// Per-layer multiplicative dropout masks. Entries are `0` or `1/(1-p)`
/// (inverted dropout), so a mask built with `p = 0` leaves outputs untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    layers: Vec<Option<Vec<f64>>>,
}

impl DropoutMask {
    pub fn none(num_layers: usize) -> Self {
        Self {
            layers: vec![None; num_layers],
        }
    }

    /// Samples a Bernoulli mask with drop probability `p` on every dropout
    /// site of `params`.
    pub fn sample(params: &NetworkParams, p: f64, rng: &mut Rng) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "dropout probability must lie in [0, 1), got {p}"
            )));
        }
        let keep = 1.0 / (1.0 - p);
        let layers = params
            .layers
            .iter()
            .map(|l| {
                (p > 0.0 && l.spec.dropout_site).then(|| {
                    (0..l.spec.out_dim)
                        .map(|_| if rng.uniform() < p { 0.0 } else { keep })
                        .collect()
                })
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Option<Vec<f64>>>) -> Self {
        Self { layers }
    }

    pub fn layer(&self, l: usize) -> Option<&[f64]> {
        self.layers.get(l).and_then(|m| m.as_deref())
    }

    pub fn is_identity(&self) -> bool {
        self.layers.iter().all(Option::is_none)
    }
}

/// Cached forward pass for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
    z_session: Vec<f64>,
    z_speaker: Vec<f64>,
}

impl Activations {
    /// Final-layer output, the Gaussian mean.
    pub fn output(&self) -> &[f64] {
        &self.outputs[self.outputs.len() - 1]
    }

    /// Input of the output layer (the regression-head regressor).
    pub fn penultimate(&self) -> &[f64] {
        &self.inputs[self.inputs.len() - 1]
    }

    pub fn layer_output(&self, l: usize) -> &[f64] {
        &self.outputs[l]
    }

    pub fn pre_activation(&self, l: usize) -> &[f64] {
        &self.pre[l]
    }

    pub fn num_layers(&self) -> usize {
        self.outputs.len()
    }
}

fn any_nonzero(v: &[f64]) -> bool {
    v.iter().any(|&x| x != 0.0)
}

/// Evaluates the network on one frame.
pub fn forward(
    params: &NetworkParams,
    x: &[f64],
    z_session: &[f64],
    z_speaker: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<Activations> {
    check_dim("forward input", params.input_dim(), x.len())?;
    check_dim(
        "forward session factor",
        params.session_rank,
        z_session.len(),
    )?;
    check_dim(
        "forward speaker factor",
        params.speaker_rank,
        z_speaker.len(),
    )?;
    if let Some(m) = mask {
        check_dim("forward dropout mask", params.layers.len(), m.layers.len())?;
    }
    let inject_session = any_nonzero(z_session);
    let inject_speaker = any_nonzero(z_speaker);
    let n = params.layers.len();
    let mut inputs = Vec::with_capacity(n);
    let mut pre_all = Vec::with_capacity(n);
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    for (l, layer) in params.layers.iter().enumerate() {
        let input = if l == 0 {
            x.to_vec()
        } else {
            outputs[l - 1].clone()
        };
        let mut pre: Vec<f64> = (0..layer.spec.out_dim)
            .map(|i| dot(layer.w.row(i), &input) + layer.b[i])
            .collect();
        if layer.spec.tf2 {
            if let (true, Some(v)) = (inject_session, &layer.v_session) {
                for (i, p) in pre.iter_mut().enumerate() {
                    *p += dot(v.row(i), z_session);
                }
            }
            if let (true, Some(v)) = (inject_speaker, &layer.v_speaker) {
                for (i, p) in pre.iter_mut().enumerate() {
                    *p += dot(v.row(i), z_speaker);
                }
            }
        }
        let mut out: Vec<f64> = pre
            .iter()
            .map(|&p| layer.spec.activation.apply(p))
            .collect();
        let layer_mask = mask.and_then(|m| m.layers[l].clone());
        if let Some(m) = &layer_mask {
            check_dim("dropout mask width", layer.spec.out_dim, m.len())?;
            for (o, k) in out.iter_mut().zip(m) {
                *o *= k;
            }
        }
        inputs.push(input);
        pre_all.push(pre);
        outputs.push(out);
        masks.push(layer_mask);
    }
    Ok(Activations {
        inputs,
        pre: pre_all,
        outputs,
        masks,
        z_session: z_session.to_vec(),
        z_speaker: z_speaker.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub v_session: Option<Matrix>,
    pub v_speaker: Option<Matrix>,
}

/// Gradients of a cost with respect to every parameter and both factors.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub layers: Vec<LayerGrad>,
    pub dz_session: Vec<f64>,
    pub dz_speaker: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        let layers = params
            .layers
            .iter()
            .map(|l| LayerGrad {
                w: Matrix::zeros(l.w.rows(), l.w.cols()),
                b: vec![0.0; l.b.len()],
                v_session: l
                    .v_session
                    .as_ref()
                    .map(|v| Matrix::zeros(v.rows(), v.cols())),
                v_speaker: l
                    .v_speaker
                    .as_ref()
                    .map(|v| Matrix::zeros(v.rows(), v.cols())),
            })
            .collect();
        Self {
            layers,
            dz_session: vec![0.0; params.session_rank],
            dz_speaker: vec![0.0; params.speaker_rank],
        }
    }

    /// Tensors in the same order as [`NetworkParams::tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.w.as_slice());
            out.push(&l.b[..]);
            if let Some(v) = &l.v_session {
                out.push(v.as_slice());
            }
            if let Some(v) = &l.v_speaker {
                out.push(v.as_slice());
            }
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(l.w.as_mut_slice());
            out.push(&mut l.b[..]);
            if let Some(v) = &mut l.v_session {
                out.push(v.as_mut_slice());
            }
            if let Some(v) = &mut l.v_speaker {
                out.push(v.as_mut_slice());
            }
        }
        out
    }

    /// Multiplies every parameter gradient (not the factor gradients) by `s`.
    pub fn scale_params(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= s;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .chain(&self.dz_session)
            .chain(&self.dz_speaker)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Reverse-mode gradients of a frame cost given `dJ/d output`.
pub fn backward(
    params: &NetworkParams,
    acts: &Activations,
    d_output: &[f64],
) -> Result<GradientBundle> {
    let mut g = GradientBundle::zeros_like(params);
    backward_accumulate(params, acts, d_output, &mut g)?;
    Ok(g)
}

/// Adds this frame's gradients into `acc`. The frame's factor gradient is
/// formed completely before being added, so accumulating frames one by one
/// equals summing independent [`backward`] results in the same order.
pub fn backward_accumulate(
    params: &NetworkParams,
    acts: &Activations,
    d_output: &[f64],
    acc: &mut GradientBundle,
) -> Result<()> {
    check_dim(
        "backward layer count",
        params.layers.len(),
        acc.layers.len(),
    )?;
    let (dz1, dz2) = backprop(params, acts, d_output, Some(&mut acc.layers))?;
    for (a, d) in acc.dz_session.iter_mut().zip(&dz1) {
        *a += d;
    }
    for (a, d) in acc.dz_speaker.iter_mut().zip(&dz2) {
        *a += d;
    }
    Ok(())
}

/// Factor gradients only; stops descending below the lowest factor layer.
/// Bit-identical to the factor part of [`backward`].
pub fn factor_gradients(
    params: &NetworkParams,
    acts: &Activations,
    d_output: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    backprop(params, acts, d_output, None)
}

fn check_acts(params: &NetworkParams, acts: &Activations) -> Result<()> {
    check_dim(
        "activations layer count",
        params.layers.len(),
        acts.outputs.len(),
    )?;
    check_dim(
        "activations session factor",
        params.session_rank,
        acts.z_session.len(),
    )?;
    check_dim(
        "activations speaker factor",
        params.speaker_rank,
        acts.z_speaker.len(),
    )?;
    for (layer, (inp, out)) in params
        .layers
        .iter()
        .zip(acts.inputs.iter().zip(&acts.outputs))
    {
        check_dim("activations layer input", layer.spec.in_dim, inp.len())?;
        check_dim("activations layer output", layer.spec.out_dim, out.len())?;
    }
    Ok(())
}

fn backprop(
    params: &NetworkParams,
    acts: &Activations,
    d_output: &[f64],
    mut grads: Option<&mut [LayerGrad]>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_acts(params, acts)?;
    check_dim(
        "backward output gradient",
        params.output_dim(),
        d_output.len(),
    )?;
    let lowest_needed = if grads.is_some() {
        0
    } else {
        match params.layers.iter().position(|l| l.spec.tf2) {
            Some(i) => i,
            None => params.layers.len(),
        }
    };
    let mut dz1 = vec![0.0; params.session_rank];
    let mut dz2 = vec![0.0; params.speaker_rank];
    let mut g_out = d_output.to_vec();
    for l in (lowest_needed..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let mut g_pre = g_out;
        if let Some(m) = &acts.masks[l] {
            for (g, k) in g_pre.iter_mut().zip(m) {
                *g *= k;
            }
        }
        if layer.spec.activation != Activation::Linear {
            for (g, &p) in g_pre.iter_mut().zip(&acts.pre[l]) {
                *g *= layer.spec.activation.derivative(p);
            }
        }
        if let Some(grads) = grads.as_deref_mut() {
            let lg = &mut grads[l];
            let input = &acts.inputs[l];
            for (i, &gi) in g_pre.iter().enumerate() {
                axpy(gi, input, lg.w.row_mut(i));
                lg.b[i] += gi;
            }
            if let Some(v) = lg.v_session.as_mut() {
                for (i, &gi) in g_pre.iter().enumerate() {
                    axpy(gi, &acts.z_session, v.row_mut(i));
                }
            }
            if let Some(v) = lg.v_speaker.as_mut() {
                for (i, &gi) in g_pre.iter().enumerate() {
                    axpy(gi, &acts.z_speaker, v.row_mut(i));
                }
            }
        }
        if layer.spec.tf2 {
            if let Some(v) = &layer.v_session {
                for (i, &gi) in g_pre.iter().enumerate() {
                    axpy(gi, v.row(i), &mut dz1);
                }
            }
            if let Some(v) = &layer.v_speaker {
                for (i, &gi) in g_pre.iter().enumerate() {
                    axpy(gi, v.row(i), &mut dz2);
                }
            }
        }
        if l == lowest_needed {
            break;
        }
        let mut g_in = vec![0.0; layer.spec.in_dim];
        for (i, &gi) in g_pre.iter().enumerate() {
            axpy(gi, layer.w.row(i), &mut g_in);
        }
        g_out = g_in;
    }
    Ok((dz1, dz2))
}

/// Mean squared error per dimension and its gradient.
pub fn mse_cost(output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_dim("mse_cost", output.len(), target.len())?;
    if output.is_empty() {
        return Err(Error::Empty("mse_cost vectors"));
    }
    let d = output.len() as f64;
    let mut cost = 0.0;
    let grad = output
        .iter()
        .zip(target)
        .map(|(o, t)| {
            let r = o - t;
            cost += r * r;
            2.0 * r / d
        })
        .collect();
    Ok((cost / d, grad))
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(params: &NetworkParams) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Self::new(&shapes)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// One update over aligned lists of parameter and gradient tensors.
    pub fn update_tensors(
        &mut self,
        params: Vec<&mut [f64]>,
        grads: Vec<&[f64]>,
        lr: f64,
    ) -> Result<()> {
        check_dim("adam tensor count", self.m.len(), params.len())?;
        check_dim("adam gradient count", self.m.len(), grads.len())?;
        for ((p, g), m) in params.iter().zip(&grads).zip(&self.m) {
            check_dim("adam tensor size", m.len(), p.len())?;
            check_dim("adam gradient size", m.len(), g.len())?;
        }
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(self.beta1, t);
        let c2 = 1.0 - libm::pow(self.beta2, t);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }
}

/// Adam update of every network parameter. Factor gradients in the bundle are
/// ignored; factors follow their own plain-gradient schedule.
pub fn adam_update(
    state: &mut AdamState,
    params: &mut NetworkParams,
    grads: &GradientBundle,
    lr: f64,
) -> Result<()> {
    state.update_tensors(params.tensors_mut(), grads.tensors(), lr)
}
