use rand::distributions::{Distribution, Uniform};
use sha2::{Digest, Sha256};

use crate::dsp::InputTensor;
use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{FaultClass, Modality};

use super::layers::{self, ConvGeom};
use super::spec::{LayerSpec, ModelSpec, Shape};
use super::Real;

/// A dense numeric array with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub values: Vec<T>,
    pub shape: Vec<usize>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: Vec<usize>) -> Self {
        Self {
            values: vec![T::zero(); shape.iter().product()],
            shape,
        }
    }

    pub fn new(values: Vec<T>, shape: Vec<usize>) -> Result<Self> {
        if values.len() != shape.iter().product::<usize>() {
            return Err(Error::invalid(format!(
                "{} values do not fit shape {shape:?}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tensor holds non-finite values"));
        }
        Ok(Self { values, shape })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Probability vector produced by one modality's classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    pub classes: Vec<FaultClass>,
    pub probs: Vec<f64>,
    pub modality: Modality,
}

impl ClassScores {
    pub fn prob(&self, class: FaultClass) -> Option<f64> {
        self.classes
            .iter()
            .position(|&c| c == class)
            .map(|i| self.probs[i])
    }

    /// Highest-probability class; ties go to the earlier class.
    pub fn top(&self) -> FaultClass {
        self.classes[argmax(&self.probs)]
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Gradients for every parameter tensor, same layout as [`Model::params`].
pub type Grads<T> = Vec<Tensor<T>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Real = f32> {
    spec: ModelSpec,
    params: Vec<Tensor<T>>,
    seed: u64,
}

/// Per-sample activations kept for backpropagation.
struct Trace<T> {
    /// `acts[i]` is the input of layer `i`; the last entry holds the logits
    /// (softmax is folded into the loss).
    acts: Vec<Vec<T>>,
    argmax: Vec<Vec<usize>>,
}

impl<T: Real> Model<T> {
    /// He-uniform weights (bound `sqrt(6 / fan_in)`) drawn from xoshiro256++
    /// seeded with `seed`, zero biases.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::seeded(seed);
        let params = spec
            .param_shapes()?
            .into_iter()
            .map(|(shape, fan_in)| {
                let mut t = Tensor::<T>::zeros(shape);
                if t.shape.len() > 1 {
                    let bound = (6.0 / fan_in as f64).sqrt();
                    let dist = Uniform::new(-bound, bound);
                    for v in &mut t.values {
                        *v = T::from_f64(dist.sample(&mut rng)).unwrap_or_else(T::zero);
                    }
                }
                t
            })
            .collect();
        Ok(Self { spec, params, seed })
    }

    /// Builds a model from explicit parameters (shapes must match the spec).
    pub fn from_parts(spec: ModelSpec, params: Vec<Tensor<T>>, seed: u64) -> Result<Self> {
        spec.validate()?;
        let expected = spec.param_shapes()?;
        if expected.len() != params.len()
            || expected
                .iter()
                .zip(&params)
                .any(|((s, _), p)| *s != p.shape)
        {
            return Err(Error::invalid(
                "parameter shapes do not match the model spec",
            ));
        }
        if params
            .iter()
            .flat_map(|p| &p.values)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(Self { spec, params, seed })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn classes(&self) -> &[FaultClass] {
        &self.spec.classes
    }

    /// Converts parameters to another float width.
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            params: self
                .params
                .iter()
                .map(|t| Tensor {
                    values: t
                        .values
                        .iter()
                        .map(|v| U::from(*v).unwrap_or_else(U::zero))
                        .collect(),
                    shape: t.shape.clone(),
                })
                .collect(),
            seed: self.seed,
        }
    }

    /// SHA-256 over seed, class codes and every parameter value (as f64 bits).
    pub fn param_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for c in &self.spec.classes {
            h.update(c.code().to_le_bytes());
        }
        for t in &self.params {
            for v in &t.values {
                h.update(v.to_f64().unwrap_or(f64::NAN).to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.spec.input_len() {
            return Err(Error::invalid(format!(
                "input of {} values, model expects {:?}",
                input.len(),
                self.spec.input_shape
            )));
        }
        Ok(())
    }

    fn run(&self, input: &[T]) -> Trace<T> {
        let shapes = self.spec.shapes().expect("validated spec");
        let mut acts = Vec::with_capacity(self.spec.layers.len() + 1);
        let mut argmax = Vec::new();
        acts.push(input.to_vec());
        let mut p = 0;
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let cur = &acts[i];
            let next = match (*layer, shapes[i]) {
                (
                    LayerSpec::Conv {
                        out_channels,
                        kernel,
                        padding,
                    },
                    Shape::Image { c, h, w },
                ) => {
                    let g = ConvGeom {
                        c,
                        h,
                        w,
                        out_c: out_channels,
                        k: kernel,
                        pad: padding,
                    };
                    let mut out = vec![T::zero(); out_channels * g.out_h() * g.out_w()];
                    layers::conv_forward(
                        g,
                        cur,
                        &self.params[p].values,
                        &self.params[p + 1].values,
                        &mut out,
                    );
                    p += 2;
                    out
                }
                (LayerSpec::Dense { units }, _) => {
                    let mut out = vec![T::zero(); units];
                    layers::dense_forward(
                        cur,
                        &self.params[p].values,
                        &self.params[p + 1].values,
                        &mut out,
                    );
                    p += 2;
                    out
                }
                (LayerSpec::Relu, _) => {
                    let mut out = cur.clone();
                    layers::relu_forward(&mut out);
                    out
                }
                (LayerSpec::MaxPool { size }, Shape::Image { c, h, w }) => {
                    let n = c * (h / size) * (w / size);
                    let mut out = vec![T::zero(); n];
                    let mut arg = vec![0; n];
                    layers::maxpool_forward(c, h, w, size, cur, &mut out, &mut arg);
                    argmax.push(arg);
                    out
                }
                (LayerSpec::Flatten, _) | (LayerSpec::Softmax, _) => cur.clone(),
                _ => unreachable!("spec validated"),
            };
            acts.push(next);
        }
        Trace { acts, argmax }
    }

    /// Raw pre-softmax outputs.
    pub fn logits(&self, input: &[T]) -> Result<Vec<T>> {
        self.check_input(input)?;
        Ok(self.run(input).acts.pop().unwrap_or_default())
    }

    /// Softmax probabilities for a raw input buffer.
    pub fn probabilities(&self, input: &[T]) -> Result<Vec<f64>> {
        let logits = self.logits(input)?;
        let z: Vec<f64> = logits.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect();
        Ok(layers::softmax(&z))
    }

    /// Classifies one preprocessed input.
    pub fn forward(&self, input: &InputTensor, modality: Modality) -> Result<ClassScores> {
        if input.shape() != self.spec.input_shape {
            return Err(Error::invalid(format!(
                "input shape {:?} does not match model input {:?}",
                input.shape(),
                self.spec.input_shape
            )));
        }
        let probs = self.probabilities(&to_real(input))?;
        Ok(ClassScores {
            classes: self.spec.classes.clone(),
            probs,
            modality,
        })
    }

    /// Mean cross-entropy over the batch and its gradient for every
    /// parameter, by backpropagation.
    pub fn loss_and_grads(&self, inputs: &[&[T]], labels: &[usize]) -> Result<(f64, Grads<T>)> {
        self.batch_pass(inputs, labels)
            .map(|(loss, grads, _)| (loss, grads))
    }

    /// Like [`Model::loss_and_grads`], also counting argmax hits.
    pub(crate) fn batch_pass(
        &self,
        inputs: &[&[T]],
        labels: &[usize],
    ) -> Result<(f64, Grads<T>, usize)> {
        if inputs.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if inputs.len() != labels.len() {
            return Err(Error::invalid("batch inputs and labels differ in length"));
        }
        let n_classes = self.spec.n_classes();
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        for x in inputs {
            self.check_input(x)?;
        }
        let mut grads: Grads<T> = self
            .params
            .iter()
            .map(|t| Tensor::zeros(t.shape.clone()))
            .collect();
        let scale = T::one() / T::from_usize(inputs.len()).expect("batch size");
        let mut loss = 0.0;
        let mut hits = 0;
        for (x, &label) in inputs.iter().zip(labels) {
            let trace = self.run(x);
            let logits = trace.acts.last().expect("logits");
            loss += layers::cross_entropy(logits, label)
                .to_f64()
                .unwrap_or(f64::NAN);
            let mut delta = layers::softmax(logits);
            let top = (0..delta.len()).fold(0, |b, i| if delta[i] > delta[b] { i } else { b });
            hits += usize::from(top == label);
            delta[label] -= T::one();
            delta.iter_mut().for_each(|d| *d *= scale);
            self.backward(&trace, delta, &mut grads);
        }
        Ok((loss / inputs.len() as f64, grads, hits))
    }

    fn backward(&self, trace: &Trace<T>, mut delta: Vec<T>, grads: &mut Grads<T>) {
        let shapes = self.spec.shapes().expect("validated spec");
        let mut p = self.params.len();
        let mut pool_idx = trace.argmax.len();
        for i in (0..self.spec.layers.len()).rev() {
            let input = &trace.acts[i];
            let first_param_layer = !self.spec.layers[..i].iter().any(LayerSpec::has_params);
            match (self.spec.layers[i], shapes[i]) {
                (LayerSpec::Softmax, _) | (LayerSpec::Flatten, _) => {}
                (LayerSpec::Relu, _) => layers::relu_backward(&trace.acts[i + 1], &mut delta),
                (LayerSpec::MaxPool { .. }, _) => {
                    pool_idx -= 1;
                    let mut d_in = vec![T::zero(); input.len()];
                    layers::maxpool_backward(&trace.argmax[pool_idx], &delta, &mut d_in);
                    delta = d_in;
                }
                (LayerSpec::Dense { .. }, _) => {
                    p -= 2;
                    let (gw, gb) = split_pair(grads, p);
                    let mut d_in = (!first_param_layer).then(|| vec![T::zero(); input.len()]);
                    layers::dense_backward(
                        input,
                        &self.params[p].values,
                        &delta,
                        gw,
                        gb,
                        d_in.as_deref_mut(),
                    );
                    if let Some(d) = d_in {
                        delta = d;
                    }
                }
                (
                    LayerSpec::Conv {
                        out_channels,
                        kernel,
                        padding,
                    },
                    Shape::Image { c, h, w },
                ) => {
                    p -= 2;
                    let g = ConvGeom {
                        c,
                        h,
                        w,
                        out_c: out_channels,
                        k: kernel,
                        pad: padding,
                    };
                    let (gw, gb) = split_pair(grads, p);
                    let mut d_in = (!first_param_layer).then(|| vec![T::zero(); input.len()]);
                    layers::conv_backward(
                        g,
                        input,
                        &self.params[p].values,
                        &delta,
                        gw,
                        gb,
                        d_in.as_deref_mut(),
                    );
                    if let Some(d) = d_in {
                        delta = d;
                    }
                }
                _ => unreachable!("spec validated"),
            }
            if first_param_layer && self.spec.layers[i].has_params() {
                break;
            }
        }
    }
}

fn split_pair<T>(grads: &mut [Tensor<T>], p: usize) -> (&mut [T], &mut [T]) {
    let (w, b) = grads[p..p + 2].split_at_mut(1);
    (&mut w[0].values, &mut b[0].values)
}

pub(crate) fn to_real<T: Real>(input: &InputTensor) -> Vec<T> {
    input
        .values()
        .iter()
        .map(|&v| T::from_f32(v).unwrap_or_else(T::zero))
        .collect()
}
