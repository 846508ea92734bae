use crate::error::{Error, Result};
use crate::signal::FaultClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// Square kernel, stride 1, zero padding on every side.
    Conv {
        out_channels: usize,
        kernel: usize,
        padding: usize,
    },
    Relu,
    /// Non-overlapping `size x size` max pooling.
    MaxPool {
        size: usize,
    },
    Flatten,
    Dense {
        units: usize,
    },
    Softmax,
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::Dense { .. })
    }
}

/// Activation shape between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Image { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Image { c, h, w } => c * h * w,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    /// Output order of the final layer.
    pub classes: Vec<FaultClass>,
}

impl ModelSpec {
    /// The two-block network used for every modality:
    /// conv(8) relu pool, conv(16) relu pool, dense(64) relu, dense(n), softmax.
    pub fn standard(input_shape: [usize; 3], classes: Vec<FaultClass>) -> Result<Self> {
        Self::with_widths(input_shape, classes, 8, 16, 64)
    }

    /// Same topology with custom widths (small models for tests and demos).
    pub fn with_widths(
        input_shape: [usize; 3],
        classes: Vec<FaultClass>,
        conv1: usize,
        conv2: usize,
        hidden: usize,
    ) -> Result<Self> {
        let n = classes.len();
        let spec = ModelSpec {
            input_shape,
            layers: vec![
                LayerSpec::Conv {
                    out_channels: conv1,
                    kernel: 3,
                    padding: 1,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool { size: 2 },
                LayerSpec::Conv {
                    out_channels: conv2,
                    kernel: 3,
                    padding: 1,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool { size: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: hidden },
                LayerSpec::Relu,
                LayerSpec::Dense { units: n },
                LayerSpec::Softmax,
            ],
            classes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn class_index(&self, class: FaultClass) -> Option<usize> {
        self.classes.iter().position(|&c| c == class)
    }

    /// Shapes of every activation: `shapes()[0]` is the input, `shapes()[i+1]`
    /// the output of layer `i`.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let [c, h, w] = self.input_shape;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::invalid("input shape must be positive"));
        }
        let mut shapes = vec![Shape::Image { c, h, w }];
        let mut cur = shapes[0];
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |msg: &str| Error::invalid(format!("layer {i} ({layer:?}): {msg}"));
            cur = match (*layer, cur) {
                (
                    LayerSpec::Conv {
                        out_channels,
                        kernel,
                        padding,
                    },
                    Shape::Image { h, w, .. },
                ) => {
                    if out_channels == 0 || kernel == 0 {
                        return Err(bad("zero-sized convolution"));
                    }
                    if h + 2 * padding < kernel || w + 2 * padding < kernel {
                        return Err(bad("kernel larger than padded input"));
                    }
                    Shape::Image {
                        c: out_channels,
                        h: h + 2 * padding - kernel + 1,
                        w: w + 2 * padding - kernel + 1,
                    }
                }
                (LayerSpec::MaxPool { size }, Shape::Image { c, h, w }) => {
                    if size == 0 || h < size || w < size {
                        return Err(bad("pool window larger than input"));
                    }
                    Shape::Image {
                        c,
                        h: h / size,
                        w: w / size,
                    }
                }
                (LayerSpec::Relu, s) => s,
                (LayerSpec::Flatten, s) => Shape::Flat(s.len()),
                (LayerSpec::Dense { units }, Shape::Flat(_)) => {
                    if units == 0 {
                        return Err(bad("dense layer without units"));
                    }
                    Shape::Flat(units)
                }
                (LayerSpec::Softmax, Shape::Flat(n)) => {
                    if i + 1 != self.layers.len() {
                        return Err(bad("softmax must be the last layer"));
                    }
                    Shape::Flat(n)
                }
                _ => return Err(bad("layer does not accept the incoming shape")),
            };
            shapes.push(cur);
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.classes.len();
        if !(2..=9).contains(&n) {
            return Err(Error::invalid(format!("model needs 2..9 classes, got {n}")));
        }
        let mut sorted = self.classes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != n {
            return Err(Error::invalid("duplicate class in model spec"));
        }
        if self.layers.last() != Some(&LayerSpec::Softmax) {
            return Err(Error::invalid("model must end in softmax"));
        }
        let shapes = self.shapes()?;
        if shapes.last() != Some(&Shape::Flat(n)) {
            return Err(Error::invalid(format!(
                "network output does not match {n} classes"
            )));
        }
        Ok(())
    }

    /// Shapes of each parameter tensor, in storage order (weight then bias
    /// for every parameterized layer), with the layer's fan-in.
    pub fn param_shapes(&self) -> Result<Vec<(Vec<usize>, usize)>> {
        let shapes = self.shapes()?;
        let mut out = Vec::new();
        for (layer, input) in self.layers.iter().zip(&shapes) {
            match (*layer, *input) {
                (
                    LayerSpec::Conv {
                        out_channels,
                        kernel,
                        ..
                    },
                    Shape::Image { c, .. },
                ) => {
                    let fan_in = c * kernel * kernel;
                    out.push((vec![out_channels, c, kernel, kernel], fan_in));
                    out.push((vec![out_channels], fan_in));
                }
                (LayerSpec::Dense { units }, Shape::Flat(n)) => {
                    out.push((vec![units, n], n));
                    out.push((vec![units], n));
                }
                _ => {}
            }
        }
        Ok(out)
    }
}
