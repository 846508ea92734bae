//! Fixed-size classifier inputs.

use crate::error::{Error, Result};
use crate::signal::{Modality, ThermalFrame};

use super::spectrum::{AxisSpectra, Spectrogram};

pub const TENSOR_SIDE: usize = 64;
pub const DB_FLOOR: f64 = -80.0;
pub const DB_CEIL: f64 = 0.0;
const MAG_EPS: f64 = 1e-10;

/// A `[channels x height x width]` grid of values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor {
    values: Vec<f32>,
    shape: [usize; 3],
}

impl InputTensor {
    pub fn new(values: Vec<f32>, shape: [usize; 3]) -> Result<Self> {
        if values.len() != shape.iter().product::<usize>() {
            return Err(Error::invalid(format!(
                "tensor of {} values does not fit shape {shape:?}",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("tensor values must lie in [0,1]"));
        }
        Ok(Self { values, shape })
    }

    /// Expected shape of the classifier input for a modality.
    pub fn shape_for(modality: Modality) -> [usize; 3] {
        match modality {
            Modality::Vibration => [3, TENSOR_SIDE, TENSOR_SIDE],
            Modality::Acoustic | Modality::Thermal => [1, TENSOR_SIDE, TENSOR_SIDE],
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        let [_, h, w] = self.shape;
        self.values[(c * h + y) * w + x]
    }

    fn stack(channels: Vec<Vec<f32>>, h: usize, w: usize) -> Self {
        let c = channels.len();
        Self {
            values: channels.concat(),
            shape: [c, h, w],
        }
    }
}

/// Bilinear resize with half-pixel centers and edge clamping.
/// `src(row, col)` is sampled on a `rows x cols` grid.
pub fn bilinear_resize(
    rows: usize,
    cols: usize,
    src: impl Fn(usize, usize) -> f64,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    let coords = |n_out: usize, n_in: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let p = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let i0 = p.floor() as usize;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, p - i0 as f64)
            })
            .collect()
    };
    let ys = coords(out_h, rows);
    let xs = coords(out_w, cols);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = src(y0, x0) * (1.0 - fx) + src(y0, x1) * fx;
            let bottom = src(y1, x0) * (1.0 - fx) + src(y1, x1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Maps a magnitude to [0, 1]: dB re. unit magnitude, clipped to [-80, 0].
pub fn db_unit(mag: f64) -> f64 {
    let db = (20.0 * (mag + MAG_EPS).log10()).clamp(DB_FLOOR, DB_CEIL);
    (db - DB_FLOOR) / (DB_CEIL - DB_FLOOR)
}

fn to_unit_f32(values: Vec<f64>) -> Vec<f32> {
    values
        .into_iter()
        .map(|v| (v as f32).clamp(0.0, 1.0))
        .collect()
}

/// Log-magnitude image of a spectrogram, 1 x 64 x 64. Rows run over
/// frequency bins (row 0 = lowest), columns over frames.
pub fn spectrogram_to_tensor(spec: &Spectrogram) -> Result<InputTensor> {
    if spec.is_empty() {
        return Err(Error::invalid(
            "cannot build a tensor from an empty spectrogram",
        ));
    }
    let img = bilinear_resize(
        spec.n_bins(),
        spec.n_frames(),
        |bin, frame| db_unit(spec.get(frame, bin)),
        TENSOR_SIDE,
        TENSOR_SIDE,
    );
    Ok(InputTensor::stack(
        vec![to_unit_f32(img)],
        TENSOR_SIDE,
        TENSOR_SIDE,
    ))
}

/// One channel per axis; each spectrum is stretched across the width.
pub fn axis_spectra_to_tensor(spec: &AxisSpectra) -> Result<InputTensor> {
    let channels = spec
        .axes
        .iter()
        .map(|axis| {
            if axis.is_empty() {
                return Err(Error::invalid("empty axis spectrum"));
            }
            Ok(to_unit_f32(bilinear_resize(
                axis.len(),
                1,
                |bin, _| db_unit(axis[bin]),
                TENSOR_SIDE,
                TENSOR_SIDE,
            )))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InputTensor::stack(channels, TENSOR_SIDE, TENSOR_SIDE))
}

pub fn thermal_to_tensor(frame: &ThermalFrame) -> InputTensor {
    let img = bilinear_resize(
        frame.height(),
        frame.width(),
        |r, c| frame.at(r, c),
        TENSOR_SIDE,
        TENSOR_SIDE,
    );
    InputTensor::stack(vec![to_unit_f32(img)], TENSOR_SIDE, TENSOR_SIDE)
}
