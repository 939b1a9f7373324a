use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::scalar::Scalar;

/// Default negative slope for LeakyReLU (GAT attention logits).
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

/// Softmax over consecutive groups of `values`; group `g` spans
/// `offsets[g]..offsets[g + 1]`. With `log` set the result is log-softmax.
pub fn row_softmax<T: Scalar>(values: &[T], offsets: &[usize], log: bool) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); values.len()];
    for g in 0..offsets.len().saturating_sub(1) {
        let (lo, hi) = (offsets[g], offsets[g + 1]);
        if hi <= lo {
            return Err(Error::EmptyGroup { group: g });
        }
        softmax_into(&values[lo..hi], &mut out[lo..hi], log);
    }
    Ok(out)
}

/// Max-subtracted softmax of one group into `out`, accumulating in f64.
pub fn softmax_into<T: Scalar>(x: &[T], out: &mut [T], log: bool) {
    let m = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.as_f64()));
    let z: f64 = x.iter().map(|&v| (v.as_f64() - m).exp()).sum();
    if log {
        let lz = m + z.ln();
        for (o, &v) in out.iter_mut().zip(x) {
            *o = T::of(v.as_f64() - lz);
        }
    } else {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = T::of((v.as_f64() - m).exp() / z);
        }
    }
}

/// Row-wise log-softmax of a matrix.
pub fn log_softmax_rows<T: Scalar>(z: &Matrix<T>) -> Matrix<T> {
    let mut out = Matrix::zeros(z.rows(), z.cols());
    for i in 0..z.rows() {
        softmax_into(z.row(i), out.row_mut(i), true);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Elu,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu { slope } => {
                if x > T::zero() {
                    x
                } else {
                    x * T::of(slope)
                }
            }
            Activation::Elu => {
                if x > T::zero() {
                    x
                } else {
                    x.exp_m1()
                }
            }
        }
    }

    /// Derivative at pre-activation `x`.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu { slope } => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::of(slope)
                }
            }
            Activation::Elu => {
                if x > T::zero() {
                    T::one()
                } else {
                    x.exp()
                }
            }
        }
    }
}

pub fn activation<T: Scalar>(x: T, kind: Activation) -> T {
    kind.apply(x)
}

/// Inverted-dropout mask: each cell is `0` with probability `rate`, else
/// `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar>(rows: usize, cols: usize, rate: f64, seed: u64) -> Result<Matrix<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidRate { rate });
    }
    if rate == 0.0 {
        return Ok(Matrix::filled(rows, cols, T::one()));
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Derives an independent stream seed from a base seed and a stream tag.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
