//! Iterative radix-2 FFT over single-precision complex data.
//!
//! Forward transforms use the kernel `exp(-2*pi*i*j*k/N)` and are unnormalised;
//! inverse transforms use `exp(+2*pi*i*j*k/N)` and scale by `1/N`, so
//! `inverse(forward(x)) == x` up to rounding.

use std::f64::consts::PI;

use crate::error::{FdasError, Result};
use crate::signal::{ComplexSeries, Complex32};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Precomputed twiddles and bit-reversal permutation for one size.
#[derive(Clone, Debug)]
pub struct DftPlan {
    size: usize,
    direction: Direction,
    twiddles: Vec<Complex32>,
    bitrev: Vec<u32>,
}

impl DftPlan {
    pub fn new(size: usize, direction: Direction) -> Result<Self> {
        if size < 2 || !size.is_power_of_two() || size > u32::MAX as usize {
            return Err(FdasError::BadTransformSize { size });
        }
        let sign = match direction {
            Direction::Forward => -1.0,
            Direction::Inverse => 1.0,
        };
        let twiddles = (0..size / 2)
            .map(|k| {
                let a = sign * 2.0 * PI * k as f64 / size as f64;
                Complex32::new(a.cos() as f32, a.sin() as f32)
            })
            .collect();
        let bits = size.trailing_zeros();
        let bitrev = (0..size as u32)
            .map(|i| i.reverse_bits() >> (32 - bits))
            .collect();
        Ok(Self {
            size,
            direction,
            twiddles,
            bitrev,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// In-place transform of `buf`, which must hold exactly `size` points.
    pub fn process(&self, buf: &mut [Complex32]) -> Result<()> {
        let n = self.size;
        if buf.len() != n {
            return Err(FdasError::LengthMismatch {
                expected: n,
                actual: buf.len(),
            });
        }
        for (i, &r) in self.bitrev.iter().enumerate() {
            let r = r as usize;
            if i < r {
                buf.swap(i, r);
            }
        }
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for block in buf.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let t = *b * self.twiddles[k * stride];
                    *b = *a - t;
                    *a += t;
                }
            }
            half *= 2;
        }
        if self.direction == Direction::Inverse {
            let scale = 1.0 / n as f32;
            buf.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(())
    }

    /// Out-of-place transform.
    pub fn dft(&self, input: &ComplexSeries) -> Result<ComplexSeries> {
        let mut buf = input.0.clone();
        self.process(&mut buf)?;
        Ok(ComplexSeries(buf))
    }
}
