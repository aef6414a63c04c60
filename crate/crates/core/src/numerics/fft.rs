//! DFT/IDFT with the crate's fixed convention: unnormalized forward
//! transform, `1/N` on the inverse.
//!
//! Power-of-two lengths use an iterative radix-2 decimation-in-time transform
//! with a precomputed twiddle table; other lengths fall back to the direct
//! O(N²) evaluation (block lengths here are 256 in practice, so the fallback
//! only exists so odd sizes remain usable in tests and tools).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use super::check_finite;
use crate::{Error, Result};

/// A reusable transform plan for one length.
#[derive(Debug)]
pub struct Dft {
    n: usize,
    /// `exp(-i 2π j / n)`; `j < n/2` for the radix-2 path, `j < n` for the
    /// direct path.
    twiddles: Vec<Complex64>,
    radix2: bool,
}

impl Dft {
    /// Builds a plan for length `n`.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput { context: "dft length" });
        }
        let radix2 = n.is_power_of_two();
        let table_len = if radix2 { (n / 2).max(1) } else { n };
        let twiddles = (0..table_len)
            .map(|j| {
                let angle = -2.0 * std::f64::consts::PI * j as f64 / n as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        Ok(Self { n, twiddles, radix2 })
    }

    /// Returns the shared plan for length `n`, building it on first use.
    pub fn get(n: usize) -> Result<Arc<Dft>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Dft>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("dft plan cache poisoned");
        if let Some(plan) = map.get(&n) {
            return Ok(plan.clone());
        }
        let plan = Arc::new(Dft::new(n)?);
        map.insert(n, plan.clone());
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform: `V_k = Σ_n v_n e^{-i2πkn/N}`.
    pub fn forward(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_input(v)?;
        let mut data = v.to_vec();
        self.transform(&mut data, false);
        Ok(data)
    }

    /// Inverse transform with the `1/N` factor: `v_n = (1/N) Σ_k V_k e^{+i2πkn/N}`.
    pub fn inverse(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_input(v)?;
        let mut data = v.to_vec();
        self.transform(&mut data, true);
        let scale = 1.0 / self.n as f64;
        for z in &mut data {
            *z *= scale;
        }
        Ok(data)
    }

    /// Forward transform of a signal known to occupy only its first
    /// `v.len() <= N` samples (zero-padded to length `N`).
    pub fn forward_padded(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() > self.n {
            return Err(Error::DimensionMismatch {
                context: format!("padded input of length {} exceeds dft length {}", v.len(), self.n),
            });
        }
        check_finite(v)?;
        let mut data = vec![Complex64::new(0.0, 0.0); self.n];
        data[..v.len()].copy_from_slice(v);
        self.transform(&mut data, false);
        Ok(data)
    }

    fn check_input(&self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: format!("dft plan length {} vs input length {}", self.n, v.len()),
            });
        }
        check_finite(v)
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        if self.radix2 {
            self.radix2_transform(data, inverse);
        } else {
            self.direct_transform(data, inverse);
        }
    }

    fn radix2_transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        if n == 1 {
            return;
        }
        // Bit-reversal permutation.
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
            if j > i {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for base in (0..n).step_by(len) {
                for off in 0..half {
                    let mut w = self.twiddles[off * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[base + off];
                    let b = data[base + off + half] * w;
                    data[base + off] = a + b;
                    data[base + off + half] = a - b;
                }
            }
            len *= 2;
        }
    }

    fn direct_transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let input = data.to_vec();
        for (k, out) in data.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (idx, v) in input.iter().enumerate() {
                let mut w = self.twiddles[(k * idx) % n];
                if inverse {
                    w = w.conj();
                }
                acc += v * w;
            }
            *out = acc;
        }
    }
}

/// One-shot forward DFT using the shared plan cache.
pub fn dft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    Dft::get(v.len())?.forward(v)
}

/// One-shot inverse DFT (with `1/N`) using the shared plan cache.
pub fn idft(v: &[Complex64]) -> Result<Vec<Complex64>> {
    Dft::get(v.len())?.inverse(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn constant_vector_transforms_to_impulse() {
        let v = vec![Complex64::new(1.0, 0.0); 4];
        let out = dft(&v).unwrap();
        let expected = [
            Complex64::new(4.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        assert!(max_abs_diff(&out, &expected) < 1e-12);
    }

    #[test]
    fn impulse_transforms_to_all_ones() {
        let mut v = vec![Complex64::new(0.0, 0.0); 4];
        v[0] = Complex64::new(1.0, 0.0);
        let out = dft(&v).unwrap();
        assert!(out.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn inverse_of_impulse_spectrum_is_constant() {
        let spectrum = vec![
            Complex64::new(4.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let out = idft(&spectrum).unwrap();
        assert!(out.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn zero_maps_to_zero() {
        let v = vec![Complex64::new(0.0, 0.0); 8];
        assert!(idft(&v).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn round_trip_256_within_1e12() {
        let v = random_vec(256, 1);
        let back = idft(&dft(&v).unwrap()).unwrap();
        let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max_abs_diff(&v, &back) / scale < 1e-12);
    }

    #[test]
    fn round_trip_non_power_of_two() {
        for n in [3usize, 12, 100] {
            let v = random_vec(n, n as u64);
            let back = idft(&dft(&v).unwrap()).unwrap();
            assert!(max_abs_diff(&v, &back) < 1e-11, "n = {n}");
        }
    }

    #[test]
    fn radix2_matches_direct_evaluation() {
        let v = random_vec(64, 5);
        let plan = Dft::new(64).unwrap();
        let fast = plan.forward(&v).unwrap();
        // Direct O(N²) evaluation as an independent oracle.
        let mut slow = vec![Complex64::new(0.0, 0.0); 64];
        for (k, out) in slow.iter_mut().enumerate() {
            for (n, z) in v.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (k * n) as f64 / 64.0;
                *out += z * Complex64::new(angle.cos(), angle.sin());
            }
        }
        assert!(max_abs_diff(&fast, &slow) < 1e-10);
    }

    #[test]
    fn parseval_with_one_over_n_on_the_spectrum_side() {
        let v = random_vec(256, 2);
        let spec = dft(&v).unwrap();
        let time_energy: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let freq_energy: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / 256.0;
        assert!((time_energy - freq_energy).abs() / time_energy < 1e-12);
    }

    #[test]
    fn linearity() {
        let v = random_vec(128, 3);
        let w = random_vec(128, 4);
        let a = Complex64::new(0.7, -1.3);
        let b = Complex64::new(-0.2, 0.5);
        let combined: Vec<Complex64> =
            v.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
        let lhs = dft(&combined).unwrap();
        let dv = dft(&v).unwrap();
        let dw = dft(&w).unwrap();
        let rhs: Vec<Complex64> = dv.iter().zip(&dw).map(|(x, y)| a * x + b * y).collect();
        let scale = lhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max_abs_diff(&lhs, &rhs) / scale < 1e-12);
    }

    #[test]
    fn forward_padded_matches_explicit_zero_padding() {
        let taps = random_vec(64, 6);
        let plan = Dft::new(256).unwrap();
        let padded = plan.forward_padded(&taps).unwrap();
        let mut full = vec![Complex64::new(0.0, 0.0); 256];
        full[..64].copy_from_slice(&taps);
        let explicit = plan.forward(&full).unwrap();
        assert!(max_abs_diff(&padded, &explicit) == 0.0);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut v = random_vec(8, 7);
        v[3] = Complex64::new(f64::NAN, 0.0);
        match dft(&v) {
            Err(crate::Error::NonFinite { index }) => assert_eq!(index, 3),
            other => panic!("expected NonFinite error, got {other:?}"),
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let plan = Dft::new(8).unwrap();
        assert!(plan.forward(&random_vec(4, 8)).is_err());
    }
}
