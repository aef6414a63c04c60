//! Complex vector/matrix primitives shared by every other module.
//!
//! Two conventions here are load-bearing for the rest of the crate and must
//! not change independently:
//!
//! - The DFT is **unnormalized forward**, `V_k = sum_n v_n e^{-i2πkn/N}`,
//!   with the `1/N` factor on the inverse. Consequently i.i.d. symbols of
//!   power `σ²` have `E[|V_k|²] = Nσ²`, and the per-input detection gain
//!   `γ = (1/N) Σ_k Γ_k` is an average, not a sum.
//! - Matrices are row-major, and the Hermitian inverse is an exact Cholesky
//!   factorization (`A = LL^H`), sized for the small per-subchannel systems
//!   this crate deals in (`N_T ≤ 64`).

mod fft;
mod mat;

pub use fft::{dft, idft, Dft};
pub use mat::Mat;
pub(crate) use mat::accumulate_gram;

use num_complex::Complex64;

use crate::{Error, Result};

/// Convenience alias for length-`N` complex blocks.
pub type ComplexVec = Vec<Complex64>;

/// Rejects NaN/infinite entries; returns the offending index.
pub(crate) fn check_finite(v: &[Complex64]) -> Result<()> {
    for (index, z) in v.iter().enumerate() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NonFinite { index });
        }
    }
    Ok(())
}
