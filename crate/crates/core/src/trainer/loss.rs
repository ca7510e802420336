//! Uncertainty-weighted distortion and the rate-regularized training loss.

use ndarray::{Array2, ArrayView2, NdFloat, Zip};

use crate::error::{usage, Result};
use crate::quant::{soft_entropy, Codebook, ProbTable, TauConvention};

/// `mean |lam - lam_hat|^2 / (|lam| + eps)` over all entries.
pub fn distortion<F: NdFloat>(lam: ArrayView2<F>, lam_hat: ArrayView2<F>, eps: f64) -> Result<f64> {
    check(&lam, &lam_hat, eps)?;
    let mut acc = 0.0f64;
    Zip::from(&lam).and(&lam_hat).for_each(|&x, &y| {
        let (x, y) = (x.to_f64().unwrap_or(f64::NAN), y.to_f64().unwrap_or(f64::NAN));
        acc += (x - y) * (x - y) / (x.abs() + eps);
    });
    Ok(acc / lam.len() as f64)
}

/// Distortion together with its gradient with respect to `lam_hat`.
pub fn distortion_with_grad<F: NdFloat>(
    lam: ArrayView2<F>,
    lam_hat: ArrayView2<F>,
    eps: f64,
) -> Result<(f64, Array2<F>)> {
    check(&lam, &lam_hat, eps)?;
    let n = lam.len() as f64;
    let mut acc = 0.0f64;
    let mut grad = Array2::<F>::zeros(lam.raw_dim());
    let eps_f = F::from(eps).expect("eps representable");
    let scale = F::from(2.0 / n).expect("finite");
    Zip::from(&mut grad).and(&lam).and(&lam_hat).for_each(|g, &x, &y| {
        let w = F::one() / (x.abs() + eps_f);
        let diff = y - x;
        acc += (diff * diff * w).to_f64().unwrap_or(f64::NAN);
        *g = scale * diff * w;
    });
    Ok((acc / n, grad))
}

fn check<F>(lam: &ArrayView2<F>, lam_hat: &ArrayView2<F>, eps: f64) -> Result<()> {
    if lam.raw_dim() != lam_hat.raw_dim() {
        return Err(usage(format!(
            "soft-bit matrices differ in shape: {:?} vs {:?}",
            lam.shape(),
            lam_hat.shape()
        )));
    }
    if lam.is_empty() {
        return Err(usage("empty soft-bit matrix"));
    }
    if !(eps > 0.0) {
        return Err(usage("distortion epsilon must be positive"));
    }
    Ok(())
}

/// Distortion plus `alpha` times the soft entropy (in nats) of the latents.
#[allow(clippy::too_many_arguments)]
pub fn total_loss<F: NdFloat>(
    lam: ArrayView2<F>,
    lam_hat: ArrayView2<F>,
    eps: f64,
    latents: &[f64],
    cb: &Codebook,
    tau: f64,
    p: &ProbTable,
    alpha: f64,
    convention: TauConvention,
) -> Result<f64> {
    let d = distortion(lam, lam_hat, eps)?;
    if alpha == 0.0 {
        return Ok(d);
    }
    Ok(d + alpha * soft_entropy(latents, cb, tau, p, convention)?)
}
