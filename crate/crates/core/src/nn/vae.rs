use serde::{Deserialize, Serialize};

pub const LOGVAR_BOUND: f64 = 10.0;

/// Diagonal Gaussian posterior `N(mu, exp(logvar))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianCode {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

impl GaussianCode {
    /// Splits an encoder output `[mu ‖ logvar]`, clamping logvar.
    pub fn from_encoder_output(out: &[f64]) -> Self {
        let z = out.len() / 2;
        Self {
            mu: out[..z].to_vec(),
            logvar: out[z..2 * z].iter().map(|v| v.clamp(-LOGVAR_BOUND, LOGVAR_BOUND)).collect(),
        }
    }

    /// Maps gradients w.r.t. `(mu, logvar)` back onto the raw encoder output;
    /// the clamp passes no gradient outside its range.
    pub fn encoder_output_grad(raw: &[f64], dmu: &[f64], dlogvar: &[f64]) -> Vec<f64> {
        let z = raw.len() / 2;
        let mut g = dmu.to_vec();
        g.extend((0..z).map(|k| {
            let v = raw[z + k];
            if (-LOGVAR_BOUND..=LOGVAR_BOUND).contains(&v) {
                dlogvar[k]
            } else {
                0.0
            }
        }));
        g
    }
}

/// `½ Σ (exp(logvar) + mu² − 1 − logvar)` and its gradients
/// `(∂/∂mu, ∂/∂logvar)`.
pub fn kl_gaussian(code: &GaussianCode) -> (f64, Vec<f64>, Vec<f64>) {
    let mut value = 0.0;
    let mut dmu = Vec::with_capacity(code.mu.len());
    let mut dlv = Vec::with_capacity(code.mu.len());
    for (&m, &lv) in code.mu.iter().zip(&code.logvar) {
        let e = lv.exp();
        value += 0.5 * (e + m * m - 1.0 - lv);
        dmu.push(m);
        dlv.push(0.5 * (e - 1.0));
    }
    (value, dmu, dlv)
}

/// `z = mu + exp(logvar/2) ⊙ noise`.
pub fn reparameterize(code: &GaussianCode, noise: &[f64]) -> Vec<f64> {
    code.mu
        .iter()
        .zip(&code.logvar)
        .zip(noise)
        .map(|((m, lv), n)| m + (0.5 * lv).exp() * n)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_match_is_zero() {
        let c = GaussianCode {
            mu: vec![0.0; 3],
            logvar: vec![0.0; 3],
        };
        assert_eq!(kl_gaussian(&c).0, 0.0);
    }

    #[test]
    fn unit_mean_shift() {
        let c = GaussianCode {
            mu: vec![1.0],
            logvar: vec![0.0],
        };
        assert_eq!(kl_gaussian(&c).0, 0.5);
    }

    #[test]
    fn logvar_is_clamped() {
        let c = GaussianCode::from_encoder_output(&[0.0, 0.0, 20.0, -30.0]);
        assert_eq!(c.logvar, vec![10.0, -10.0]);
        let g = GaussianCode::encoder_output_grad(&[0.0, 0.0, 20.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(g, vec![1.0, 1.0, 0.0, 1.0]);
    }
}
