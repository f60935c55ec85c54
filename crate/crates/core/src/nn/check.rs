use rand::Rng;

use super::Network;
use crate::error::Result;
use crate::rng;

/// Worst-case comparison of analytic and central-difference gradients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_param: f64,
    pub max_rel_input: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn max_rel(&self) -> f64 {
        self.max_rel_param.max(self.max_rel_input)
    }
}

/// Denominator floor for relative errors. Central differences at `h = 1e-6`
/// carry roundoff near `1e-10 · |loss|`, so gradients below this size are
/// compared in absolute terms.
pub const FD_FLOOR: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Checks the gradient of the scalar `⟨c, net(x)⟩` for a random `c` against
/// central differences with step `h`. At most `max_params` parameters are
/// sampled; every input coordinate is checked.
pub fn check_network(net: &Network, x: &[f64], h: f64, max_params: usize, seed: u64) -> Result<GradCheck> {
    let mut r = rng::stream(seed, &[0x6c]);
    let c: Vec<f64> = (0..net.out_dim()).map(|_| r.random_range(-1.0..1.0)).collect();
    let loss = |n: &Network, x: &[f64]| -> Result<f64> {
        Ok(n.predict(x)?.iter().zip(&c).map(|(y, c)| y * c).sum())
    };
    let (_, tape) = net.forward(x)?;
    let (dx, grads) = net.backward(&tape, &c)?;
    let g = grads.to_flat();

    let mut probe = net.clone();
    let mut params = net.params_flat();
    let picks: Vec<usize> = if params.len() <= max_params {
        (0..params.len()).collect()
    } else {
        (0..max_params).map(|_| r.random_range(0..params.len())).collect()
    };
    let mut max_rel_param: f64 = 0.0;
    for &k in &picks {
        let orig = params[k];
        params[k] = orig + h;
        probe.set_params_flat(&params)?;
        let up = loss(&probe, x)?;
        params[k] = orig - h;
        probe.set_params_flat(&params)?;
        let down = loss(&probe, x)?;
        params[k] = orig;
        max_rel_param = max_rel_param.max(relative_error(g[k], (up - down) / (2.0 * h), FD_FLOOR));
    }

    let mut xp = x.to_vec();
    let mut max_rel_input: f64 = 0.0;
    for k in 0..x.len() {
        xp[k] = x[k] + h;
        let up = loss(net, &xp)?;
        xp[k] = x[k] - h;
        let down = loss(net, &xp)?;
        xp[k] = x[k];
        max_rel_input = max_rel_input.max(relative_error(dx[k], (up - down) / (2.0 * h), FD_FLOOR));
    }
    Ok(GradCheck {
        max_rel_param,
        max_rel_input,
        checked: picks.len() + x.len(),
    })
}
