use super::{Mode, Network, Tensor};
use crate::Result;

/// Finite-difference step used by [`gradient_check`].
pub const FD_STEP: f64 = 1e-6;

/// Worst-case disagreement between backprop and central differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
}

/// Floor on the denominator of [`relative_error`]. Central differences at
/// step 1e-6 carry ~1e-10 absolute rounding noise, which would swamp the
/// relative error of gradients much smaller than this.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

/// |a-b| / max(|a|, |b|, REL_ERROR_FLOOR).
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Compares analytic gradients of every parameter and input element against
/// central finite differences of `loss(forward(x))`.
///
/// `loss` returns the scalar loss and its gradient with respect to the output.
pub fn gradient_check<F>(net: &Network, x: &Tensor, mode: Mode, loss: F) -> Result<GradCheckReport>
where
    F: Fn(&Tensor) -> Result<(f64, Tensor)>,
{
    let mut work = net.clone();
    let cache = work.forward(x, mode)?;
    let (_, g_out) = loss(cache.output())?;
    let grads = work.backward(&cache, &g_out)?;
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();

    let eval = |n: &Network, input: &Tensor| -> Result<f64> {
        // each probe starts from the same running statistics
        let mut probe = n.clone();
        let c = probe.forward(input, mode)?;
        Ok(loss(c.output())?.0)
    };

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (k, a) in analytic.iter().enumerate() {
        for i in 0..a.len() {
            let mut plus = net.clone();
            plus.params_mut()[k][i] += FD_STEP;
            let mut minus = net.clone();
            minus.params_mut()[k][i] -= FD_STEP;
            let fd = (eval(&plus, x)? - eval(&minus, x)?) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(a[i], fd));
            checked += 1;
        }
    }
    for i in 0..x.data().len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += FD_STEP;
        let mut xm = x.clone();
        xm.data_mut()[i] -= FD_STEP;
        let fd = (eval(net, &xp)? - eval(net, &xm)?) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(grads.input.data()[i], fd));
        checked += 1;
    }
    Ok(GradCheckReport {
        max_relative_error: worst,
        checked,
    })
}
