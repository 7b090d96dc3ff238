//! Finite-difference verification of the analytic gradients.

use rand::seq::index::sample;

use super::network::loss_and_grad;
use super::{Mode, Network, Tensor};
use crate::{rng, Error, Result};

const KINK_RETRY_THRESHOLD: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub epsilon: f64,
    /// Check a seeded random subset of this many parameters instead of all.
    pub max_params: Option<usize>,
    pub seed: u64,
    /// Scale the largest analytic gradient entry by 1.1 before comparing.
    pub corrupt_gradient: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_params: None,
            seed: crate::DEFAULT_SEED,
            corrupt_gradient: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Tensor name and flat index of the worst entry.
    pub worst: (String, usize),
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn eval_loss(net: &Network, x: &Tensor, labels: &[usize]) -> Result<f64> {
    let probs = net.forward(x, Mode::Eval)?;
    Ok(loss_and_grad(net.config().loss, &probs, labels)?.0)
}

/// Compares analytic gradients with central differences. Batch norm uses
/// its running statistics and dropout is off, so the loss is a fixed
/// deterministic function of the parameters.
pub fn grad_check(network: &Network, x: &Tensor, labels: &[usize], opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut net = network.clone();
    let (_, mut grads) = net.loss_and_grads(x, labels, Mode::Eval)?;
    if opts.corrupt_gradient {
        let (ti, ei, _) = grads
            .iter()
            .enumerate()
            .flat_map(|(ti, g)| g.data().iter().enumerate().map(move |(ei, v)| (ti, ei, v.abs())))
            .fold((0, 0, -1.0), |b, c| if c.2 > b.2 { c } else { b });
        grads[ti].data_mut()[ei] *= 1.1;
    }
    let names: Vec<String> = network
        .stack()
        .named_tensors()
        .into_iter()
        .map(|(n, _)| n)
        .filter(|n| !n.contains("running_"))
        .collect();
    let index: Vec<(usize, usize)> = grads
        .iter()
        .enumerate()
        .flat_map(|(ti, g)| (0..g.len()).map(move |ei| (ti, ei)))
        .collect();
    let chosen: Vec<(usize, usize)> = match opts.max_params {
        Some(k) if k < index.len() => {
            let mut r = rng::stream(&[opts.seed, 0x4743]);
            let mut picks = sample(&mut r, index.len(), k).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| index[i]).collect()
        }
        _ => index,
    };
    let mut worst = (0.0, 0, 0);
    for &(ti, ei) in &chosen {
        let orig = net.stack().params().nth(ti).expect("param index").data()[ei];
        let mut at = |v: f64| -> Result<f64> {
            net.stack_mut().params_mut()[ti].data_mut()[ei] = v;
            eval_loss(&net, x, labels)
        };
        let mut central = |h: f64| -> Result<f64> {
            let plus = at(orig + h)?;
            let minus = at(orig - h)?;
            at(orig)?;
            Ok((plus - minus) / (2.0 * h))
        };
        let analytic = grads[ti].data()[ei];
        let mut numeric = central(opts.epsilon)?;
        // A ReLU or max-pool switch inside the step window biases the
        // difference; a tenfold smaller step steps over most of them.
        if relative_error(analytic, numeric) > KINK_RETRY_THRESHOLD {
            let fine = central(opts.epsilon / 10.0)?;
            if relative_error(analytic, fine) < relative_error(analytic, numeric) {
                numeric = fine;
            }
        }
        if !numeric.is_finite() || !analytic.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient for {}[{ei}]", names[ti])));
        }
        let err = relative_error(analytic, numeric);
        if err > worst.0 {
            worst = (err, ti, ei);
        }
    }
    Ok(GradCheckReport {
        max_relative_error: worst.0,
        checked: chosen.len(),
        worst: (names[worst.1].clone(), worst.2),
    })
}
