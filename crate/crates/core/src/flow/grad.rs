//! Exact gradient of the mean NLL through the fixed-step RK4 recursion.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::net::{ParamGrad, PotentialNet, StageCache};
use super::ode::{FlowConfig, CHUNK};
use crate::error::{Error, Result};
use crate::tt::BaseDensity;

const STAGE_WEIGHTS: [f64; 4] = [1.0, 2.0, 2.0, 1.0];

/// Mean NLL and its parameter gradient over the rows that did not diverge.
#[derive(Debug, Clone)]
pub struct NllGrad {
    pub nll: f64,
    pub grad: Vec<f64>,
    pub used: usize,
    pub diverged: usize,
}

pub fn nll_and_grad(
    net: &PotentialNet,
    cfg: &FlowConfig,
    base: &BaseDensity,
    batch: ArrayView2<'_, f64>,
) -> Result<NllGrad> {
    if batch.nrows() == 0 {
        return Err(Error::Argument("empty batch".into()));
    }
    let mut total = 0.0;
    let mut grad = vec![0.0; net.n_params()];
    let mut used = 0usize;
    let mut diverged = 0usize;
    for chunk in batch.axis_chunks_iter(Axis(0), CHUNK) {
        let x = chunk.t().to_owned();
        let mut out = chunk_grad(net, cfg, base, x.clone());
        if !out.diverged.is_empty() {
            diverged += out.diverged.len();
            let keep: Vec<usize> = (0..x.ncols()).filter(|c| !out.diverged.contains(c)).collect();
            if keep.is_empty() {
                continue;
            }
            out = chunk_grad(net, cfg, base, x.select(Axis(1), &keep));
            if !out.diverged.is_empty() {
                return Err(Error::Construction("divergence set changed on re-evaluation".into()));
            }
        }
        total += out.loss_sum;
        used += out.used;
        out.grad.add_to_flat(&mut grad, 1.0);
    }
    if used == 0 {
        return Err(Error::Divergence { step: 0 });
    }
    let inv = 1.0 / used as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok(NllGrad { nll: total * inv, grad, used, diverged })
}

struct ChunkOut {
    loss_sum: f64,
    grad: ParamGrad,
    used: usize,
    diverged: Vec<usize>,
}

fn chunk_grad(net: &PotentialNet, cfg: &FlowConfig, base: &BaseDensity, mut x: Array2<f64>) -> ChunkOut {
    let h = -cfg.tau;
    let b = x.ncols();
    let d = x.nrows();
    let steps = cfg.steps();
    let mut tape: Vec<[StageCache; 4]> = Vec::with_capacity(steps);
    let mut ell = Array1::<f64>::zeros(b);
    for _ in 0..steps {
        let (k1, l1, c1) = net.stage_forward(x.view());
        let (k2, l2, c2) = net.stage_forward((&x + &(&k1 * (0.5 * h))).view());
        let (k3, l3, c3) = net.stage_forward((&x + &(&k2 * (0.5 * h))).view());
        let (k4, l4, c4) = net.stage_forward((&x + &(&k3 * h)).view());
        x += &((k1 + &(k2 * 2.0) + &(k3 * 2.0) + &k4) * (h / 6.0));
        ell += &((l1 + &(l2 * 2.0) + &(l3 * 2.0) + &l4) * (cfg.tau / 6.0));
        tape.push([c1, c2, c3, c4]);
    }
    let diverged: Vec<usize> =
        (0..b).filter(|&c| !(x.column(c).iter().all(|v| v.is_finite()) && ell[c].is_finite())).collect();
    let mut grad = ParamGrad::zeros(net);
    if !diverged.is_empty() {
        return ChunkOut { loss_sum: f64::NAN, grad, used: 0, diverged };
    }

    // Per-sample loss: -log q_0(x(0)) + ell.
    let mut loss_sum = 0.0;
    let mut xbar = Array2::<f64>::zeros((d, b));
    for col in 0..b {
        let (lp, g) = base.log_density_with_grad(&x.column(col).to_vec());
        loss_sum += ell[col] - lp;
        for (i, gi) in g.into_iter().enumerate() {
            xbar[[i, col]] = -gi;
        }
    }
    let lbars: [Array1<f64>; 4] = STAGE_WEIGHTS.map(|w| Array1::from_elem(b, cfg.tau / 6.0 * w));
    for caches in tape.iter().rev() {
        let mut kbar: [Array2<f64>; 4] = STAGE_WEIGHTS.map(|w| &xbar * (h / 6.0 * w));
        let mut acc = xbar.clone();
        for s in (0..4).rev() {
            let sbar = net.stage_backward(&caches[s], kbar[s].view(), lbars[s].view(), &mut grad);
            acc += &sbar;
            match s {
                3 => kbar[2].scaled_add(h, &sbar),
                2 => kbar[1].scaled_add(0.5 * h, &sbar),
                1 => kbar[0].scaled_add(0.5 * h, &sbar),
                _ => {}
            }
        }
        xbar = acc;
    }
    ChunkOut { loss_sum, grad, used: b, diverged }
}
