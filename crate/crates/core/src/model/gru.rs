//! Gated recurrent unit.
//!
//! With input `x` and previous state `h` (gate rows stacked as
//! `[update; reset; candidate]` in `W`, `U`, `b`):
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! n  = tanh(W_n x + U_n (r ⊙ h) + b_n)
//! h' = (1 − z) ⊙ h + z ⊙ n
//! ```

use super::params::GruParams;
use crate::numeric::sigmoid;

/// Intermediate values of one GRU step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct GruCache {
    pub x: Vec<f64>,
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub rh: Vec<f64>,
}

pub(crate) fn forward(p: &GruParams, x: &[f64], h: &[f64]) -> (Vec<f64>, GruCache) {
    let d = h.len();
    let mut pre = p.b.data().to_vec();
    p.w.matvec_acc(x, &mut pre);

    let mut uh = vec![0.0; 2 * d];
    p.u.matvec_rows_into(0..2 * d, h, &mut uh);
    let z: Vec<f64> = (0..d).map(|i| sigmoid(pre[i] + uh[i])).collect();
    let r: Vec<f64> = (0..d).map(|i| sigmoid(pre[d + i] + uh[d + i])).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let mut un = vec![0.0; d];
    p.u.matvec_rows_into(2 * d..3 * d, &rh, &mut un);
    let n: Vec<f64> = (0..d).map(|i| (pre[2 * d + i] + un[i]).tanh()).collect();
    let h_new = (0..d).map(|i| h[i] + z[i] * (n[i] - h[i])).collect();
    (
        h_new,
        GruCache {
            x: x.to_vec(),
            h: h.to_vec(),
            z,
            r,
            n,
            rh,
        },
    )
}

/// Accumulate parameter gradients into `g` and input/state gradients into
/// `dx` / `dh`, given the gradient `dh_new` of the step output.
pub(crate) fn backward(
    p: &GruParams,
    c: &GruCache,
    dh_new: &[f64],
    g: &mut GruParams,
    dx: &mut [f64],
    dh: &mut [f64],
) {
    let d = c.h.len();
    let mut gates = vec![0.0; 3 * d];
    let mut drh = vec![0.0; d];
    for i in 0..d {
        let dz = dh_new[i] * (c.n[i] - c.h[i]);
        let dn = dh_new[i] * c.z[i];
        dh[i] += dh_new[i] * (1.0 - c.z[i]);
        gates[i] = dz * c.z[i] * (1.0 - c.z[i]);
        gates[2 * d + i] = dn * (1.0 - c.n[i] * c.n[i]);
    }
    // candidate path through U_n (r ⊙ h)
    g.u.outer_rows_acc(2 * d..3 * d, &gates[2 * d..], &c.rh);
    p.u.matvec_t_rows_acc(2 * d..3 * d, &gates[2 * d..], &mut drh);
    for i in 0..d {
        let dr = drh[i] * c.h[i];
        dh[i] += drh[i] * c.r[i];
        gates[d + i] = dr * c.r[i] * (1.0 - c.r[i]);
    }
    for (b, gi) in g.b.data_mut().iter_mut().zip(&gates) {
        *b += gi;
    }
    g.w.outer_acc(&gates, &c.x);
    p.w.matvec_t_acc(&gates, dx);
    g.u.outer_rows_acc(0..2 * d, &gates[..2 * d], &c.h);
    p.u.matvec_t_rows_acc(0..2 * d, &gates[..2 * d], dh);
}
