//! Central finite-difference check of the analytic gradient.

use super::backprop::{nll_loss, GradientBuffer};
use super::data::SequencePair;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Finite-difference step.
pub const STEP: f64 = 1e-5;

/// Denominator floor of the relative error. Central differences at
/// `h = 1e-5` carry ~1e-10 of round-off; the floor keeps gradients that are
/// exactly zero from turning that noise into a large relative error.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// `(tensor name, max relative error over its entries)`
    pub per_tensor: Vec<(&'static str, f64)>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compare `analytic` against central differences of the mean batch NLL.
pub fn compare_gradients(
    params: &ModelParams,
    batch: &[SequencePair],
    analytic: &GradientBuffer,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let n = params.num_parameters();
    if n > 5000 {
        return Err(Error::contract(format!(
            "grad_check: {n} parameters is too many to finite-difference"
        )));
    }
    let loss = |p: &ModelParams| nll_loss(p, batch).map(|(l, _)| l);
    let mut probe = params.clone();
    let mut per_tensor = Vec::new();
    for ti in 0..params.tensors().len() {
        let (name, len) = {
            let (name, t) = params.tensors()[ti];
            (name, t.data().len())
        };
        let mut worst: f64 = 0.0;
        for k in 0..len {
            let orig = params.tensors()[ti].1.data()[k];
            probe.tensors_mut()[ti].1.data_mut()[k] = orig + STEP;
            let up = loss(&probe)?;
            probe.tensors_mut()[ti].1.data_mut()[k] = orig - STEP;
            let down = loss(&probe)?;
            probe.tensors_mut()[ti].1.data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic.as_params().tensors()[ti].1.data()[k];
            worst = worst.max(relative_error(a, numeric));
        }
        per_tensor.push((name, worst));
    }
    Ok(GradCheckReport {
        per_tensor,
        tolerance,
    })
}

/// Finite-difference check of the gradient of one pair's NLL.
pub fn grad_check(
    params: &ModelParams,
    pair: &SequencePair,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let batch = std::slice::from_ref(pair);
    let (_, analytic) = nll_loss(params, batch)?;
    compare_gradients(params, batch, &analytic, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dims, EOS};

    fn small() -> (ModelParams, SequencePair) {
        let dims = Dims {
            src_vocab: 6,
            tgt_vocab: 5,
            d_emb: 2,
            d_hid: 3,
        };
        let p = ModelParams::random(dims, 0.8, 11).unwrap();
        let pair = SequencePair::new(vec![3, 5, 4, 3], vec![4, 3, 4, EOS]).unwrap();
        (p, pair)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let (p, pair) = small();
        let report = grad_check(&p, &pair, 1e-4).unwrap();
        for (name, err) in &report.per_tensor {
            assert!(*err < 1e-4, "{name}: {err}");
        }
        assert!(report.passed());
    }

    #[test]
    fn untouched_rows_report_zero() {
        // source token 5 of 6 never appears: its embedding row has zero
        // gradient both ways
        let (p, _) = small();
        let pair = SequencePair::new(vec![3], vec![EOS]).unwrap();
        let (_, g) = nll_loss(&p, std::slice::from_ref(&pair)).unwrap();
        assert!(g.as_params().src_embed.row(5).iter().all(|x| *x == 0.0));
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!(grad_check(&p, &pair, 1e-4).unwrap().passed());
    }

    #[test]
    fn corrupted_gradient_fails() {
        let (p, pair) = small();
        let batch = std::slice::from_ref(&pair);
        let (_, mut g) = nll_loss(&p, batch).unwrap();
        g.as_params_mut().dec.u.scale(2.0);
        let report = compare_gradients(&p, batch, &g, 1e-4).unwrap();
        assert!(!report.passed());
        let dec_u = report
            .per_tensor
            .iter()
            .find(|(n, _)| *n == "dec.u")
            .unwrap();
        assert!(dec_u.1 > 0.1);
    }
}
