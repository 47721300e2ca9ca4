use super::autoencoder::sigmoid;
use super::{check_len, Autoencoder, Matrix, NnError, Rng, INPUT_DIM};

/// Running sum that also tracks the rounding error of every addition and
/// product (TwoSum / fma-based TwoProduct), giving a result about as
/// accurate as evaluation in twice the working precision.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    err: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let s = self.sum + v;
        let bp = s - self.sum;
        self.err += (self.sum - (s - bp)) + (v - bp);
        self.sum = s;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.err += a.mul_add(b, -p);
        self.add(p);
    }

    fn value(&self) -> f64 {
        self.sum + self.err
    }

    /// `self - other` without collapsing either side to one `f64` first.
    fn difference(&self, other: &CompensatedSum) -> f64 {
        (self.sum - other.sum) + (self.err - other.err)
    }
}

/// Sum of squared reconstruction errors, evaluated with compensated
/// arithmetic and independently of the batch kernels used by training.
/// Kept unreduced so two nearby evaluations can be subtracted accurately.
fn accurate_sq_error(ae: &Autoencoder, x: &[f64]) -> CompensatedSum {
    let hidden: Vec<f64> = (0..ae.w_enc().rows())
        .map(|j| {
            let mut acc = CompensatedSum::default();
            for (w, xi) in ae.w_enc().row(j).iter().zip(x) {
                acc.add_product(*w, *xi);
            }
            acc.add(ae.b_enc()[j]);
            acc.value().max(0.0)
        })
        .collect();
    let mut total = CompensatedSum::default();
    for (o, xo) in x.iter().enumerate() {
        let mut acc = CompensatedSum::default();
        for (w, h) in ae.w_dec().row(o).iter().zip(&hidden) {
            acc.add_product(*w, *h);
        }
        acc.add(ae.b_dec()[o]);
        let d = sigmoid(acc.value()) - xo;
        total.add_product(d, d);
    }
    total
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Coordinates sampled per parameter group; `None` checks all of them.
    pub coords_per_group: Option<usize>,
    /// Seed for coordinate sampling.
    pub seed: u64,
    /// Denominator floor of the relative error, for gradients near zero.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            coords_per_group: Some(48),
            seed: 0,
            floor: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Largest error per group: encoder weights, encoder bias, decoder weights, decoder bias.
    pub per_group: [f64; 4],
    pub compared: usize,
    /// Coordinates skipped because a relu input sits close enough to zero
    /// for the probe to cross the kink.
    pub skipped_kinks: usize,
}

/// Max relative error between backprop and central finite differences of
/// the reconstruction MSE, using the default sampling.
pub fn gradient_check(ae: &Autoencoder, x: &[f64]) -> Result<f64, NnError> {
    Ok(gradient_check_with(ae, x, &GradCheckConfig::default())?.max_rel_error)
}

pub fn gradient_check_with(
    ae: &Autoencoder,
    x: &[f64],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, NnError> {
    check_len("gradient check input", INPUT_DIM, x.len())?;
    let batch = Matrix::new(1, INPUT_DIM, x.to_vec())?;
    let (_, grads) = ae.loss_and_gradients(&batch)?;
    let pre: Vec<f64> = {
        // hidden pre-activations, for the kink test
        let w = ae.w_enc();
        (0..w.rows())
            .map(|j| w.row(j).iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + ae.b_enc()[j])
            .collect()
    };
    let kink = |g: usize, idx: usize| -> bool {
        let margin = |dx: f64| (2.0 * cfg.step * dx).max(1e-6);
        match g {
            0 => {
                let (j, i) = (idx / INPUT_DIM, idx % INPUT_DIM);
                x[i] != 0.0 && pre[j].abs() < margin(x[i].abs())
            }
            1 => pre[idx].abs() < margin(1.0),
            _ => false,
        }
    };

    let loss = |m: &Autoencoder| accurate_sq_error(m, x);
    let mut probe = ae.clone();
    let mut rng = Rng::new(cfg.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        per_group: [0.0; 4],
        compared: 0,
        skipped_kinks: 0,
    };
    for (g, analytic) in grads.groups().iter().enumerate() {
        let len = analytic.len();
        let coords: Vec<usize> = match cfg.coords_per_group {
            Some(k) => (0..k).map(|_| rng.below(len as u64) as usize).collect(),
            None => (0..len).collect(),
        };
        for idx in coords {
            if kink(g, idx) {
                report.skipped_kinks += 1;
                continue;
            }
            let original = probe.param_groups()[g][idx];
            probe.param_groups_mut()[g][idx] = original + cfg.step;
            let plus = loss(&probe);
            probe.param_groups_mut()[g][idx] = original - cfg.step;
            let minus = loss(&probe);
            probe.param_groups_mut()[g][idx] = original;
            let numeric = plus.difference(&minus) / (INPUT_DIM as f64 * 2.0 * cfg.step);
            let a = analytic[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            report.per_group[g] = report.per_group[g].max(rel);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.compared += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::HIDDEN_DIM;

    fn input(seed: u64) -> Vec<f64> {
        let mut r = Rng::new(seed);
        (0..INPUT_DIM).map(|_| r.next_f64()).collect()
    }

    #[test]
    fn random_instance_passes() {
        let ae = Autoencoder::init(5);
        let report = gradient_check_with(&ae, &input(6), &GradCheckConfig::default()).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
        assert!(report.compared > 150);
    }

    #[test]
    fn zero_input_zero_bias() {
        let mut ae = Autoencoder::init(2);
        ae.b_enc = vec![0.0; HIDDEN_DIM];
        let x = vec![0.0; INPUT_DIM];
        let (_, g) = ae
            .loss_and_gradients(&Matrix::new(1, INPUT_DIM, x.clone()).unwrap())
            .unwrap();
        assert!(g.w_enc.as_slice().iter().all(|&v| v == 0.0));
        let report = gradient_check_with(&ae, &x, &GradCheckConfig::default()).unwrap();
        assert!(report.max_rel_error < 1e-4);
        // every sampled encoder-bias coordinate sits on the kink
        assert!(report.skipped_kinks >= 1);
    }

    #[test]
    fn repeatable() {
        let ae = Autoencoder::init(1);
        let x = input(1);
        let a = gradient_check(&ae, &x).unwrap();
        let b = gradient_check(&ae, &x).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn detects_wrong_gradient() {
        // sanity: the check is able to fail. A decoder bias perturbed after
        // differentiation gives mismatching numbers.
        let ae = Autoencoder::init(3);
        let x = input(4);
        let cfg = GradCheckConfig { coords_per_group: Some(8), ..Default::default() };
        let ok = gradient_check_with(&ae, &x, &cfg).unwrap();
        let mut shifted = ae.clone();
        shifted.b_dec.iter_mut().for_each(|b| *b += 3.0);
        let (_, g_ok) = ae.loss_and_gradients(&Matrix::new(1, INPUT_DIM, x.clone()).unwrap()).unwrap();
        let (_, g_sh) = shifted.loss_and_gradients(&Matrix::new(1, INPUT_DIM, x).unwrap()).unwrap();
        assert!(ok.max_rel_error < 1e-4);
        assert_ne!(g_ok.b_dec, g_sh.b_dec);
    }
}
