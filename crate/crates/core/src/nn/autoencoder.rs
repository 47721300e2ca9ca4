use super::{check_len, Matrix, NnError, Rng};
use crate::par::Exec;

/// Input feature count (a flattened 28×28 image).
pub const INPUT_DIM: usize = 784;
/// Width of the hidden representation shared with the server.
pub const HIDDEN_DIM: usize = 128;

/// A 128-dim hidden representation of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, NnError> {
        check_len("embedding", HIDDEN_DIM, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFinite("embedding"));
        }
        Ok(Embedding(values))
    }

    pub fn from_f32(values: &[f32]) -> Result<Self, NnError> {
        Embedding::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn zeros() -> Self {
        Embedding(vec![0.0; HIDDEN_DIM])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Rounds every coordinate to `f32`, as the wire format does.
    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&v| v as f32).collect()
    }

    pub fn scaled(&self, c: f64) -> Embedding {
        Embedding(self.0.iter().map(|v| v * c).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Dense autoencoder `784 → relu(128) → sigmoid(784)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder {
    pub(crate) w_enc: Matrix,
    pub(crate) b_enc: Vec<f64>,
    pub(crate) w_dec: Matrix,
    pub(crate) b_dec: Vec<f64>,
    pub(crate) seed: u64,
}

/// Gradients of the batch-mean reconstruction loss, laid out like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w_enc: Matrix,
    pub b_enc: Vec<f64>,
    pub w_dec: Matrix,
    pub b_dec: Vec<f64>,
}

impl Gradients {
    pub fn groups(&self) -> [&[f64]; 4] {
        [
            self.w_enc.as_slice(),
            &self.b_enc,
            self.w_dec.as_slice(),
            &self.b_dec,
        ]
    }
}

/// Logistic function, kept strictly inside (0, 1) even where `f64` rounding
/// would saturate to an endpoint.
pub(crate) fn sigmoid(z: f64) -> f64 {
    (1.0 / (1.0 + libm::exp(-z))).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl Autoencoder {
    /// Seeded initialization: every parameter is drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` of its layer, in the order
    /// encoder weights (row-major), encoder bias, decoder weights, decoder bias.
    pub fn init(seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let enc_bound = 1.0 / (INPUT_DIM as f64).sqrt();
        let dec_bound = 1.0 / (HIDDEN_DIM as f64).sqrt();
        let mut draw = |n: usize, bound: f64| -> Vec<f64> {
            (0..n).map(|_| rng.uniform(-bound, bound)).collect()
        };
        let w_enc = draw(HIDDEN_DIM * INPUT_DIM, enc_bound);
        let b_enc = draw(HIDDEN_DIM, enc_bound);
        let w_dec = draw(INPUT_DIM * HIDDEN_DIM, dec_bound);
        let b_dec = draw(INPUT_DIM, dec_bound);
        Autoencoder {
            w_enc: Matrix::from_vec_unchecked(HIDDEN_DIM, INPUT_DIM, w_enc),
            b_enc,
            w_dec: Matrix::from_vec_unchecked(INPUT_DIM, HIDDEN_DIM, w_dec),
            b_dec,
            seed,
        }
    }

    pub fn from_parts(
        w_enc: Matrix,
        b_enc: Vec<f64>,
        w_dec: Matrix,
        b_dec: Vec<f64>,
        seed: u64,
    ) -> Result<Self, NnError> {
        check_len("encoder weight rows", HIDDEN_DIM, w_enc.rows())?;
        check_len("encoder weight cols", INPUT_DIM, w_enc.cols())?;
        check_len("encoder bias", HIDDEN_DIM, b_enc.len())?;
        check_len("decoder weight rows", INPUT_DIM, w_dec.rows())?;
        check_len("decoder weight cols", HIDDEN_DIM, w_dec.cols())?;
        check_len("decoder bias", INPUT_DIM, b_dec.len())?;
        let ae = Autoencoder {
            w_enc,
            b_enc,
            w_dec,
            b_dec,
            seed,
        };
        if !ae.is_finite() {
            return Err(NnError::NonFinite("autoencoder parameters"));
        }
        Ok(ae)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn w_enc(&self) -> &Matrix {
        &self.w_enc
    }

    pub fn b_enc(&self) -> &[f64] {
        &self.b_enc
    }

    pub fn w_dec(&self) -> &Matrix {
        &self.w_dec
    }

    pub fn b_dec(&self) -> &[f64] {
        &self.b_dec
    }

    /// Parameter groups in declaration order.
    pub fn param_groups(&self) -> [&[f64]; 4] {
        [
            self.w_enc.as_slice(),
            &self.b_enc,
            self.w_dec.as_slice(),
            &self.b_dec,
        ]
    }

    pub(crate) fn param_groups_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w_enc.as_mut_slice(),
            &mut self.b_enc,
            self.w_dec.as_mut_slice(),
            &mut self.b_dec,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.param_groups()
            .iter()
            .all(|g| g.iter().all(|v| v.is_finite()))
    }

    fn hidden_pre(&self, x: &Matrix) -> Result<Matrix, NnError> {
        check_len("input width", INPUT_DIM, x.cols())?;
        let mut pre = x.matmul_transposed(&self.w_enc)?;
        add_bias(&mut pre, &self.b_enc);
        Ok(pre)
    }

    fn output_pre(&self, h: &Matrix) -> Result<Matrix, NnError> {
        check_len("hidden width", HIDDEN_DIM, h.cols())?;
        let mut pre = h.matmul_transposed(&self.w_dec)?;
        add_bias(&mut pre, &self.b_dec);
        Ok(pre)
    }

    /// Hidden representations of every row of `x` (`rows × 128`).
    pub fn encode_batch(&self, x: &Matrix) -> Result<Matrix, NnError> {
        let mut h = self.hidden_pre(x)?;
        h.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
        Ok(h)
    }

    /// Sigmoid reconstructions of a batch of hidden representations.
    pub fn decode_batch(&self, h: &Matrix) -> Result<Matrix, NnError> {
        let mut y = self.output_pre(h)?;
        y.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));
        Ok(y)
    }

    pub fn encode(&self, x: &[f64]) -> Result<Embedding, NnError> {
        check_len("encode input", INPUT_DIM, x.len())?;
        let xm = Matrix::new(1, INPUT_DIM, x.to_vec())?;
        Ok(Embedding(self.encode_batch(&xm)?.into_vec()))
    }

    /// Like [`encode`](Self::encode) but rejects an all-zero embedding of a
    /// nonzero input (every hidden unit inactive).
    pub fn encode_checked(&self, x: &[f64]) -> Result<Embedding, NnError> {
        let e = self.encode(x)?;
        if e.is_zero() && x.iter().any(|&v| v != 0.0) {
            return Err(NnError::DeadEmbedding);
        }
        Ok(e)
    }

    pub fn decode(&self, h: &Embedding) -> Result<Vec<f64>, NnError> {
        let hm = Matrix::from_vec_unchecked(1, HIDDEN_DIM, h.0.clone());
        Ok(self.decode_batch(&hm)?.into_vec())
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.decode(&self.encode(x)?)
    }

    /// Per-sample MSE between `x` and its reconstruction.
    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64, NnError> {
        mse_loss(x, &self.reconstruct(x)?)
    }

    /// Embeds every row, batching rows into blocks spread over `exec`.
    pub fn embed_rows(&self, x: &Matrix, exec: Exec) -> Result<Vec<Embedding>, NnError> {
        check_len("input width", INPUT_DIM, x.cols())?;
        const BLOCK: usize = 64;
        let blocks: Vec<usize> = (0..x.rows()).step_by(BLOCK).collect();
        let parts = exec.try_map(&blocks, |&start| {
            let idx: Vec<usize> = (start..(start + BLOCK).min(x.rows())).collect();
            self.encode_batch(&x.select_rows(&idx))
        })?;
        Ok(parts
            .into_iter()
            .flat_map(|m| {
                m.row_iter()
                    .map(|r| Embedding(r.to_vec()))
                    .collect::<Vec<_>>()
            })
            .collect())
    }

    /// Batch-mean MSE reconstruction loss and its gradients.
    ///
    /// The returned loss is the *sum* of per-sample losses so callers can
    /// average over an epoch; gradients are of the batch mean.
    pub fn loss_and_gradients(&self, x: &Matrix) -> Result<(f64, Gradients), NnError> {
        let batch = x.rows();
        if batch == 0 {
            return Err(NnError::EmptyDataset);
        }
        let pre = self.hidden_pre(x)?;
        let mut h = pre.clone();
        h.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
        let y = self.decode_batch(&h)?;

        let scale = 2.0 / (batch * INPUT_DIM) as f64;
        let mut sum_loss = 0.0;
        let mut d_out = Vec::with_capacity(batch * INPUT_DIM);
        for (y_row, x_row) in y.row_iter().zip(x.row_iter()) {
            let mut sq = 0.0;
            for (&yi, &xi) in y_row.iter().zip(x_row) {
                let diff = yi - xi;
                sq += diff * diff;
                d_out.push(scale * diff * yi * (1.0 - yi));
            }
            sum_loss += sq / INPUT_DIM as f64;
        }
        let d_out = Matrix::from_vec_unchecked(batch, INPUT_DIM, d_out);

        let g_w_dec = d_out.transpose_matmul(&h)?;
        let g_b_dec = d_out.column_sums();
        let mut d_pre = d_out.matmul(&self.w_dec)?;
        for (d, &p) in d_pre.as_mut_slice().iter_mut().zip(pre.as_slice()) {
            // subgradient of relu at 0 is taken as 0
            if p <= 0.0 {
                *d = 0.0;
            }
        }
        let g_w_enc = d_pre.transpose_matmul(x)?;
        let g_b_enc = d_pre.column_sums();
        Ok((
            sum_loss,
            Gradients {
                w_enc: g_w_enc,
                b_enc: g_b_enc,
                w_dec: g_w_dec,
                b_dec: g_b_dec,
            },
        ))
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn add_bias(m: &mut Matrix, bias: &[f64]) {
    let cols = m.cols();
    for row in m.as_mut_slice().chunks_exact_mut(cols) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Mean squared difference over all coordinates.
pub fn mse_loss(x: &[f64], x_hat: &[f64]) -> Result<f64, NnError> {
    check_len("mse operand", x.len(), x_hat.len())?;
    if x.is_empty() {
        return Err(NnError::InputShape {
            what: "mse operand",
            expected: 1,
            actual: 0,
        });
    }
    let sum: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / x.len() as f64)
}
