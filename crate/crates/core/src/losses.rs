//! Training objectives with analytic gradients.
//!
//! * inter-feature loss: symmetric InfoNCE over a batch of matched
//!   video/text rows, in-batch mismatches acting as negatives;
//! * intra-feature loss: a Pearson constraint over feature channels that
//!   pulls each same-channel video/text correlation to one and pushes
//!   cross-channel correlations to zero;
//! * total loss: a level-weighted sum of the two over the coarse, frame and
//!   patch feature levels.
//!
//! Everything is computed in f64. [`grad_check`] compares any of the
//! analytic gradients against central finite differences.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_BETA: f64 = 0.001;
pub const DEFAULT_LEVEL_WEIGHTS: [f64; 3] = [5.0, 5.0, 1.0];
pub const DEFAULT_INFONCE_TEMPERATURE: f64 = 0.01;

const MIN_STD: f64 = 1e-12;

/// Video and text feature matrices of one batch, `B × D`, row `b` of each
/// describing pair `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchFeatures {
    video: Array2<f64>,
    text: Array2<f64>,
}

impl BatchFeatures {
    pub fn new(video: Array2<f64>, text: Array2<f64>) -> Result<Self> {
        if video.dim() != text.dim() {
            return Err(Error::ShapeMismatch(format!(
                "video batch {:?} vs text batch {:?}",
                video.dim(),
                text.dim()
            )));
        }
        if video.nrows() < 2 {
            return Err(Error::BatchTooSmall(video.nrows()));
        }
        if video.ncols() == 0 {
            return Err(Error::EmptyInput("batch has no channels"));
        }
        if video.iter().chain(text.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("batch".into()));
        }
        Ok(Self { video, text })
    }

    pub fn batch_size(&self) -> usize {
        self.video.nrows()
    }

    pub fn dim(&self) -> usize {
        self.video.ncols()
    }

    pub fn video(&self) -> &Array2<f64> {
        &self.video
    }

    pub fn text(&self) -> &Array2<f64> {
        &self.text
    }

    /// Returns a copy with every row scaled to unit L2 norm.
    pub fn normalized_rows(&self) -> Result<Self> {
        let norm = |m: &Array2<f64>| -> Result<Array2<f64>> {
            let mut out = m.clone();
            for mut row in out.rows_mut() {
                let n = row.dot(&row).sqrt();
                if n < MIN_STD {
                    return Err(Error::ZeroNorm);
                }
                row /= n;
            }
            Ok(out)
        };
        Ok(Self { video: norm(&self.video)?, text: norm(&self.text)? })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// Weight of the cross-channel decorrelation term.
    pub alpha: f64,
    /// Weight of the intra-feature loss relative to the inter-feature loss.
    pub beta: f64,
    /// Per-level weights for the coarse, frame and patch features.
    pub level_weights: [f64; 3],
    /// InfoNCE softmax temperature.
    pub temperature: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            level_weights: DEFAULT_LEVEL_WEIGHTS,
            temperature: DEFAULT_INFONCE_TEMPERATURE,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.alpha, self.beta]
            .iter()
            .chain(&self.level_weights)
            .all(|x| x.is_finite() && *x >= 0.0);
        if !nonneg {
            return Err(Error::InvalidParams("loss weights must be non-negative".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidParams("temperature must be positive".into()));
        }
        Ok(())
    }
}

/// A loss value with its gradients with respect to both feature matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad_video: Array2<f64>,
    pub grad_text: Array2<f64>,
}

fn log_sum_exp(xs: ArrayView1<'_, f64>) -> f64 {
    let max = xs.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Symmetric InfoNCE: the mean cross-entropy of the row softmax (video to
/// text) plus that of the column softmax (text to video) of
/// `video · textᵀ / temperature`, with the diagonal as positives.
pub fn inter_loss(batch: &BatchFeatures, temperature: f64) -> Result<LossGrad> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidParams(format!("temperature must be positive, got {temperature}")));
    }
    let b = batch.batch_size();
    let bf = b as f64;
    let logits = batch.video.dot(&batch.text.t()) / temperature;

    let mut value = 0.0;
    // d loss / d logits
    let mut grad = Array2::<f64>::zeros((b, b));
    for i in 0..b {
        let row = logits.row(i);
        let lse = log_sum_exp(row);
        value += lse - row[i];
        for j in 0..b {
            grad[[i, j]] += (row[j] - lse).exp() / bf;
        }
        grad[[i, i]] -= 1.0 / bf;

        let col = logits.column(i);
        let lse = log_sum_exp(col);
        value += lse - col[i];
        for j in 0..b {
            grad[[j, i]] += (col[j] - lse).exp() / bf;
        }
        grad[[i, i]] -= 1.0 / bf;
    }
    value /= bf;

    let grad_video = grad.dot(&batch.text) / temperature;
    let grad_text = grad.t().dot(&batch.video) / temperature;
    Ok(LossGrad { value, grad_video, grad_text })
}

/// Centers `x` and returns it with its L2 norm (`sqrt(B) · std`).
fn center(x: ArrayView1<'_, f64>) -> (Array1<f64>, f64) {
    let mean = x.sum() / x.len() as f64;
    let c = x.mapv(|v| v - mean);
    let norm = c.dot(&c).sqrt();
    (c, norm)
}

fn population_std(norm: f64, len: usize) -> f64 {
    norm / (len as f64).sqrt()
}

/// Pearson correlation coefficient of two equally long samples.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} samples", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::BatchTooSmall(x.len()));
    }
    let (cx, nx) = center(ArrayView1::from(x));
    let (cy, ny) = center(ArrayView1::from(y));
    if population_std(nx, x.len()) <= MIN_STD {
        return Err(Error::DegenerateChannel("first sample".into()));
    }
    if population_std(ny, y.len()) <= MIN_STD {
        return Err(Error::DegenerateChannel("second sample".into()));
    }
    Ok((cx.dot(&cy) / (nx * ny)).clamp(-1.0, 1.0))
}

/// Pearson distance `1 - ρ(x, y)`, in `[0, 2]`.
pub fn pearson_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(1.0 - pearson(x, y)?)
}

/// Columns centered and scaled to unit norm, with the norms.
fn standardize(m: &Array2<f64>, which: &str) -> Result<(Array2<f64>, Array1<f64>)> {
    let b = m.nrows();
    let mut z = m.clone();
    let mut norms = Array1::zeros(m.ncols());
    for (d, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
        let (c, n) = center(col.view());
        if population_std(n, b) <= MIN_STD {
            return Err(Error::DegenerateChannel(format!("{which} channel {d}")));
        }
        col.assign(&(c / n));
        norms[d] = n;
    }
    Ok((z, norms))
}

/// Backpropagates through column standardization `z = (x - mean) / ||x - mean||`.
fn standardize_backward(z: &Array2<f64>, norms: &Array1<f64>, dz: &Array2<f64>) -> Array2<f64> {
    let mut dx = Array2::zeros(z.dim());
    for d in 0..z.ncols() {
        let zc = z.column(d);
        let g = dz.column(d);
        let proj = zc.dot(&g);
        let dc = (&g - &(&zc * proj)) / norms[d];
        let mean = dc.sum() / dc.len() as f64;
        dx.column_mut(d).assign(&dc.mapv(|v| v - mean));
    }
    dx
}

/// `D × D` matrix of Pearson coefficients between video channel `i` (row)
/// and text channel `j` (column).
pub fn pearson_matrix(batch: &BatchFeatures) -> Result<Array2<f64>> {
    let (zv, _) = standardize(&batch.video, "video")?;
    let (zt, _) = standardize(&batch.text, "text")?;
    Ok(zv.t().dot(&zt))
}

/// Pearson constraint: `Σ_d d_p(v_d, t_d)² + α Σ_{d1≠d2} ρ(v_d1, t_d2)²`.
pub fn intra_loss(batch: &BatchFeatures, alpha: f64) -> Result<LossGrad> {
    let (zv, nv) = standardize(&batch.video, "video")?;
    let (zt, nt) = standardize(&batch.text, "text")?;
    let rho = zv.t().dot(&zt);
    let dim = rho.nrows();

    let mut value = 0.0;
    let mut grad_rho = Array2::<f64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            let r = rho[[i, j]];
            if i == j {
                value += (1.0 - r).powi(2);
                grad_rho[[i, j]] = -2.0 * (1.0 - r);
            } else {
                value += alpha * r * r;
                grad_rho[[i, j]] = 2.0 * alpha * r;
            }
        }
    }

    let dzv = zt.dot(&grad_rho.t());
    let dzt = zv.dot(&grad_rho);
    Ok(LossGrad {
        value,
        grad_video: standardize_backward(&zv, &nv, &dzv),
        grad_text: standardize_backward(&zt, &nt, &dzt),
    })
}

/// Total objective across the three feature levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    /// Per-level gradients, already scaled by the level weight.
    pub levels: Vec<LossGrad>,
}

/// `Σ_level λ_level (inter + β · intra)` over the coarse, frame and patch batches.
pub fn total_loss(levels: &[BatchFeatures; 3], cfg: &LossConfig) -> Result<TotalLoss> {
    cfg.validate()?;
    let shape = levels[0].video.dim();
    if levels.iter().any(|l| l.video.dim() != shape) {
        return Err(Error::ShapeMismatch("feature levels differ in batch shape".into()));
    }
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(3);
    for (batch, &lambda) in levels.iter().zip(&cfg.level_weights) {
        let inter = inter_loss(batch, cfg.temperature)?;
        let intra = intra_loss(batch, cfg.alpha)?;
        value += lambda * (inter.value + cfg.beta * intra.value);
        grads.push(LossGrad {
            value: inter.value + cfg.beta * intra.value,
            grad_video: (inter.grad_video + intra.grad_video * cfg.beta) * lambda,
            grad_text: (inter.grad_text + intra.grad_text * cfg.beta) * lambda,
        });
    }
    Ok(TotalLoss { value, levels: grads })
}

/// Largest relative discrepancy between `analytic` and the central finite
/// difference `(f(x + ε e_i) - f(x - ε e_i)) / 2ε` over all coordinates.
///
/// Relative error per coordinate is `|a - n| / max(|a|, |n|, 1e-8)`.
/// A non-finite evaluation counts as infinite error.
pub fn grad_check<F>(f: F, x: &[f64], analytic: &[f64], eps: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(x.len(), analytic.len(), "gradient length must match the input");
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let up = f(&probe);
        probe[i] = x[i] - eps;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = if err.is_finite() { worst.max(err) } else { f64::INFINITY };
    }
    worst
}

fn flatten(parts: &[&Array2<f64>]) -> Vec<f64> {
    parts.iter().flat_map(|m| m.iter().copied()).collect()
}

fn unflatten(x: &[f64], count: usize, rows: usize, cols: usize) -> Vec<Array2<f64>> {
    x.chunks_exact(rows * cols)
        .take(count)
        .map(|c| Array2::from_shape_vec((rows, cols), c.to_vec()).expect("chunk size matches shape"))
        .collect()
}

fn rebatch(x: &[f64], rows: usize, cols: usize) -> Option<BatchFeatures> {
    let mut m = unflatten(x, 2, rows, cols);
    let text = m.pop()?;
    let video = m.pop()?;
    BatchFeatures::new(video, text).ok()
}

/// Finite-difference check of [`inter_loss`] over both feature matrices.
pub fn check_inter_loss(batch: &BatchFeatures, temperature: f64, eps: f64) -> Result<f64> {
    let lg = inter_loss(batch, temperature)?;
    let (b, d) = batch.video.dim();
    let f = |x: &[f64]| {
        rebatch(x, b, d)
            .and_then(|bt| inter_loss(&bt, temperature).ok())
            .map_or(f64::NAN, |l| l.value)
    };
    let x = flatten(&[&batch.video, &batch.text]);
    Ok(grad_check(f, &x, &flatten(&[&lg.grad_video, &lg.grad_text]), eps))
}

/// Finite-difference check of [`intra_loss`] over both feature matrices.
pub fn check_intra_loss(batch: &BatchFeatures, alpha: f64, eps: f64) -> Result<f64> {
    let lg = intra_loss(batch, alpha)?;
    let (b, d) = batch.video.dim();
    let f = |x: &[f64]| {
        rebatch(x, b, d).and_then(|bt| intra_loss(&bt, alpha).ok()).map_or(f64::NAN, |l| l.value)
    };
    let x = flatten(&[&batch.video, &batch.text]);
    Ok(grad_check(f, &x, &flatten(&[&lg.grad_video, &lg.grad_text]), eps))
}

/// Finite-difference check of [`total_loss`] over all six feature matrices.
pub fn check_total_loss(levels: &[BatchFeatures; 3], cfg: &LossConfig, eps: f64) -> Result<f64> {
    let total = total_loss(levels, cfg)?;
    let (b, d) = levels[0].video.dim();
    let f = |x: &[f64]| {
        let mats = unflatten(x, 6, b, d);
        let batch = |i: usize| BatchFeatures::new(mats[2 * i].clone(), mats[2 * i + 1].clone());
        match (batch(0), batch(1), batch(2)) {
            (Ok(a), Ok(bb), Ok(c)) => total_loss(&[a, bb, c], cfg).map_or(f64::NAN, |t| t.value),
            _ => f64::NAN,
        }
    };
    let x: Vec<f64> = levels.iter().flat_map(|l| flatten(&[&l.video, &l.text])).collect();
    let analytic: Vec<f64> =
        total.levels.iter().flat_map(|g| flatten(&[&g.grad_video, &g.grad_text])).collect();
    Ok(grad_check(f, &x, &analytic, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn eye2() -> Array2<f64> {
        array![[1.0, 0.0], [0.0, 1.0]]
    }

    #[test]
    fn inter_loss_identity_batch() {
        let batch = BatchFeatures::new(eye2(), eye2()).unwrap();
        let l = inter_loss(&batch, 1.0).unwrap();
        // each direction: -log(e / (e + 1)) = log(1 + e^-1)
        let per_dir = (1.0 + (-1.0f64).exp()).ln();
        assert!((per_dir - 0.31326).abs() < 1e-5);
        assert!((l.value - 2.0 * per_dir).abs() < 1e-12);
        assert!((l.value - 0.62652).abs() < 1e-5);
    }

    #[test]
    fn inter_loss_sharp_limit_vanishes() {
        let batch = BatchFeatures::new(eye2(), eye2()).unwrap();
        assert!(inter_loss(&batch, 1e-3).unwrap().value < 1e-12);
    }

    #[test]
    fn inter_loss_is_minus_mean_log_prob_of_positives() {
        let v = array![[0.6, 0.8], [1.0, 0.0], [0.0, -1.0]];
        let t = array![[0.8, 0.6], [0.0, 1.0], [-0.6, -0.8]];
        let tau = 0.5;
        let batch = BatchFeatures::new(v.clone(), t.clone()).unwrap();
        let b = 3;
        let s = |i: usize, j: usize| v.row(i).dot(&t.row(j)) / tau;
        let mut logp = 0.0;
        for i in 0..b {
            let row: f64 = (0..b).map(|j| s(i, j).exp()).sum();
            let col: f64 = (0..b).map(|j| s(j, i).exp()).sum();
            logp += (s(i, i).exp() / row).ln() + (s(i, i).exp() / col).ln();
        }
        let expected = -logp / b as f64;
        assert!((inter_loss(&batch, tau).unwrap().value - expected).abs() < 1e-12);
    }

    #[test]
    fn inter_loss_errors() {
        assert!(matches!(
            BatchFeatures::new(array![[1.0, 0.0]], array![[1.0, 0.0]]),
            Err(Error::BatchTooSmall(1))
        ));
        let batch = BatchFeatures::new(eye2(), eye2()).unwrap();
        assert!(inter_loss(&batch, 0.0).is_err());
        assert!(BatchFeatures::new(eye2(), array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).is_err());
    }

    #[test]
    fn pearson_examples() {
        assert!(pearson_distance(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap().abs() < 1e-12);
        assert!((pearson_distance(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);
        // centered (-1,0,1) and (-1,1,0): cov 1, norms sqrt2 * sqrt2
        assert!((pearson_distance(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(
            pearson_distance(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn intra_loss_examples() {
        // columns (1,-1,1,-1) and (1,1,-1,-1) are uncorrelated
        let f = array![[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]];
        let batch = BatchFeatures::new(f.clone(), f.clone()).unwrap();
        assert!(intra_loss(&batch, 0.05).unwrap().value.abs() < 1e-12);

        let x = array![[1.0], [2.0], [4.0]];
        let batch = BatchFeatures::new(x.clone(), -x).unwrap();
        assert!((intra_loss(&batch, 0.05).unwrap().value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn intra_loss_rejects_constant_channel() {
        let v = array![[1.0, 2.0], [1.0, 3.0], [1.0, 5.0]];
        let t = array![[0.0, 2.0], [1.0, 3.0], [2.0, 5.0]];
        let batch = BatchFeatures::new(v, t).unwrap();
        let err = intra_loss(&batch, 0.05).unwrap_err();
        assert!(matches!(err, Error::DegenerateChannel(s) if s == "video channel 0"));
    }

    fn lcg_batch(seed: u64, b: usize, d: usize) -> BatchFeatures {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let v = Array2::from_shape_fn((b, d), |_| next());
        let t = Array2::from_shape_fn((b, d), |_| next());
        BatchFeatures::new(v, t).unwrap()
    }

    /// Pearson by the textbook formula, channel by channel.
    fn pearson_by_definition(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
        let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
        let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
        cov / (sx * sy)
    }

    #[test]
    fn intra_loss_matches_channelwise_recomputation() {
        let batch = lcg_batch(7, 6, 3);
        let alpha = 0.05;
        let mut expected = 0.0;
        for i in 0..3 {
            let vi: Vec<f64> = batch.video().column(i).to_vec();
            for j in 0..3 {
                let tj: Vec<f64> = batch.text().column(j).to_vec();
                let r = pearson_by_definition(&vi, &tj);
                expected += if i == j { (1.0 - r).powi(2) } else { alpha * r * r };
            }
        }
        let got = intra_loss(&batch, alpha).unwrap().value;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        let m = pearson_matrix(&batch).unwrap();
        let v0: Vec<f64> = batch.video().column(0).to_vec();
        let t2: Vec<f64> = batch.text().column(2).to_vec();
        assert!((m[[0, 2]] - pearson_by_definition(&v0, &t2)).abs() < 1e-12);
    }

    #[test]
    fn total_loss_masking_and_homogeneity() {
        let levels = [lcg_batch(1, 4, 3), lcg_batch(2, 4, 3), lcg_batch(3, 4, 3)];
        let masked = LossConfig { beta: 0.0, level_weights: [1.0, 0.0, 0.0], ..Default::default() };
        let t = total_loss(&levels, &masked).unwrap();
        assert_eq!(t.value, inter_loss(&levels[0], masked.temperature).unwrap().value);

        let cfg = LossConfig::default();
        let doubled = LossConfig { level_weights: cfg.level_weights.map(|x| 2.0 * x), ..cfg.clone() };
        let a = total_loss(&levels, &cfg).unwrap().value;
        let b = total_loss(&levels, &doubled).unwrap().value;
        assert!((b - 2.0 * a).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn total_loss_assembles_components() {
        let levels = [lcg_batch(11, 5, 4), lcg_batch(12, 5, 4), lcg_batch(13, 5, 4)];
        let cfg = LossConfig::default();
        let mut expected = 0.0;
        for (l, lambda) in levels.iter().zip(cfg.level_weights) {
            let inter = inter_loss(l, cfg.temperature).unwrap().value;
            let intra = intra_loss(l, cfg.alpha).unwrap().value;
            expected += lambda * (inter + cfg.beta * intra);
        }
        assert!((total_loss(&levels, &cfg).unwrap().value - expected).abs() < 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let batch = lcg_batch(5, 8, 16).normalized_rows().unwrap();
        assert!(check_inter_loss(&batch, 0.05, 1e-5).unwrap() < 1e-4);
        assert!(check_intra_loss(&batch, 0.05, 1e-5).unwrap() < 1e-4);
        let levels = [1, 2, 3].map(|s| lcg_batch(s, 8, 16).normalized_rows().unwrap());
        let cfg = LossConfig { temperature: 0.05, ..LossConfig::default() };
        assert!(check_total_loss(&levels, &cfg, 1e-5).unwrap() < 1e-4);
    }

    #[test]
    fn checker_catches_corrupted_gradient() {
        let batch = lcg_batch(9, 8, 16).normalized_rows().unwrap();
        let lg = inter_loss(&batch, 0.05).unwrap();
        let x = flatten(&[batch.video(), batch.text()]);
        let mut analytic = flatten(&[&lg.grad_video, &lg.grad_text]);
        let idx = analytic
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap();
        analytic[idx] = 0.0;
        let f = |x: &[f64]| inter_loss(&rebatch(x, 8, 16).unwrap(), 0.05).unwrap().value;
        assert!(grad_check(f, &x, &analytic, 1e-6) > 1e-2);
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 3..20)
            .prop_filter("non-constant", |v| v.iter().any(|x| (x - v[0]).abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn pearson_affine_invariance(
            (x, y) in sample().prop_flat_map(|x| {
                let n = x.len();
                (Just(x), prop::collection::vec(-10.0f64..10.0, n))
            }),
            m1 in 0.1f64..10.0, m2 in 0.1f64..10.0,
            n1 in -5.0f64..5.0, n2 in -5.0f64..5.0,
            flip in any::<bool>(),
        ) {
            prop_assume!(y.iter().any(|v| (v - y[0]).abs() > 1e-3));
            let (m1, m2) = if flip { (-m1, -m2) } else { (m1, m2) };
            let base = pearson_distance(&x, &y).unwrap();
            let xs: Vec<f64> = x.iter().map(|v| m1 * v + n1).collect();
            let ys: Vec<f64> = y.iter().map(|v| m2 * v + n2).collect();
            prop_assert!((pearson_distance(&xs, &ys).unwrap() - base).abs() < 1e-6);
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            prop_assert!((pearson_distance(&x, &neg).unwrap() - (2.0 - base)).abs() < 1e-6);
            prop_assert!((0.0..=2.0).contains(&base));
            prop_assert!(pearson_distance(&x, &x).unwrap().abs() < 1e-9);
        }
    }
}
