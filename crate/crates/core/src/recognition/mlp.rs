//! Single-hidden-layer perceptron with logistic activations trained by
//! online backpropagation of the squared error.

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;

use super::bits::BitVector;
use crate::error::{EcoError, Result};

/// Logistic activation `1 / (1 + e^-x)`.
pub fn sigmoid<T: Float>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Hidden width for a given input width: `ceil(1.5 * input)`.
pub fn hidden_width_for(input_width: usize) -> usize {
    (input_width * 3).div_ceil(2)
}

/// Dense two-layer network. `w_in` is stored input-major: row `i` holds the
/// weights from input `i` to every hidden unit, so a sparse 0/1 input sums
/// whole rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    input_width: usize,
    hidden_width: usize,
    w_in: Vec<T>,
    b_hidden: Vec<T>,
    w_out: Vec<T>,
    b_out: T,
}

/// Full gradient of the loss with respect to every parameter, laid out like
/// [`Mlp`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGradient<T> {
    pub w_in: Vec<T>,
    pub b_hidden: Vec<T>,
    pub w_out: Vec<T>,
    pub b_out: T,
}

/// Training example as seen by the network: 0/1 input plus target in {0, 1}.
pub type Sample<'a> = (&'a BitVector, bool);

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    /// Mean squared error before each epoch, then after the last one.
    pub mse: Vec<f64>,
    pub converged: bool,
}

impl<T: Float> Mlp<T> {
    pub fn zeros(input_width: usize, hidden_width: usize) -> Self {
        Mlp {
            input_width,
            hidden_width,
            w_in: vec![T::zero(); input_width * hidden_width],
            b_hidden: vec![T::zero(); hidden_width],
            w_out: vec![T::zero(); hidden_width],
            b_out: T::zero(),
        }
    }

    /// Weights and biases uniform in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(input_width: usize, hidden_width: usize, scale: f64, rng: &mut R) -> Self {
        let mut draw = || T::from(rng.gen_range(-scale..=scale)).unwrap();
        let w_in = (0..input_width * hidden_width).map(|_| draw()).collect();
        let b_hidden = (0..hidden_width).map(|_| draw()).collect();
        let w_out = (0..hidden_width).map(|_| draw()).collect();
        let b_out = draw();
        Mlp { input_width, hidden_width, w_in, b_hidden, w_out, b_out }
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden_width
    }

    pub fn parameter_count(&self) -> usize {
        self.w_in.len() + self.b_hidden.len() + self.w_out.len() + 1
    }

    pub fn all_finite(&self) -> bool {
        self.w_in
            .iter()
            .chain(&self.b_hidden)
            .chain(&self.w_out)
            .chain(std::iter::once(&self.b_out))
            .all(|w| w.is_finite())
    }

    /// Flat parameter access in the order `w_in, b_hidden, w_out, b_out`.
    pub fn param(&self, k: usize) -> T {
        let (a, b, c) = (self.w_in.len(), self.b_hidden.len(), self.w_out.len());
        if k < a {
            self.w_in[k]
        } else if k < a + b {
            self.b_hidden[k - a]
        } else if k < a + b + c {
            self.w_out[k - a - b]
        } else {
            self.b_out
        }
    }

    pub fn param_mut(&mut self, k: usize) -> &mut T {
        let (a, b, c) = (self.w_in.len(), self.b_hidden.len(), self.w_out.len());
        if k < a {
            &mut self.w_in[k]
        } else if k < a + b {
            &mut self.b_hidden[k - a]
        } else if k < a + b + c {
            &mut self.w_out[k - a - b]
        } else {
            &mut self.b_out
        }
    }

    fn check_width(&self, x: &BitVector) -> Result<()> {
        if x.len() != self.input_width {
            return Err(EcoError::WidthMismatch { expected: self.input_width, actual: x.len() });
        }
        Ok(())
    }

    /// Fills `hidden` with hidden activations and returns the output.
    fn forward_into(&self, x: &BitVector, hidden: &mut [T]) -> T {
        let h = self.hidden_width;
        hidden.copy_from_slice(&self.b_hidden);
        for i in x.ones() {
            let row = &self.w_in[i * h..(i + 1) * h];
            for (acc, &w) in hidden.iter_mut().zip(row) {
                *acc = *acc + w;
            }
        }
        let mut out = self.b_out;
        for (a, &w) in hidden.iter_mut().zip(&self.w_out) {
            *a = sigmoid(*a);
            out = out + *a * w;
        }
        sigmoid(out)
    }

    pub fn forward(&self, x: &BitVector) -> Result<T> {
        self.check_width(x)?;
        let mut hidden = vec![T::zero(); self.hidden_width];
        Ok(self.forward_into(x, &mut hidden))
    }

    /// Output and hidden error terms for the per-example loss
    /// `0.5 * (y - t)^2`.
    fn deltas(&self, hidden: &[T], out: T, target: T, delta_hidden: &mut [T]) -> T {
        let delta_out = (out - target) * out * (T::one() - out);
        for ((d, &a), &w) in delta_hidden.iter_mut().zip(hidden).zip(&self.w_out) {
            *d = delta_out * w * a * (T::one() - a);
        }
        delta_out
    }

    /// Mean over the set of `0.5 * (y - t)^2`.
    pub fn loss(&self, set: &[Sample<'_>]) -> Result<T> {
        let mut total = T::zero();
        for &(x, label) in set {
            let y = self.forward(x)?;
            let e = y - target_of(label);
            total = total + e * e;
        }
        Ok(total / T::from(2 * set.len().max(1)).unwrap())
    }

    /// Mean squared error `mean((y - t)^2)`.
    pub fn mse(&self, set: &[Sample<'_>]) -> Result<f64> {
        Ok(self.loss(set)?.to_f64().unwrap() * 2.0)
    }

    /// Backpropagated gradient of [`Mlp::loss`].
    pub fn gradient(&self, set: &[Sample<'_>]) -> Result<MlpGradient<T>> {
        let h = self.hidden_width;
        let mut g = MlpGradient {
            w_in: vec![T::zero(); self.w_in.len()],
            b_hidden: vec![T::zero(); h],
            w_out: vec![T::zero(); h],
            b_out: T::zero(),
        };
        let scale = T::one() / T::from(set.len().max(1)).unwrap();
        let mut hidden = vec![T::zero(); h];
        let mut dh = vec![T::zero(); h];
        for &(x, label) in set {
            self.check_width(x)?;
            let out = self.forward_into(x, &mut hidden);
            let d_out = self.deltas(&hidden, out, target_of(label), &mut dh);
            g.b_out = g.b_out + d_out * scale;
            for j in 0..h {
                g.w_out[j] = g.w_out[j] + d_out * hidden[j] * scale;
                g.b_hidden[j] = g.b_hidden[j] + dh[j] * scale;
            }
            for i in x.ones() {
                for j in 0..h {
                    g.w_in[i * h + j] = g.w_in[i * h + j] + dh[j] * scale;
                }
            }
        }
        Ok(g)
    }

    /// One online update on a single example; returns the pre-update output.
    pub fn train_example(&mut self, x: &BitVector, label: bool, lr: T, hidden: &mut [T], dh: &mut [T]) -> Result<T> {
        self.check_width(x)?;
        let h = self.hidden_width;
        let out = self.forward_into(x, hidden);
        let d_out = self.deltas(hidden, out, target_of(label), dh);
        self.b_out = self.b_out - lr * d_out;
        for j in 0..h {
            self.w_out[j] = self.w_out[j] - lr * d_out * hidden[j];
            self.b_hidden[j] = self.b_hidden[j] - lr * dh[j];
        }
        for i in x.ones() {
            let row = &mut self.w_in[i * h..(i + 1) * h];
            for (w, &d) in row.iter_mut().zip(dh.iter()) {
                *w = *w - lr * d;
            }
        }
        Ok(out)
    }

    /// True when every example sits on the right side of `margin`: positives
    /// at or above `1 - margin`, negatives at or below `margin`.
    pub fn fits(&self, set: &[Sample<'_>], margin: f64) -> Result<bool> {
        for &(x, label) in set {
            let y = self.forward(x)?.to_f64().unwrap();
            let ok = if label { y >= 1.0 - margin } else { y <= margin };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Online backpropagation over shuffled epochs, stopping early once the
    /// set fits at `margin`.
    ///
    /// The per-epoch error in the report is measured on the outputs seen
    /// during the epoch (each example just before its own update). The early
    /// stop is confirmed with an exact pass over the current weights.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        set: &[Sample<'_>],
        epochs: usize,
        learning_rate: f64,
        margin: f64,
        rng: &mut R,
    ) -> Result<TrainReport> {
        if set.is_empty() {
            return Err(EcoError::EmptyTrainingSet);
        }
        let lr = T::from(learning_rate).unwrap();
        let mut hidden = vec![T::zero(); self.hidden_width];
        let mut dh = vec![T::zero(); self.hidden_width];
        let mut order: Vec<usize> = (0..set.len()).collect();
        let mut mse = Vec::with_capacity(epochs + 1);
        if self.fits(set, margin)? {
            mse.push(self.mse(set)?);
            return Ok(TrainReport { epochs: 0, mse, converged: true });
        }
        let mut converged = false;
        let mut run = 0;
        while run < epochs {
            order.shuffle(rng);
            let mut sq = 0.0;
            let mut all_fit = true;
            for &k in &order {
                let (x, label) = set[k];
                let y = self.train_example(x, label, lr, &mut hidden, &mut dh)?.to_f64().unwrap();
                let t = if label { 1.0 } else { 0.0 };
                sq += (y - t) * (y - t);
                all_fit &= if label { y >= 1.0 - margin } else { y <= margin };
            }
            mse.push(sq / set.len() as f64);
            run += 1;
            if all_fit && self.fits(set, margin)? {
                converged = true;
                break;
            }
        }
        mse.push(self.mse(set)?);
        if !converged {
            converged = self.fits(set, margin)?;
        }
        Ok(TrainReport { epochs: run, mse, converged })
    }
}

fn target_of<T: Float>(label: bool) -> T {
    if label {
        T::one()
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> BitVector {
        let bools: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        BitVector::from_bools(&bools)
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!((sigmoid(10.0f64) - 0.9999546).abs() < 1e-7);
        for &x in &[-7.5, -1.0, 0.3, 4.0] {
            assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
        }
        assert!(sigmoid(-30.0f64) > 0.0 && sigmoid(30.0f64) <= 1.0);
    }

    #[test]
    fn hidden_width_rounds_up() {
        assert_eq!(hidden_width_for(576), 864);
        assert_eq!(hidden_width_for(3), 5);
    }

    #[test]
    fn zero_network_outputs_half() {
        let m = Mlp::<f64>::zeros(8, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5 {
            assert_eq!(m.forward(&random_bits(&mut rng, 8)).unwrap(), 0.5);
        }
    }

    #[test]
    fn width_mismatch_is_error() {
        let m = Mlp::<f64>::zeros(8, 12);
        assert!(matches!(
            m.forward(&BitVector::zeros(9)),
            Err(EcoError::WidthMismatch { expected: 8, actual: 9 })
        ));
    }

    #[test]
    fn forward_is_deterministic() {
        let a = Mlp::<f32>::random(16, 24, 0.5, &mut ChaCha8Rng::seed_from_u64(3));
        let b = Mlp::<f32>::random(16, 24, 0.5, &mut ChaCha8Rng::seed_from_u64(3));
        let x = random_bits(&mut ChaCha8Rng::seed_from_u64(4), 16);
        assert_eq!(a.forward(&x).unwrap().to_bits(), b.forward(&x).unwrap().to_bits());
    }

    #[test]
    fn zero_learning_rate_leaves_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = Mlp::<f64>::random(10, 15, 0.5, &mut rng);
        let before = m.clone();
        let xs: Vec<BitVector> = (0..4).map(|_| random_bits(&mut rng, 10)).collect();
        let set: Vec<Sample> = xs.iter().enumerate().map(|(i, x)| (x, i % 2 == 0)).collect();
        m.train(&set, 2, 0.0, 0.0, &mut rng).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn empty_set_rejected() {
        let mut m = Mlp::<f64>::zeros(4, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(m.train(&[], 5, 0.3, 0.1, &mut rng).unwrap_err(), EcoError::EmptyTrainingSet);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = Mlp::<f64>::random(6, 9, 0.5, &mut rng);
        let xs: Vec<BitVector> = (0..4).map(|_| random_bits(&mut rng, 6)).collect();
        let set: Vec<Sample> = xs.iter().enumerate().map(|(i, x)| (x, i % 2 == 1)).collect();
        let g = m.gradient(&set).unwrap();
        let flat = |g: &MlpGradient<f64>, k: usize| {
            let (a, b, c) = (g.w_in.len(), g.b_hidden.len(), g.w_out.len());
            if k < a {
                g.w_in[k]
            } else if k < a + b {
                g.b_hidden[k - a]
            } else if k < a + b + c {
                g.w_out[k - a - b]
            } else {
                g.b_out
            }
        };
        let eps = 1e-5;
        for k in 0..m.parameter_count() {
            let mut plus = m.clone();
            *plus.param_mut(k) += eps;
            let mut minus = m.clone();
            *minus.param_mut(k) -= eps;
            let numeric = (plus.loss(&set).unwrap() - minus.loss(&set).unwrap()) / (2.0 * eps);
            let analytic = flat(&g, k);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / denom <= 1e-4,
                "param {k}: analytic {analytic}, numeric {numeric}"
            );
        }
    }

    #[test]
    fn learns_xor_like_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs = [
            BitVector::from_bools(&[false, false]),
            BitVector::from_bools(&[false, true]),
            BitVector::from_bools(&[true, false]),
            BitVector::from_bools(&[true, true]),
        ];
        let set: Vec<Sample> = vec![(&xs[0], false), (&xs[1], true), (&xs[2], true), (&xs[3], false)];
        let mut m = Mlp::<f64>::random(2, 3, 0.5, &mut rng);
        let report = m.train(&set, 20_000, 0.5, 0.2, &mut rng).unwrap();
        assert!(report.converged, "{:?}", report.mse.last());
    }
}
