use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::losses::LossError;
use crate::numerics::{Graph, Var};
use crate::scalar::Scalar;
use crate::signal::{AudioBuffer, MelFilterbank};
use crate::signal::mel::DEFAULT_N_MELS;

/// Mel window lengths; the hop of each scale is an eighth of its window.
pub const MEL_WINDOWS: [usize; 7] = [32, 64, 128, 256, 512, 1024, 2048];
/// Floor added before the logarithm of mel magnitudes.
pub const LOG_FLOOR: f64 = 1e-5;

/// Mel windows usable on a signal of `len` samples.
pub fn mel_scales(len: usize) -> Vec<usize> {
    MEL_WINDOWS.iter().copied().filter(|&w| w <= len).collect()
}

type BankCache = Mutex<HashMap<(usize, u32), Arc<Vec<f64>>>>;

pub(crate) fn mel_bank<T: Scalar>(window_length: usize, sample_rate: u32) -> Arc<Vec<T>> {
    static CACHE: OnceLock<BankCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let bank = {
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        map.entry((window_length, sample_rate))
            .or_insert_with(|| Arc::new(MelFilterbank::<f64>::new(DEFAULT_N_MELS, window_length, sample_rate).weights))
            .clone()
    };
    Arc::new(bank.iter().map(|&v| T::of(v)).collect())
}

fn check_pair<T: Scalar>(x: &AudioBuffer<T>, x_hat: &AudioBuffer<T>) -> Result<(), LossError> {
    if x.len() != x_hat.len() {
        return Err(LossError::LengthMismatch(x.len(), x_hat.len()));
    }
    if x.sample_rate != x_hat.sample_rate {
        return Err(LossError::SampleRateMismatch(x.sample_rate, x_hat.sample_rate));
    }
    Ok(())
}

/// Mean absolute sample difference between two equally shaped nodes.
pub fn time_l1_graph<T: Scalar>(g: &mut Graph<T>, x: Var, x_hat: Var) -> Result<Var, LossError> {
    let (a, b) = (g.shape(x).len(), g.shape(x_hat).len());
    if a != b {
        return Err(LossError::LengthMismatch(a, b));
    }
    let x = g.reshape(x, 1, a);
    let x_hat = g.reshape(x_hat, 1, b);
    let d = g.sub(x, x_hat);
    let d = g.abs(d);
    Ok(g.mean(d))
}

/// Mean absolute sample difference.
pub fn time_l1<T: Scalar>(x: &AudioBuffer<T>, x_hat: &AudioBuffer<T>) -> Result<T, LossError> {
    check_pair(x, x_hat)?;
    if x.is_empty() {
        return Err(LossError::SignalTooShort { len: 0, min: 1 });
    }
    let mut g = Graph::new();
    let a = g.constant(x.samples.clone(), 1, x.len());
    let b = g.constant(x_hat.samples.clone(), 1, x_hat.len());
    let loss = time_l1_graph(&mut g, a, b)?;
    Ok(g.scalar(loss))
}

fn log_mel<T: Scalar>(g: &mut Graph<T>, x: Var, window: usize, sample_rate: u32) -> Result<Var, LossError> {
    let mag = g.stft_magnitude(x, window, window / 8)?;
    let mel = g.matmul_const(mag, mel_bank(window, sample_rate), DEFAULT_N_MELS);
    let mel = g.add_scalar(mel, T::of(LOG_FLOOR));
    Ok(g.log(mel))
}

/// Multi-scale log-mel loss: per scale, the mean absolute plus the root mean
/// square difference of `log(1e-5 + mel)`, averaged over scales.
pub fn multiscale_mel_loss_graph<T: Scalar>(
    g: &mut Graph<T>,
    x: Var,
    x_hat: Var,
    sample_rate: u32,
) -> Result<Var, LossError> {
    let (a, b) = (g.shape(x).len(), g.shape(x_hat).len());
    if a != b {
        return Err(LossError::LengthMismatch(a, b));
    }
    let scales = mel_scales(a);
    if scales.is_empty() {
        return Err(LossError::SignalTooShort { len: a, min: MEL_WINDOWS[0] });
    }
    let mut terms = Vec::with_capacity(scales.len());
    for &w in &scales {
        let mx = log_mel(g, x, w, sample_rate)?;
        let my = log_mel(g, x_hat, w, sample_rate)?;
        let d = g.sub(mx, my);
        let ad = g.abs(d);
        let l1 = g.mean(ad);
        let sq = g.square(d);
        let msq = g.mean(sq);
        // sqrt has no derivative at 0; use 0 there
        let l2 = if g.scalar(msq) > T::zero() { g.sqrt(msq) } else { g.scale(msq, T::zero()) };
        terms.push(g.add(l1, l2));
    }
    let total = g.add_all(&terms).expect("at least one scale");
    Ok(g.scale(total, T::one() / T::of_usize(scales.len())))
}

pub fn multiscale_mel_loss<T: Scalar>(x: &AudioBuffer<T>, x_hat: &AudioBuffer<T>) -> Result<T, LossError> {
    check_pair(x, x_hat)?;
    let mut g = Graph::new();
    let a = g.constant(x.samples.clone(), 1, x.len());
    let b = g.constant(x_hat.samples.clone(), 1, x_hat.len());
    let loss = multiscale_mel_loss_graph(&mut g, a, b, x.sample_rate)?;
    Ok(g.scalar(loss))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buf(samples: Vec<f64>) -> AudioBuffer<f64> {
        AudioBuffer::new(samples, 8000).unwrap()
    }

    #[test]
    fn time_l1_examples() {
        assert_eq!(time_l1(&buf(vec![1.0, 1.0]), &buf(vec![0.0, 0.0])).unwrap(), 1.0);
        assert_eq!(time_l1(&buf(vec![0.3, -0.2]), &buf(vec![0.3, -0.2])).unwrap(), 0.0);
        assert!(matches!(time_l1(&buf(vec![0.0]), &buf(vec![0.0, 0.0])), Err(LossError::LengthMismatch(1, 2))));
    }

    #[test]
    fn mel_loss_zero_on_identical_and_positive_otherwise() {
        let x: Vec<f64> = (0..300).map(|i| (i as f64 * 0.3).sin() * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 0.7 + 0.01).collect();
        assert_eq!(multiscale_mel_loss(&buf(x.clone()), &buf(x.clone())).unwrap(), 0.0);
        assert!(multiscale_mel_loss(&buf(x), &buf(y)).unwrap() > 0.0);
    }

    #[test]
    fn identical_inputs_backprop_cleanly() {
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.9).cos()).collect();
        let mut g = Graph::new();
        let a = g.constant(x.clone(), 1, 64);
        let b = g.param(x, 1, 64);
        let loss = multiscale_mel_loss_graph(&mut g, a, b, 8000).unwrap();
        g.backward(loss).unwrap();
        assert!(g.grad(b).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn too_short_signal() {
        let x = buf(vec![0.1; 20]);
        assert!(matches!(multiscale_mel_loss(&x, &x), Err(LossError::SignalTooShort { len: 20, min: 32 })));
        assert_eq!(mel_scales(300), vec![32, 64, 128, 256]);
    }
}
