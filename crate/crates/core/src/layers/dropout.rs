use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Inverted dropout: in training, zero each element with probability `rate`
/// and scale survivors by `1/(1−rate)`. Identity at inference.
pub fn dropout<R: Rng>(tape: &mut Tape, x: Var, rate: f64, mode: DropoutMode, rng: &mut R) -> Result<Var> {
    check_rate(rate)?;
    if mode == DropoutMode::Infer || rate == 0.0 {
        return Ok(x);
    }
    let mask = dropout_mask(tape.value(x).shape(), rate, rng)?;
    let mask = tape.constant(mask);
    tape.mul(x, mask)
}

pub fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    Ok(())
}

/// Whether a forward pass is training (with its dropout stream) or inferring.
pub enum ForwardMode<'a> {
    Infer,
    Train(&'a mut ChaCha8Rng),
}

impl ForwardMode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, ForwardMode::Train(_))
    }

    pub fn dropout(&mut self, tape: &mut Tape, x: Var, rate: f64) -> Result<Var> {
        match self {
            ForwardMode::Infer => {
                check_rate(rate)?;
                Ok(x)
            }
            ForwardMode::Train(rng) => dropout(tape, x, rate, DropoutMode::Train, &mut **rng),
        }
    }
}

/// Draws an inverted-dropout mask: `0` with probability `rate`, else `1/(1−rate)`.
pub fn dropout_mask<R: Rng>(shape: &[usize], rate: f64, rng: &mut R) -> Result<Tensor> {
    check_rate(rate)?;
    let keep = 1.0 / (1.0 - rate);
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    Tensor::new(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rate_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, -2.0, 3.0]));
        for mode in [DropoutMode::Train, DropoutMode::Infer] {
            let y = dropout(&mut tape, x, 0.0, mode, &mut rng).unwrap();
            assert_eq!(tape.value(y), tape.value(x));
        }
    }

    #[test]
    fn infer_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, -2.0, 3.0]));
        let y = dropout(&mut tape, x, 0.4, DropoutMode::Infer, &mut rng).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn train_zero_fraction_matches_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::ones(&[100_000]));
        let y = dropout(&mut tape, x, 0.4, DropoutMode::Train, &mut rng).unwrap();
        let v = tape.value(y);
        let zeros = v.data().iter().filter(|&&e| e == 0.0).count() as f64 / 1e5;
        assert!((zeros - 0.4).abs() < 0.01, "zero fraction {zeros}");
        let survivor = v.data().iter().find(|&&e| e != 0.0).unwrap();
        assert!((survivor - 1.0 / 0.6).abs() < 1e-12);
    }

    #[test]
    fn rate_one_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::ones(&[2]));
        assert!(matches!(
            dropout(&mut tape, x, 1.0, DropoutMode::Train, &mut rng),
            Err(Error::Config(_))
        ));
        assert!(ForwardMode::Infer.dropout(&mut tape, x, 1.5).is_err());
    }
}
