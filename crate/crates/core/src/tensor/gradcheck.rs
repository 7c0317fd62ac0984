use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Number of coordinates to check, drawn uniformly without replacement
    /// across all parameters. `None` checks every coordinate.
    pub samples: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            eps: 1e-4,
            samples: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter index, flat coordinate)` attaining the maximum.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

/// Compares tape gradients of a scalar function against central differences.
///
/// `f` receives a fresh tape and the parameters bound as trainable leaves and
/// must return a scalar. The error per coordinate is
/// `|analytic − numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn grad_check<F>(mut f: F, params: &[Tensor], opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Contract("grad_check parameters must be finite".into()));
    }

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| tape.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    drop(tape);

    let coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(pi, p)| (0..p.len()).map(move |i| (pi, i)))
        .collect();
    let chosen: Vec<(usize, usize)> = match opts.samples {
        Some(n) if n < coords.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut picked: Vec<usize> = sample(&mut rng, coords.len(), n).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| coords[i]).collect()
        }
        _ => coords,
    };

    let mut eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = perturbed.iter().map(|p| tape.param(p.clone())).collect();
        let out = f(&mut tape, &vars)?;
        tape.value(out).item()
    };

    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (pi, i) in chosen {
        let orig = work[pi].data()[i];
        work[pi].data_mut()[i] = orig + opts.eps;
        let plus = eval(&work)?;
        work[pi].data_mut()[i] = orig - opts.eps;
        let minus = eval(&work)?;
        work[pi].data_mut()[i] = orig;

        let numeric = (plus - minus) / (2.0 * opts.eps);
        let a = analytic[pi].data()[i];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((pi, i));
        }
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let x = Tensor::vector(vec![0.3, -1.2, 4.0]);
        let r = grad_check(|t, p| Ok(t.sum(p[0])), &[x], &GradCheckOptions::default()).unwrap();
        assert!(r.max_rel_error < 1e-10, "{r:?}");
        assert_eq!(r.checked, 3);
    }

    #[test]
    fn tanh_at_zero() {
        let x = Tensor::zeros(&[4]);
        let r = grad_check(
            |t, p| {
                let y = t.tanh(p[0]);
                Ok(t.sum(y))
            },
            &[x],
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(r.max_rel_error < 1e-7, "{r:?}");
    }

    #[test]
    fn sampling_limits_checked_coordinates() {
        let x = Tensor::ones(&[10, 10]);
        let opts = GradCheckOptions {
            samples: Some(7),
            ..Default::default()
        };
        let r = grad_check(|t, p| Ok(t.sum(p[0])), &[x], &opts).unwrap();
        assert_eq!(r.checked, 7);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // relu at exactly 0 uses the right-hand derivative 0 while the central
        // difference sees slope 1/2, so the check must report a large error.
        let x = Tensor::zeros(&[1]);
        let r = grad_check(
            |t, p| {
                let y = t.relu(p[0]);
                Ok(t.sum(y))
            },
            &[x],
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(r.max_rel_error > 0.5);
    }
}
