use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

/// Compares reverse-mode gradients of `f` against central differences.
///
/// `f` receives a fresh tape and one gradient-requiring leaf per entry of
/// `params`, and must return a scalar. The result is the maximum over all
/// parameter entries of `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
pub fn grad_check<F>(f: F, params: &[Tensor], perturbation: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    grad_check_with(f, params, perturbation, |_| {})
}

/// [`grad_check`] with a hook to configure each analytic tape, e.g. for
/// fault injection.
pub fn grad_check_with<F, S>(f: F, params: &[Tensor], perturbation: f64, setup: S) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    S: Fn(&mut Tape),
{
    if perturbation <= 0.0 || !perturbation.is_finite() {
        return Err(Error::Contract(format!(
            "perturbation must be positive, got {perturbation}"
        )));
    }
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.leaf(v.clone(), true)).collect();
        let out = f(&mut tape, &vars)?;
        let value = tape.value(out).item();
        if !value.is_finite() {
            return Err(Error::Numeric(format!("function value {value} is not finite")));
        }
        Ok(value)
    };

    let mut tape = Tape::new();
    setup(&mut tape);
    let vars: Vec<Var> = params.iter().map(|v| tape.leaf(v.clone(), true)).collect();
    let out = f(&mut tape, &vars)?;
    if !tape.value(out).item().is_finite() {
        return Err(Error::Numeric("function value is not finite".into()));
    }
    tape.backward(out)?;

    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for (i, &v) in vars.iter().enumerate() {
        let analytic = tape.grad(v).cloned();
        for k in 0..params[i].len() {
            let a = analytic.as_ref().map_or(0.0, |g| g.data()[k]);
            let orig = work[i].data()[k];
            work[i].data_mut()[k] = orig + perturbation;
            let plus = eval(&work)?;
            work[i].data_mut()[k] = orig - perturbation;
            let minus = eval(&work)?;
            work[i].data_mut()[k] = orig;
            let n = (plus - minus) / (2.0 * perturbation);
            let err = (a - n).abs() / 1f64.max(a.abs()).max(n.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
