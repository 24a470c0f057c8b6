use super::{Tape, Tensor, Var};
use crate::error::Result;

/// Compares the tape gradient of a scalar function against central
/// differences. Returns the largest per-coordinate relative error
/// `|analytic - numeric| / (|analytic| + |numeric| + 1e-12)`.
pub fn finite_difference_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    assert!(h > 0.0, "step size must be positive");
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone())?;
    let loss = f(&mut tape, xv)?;
    let analytic = tape.backward(loss)?.get(&tape, xv);

    let eval = |point: Tensor| -> Result<f64> {
        let mut tape = Tape::no_grad();
        let v = tape.leaf(point)?;
        let out = f(&mut tape, v)?;
        Ok(tape.value(out).item())
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * h);
        let a = analytic.data()[i];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs() + 1e-12);
        worst = worst.max(err);
    }
    Ok(worst)
}
