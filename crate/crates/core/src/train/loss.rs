use crate::autodiff::{Tape, Tensor, Var};
use crate::data::TokenId;
use crate::error::{Error, Result};

fn check_rows(op: &'static str, log_probs: &Tensor, gold: &[TokenId], mask: &[bool]) -> Result<()> {
    if log_probs.rank() != 2 || log_probs.rows() != gold.len() || gold.len() != mask.len() {
        return Err(Error::shape(
            op,
            format!(
                "log-probs {:?} for {} targets and {} mask entries",
                log_probs.shape(),
                gold.len(),
                mask.len()
            ),
        ));
    }
    let v = log_probs.last_dim();
    if let Some(&id) = gold
        .iter()
        .zip(mask)
        .find(|(&g, &m)| m && g as usize >= v)
        .map(|(g, _)| g)
    {
        return Err(Error::TokenOutOfRange { id, vocab_size: v });
    }
    Ok(())
}

/// Mean `-log p(gold)` over unmasked rows; zero when every row is masked.
pub fn nll_loss(tape: &mut Tape, log_probs: Var, gold: &[TokenId], mask: &[bool]) -> Result<Var> {
    let lp = tape.value(log_probs);
    check_rows("nll_loss", lp, gold, mask)?;
    let v = lp.last_dim();
    let n = mask.iter().filter(|&&m| m).count();
    let mut w = vec![0.0; gold.len() * v];
    if n > 0 {
        for (r, (&g, &m)) in gold.iter().zip(mask).enumerate() {
            if m {
                w[r * v + g as usize] = -1.0 / n as f64;
            }
        }
    }
    let w = tape.constant(Tensor::new(vec![gold.len(), v], w)?)?;
    let picked = tape.mul(log_probs, w)?;
    tape.sum(picked)
}

/// Value of [`nll_loss`] without recording anything.
pub fn nll_value(log_probs: &Tensor, gold: &[TokenId], mask: &[bool]) -> Result<f64> {
    check_rows("nll_value", log_probs, gold, mask)?;
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = gold
        .iter()
        .zip(mask)
        .enumerate()
        .filter(|(_, (_, &m))| m)
        .map(|(r, (&g, _))| -log_probs.row(r)[g as usize])
        .sum();
    Ok(total / n as f64)
}

/// Mean over unmasked rows of `KL(p_clean || p_perturbed)`. The clean
/// log-probabilities enter as a constant, so gradients reach the model only
/// through `perturbed`. Entries with `p_clean = 0` contribute nothing.
pub fn vat_loss(
    tape: &mut Tape,
    clean_log_probs: &Tensor,
    perturbed: Var,
    mask: &[bool],
) -> Result<Var> {
    let pert = tape.value(perturbed);
    if pert.shape() != clean_log_probs.shape() || pert.rank() != 2 || pert.rows() != mask.len() {
        return Err(Error::shape(
            "vat_loss",
            format!(
                "clean {:?}, perturbed {:?}, {} mask entries",
                clean_log_probs.shape(),
                pert.shape(),
                mask.len()
            ),
        ));
    }
    let v = pert.last_dim();
    let n = mask.iter().filter(|&&m| m).count();
    let len = clean_log_probs.numel();
    let mut weight = vec![0.0; len];
    let mut log_clean = vec![0.0; len];
    if n > 0 {
        for (r, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            for j in 0..v {
                let l = clean_log_probs.row(r)[j];
                let p = l.exp();
                if p > 0.0 {
                    weight[r * v + j] = p / n as f64;
                    log_clean[r * v + j] = l;
                }
            }
        }
    }
    let shape = clean_log_probs.shape().to_vec();
    let neg = tape.scale(perturbed, -1.0)?;
    let lc = tape.constant(Tensor::new(shape.clone(), log_clean)?)?;
    let diff = tape.add(lc, neg)?;
    let w = tape.constant(Tensor::new(shape, weight)?)?;
    let terms = tape.mul(diff, w)?;
    tape.sum(terms)
}
