use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{EvalError, Result};

/// Share of logs whose predicted group has exactly the same members as their
/// ground-truth group.
pub fn grouping_accuracy<P, T>(predicted: &[P], truth: &[T]) -> Result<f64>
where
    P: Hash + Eq,
    T: Hash + Eq,
{
    if predicted.len() != truth.len() {
        return Err(EvalError::InvalidInput(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(EvalError::InvalidInput("no logs to score".into()));
    }
    let mut truth_size: HashMap<&T, usize> = HashMap::new();
    for t in truth {
        *truth_size.entry(t).or_default() += 1;
    }
    // Per predicted group: its size and its single truth label, if it has one.
    let mut groups: HashMap<&P, (usize, Option<&T>, bool)> = HashMap::new();
    for (p, t) in predicted.iter().zip(truth) {
        let g = groups.entry(p).or_insert((0, Some(t), true));
        g.0 += 1;
        if g.1 != Some(t) {
            g.2 = false;
        }
    }
    let correct: usize = groups
        .values()
        .filter(|(size, label, pure)| *pure && label.is_some_and(|l| truth_size[l] == *size))
        .map(|(size, _, _)| size)
        .sum();
    Ok(correct as f64 / predicted.len() as f64)
}
