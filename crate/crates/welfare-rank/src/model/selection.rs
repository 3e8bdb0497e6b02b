//! Top-share selection on weighted atoms.

use crate::error::{Error, Result};

/// One atom retained by a top-share selection, with the (possibly
/// fractional) weight it contributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SelectedAtom {
    pub index: usize,
    pub weight: f64,
}

/// Selects the top `s` probability mass by score. Atoms are taken in
/// descending score order, ties broken by ascending index; the boundary
/// atom is included fractionally so the selected weights sum to exactly
/// `s`. This is the "top s fraction" semantics of a strict quantile
/// threshold on an atomic distribution.
pub(crate) fn top_share(weights: &[f64], scores: &[f64], s: f64) -> Result<Vec<SelectedAtom>> {
    if weights.len() != scores.len() {
        return Err(Error::domain(format!(
            "selection needs one score per atom: {} atoms, {} scores",
            weights.len(),
            scores.len()
        )));
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain(format!("selection share must be in (0, 1], got {s}")));
    }
    if let Some(bad) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("selection scores must be finite, got {bad}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut selected = Vec::new();
    let mut taken = 0.0;
    for idx in order {
        let remaining = s - taken;
        if remaining <= 0.0 {
            break;
        }
        let take = weights[idx].min(remaining);
        if take > 0.0 {
            selected.push(SelectedAtom { index: idx, weight: take });
            taken += take;
        }
    }
    // Weights sum to one and s <= 1, so a shortfall beyond rounding means
    // the distribution carries no usable mass.
    if selected.is_empty() || taken < s - 1e-9 {
        return Err(Error::domain(format!(
            "degenerate selection: requested mass {s}, available {taken}"
        )));
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn takes_highest_scores_first() {
        let weights = [0.25, 0.25, 0.25, 0.25];
        let scores = [1.0, 3.0, 2.0, 0.0];
        let sel = top_share(&weights, &scores, 0.5).unwrap();
        assert_eq!(sel.len(), 2);
        assert_eq!(sel[0].index, 1);
        assert_eq!(sel[1].index, 2);
        assert!((sel.iter().map(|a| a.weight).sum::<f64>() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn boundary_atom_included_fractionally() {
        let weights = [0.5, 0.5];
        let scores = [2.0, 1.0];
        let sel = top_share(&weights, &scores, 0.75).unwrap();
        assert_eq!(sel.len(), 2);
        assert_eq!(sel[0].weight, 0.5);
        assert!((sel[1].weight - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ties_break_by_ascending_index() {
        let weights = [0.25, 0.25, 0.25, 0.25];
        let scores = [1.0, 1.0, 1.0, 1.0];
        let sel = top_share(&weights, &scores, 0.5).unwrap();
        assert_eq!(sel[0].index, 0);
        assert_eq!(sel[1].index, 1);
    }

    #[test]
    fn share_of_one_selects_everything() {
        let weights = [0.2, 0.3, 0.5];
        let scores = [0.0, -1.0, 5.0];
        let sel = top_share(&weights, &scores, 1.0).unwrap();
        let total: f64 = sel.iter().map(|a| a.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(sel.len(), 3);
    }

    #[test]
    fn rejects_bad_shares_and_degenerate_mass() {
        let weights = [1.0];
        let scores = [0.0];
        assert!(top_share(&weights, &scores, 0.0).is_err());
        assert!(top_share(&weights, &scores, 1.5).is_err());
        assert!(top_share(&[0.0], &scores, 0.5).is_err());
        assert!(top_share(&weights, &[f64::NAN], 0.5).is_err());
    }
}
