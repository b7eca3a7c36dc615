//! Stratified k-fold cross-validation over a hyperparameter grid.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::experiments::metrics;
use crate::features::Dataset;
use crate::gbdt::{train, GbdtParams};
use crate::util::mix_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub best: GbdtParams,
    pub mean_f1: f64,
    /// Folds skipped because their training partition had one class.
    pub skipped_folds: usize,
}

/// Stratified fold assignment: class indices are shuffled with a seeded RNG
/// and dealt round-robin across k folds.
fn fold_assignment(labels: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    for class in [1u8, 0u8] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            assignment[i] = pos % k;
        }
    }
    assignment
}

/// Selects the grid point with the highest mean validation F1 at threshold
/// 0.5. Ties prefer fewer trees, then lower depth, then grid order. Folds
/// whose training partition is single-class are skipped and counted.
pub fn cross_validate(
    dataset: &Dataset,
    param_grid: &[GbdtParams],
    k: usize,
    seed: u64,
) -> Result<CvOutcome> {
    if param_grid.is_empty() {
        return Err(Error::Config("empty parameter grid".to_string()));
    }
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let n_pos = dataset.labels.iter().filter(|&&y| y == 1).count();
    let n_neg = dataset.n_rows() - n_pos;
    if k > n_pos || k > n_neg {
        return Err(Error::CrossValidation(format!(
            "k={k} exceeds the smaller class ({} positives, {} negatives)",
            n_pos, n_neg
        )));
    }

    let assignment = fold_assignment(&dataset.labels, k, mix_seed(seed, 0x6f1d));
    let mut best: Option<(f64, usize)> = None; // (mean F1, grid index)
    let mut skipped_total = 0usize;
    let mut best_score = f64::NEG_INFINITY;

    for (gi, params) in param_grid.iter().enumerate() {
        let mut scores = Vec::with_capacity(k);
        let mut skipped = 0usize;
        for fold in 0..k {
            let train_idx: Vec<usize> = (0..dataset.n_rows())
                .filter(|&i| assignment[i] != fold)
                .collect();
            let val_idx: Vec<usize> = (0..dataset.n_rows())
                .filter(|&i| assignment[i] == fold)
                .collect();
            let train_set = dataset.subset(&train_idx);
            let has_pos = train_set.labels.iter().any(|&y| y == 1);
            let has_neg = train_set.labels.iter().any(|&y| y == 0);
            if !has_pos || !has_neg {
                skipped += 1;
                continue;
            }
            let model = train(&train_set, params)?;
            let val_set = dataset.subset(&val_idx);
            let preds: Vec<bool> = (0..val_set.n_rows())
                .map(|i| model.predict(val_set.row(i)).map(|p| p >= 0.5))
                .collect::<Result<_>>()?;
            let truth: Vec<bool> = val_set.labels.iter().map(|&y| y == 1).collect();
            scores.push(metrics(&preds, &truth)?.f1);
        }
        if scores.is_empty() {
            skipped_total += skipped;
            continue;
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        skipped_total += skipped;
        let better = match best {
            None => true,
            Some((best_mean, bi)) => {
                let cur = param_grid[gi].clone();
                let prev = param_grid[bi].clone();
                mean > best_mean
                    || (mean == best_mean
                        && (cur.num_trees, cur.max_depth) < (prev.num_trees, prev.max_depth))
            }
        };
        if better {
            best = Some((mean, gi));
            best_score = mean;
        }
    }

    match best {
        Some((_, gi)) => Ok(CvOutcome {
            best: param_grid[gi].clone(),
            mean_f1: best_score,
            skipped_folds: skipped_total,
        }),
        None => Err(Error::CrossValidation(
            "every fold was skipped for every grid point".to_string(),
        )),
    }
}
