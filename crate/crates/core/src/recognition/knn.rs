use crate::channel::GestureLabel;
use crate::{Error, Result};

/// Majority vote among the `k` nearest training points (Euclidean).
///
/// Vote ties are resolved in favour of the tied class whose closest member
/// is nearest to `y`. Duplicate training points vote separately.
pub fn knn_classify(y: &[f64], training: &[(Vec<f64>, GestureLabel)], k: usize) -> Result<GestureLabel> {
    if training.is_empty() {
        return Err(Error::Validation("k-NN needs a non-empty training set".into()));
    }
    if k == 0 || k % 2 == 0 || k > training.len() {
        return Err(Error::Validation(format!(
            "k must be odd and within 1..={}, got {k}",
            training.len()
        )));
    }
    if training.iter().any(|(x, _)| x.len() != y.len()) {
        return Err(Error::Shape("training points must match the query dimension".into()));
    }
    let mut dists: Vec<(f64, usize)> = training
        .iter()
        .enumerate()
        .map(|(i, (x, _))| (x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
        .collect();
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest = &dists[..k];

    let mut votes = [0usize; 6];
    for (_, i) in nearest {
        votes[training[*i].1.index()] += 1;
    }
    let top = *votes.iter().max().expect("six classes");
    let winner = nearest
        .iter()
        .map(|(_, i)| training[*i].1)
        .find(|l| votes[l.index()] == top)
        .expect("winning class has a member");
    Ok(winner)
}
