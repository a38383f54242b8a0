//! Minimum-total-L1 perfect matching of probability maps.

use crate::model::ProbMap;

/// Up to this many candidates the matching is found by enumeration.
pub const EXACT_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PairingError {
    #[error("need an even number of at least two candidates, got {0}")]
    OddCount(usize),
    #[error("candidate {0:?} has different map dimensions")]
    DimensionMismatch(String),
}

fn distance_matrix(maps: &[&ProbMap]) -> Vec<Vec<f64>> {
    let n = maps.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = maps[i].l1_distance(maps[j]).expect("dimensions checked");
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Branch over the partner of the first unmatched index. Ties keep the
/// first matching in enumeration order.
fn enumerate(
    d: &[Vec<f64>],
    used: &mut [bool],
    cur: &mut Vec<(usize, usize)>,
    cost: f64,
    best: &mut Option<(f64, Vec<(usize, usize)>)>,
) {
    let Some(i) = used.iter().position(|u| !u) else {
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            *best = Some((cost, cur.clone()));
        }
        return;
    };
    used[i] = true;
    for j in i + 1..used.len() {
        if used[j] {
            continue;
        }
        used[j] = true;
        cur.push((i, j));
        enumerate(d, used, cur, cost + d[i][j], best);
        cur.pop();
        used[j] = false;
    }
    used[i] = false;
}

fn greedy(d: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = d.len();
    let mut edges: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (d[i][j], i, j))
        .collect();
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut used = vec![false; n];
    let mut out = Vec::with_capacity(n / 2);
    for (_, i, j) in edges {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Index pairs `(i, j)`, `i < j`, of a perfect matching minimizing the sum
/// of L1 distances.
///
/// Exact for at most [`EXACT_LIMIT`] candidates. Larger inputs use greedy
/// closest-pair-first matching, which can exceed the optimum.
pub fn pair_indices(candidates: &[(String, &ProbMap)]) -> Result<Vec<(usize, usize)>, PairingError> {
    let n = candidates.len();
    if n < 2 || n % 2 != 0 {
        return Err(PairingError::OddCount(n));
    }
    let (w, h) = (candidates[0].1.width(), candidates[0].1.height());
    if let Some((id, _)) = candidates
        .iter()
        .find(|(_, m)| m.width() != w || m.height() != h)
    {
        return Err(PairingError::DimensionMismatch(id.clone()));
    }
    let maps: Vec<&ProbMap> = candidates.iter().map(|(_, m)| *m).collect();
    let d = distance_matrix(&maps);
    if n <= EXACT_LIMIT {
        let mut best = None;
        enumerate(&d, &mut vec![false; n], &mut Vec::new(), 0.0, &mut best);
        Ok(best.expect("even n has a perfect matching").1)
    } else {
        Ok(greedy(&d))
    }
}

/// [`pair_indices`] with ids.
pub fn pair_by_l1(candidates: &[(String, &ProbMap)]) -> Result<Vec<(String, String)>, PairingError> {
    Ok(pair_indices(candidates)?
        .into_iter()
        .map(|(i, j)| (candidates[i].0.clone(), candidates[j].0.clone()))
        .collect())
}

/// Total L1 cost of a matching.
pub fn matching_cost(candidates: &[(String, &ProbMap)], pairs: &[(usize, usize)]) -> f64 {
    pairs
        .iter()
        .map(|&(i, j)| candidates[i].1.l1_distance(candidates[j].1).unwrap_or(f64::INFINITY))
        .sum()
}
