//! Maximum-weight bipartite assignment (Hungarian / Kuhn-Munkres, O(n^3)).

/// Solves a rectangular maximum-weight assignment. `weights[r][c]` is `None`
/// where row `r` may not be paired with column `c`. Returns, for each row,
/// the assigned column (if any). Rows left unpaired or paired only through a
/// forbidden edge map to `None`.
pub fn max_weight_assignment(weights: &[Vec<Option<f64>>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.iter().map(Vec::len).max().unwrap_or(0);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let n = rows.max(cols);
    // Minimisation on negated weights; forbidden and padding cells cost 0.
    let cost = |r: usize, c: usize| -> f64 {
        weights
            .get(r)
            .and_then(|row| row.get(c))
            .copied()
            .flatten()
            .map_or(0.0, |w| -w)
    };

    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![None; rows];
    for (j, &row) in p.iter().enumerate().skip(1) {
        let (r, c) = (row - 1, j - 1);
        if r < rows && weights[r].get(c).copied().flatten().is_some() {
            out[r] = Some(c);
        }
    }
    out
}
