//! Integer apportionment of a total across weighted parties.

/// Largest-remainder (Hamilton) apportionment.
///
/// Each party first receives `floor(total * w_i)`, the leftover units go to
/// the largest fractional remainders. Equal remainders are resolved in index
/// order. Weights are normalised by their sum, so they need not sum to one.
pub fn largest_remainder(weights: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    // floating-point floors can only undershoot by less than one unit per party
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut leftover = total.saturating_sub(assigned);
    for &i in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        if weights[i] > 0.0 {
            counts[i] += 1;
            leftover -= 1;
        }
    }
    let mut excess = assigned.saturating_sub(total);
    for &i in order.iter().rev().cycle() {
        if excess == 0 {
            break;
        }
        if counts[i] > 0 {
            counts[i] -= 1;
            excess -= 1;
        }
    }
    counts
}

/// Sainte-Laguë (Webster) highest-averages apportionment.
///
/// Units are handed out one at a time to the party with the largest
/// `w_i / (2 s_i + 1)`, where `s_i` is the number of units it already holds.
/// Ties go to the lower index.
pub fn sainte_lague(weights: &[f64], total: u64) -> Vec<u64> {
    let mut counts = vec![0u64; weights.len()];
    if weights.iter().all(|&w| w <= 0.0) {
        return counts;
    }
    for _ in 0..total {
        let mut best = 0;
        let mut best_avg = f64::NEG_INFINITY;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            let avg = w / (2 * counts[i] + 1) as f64;
            if avg > best_avg {
                best = i;
                best_avg = avg;
            }
        }
        counts[best] += 1;
    }
    counts
}
