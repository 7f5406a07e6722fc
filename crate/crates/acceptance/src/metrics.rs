use agent_bench::metrics::{domain_weighted_average, pass_hat_k, reduction_percent, round1};

use crate::{ensure, Outcome};

const TOLERANCE: f64 = 1e-12;

/// pass^k by enumeration: the share of k-subsets of the trials that hold
/// only successes, for every placement of the successes.
fn enumerated(n: u32, s: u32, k: u32) -> Vec<f64> {
    let subsets: Vec<u32> = (0u32..1 << n).filter(|m| m.count_ones() == k).collect();
    (0u32..1 << n)
        .filter(|m| m.count_ones() == s)
        .map(|successes| {
            let all_pass = subsets.iter().filter(|&&sub| sub & successes == sub).count();
            all_pass as f64 / subsets.len() as f64
        })
        .collect()
}

pub fn check() -> Outcome {
    let avg = domain_weighted_average(&[69.2, 46.0]).map_err(|e| e.to_string())?;
    ensure!(round1(avg) == 57.6 && (avg - 57.6).abs() < TOLERANCE, "domain_weighted_average(69.2, 46.0) = {avg}");
    for (baseline, ours, expected) in [(11, 2, 81.8), (9, 7, 22.2)] {
        let r = reduction_percent(baseline, ours).map_err(|e| e.to_string())?;
        ensure!(round1(r) == expected, "reduction_percent({baseline}, {ours}) = {r}");
    }
    let mut compared = 0;
    for n in 1..=8u32 {
        for s in 0..=n {
            for k in 1..=n {
                let got = pass_hat_k(n.into(), s.into(), k.into()).map_err(|e| e.to_string())?;
                for want in enumerated(n, s, k) {
                    ensure!((got - want).abs() <= TOLERANCE, "pass_hat_k({n}, {s}, {k}) = {got}, enumeration gives {want}");
                    compared += 1;
                }
            }
        }
    }
    Ok(format!(
        "weighted average 57.6, reductions 81.8 and 22.2, pass^k matches enumeration on {compared} success placements"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_by_hand() {
        // two of four trials pass: one of the six pairs is all-pass
        assert!(enumerated(4, 2, 2).iter().all(|&p| p == 1.0 / 6.0));
        assert!(enumerated(3, 3, 2).iter().all(|&p| p == 1.0));
        assert!(enumerated(3, 1, 2).iter().all(|&p| p == 0.0));
        assert_eq!(enumerated(4, 2, 1).len(), 6);
    }
}
