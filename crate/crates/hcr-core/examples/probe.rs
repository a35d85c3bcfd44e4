// Scratch probe: first-reject angles when the dependence-inducing rotation
// acts in one vs two planes of the concatenated 4D space.

use hcr_core::basis::BasisIndexSet;
use hcr_core::bench::{generate_mixture_pair, rotate, MixtureSpec};
use hcr_core::coeffs::VarianceRule;
use hcr_core::hsic::{hsic_gamma_test, BandwidthSpec, KernelExponent};
use hcr_core::independence::{scores_for_pair, test_chi2, test_permutation_both};
use hcr_core::ingest::PairedSample;
use rayon::prelude::*;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn first_reject(angles: &[f64], ps: &[f64], alpha: f64) -> f64 {
    for (a, p) in angles.iter().zip(ps) {
        if *p < alpha {
            return *a;
        }
    }
    12.5
}

fn run(planes: &[(usize, usize)], label: &str) {
    let seeds: Vec<u64> = (1..=9).collect();
    let bx = BasisIndexSet::pairwise(2, 6).unwrap();
    let by = BasisIndexSet::pairwise(2, 6).unwrap();
    let angles: Vec<f64> = (0..=24).map(|k| 0.5 * k as f64).collect();

    let rows: Vec<[f64; 4]> = seeds
        .par_iter()
        .map(|&seed| {
            let spec = MixtureSpec::<f64>::bimodal_default();
            let base = generate_mixture_pair(1000, (2, 2), &spec, seed).unwrap();
            let prepared = rotate(&base, 50.0, (0, 1)).unwrap();
            let mut p_hsic = Vec::new();
            let mut p_chi2 = Vec::new();
            let mut p_sum = Vec::new();
            let mut p_max = Vec::new();
            for &theta in &angles {
                let mut rotated: PairedSample<f64> = prepared.clone();
                for &plane in planes {
                    rotated = rotate(&rotated, theta, plane).unwrap();
                }
                let h = hsic_gamma_test(&rotated, 0.05, BandwidthSpec::Median, KernelExponent::Squared, seed * 1000 + theta as u64 * 7 + 1).unwrap();
                p_hsic.push(h.p_value);
                let table = scores_for_pair(&rotated, &bx, &by, VarianceRule::Unit).unwrap();
                let z = table.flattened_scores().unwrap();
                p_chi2.push(test_chi2(&z, 0.05).unwrap().p_or_pr);
                let both = test_permutation_both(&rotated, &bx, &by, VarianceRule::Unit, 200, seed * 977 + theta as u64 + 3, 0.05).unwrap();
                p_sum.push(both.sum_z2.p_or_pr);
                p_max.push(both.max_abs_z.p_or_pr);
            }
            [
                first_reject(&angles, &p_max, 0.05),
                first_reject(&angles, &p_hsic, 0.05),
                first_reject(&angles, &p_chi2, 0.05),
                first_reject(&angles, &p_sum, 0.05),
            ]
        })
        .collect();
    println!("== {label}");
    for (i, name) in ["hcr_perm_max_z", "hsic_gamma", "hcr_chi2", "hcr_perm_sum_z2"].iter().enumerate() {
        let v: Vec<f64> = rows.iter().map(|r| r[i]).collect();
        println!("  {name:16} median {:5.2}  none={}  {:?}", median(v.clone()), v.iter().filter(|&&a| a > 12.0).count(), v);
    }
}

fn main() {
    run(&[(1, 2)], "single plane (x2,y1)");
    run(&[(0, 2), (1, 3)], "two planes (x1,y1)+(x2,y2)");
    run(&[(0, 3), (1, 2)], "two planes (x1,y2)+(x2,y1)");
}
