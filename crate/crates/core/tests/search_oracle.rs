//! Search results checked against an independent brute-force enumerator.
//!
//! The oracle shares no code with the search path: subsets come from bit
//! masks, distinct tuples and match counts from linear scans, and the
//! ranking comparator is re-stated from its documentation.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use rtbopt_core::data::{CampaignDataset, ImpressionRecord};
use rtbopt_core::scoring::attach_profitability;
use rtbopt_core::search::{
    count_attribute_subsets, enumerate_subsets, search, unique_value_tuples, Configuration,
    RejectedSet, SearchParams,
};

#[derive(Debug, PartialEq)]
struct OracleRow {
    attrs: Vec<usize>,
    values: Vec<u64>,
    rows: usize,
    avg_bits: u64,
    score_bits: u64,
}

fn brute_force(d: &CampaignDataset, limit: usize, allow_below: bool) -> Vec<OracleRow> {
    let n = d.n_attributes();
    let col = d.profitability().expect("profitability required");
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let attrs: Vec<usize> = (0..n).filter(|a| mask & (1 << a) != 0).collect();
        let mut tuples: Vec<Vec<u64>> = Vec::new();
        for row in 0..d.len() {
            let t: Vec<u64> = attrs.iter().map(|&a| d.attribute(a)[row]).collect();
            if !tuples.contains(&t) {
                tuples.push(t);
            }
        }
        for t in tuples {
            let rows: Vec<usize> = (0..d.len())
                .filter(|&r| attrs.iter().zip(&t).all(|(&a, &v)| d.attribute(a)[r] == v))
                .collect();
            if !allow_below && rows.len() < limit {
                continue;
            }
            let sum: f64 = rows.iter().map(|&r| col.values()[r]).sum();
            let avg = sum / rows.len() as f64;
            let score = avg * rows.len().min(limit) as f64;
            out.push(OracleRow {
                attrs: attrs.clone(),
                values: t,
                rows: rows.len(),
                avg_bits: avg.to_bits(),
                score_bits: score.to_bits(),
            });
        }
    }
    out.sort_by(|a, b| {
        f64::from_bits(b.score_bits)
            .total_cmp(&f64::from_bits(a.score_bits))
            .then_with(|| b.rows.cmp(&a.rows))
            .then_with(|| a.attrs.cmp(&b.attrs))
            .then_with(|| a.values.cmp(&b.values))
    });
    out
}

fn random_scored_dataset(rng: &mut StdRng, max_rows: usize, max_attrs: usize) -> CampaignDataset {
    let n_rows = rng.gen_range(1..=max_rows);
    let n_attrs = rng.gen_range(1..=max_attrs);
    let cardinalities: Vec<u64> = (0..n_attrs).map(|_| rng.gen_range(1..=6)).collect();
    let records: Vec<ImpressionRecord> = (0..n_rows)
        .map(|i| {
            let zero_cost = rng.gen_bool(0.05);
            ImpressionRecord {
                timestamp: i as u64,
                campaign: 1,
                conversion: rng.gen_bool(0.3),
                click: false,
                cost: if zero_cost {
                    0.0
                } else {
                    rng.gen_range(0.01..2.0)
                },
                cpo: None,
                attributes: cardinalities.iter().map(|&c| rng.gen_range(0..c)).collect(),
                cvr: Some(rng.gen_range(0.001..0.999)),
                profitability: None,
            }
        })
        .collect();
    let mut d = CampaignDataset::from_records(records, n_attrs).unwrap();
    attach_profitability(&mut d).unwrap();
    d
}

fn to_oracle_rows(results: &[rtbopt_core::search::ScoredConfiguration]) -> Vec<OracleRow> {
    results
        .iter()
        .map(|r| OracleRow {
            attrs: r.config.attribute_indices().to_vec(),
            values: r.config.values().to_vec(),
            rows: r.matched_rows,
            avg_bits: r.avg_profitability.to_bits(),
            score_bits: r.quality_score.to_bits(),
        })
        .collect()
}

#[test]
fn pruned_search_equals_brute_force_on_random_datasets() {
    let mut rng = StdRng::seed_from_u64(0xBEEF);
    for case in 0..25 {
        let d = random_scored_dataset(&mut rng, 500, 5);
        for limit in [5, 20, 50] {
            let expected = brute_force(&d, limit, false);
            let params = SearchParams::new(limit);
            let got = search(&d, &params).unwrap();
            assert_eq!(
                to_oracle_rows(&got),
                expected,
                "case {case} limit {limit}: rows={} attrs={}",
                d.len(),
                d.n_attributes()
            );
        }
    }
}

#[test]
fn relaxed_search_equals_brute_force_on_random_datasets() {
    let mut rng = StdRng::seed_from_u64(0xCAFE);
    for _ in 0..10 {
        let d = random_scored_dataset(&mut rng, 200, 4);
        for limit in [5, 20] {
            let expected = brute_force(&d, limit, true);
            let params = SearchParams {
                allow_below_limit: true,
                ..SearchParams::new(limit)
            };
            let got = search(&d, &params).unwrap();
            assert_eq!(to_oracle_rows(&got), expected);
        }
    }
}

#[test]
fn pruning_never_changes_the_output() {
    let mut rng = StdRng::seed_from_u64(0xD00D);
    for _ in 0..15 {
        let d = random_scored_dataset(&mut rng, 400, 5);
        for limit in [3, 10, 40] {
            let pruned = search(&d, &SearchParams::new(limit)).unwrap();
            let unpruned = search(
                &d,
                &SearchParams {
                    prune: false,
                    ..SearchParams::new(limit)
                },
            )
            .unwrap();
            assert_eq!(to_oracle_rows(&pruned), to_oracle_rows(&unpruned));
        }
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let mut rng = StdRng::seed_from_u64(0xF00D);
    let d = random_scored_dataset(&mut rng, 500, 5);
    let params = SearchParams::new(10);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| search(&d, &params).unwrap());
    let eight = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .unwrap()
        .install(|| search(&d, &params).unwrap());
    assert_eq!(to_oracle_rows(&single), to_oracle_rows(&eight));
}

#[test]
fn bucket_sizes_sum_to_row_count_for_every_subset() {
    let mut rng = StdRng::seed_from_u64(0xAB);
    let d = random_scored_dataset(&mut rng, 300, 5);
    for attrs in enumerate_subsets(d.n_attributes(), d.n_attributes()) {
        let buckets = unique_value_tuples(&d, &attrs).unwrap();
        let total: usize = buckets.values().map(Vec::len).sum();
        assert_eq!(total, d.len());
        for (tuple, rows) in &buckets {
            for &r in rows {
                for (k, &a) in attrs.iter().enumerate() {
                    assert_eq!(d.attribute(a)[r], tuple[k]);
                }
            }
        }
    }
}

#[test]
fn subset_count_matches_enumeration() {
    for n in 1..=9 {
        assert_eq!(
            enumerate_subsets(n, n).len() as u64,
            count_attribute_subsets(n)
        );
    }
}

/// Level-wise linear use of the rejected set, the way the per-candidate
/// rule reads: sub-configuration pruning must only ever drop candidates
/// that the brute force drops too.
#[test]
fn prune_check_is_sound_against_brute_force() {
    let mut rng = StdRng::seed_from_u64(0x51);
    for _ in 0..10 {
        let d = random_scored_dataset(&mut rng, 250, 4);
        let limit = 8;
        let keep: Vec<OracleRow> = brute_force(&d, limit, false);
        let mut rejected = RejectedSet::new(limit);
        for attrs in enumerate_subsets(d.n_attributes(), d.n_attributes()) {
            for (tuple, rows) in unique_value_tuples(&d, &attrs).unwrap() {
                let config = Configuration::new(
                    attrs.iter().copied().zip(tuple.iter().copied()).collect(),
                )
                .unwrap();
                if rejected.prune_check(&config) {
                    // anything pruned must be below the limit
                    assert!(rows.len() < limit, "pruned a qualifying candidate");
                    continue;
                }
                if rows.len() < limit {
                    rejected.insert(&config);
                } else {
                    assert!(
                        keep.iter()
                            .any(|k| k.attrs == attrs && k.values == tuple),
                        "kept candidate missing from oracle"
                    );
                }
            }
        }
    }
}
