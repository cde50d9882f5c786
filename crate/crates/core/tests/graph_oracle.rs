//! Label/rebuild agreement: the edge set selected by filtering labels at any
//! trained rate must match an independent replay of the pruning decisions on
//! the recorded candidate inputs, and filtering must be monotone in both
//! knobs.

mod common;

use std::collections::HashSet;

use common::{reference_pruner, uniform_dataset};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vicinity::{build_index_traced, BuildParams};

#[test]
fn labels_match_reference_pruner_for_every_rate() {
    let rates = vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0];
    let dataset = uniform_dataset(200, 8, 313);
    let params = BuildParams::new(16, 48, rates.clone());
    let (index, trace) = build_index_traced(&dataset, &params).unwrap();

    let mut checked = 0usize;
    for node in 0..index.len() as u32 {
        let Some(record) = &trace.final_labeling[node as usize] else {
            assert!(
                index.neighbors(node).unwrap().is_empty(),
                "node {node} has edges but no labeling record"
            );
            continue;
        };
        for &rate in &rates {
            let stored: Vec<u32> = index
                .neighbors(node)
                .unwrap()
                .iter()
                .filter(|e| e.label <= rate)
                .map(|e| e.id)
                .take(params.max_degree)
                .collect();
            let replayed = reference_pruner(record, &rates, rate, params.max_degree, &dataset);
            assert_eq!(
                stored, replayed,
                "node {node} rate {rate}: stored labels disagree with the reference pruner"
            );
            checked += 1;
        }
    }
    assert!(checked > 1000, "only {checked} comparisons ran");
}

#[test]
fn filtering_is_monotone_in_rate_and_degree() {
    let rates = vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0];
    let dataset = uniform_dataset(400, 8, 717);
    let params = BuildParams::new(12, 36, rates.clone());
    let (index, _) = build_index_traced(&dataset, &params).unwrap();

    let mut rng = StdRng::seed_from_u64(718);
    for _ in 0..1_000 {
        let node = rng.gen_range(0..index.len()) as u32;
        // random visited set over this node's neighborhood
        let visited: HashSet<u32> = index
            .neighbors(node)
            .unwrap()
            .iter()
            .filter(|_| rng.gen_bool(0.3))
            .map(|e| e.id)
            .collect();
        let is_visited = |id: u32| visited.contains(&id);

        // subset-monotone in the rate: without the degree cap binding, each
        // rate's edge set contains every stricter rate's edge set
        let mut previous: Option<HashSet<u32>> = None;
        for &rate in &rates {
            let current: HashSet<u32> = index
                .filtered_neighbors(node, rate, params.max_degree, is_visited)
                .unwrap()
                .into_iter()
                .collect();
            if let Some(prev) = &previous {
                assert!(prev.is_subset(&current), "not subset-monotone at {node}");
            }
            previous = Some(current);
        }

        // prefix-monotone in the degree cap: the capped scan is always a
        // prefix of the less-capped scan at the same rate, so a capped edge
        // set is exactly the head of the uncapped one
        let rate = rates[rng.gen_range(0..rates.len())];
        let full = index
            .filtered_neighbors(node, rate, params.max_degree, is_visited)
            .unwrap();
        for d in 1..=params.max_degree {
            let limited = index.filtered_neighbors(node, rate, d, is_visited).unwrap();
            let take = limited.len().min(full.len());
            assert_eq!(limited[..], full[..take], "not prefix-monotone at {node}");
        }
    }
}
