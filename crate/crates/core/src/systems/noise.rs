use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::neural::Rng;
use crate::salience::{MarkerLexicon, NGram};

/// Word-edit-distance-1 neighbourhoods among one attribute's markers.
#[derive(Debug, Clone)]
pub struct MarkerNeighbors {
    markers: Vec<NGram>,
    position: BTreeMap<NGram, usize>,
    // Markers reachable by deleting one token, keyed by the shortened form.
    by_deletion: BTreeMap<Vec<String>, Vec<usize>>,
    // Markers keyed by (position, tokens with that position removed).
    by_wildcard: BTreeMap<(usize, Vec<String>), Vec<usize>>,
}

fn without(tokens: &[String], i: usize) -> Vec<String> {
    let mut v = tokens.to_vec();
    v.remove(i);
    v
}

impl MarkerNeighbors {
    pub fn new(lexicon: &MarkerLexicon, attribute: usize) -> Self {
        let markers: Vec<NGram> = lexicon.markers(attribute).map(|(g, _)| g.clone()).collect();
        let mut position = BTreeMap::new();
        let mut by_deletion: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
        let mut by_wildcard: BTreeMap<(usize, Vec<String>), Vec<usize>> = BTreeMap::new();
        for (id, m) in markers.iter().enumerate() {
            position.insert(m.clone(), id);
            for i in 0..m.len() {
                let shorter = without(m.tokens(), i);
                by_deletion.entry(shorter.clone()).or_default().push(id);
                by_wildcard.entry((i, shorter)).or_default().push(id);
            }
        }
        MarkerNeighbors {
            markers,
            position,
            by_deletion,
            by_wildcard,
        }
    }

    /// Markers at word edit distance exactly 1 from `marker`, in lexicographic order.
    pub fn neighbors(&self, marker: &NGram) -> Vec<&NGram> {
        let tokens = marker.tokens();
        let mut ids: Vec<usize> = Vec::new();
        for i in 0..tokens.len() {
            let shorter = without(tokens, i);
            if let Some(&id) = self.position.get(shorter.as_slice()) {
                ids.push(id);
            }
            if let Some(same_len) = self.by_wildcard.get(&(i, shorter)) {
                ids.extend(same_len.iter().copied());
            }
        }
        if let Some(longer) = self.by_deletion.get(tokens) {
            ids.extend(longer.iter().copied());
        }
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .map(|id| &self.markers[id])
            .filter(|m| *m != marker)
            .collect()
    }
}

/// Replaces each marker, independently with probability `p`, by a uniformly
/// chosen same-attribute marker at word edit distance 1 when one exists.
///
/// One uniform draw is consumed per marker, plus one more for each replacement.
pub fn noise_markers(markers: &[NGram], neighbors: &MarkerNeighbors, p: f64, rng: &mut Rng) -> Vec<NGram> {
    markers
        .iter()
        .map(|m| {
            if rng.gen::<f64>() < p {
                let options = neighbors.neighbors(m);
                if !options.is_empty() {
                    return options[rng.gen_range(0..options.len())].clone();
                }
            }
            m.clone()
        })
        .collect()
}
