use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::{Manifest, Sample};
use super::DatasetError;

/// Person-to-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn new(k: usize, assignment: BTreeMap<String, usize>) -> Result<Self, DatasetError> {
        if k == 0 {
            return Err(DatasetError::Argument("fold count must be positive".into()));
        }
        let mut used = vec![false; k];
        for (p, &f) in &assignment {
            if f >= k {
                return Err(DatasetError::Argument(format!("person {p:?} assigned to fold {f} of {k}")));
            }
            used[f] = true;
        }
        if let Some(empty) = used.iter().position(|u| !u) {
            return Err(DatasetError::Argument(format!("fold {empty} has no persons")));
        }
        Ok(FoldPlan { k, assignment })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &BTreeMap<String, usize> {
        &self.assignment
    }

    pub fn fold_of(&self, person: &str) -> Option<usize> {
        self.assignment.get(person).copied()
    }

    /// Samples of `m` in fold `fold` and outside it, both in manifest order.
    /// Persons missing from the plan land in neither.
    pub fn split<'a>(&self, m: &'a Manifest, fold: usize) -> (Vec<&'a Sample>, Vec<&'a Sample>) {
        let mut test = Vec::new();
        let mut train = Vec::new();
        for s in m.samples() {
            match self.fold_of(&s.person_id) {
                Some(f) if f == fold => test.push(s),
                Some(_) => train.push(s),
                None => {}
            }
        }
        (train, test)
    }

    /// Image count per fold for manifest `m`.
    pub fn fold_sizes(&self, m: &Manifest) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for s in m.samples() {
            if let Some(f) = self.fold_of(&s.person_id) {
                sizes[f] += 1;
            }
        }
        sizes
    }

    /// `person<TAB>fold` lines, sorted by person.
    pub fn to_tsv(&self) -> String {
        self.assignment.iter().map(|(p, f)| format!("{p}\t{f}\n")).collect()
    }

    /// Inverse of [`FoldPlan::to_tsv`]; `k` is one more than the largest fold index.
    pub fn from_tsv(text: &str) -> Result<Self, DatasetError> {
        let mut assignment = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: String| DatasetError::Parse { line: i + 1, msg };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (p, f) = line.split_once('\t').ok_or_else(|| err("expected person<TAB>fold".into()))?;
            if p.is_empty() {
                return Err(err("empty person id".into()));
            }
            let f: usize = f.trim().parse().map_err(|_| err(format!("bad fold index {f:?}")))?;
            if assignment.insert(p.to_string(), f).is_some() {
                return Err(err(format!("person {p:?} listed twice")));
            }
        }
        let k = assignment.values().max().map_or(0, |m| m + 1);
        FoldPlan::new(k, assignment)
    }
}

/// Assign whole persons to `k` folds so image counts are balanced.
///
/// Persons are shuffled with `seed`, stably sorted by descending sample
/// count, then each goes to the currently smallest fold (lowest index on
/// ties). The shuffle only decides the order among equal counts.
pub fn kfold_split(m: &Manifest, k: usize, seed: u64) -> Result<FoldPlan, DatasetError> {
    if k == 0 {
        return Err(DatasetError::Argument("fold count must be positive".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in m.samples() {
        *counts.entry(s.person_id.as_str()).or_default() += 1;
    }
    let mut persons: Vec<&str> = m.persons();
    if persons.len() < k {
        return Err(DatasetError::Argument(format!(
            "fewer persons than folds: {} persons for k = {k}",
            persons.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    persons.shuffle(&mut rng);
    persons.sort_by_key(|p| std::cmp::Reverse(counts[p]));
    let mut sizes = vec![0usize; k];
    let mut assignment = BTreeMap::new();
    for p in persons {
        let f = (0..k).min_by_key(|&f| (sizes[f], f)).expect("k > 0");
        sizes[f] += counts[p];
        assignment.insert(p.to_string(), f);
    }
    FoldPlan::new(k, assignment)
}
