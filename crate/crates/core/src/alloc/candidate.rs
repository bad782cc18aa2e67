use std::fmt;

use serde::{Deserialize, Serialize};

use super::AllocError;

/// Index of a candidate inside its [`CandidateSet`]. Ids follow enumeration
/// order: all singles in roster order, then pairs in lexicographic order of
/// their members, then larger combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateId(pub usize);

impl fmt::Display for CandidateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

/// A single worker or a combination of workers acting together on one action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CandidateId,
    /// Base-agent indices, strictly ascending.
    pub members: Vec<usize>,
    /// Membership vector over the base agents: one entry per agent, 1 for
    /// every member.
    pub eta: Vec<u8>,
    /// Display name, members joined with `+` (e.g. `w1+w2`).
    pub name: String,
}

impl Candidate {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_single(&self) -> bool {
        self.members.len() == 1
    }

    pub fn contains(&self, agent: usize) -> bool {
        self.eta.get(agent).is_some_and(|&e| e == 1)
    }

    pub fn overlaps(&self, other: &Candidate) -> bool {
        self.members.iter().any(|&m| other.contains(m))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    base_names: Vec<String>,
    max_combo: usize,
    candidates: Vec<Candidate>,
}

impl CandidateSet {
    /// Enumerates every combination of `1..=max_combo` base workers.
    ///
    /// For `max_combo = 2` this yields `N(N+1)/2` candidates.
    pub fn build<S: AsRef<str>>(base_workers: &[S], max_combo: usize) -> Result<Self, AllocError> {
        let n = base_workers.len();
        if n == 0 {
            return Err(AllocError::InvalidProblem("no base workers".into()));
        }
        if max_combo == 0 {
            return Err(AllocError::InvalidProblem(
                "combination size must be at least 1".into(),
            ));
        }
        let base_names: Vec<String> = base_workers.iter().map(|s| s.as_ref().to_string()).collect();
        let mut seen = std::collections::HashSet::new();
        for name in &base_names {
            if !seen.insert(name.as_str()) {
                return Err(AllocError::InvalidProblem(format!(
                    "duplicate worker `{name}`"
                )));
            }
        }
        let mut candidates = Vec::new();
        for k in 1..=max_combo.min(n) {
            for members in combinations(n, k) {
                let mut eta = vec![0u8; n];
                for &m in &members {
                    eta[m] = 1;
                }
                let name = members
                    .iter()
                    .map(|&m| base_names[m].as_str())
                    .collect::<Vec<_>>()
                    .join("+");
                candidates.push(Candidate {
                    id: CandidateId(candidates.len()),
                    members,
                    eta,
                    name,
                });
            }
        }
        Ok(CandidateSet {
            base_names,
            max_combo,
            candidates,
        })
    }

    /// Restriction to single workers (the cooperative setting).
    pub fn singles<S: AsRef<str>>(base_workers: &[S]) -> Result<Self, AllocError> {
        Self::build(base_workers, 1)
    }

    pub fn base_count(&self) -> usize {
        self.base_names.len()
    }

    pub fn base_names(&self) -> &[String] {
        &self.base_names
    }

    pub fn max_combo(&self) -> usize {
        self.max_combo
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, id: CandidateId) -> &Candidate {
        &self.candidates[id.0]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Candidate> {
        self.candidates.iter()
    }

    pub fn has_combinations(&self) -> bool {
        self.candidates.iter().any(|c| !c.is_single())
    }

    /// Looks a candidate up by its member names in any order.
    pub fn find<S: AsRef<str>>(&self, members: &[S]) -> Option<CandidateId> {
        let mut idx: Vec<usize> = members
            .iter()
            .map(|m| self.base_names.iter().position(|b| b == m.as_ref()))
            .collect::<Option<_>>()?;
        idx.sort_unstable();
        idx.dedup();
        if idx.len() != members.len() {
            return None;
        }
        self.candidates
            .iter()
            .find(|c| c.members == idx)
            .map(|c| c.id)
    }

    pub fn by_name(&self, name: &str) -> Option<CandidateId> {
        let parts: Vec<&str> = name.split('+').map(str::trim).collect();
        self.find(&parts)
    }

    pub fn single(&self, agent: usize) -> Option<CandidateId> {
        self.candidates
            .iter()
            .find(|c| c.members == [agent])
            .map(|c| c.id)
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(current.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] < n - k + i {
                current[i] += 1;
                for j in i + 1..k {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("w{i}")).collect()
    }

    #[test]
    fn three_workers_give_six_candidates() {
        let set = CandidateSet::build(&names(3), 2).unwrap();
        let got: Vec<&str> = set.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(got, ["w1", "w2", "w3", "w1+w2", "w1+w3", "w2+w3"]);
    }

    #[test]
    fn single_worker_has_no_pairs() {
        assert_eq!(CandidateSet::build(&names(1), 2).unwrap().len(), 1);
    }

    #[test]
    fn twenty_workers_give_210() {
        assert_eq!(CandidateSet::build(&names(20), 2).unwrap().len(), 210);
    }

    #[test]
    fn count_matches_closed_form() {
        for n in 1..=12 {
            let set = CandidateSet::build(&names(n), 2).unwrap();
            assert_eq!(set.len(), n * (n + 1) / 2);
        }
    }

    #[test]
    fn eta_marks_exactly_the_members() {
        let set = CandidateSet::build(&names(4), 2).unwrap();
        for c in set.iter() {
            assert_eq!(c.eta.iter().filter(|&&e| e == 1).count(), c.size());
            for &m in &c.members {
                assert_eq!(c.eta[m], 1);
            }
        }
        let pair = set.get(set.by_name("w2+w4").unwrap());
        assert_eq!(pair.eta, [0, 1, 0, 1]);
    }

    #[test]
    fn pair_lookup_is_order_insensitive() {
        let set = CandidateSet::build(&names(3), 2).unwrap();
        assert_eq!(set.find(&["w3", "w1"]), set.find(&["w1", "w3"]));
        assert!(set.find(&["w1", "w1"]).is_none());
        assert!(set.find(&["w9"]).is_none());
    }

    #[test]
    fn zero_workers_is_an_error() {
        assert!(CandidateSet::build::<String>(&[], 2).is_err());
    }

    #[test]
    fn triples_when_requested() {
        let set = CandidateSet::build(&names(4), 3).unwrap();
        assert_eq!(set.len(), 4 + 6 + 4);
    }
}
