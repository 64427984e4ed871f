//! TOP-n and merged-class error measures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::recording::{ClassificationResult, SymbolId, SymbolTable};

/// Symbol pairs that look identical in handwriting, as `base,equivalent`
/// command pairs.
pub const BUNDLED_EQUIVALENCES: &str = include_str!("../data/equivalences.csv");

/// A partition of symbols. Symbols never mentioned are singletons.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EquivalenceClasses {
    parent: BTreeMap<SymbolId, SymbolId>,
}

impl EquivalenceClasses {
    pub fn singletons() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (SymbolId, SymbolId)>) -> Self {
        let mut classes = Self::default();
        for (a, b) in pairs {
            classes.union(a, b);
        }
        classes
    }

    fn find(&self, mut id: SymbolId) -> SymbolId {
        while let Some(&p) = self.parent.get(&id) {
            if p == id {
                break;
            }
            id = p;
        }
        id
    }

    /// Merges the classes of `a` and `b`; the smaller representative wins.
    pub fn union(&mut self, a: SymbolId, b: SymbolId) {
        let (ra, rb) = (self.find(a), self.find(b));
        let (root, child) = if ra <= rb { (ra, rb) } else { (rb, ra) };
        self.parent.insert(root, root);
        self.parent.insert(child, root);
        // keep paths short: point every member straight at the root
        let members: Vec<SymbolId> = self.parent.keys().copied().collect();
        for m in members {
            let r = self.find(m);
            self.parent.insert(m, r);
        }
    }

    pub fn representative(&self, id: SymbolId) -> SymbolId {
        self.find(id)
    }

    pub fn equivalent(&self, a: SymbolId, b: SymbolId) -> bool {
        self.find(a) == self.find(b)
    }

    /// Classes with more than one member, each sorted, ordered by their
    /// smallest member.
    pub fn classes(&self) -> Vec<Vec<SymbolId>> {
        let mut by_root: BTreeMap<SymbolId, Vec<SymbolId>> = BTreeMap::new();
        for &id in self.parent.keys() {
            by_root.entry(self.find(id)).or_default().push(id);
        }
        by_root.into_values().filter(|c| c.len() > 1).collect()
    }

    /// Members of the class of `id`, including `id`.
    pub fn class_of(&self, id: SymbolId) -> BTreeSet<SymbolId> {
        let root = self.find(id);
        let mut out: BTreeSet<SymbolId> = self.parent.keys().copied().filter(|&m| self.find(m) == root).collect();
        out.insert(id);
        out
    }
}

/// Parses `base_command,equivalent_command` lines (optional header, blank
/// lines ignored) into classes by transitive closure. Pairs naming a command
/// missing from `symbols` are skipped and returned as warnings.
pub fn load_equivalences(text: &str, symbols: &SymbolTable) -> (EquivalenceClasses, Vec<String>) {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut classes = EquivalenceClasses::singletons();
    let mut warnings = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                warnings.push(format!("line {}: {e}", line + 1));
                continue;
            }
        };
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            warnings.push(format!("line {}: expected 2 columns, got {}", line + 1, record.len()));
            continue;
        }
        let (a, b) = (&record[0], &record[1]);
        if line == 0 && a == "base_command" {
            continue;
        }
        match (symbols.id_of_command(a), symbols.id_of_command(b)) {
            (Some(x), Some(y)) => classes.union(x, y),
            _ => {
                let unknown = if symbols.id_of_command(a).is_none() { a } else { b };
                warnings.push(format!("line {}: unknown symbol {unknown:?}, pair skipped", line + 1));
            }
        }
    }
    (classes, warnings)
}

/// One evaluated example: ranked hypotheses and the true symbol.
pub type EvalCase = (ClassificationResult, SymbolId);

fn in_top(result: &ClassificationResult, reference: SymbolId, n: usize) -> bool {
    result.iter().take(n).any(|h| h.symbol == reference)
}

/// Fraction of cases whose reference is not among the first `n` hypotheses.
pub fn topn_error(cases: &[EvalCase], n: usize) -> f64 {
    if cases.is_empty() {
        return 0.0;
    }
    let wrong = cases.iter().filter(|(r, s)| !in_top(r, *s, n)).count();
    wrong as f64 / cases.len() as f64
}

/// Fraction of cases whose reference is outside the union of the classes of
/// the top three hypotheses.
pub fn mer_error(cases: &[EvalCase], classes: &EquivalenceClasses) -> f64 {
    if cases.is_empty() {
        return 0.0;
    }
    let wrong = cases
        .iter()
        .filter(|(r, s)| !r.iter().take(3).any(|h| classes.equivalent(h.symbol, *s)))
        .count();
    wrong as f64 / cases.len() as f64
}

/// Error fractions of one evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    pub top1: f64,
    pub top3: f64,
    pub mer: f64,
}

impl EvalReport {
    pub fn compute(cases: &[EvalCase], classes: &EquivalenceClasses) -> Self {
        EvalReport {
            count: cases.len(),
            top1: topn_error(cases, 1),
            top3: topn_error(cases, 3),
            mer: mer_error(cases, classes),
        }
    }

    /// `measure,value` rows with errors in percent, two decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("measure,value\n");
        for (name, v) in [("TOP1", self.top1), ("TOP3", self.top3), ("MER", self.mer)] {
            let _ = writeln!(out, "{name},{:.2}", v * 100.0);
        }
        let _ = writeln!(out, "count,{}", self.count);
        out
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "TOP1 {:.2} %  TOP3 {:.2} %  MER {:.2} %  ({} examples)",
            self.top1 * 100.0,
            self.top3 * 100.0,
            self.mer * 100.0,
            self.count
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::Hypothesis;
    use proptest::prelude::*;

    fn result(ids: &[u32]) -> ClassificationResult {
        ids.iter()
            .enumerate()
            .map(|(i, &s)| Hypothesis {
                symbol: SymbolId(s),
                probability: 1.0 / (i + 2) as f64,
            })
            .collect()
    }

    #[test]
    fn topn_basics() {
        let right = vec![(result(&[1, 2, 3]), SymbolId(1)), (result(&[2, 1, 3]), SymbolId(2))];
        assert_eq!(topn_error(&right, 1), 0.0);
        let second = vec![(result(&[1, 2, 3]), SymbolId(2)), (result(&[3, 1, 2]), SymbolId(1))];
        assert_eq!(topn_error(&second, 1), 1.0);
        assert_eq!(topn_error(&second, 3), 0.0);
        assert_eq!(topn_error(&[], 1), 0.0);
    }

    #[test]
    fn sum_and_sigma_merge() {
        let symbols = SymbolTable::from_commands(&["\\sum", "\\Sigma", "a", "b", "c"]).unwrap();
        let (classes, warnings) = load_equivalences(BUNDLED_EQUIVALENCES, &symbols);
        assert_eq!(classes.classes(), vec![vec![SymbolId(0), SymbolId(1)]]);
        assert!(!warnings.is_empty(), "other bundled commands are unknown here");
        let cases = vec![(result(&[2, 0, 3]), SymbolId(1))];
        assert_eq!(topn_error(&cases, 3), 1.0);
        assert_eq!(mer_error(&cases, &classes), 0.0);
    }

    #[test]
    fn transitive_closure_and_empty_file() {
        let symbols = SymbolTable::from_commands(&["a", "b", "c", "d"]).unwrap();
        let (classes, w) = load_equivalences("a,b\nb,c\n", &symbols);
        assert!(w.is_empty());
        assert_eq!(classes.classes(), vec![vec![SymbolId(0), SymbolId(1), SymbolId(2)]]);
        assert!(classes.equivalent(SymbolId(0), SymbolId(2)));
        assert!(!classes.equivalent(SymbolId(0), SymbolId(3)));
        let (empty, _) = load_equivalences("", &symbols);
        assert!(empty.classes().is_empty());
        let (_, w) = load_equivalences("a,zz\n", &symbols);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn quoted_comma_command() {
        let symbols = SymbolTable::from_commands(&[",", "\\comma"]).unwrap();
        let (classes, w) = load_equivalences("\",\",\\comma\n", &symbols);
        assert!(w.is_empty());
        assert!(classes.equivalent(SymbolId(0), SymbolId(1)));
    }

    #[test]
    fn bundled_table_shapes() {
        let commands: Vec<String> = BUNDLED_EQUIVALENCES
            .lines()
            .skip(1)
            .flat_map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let symbols = SymbolTable::from_commands(&commands).unwrap();
        let (classes, w) = load_equivalences(BUNDLED_EQUIVALENCES, &symbols);
        assert!(w.is_empty());
        let sizes: Vec<usize> = classes.classes().iter().map(Vec::len).collect();
        assert_eq!(sizes.len(), 25);
        assert_eq!(sizes.iter().filter(|&&s| s == 3).count(), 4);
        let delta = symbols.id_of_command("\\Delta").unwrap();
        assert_eq!(classes.class_of(delta).len(), 3);
    }

    #[test]
    fn report_csv() {
        let r = EvalReport {
            count: 4,
            top1: 0.25,
            top3: 0.0,
            mer: 0.0,
        };
        assert_eq!(r.to_csv(), "measure,value\nTOP1,25.00\nTOP3,0.00\nMER,0.00\ncount,4\n");
    }

    fn arb_cases() -> impl Strategy<Value = Vec<EvalCase>> {
        let case = (Just((0u32..12).collect::<Vec<u32>>()).prop_shuffle(), 0u32..12)
            .prop_map(|(ids, truth)| (result(&ids[..5]), SymbolId(truth)));
        prop::collection::vec(case, 1..40)
    }

    proptest! {
        #[test]
        fn error_lattice(cases in arb_cases(), pairs in prop::collection::vec((0u32..12, 0u32..12), 0..8)) {
            let classes = EquivalenceClasses::from_pairs(pairs.into_iter().map(|(a, b)| (SymbolId(a), SymbolId(b))));
            let top1 = topn_error(&cases, 1);
            let top3 = topn_error(&cases, 3);
            let mer = mer_error(&cases, &classes);
            prop_assert!(top1 >= top3 && top3 >= mer);
            for n in 1..5 {
                prop_assert!(topn_error(&cases, n) >= topn_error(&cases, n + 1));
            }
            prop_assert_eq!(mer_error(&cases, &EquivalenceClasses::singletons()), top3);
        }

        #[test]
        fn classes_partition(pairs in prop::collection::vec((0u32..20, 0u32..20), 0..15)) {
            let classes = EquivalenceClasses::from_pairs(pairs.iter().map(|&(a, b)| (SymbolId(a), SymbolId(b))));
            let all: Vec<SymbolId> = classes.classes().into_iter().flatten().collect();
            let unique: BTreeSet<SymbolId> = all.iter().copied().collect();
            prop_assert_eq!(all.len(), unique.len());
            for (a, b) in pairs {
                prop_assert!(classes.equivalent(SymbolId(a), SymbolId(b)));
            }
        }
    }
}
