//! Function/type coverage matrix and sufficiency verdicts.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::architecture::FunctionCatalog;
use crate::classify::{ClassifiedRequirement, RequirementType};
use crate::OTHER_FUNCTION;

/// Minimum FUNC requirements for a function to be complete.
pub const MIN_FUNC: usize = 3;
/// Minimum PROB requirements for a function to be complete.
pub const MIN_PROB: usize = 1;

#[derive(Debug, Error)]
pub enum CoverageError {
    #[error("requirement {req_id} is allocated to `{function}`, which is not in the catalog")]
    AliasClosureViolation { req_id: String, function: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Complete,
    Missing,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Complete => "Complete",
            Verdict::Missing => "Missing",
        }
    }
}

pub fn verdict(n_func: usize, n_prob: usize) -> Verdict {
    if n_func >= MIN_FUNC && n_prob >= MIN_PROB {
        Verdict::Complete
    } else {
        Verdict::Missing
    }
}

/// Requirements still needed to reach [`Verdict::Complete`].
pub fn shortfall(n_func: usize, n_prob: usize) -> usize {
    MIN_FUNC.saturating_sub(n_func) + MIN_PROB.saturating_sub(n_prob)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub function: String,
    pub n_func: usize,
    pub n_prob: usize,
    pub n_other: usize,
    pub verdict: Verdict,
}

impl CoverageRow {
    pub fn shortfall(&self) -> usize {
        shortfall(self.n_func, self.n_prob)
    }

    pub fn is_catch_all(&self) -> bool {
        self.function == OTHER_FUNCTION
    }

    pub fn total(&self) -> usize {
        self.n_func + self.n_prob + self.n_other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub n_func: usize,
    pub n_prob: usize,
    pub n_other: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageMatrix {
    /// One row per catalog alias, in catalog order.
    pub rows: Vec<CoverageRow>,
    pub totals: Totals,
}

impl CoverageMatrix {
    pub fn row(&self, alias: &str) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.function == alias)
    }

    /// Missing functions, largest shortfall first; ties keep catalog order.
    pub fn gaps(&self) -> Vec<&CoverageRow> {
        let mut gaps: Vec<&CoverageRow> = self.rows.iter().filter(|r| r.verdict == Verdict::Missing).collect();
        gaps.sort_by_key(|r| std::cmp::Reverse(r.shortfall()));
        gaps
    }

    pub fn write_csv(&self, out: impl std::io::Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["Function", "N Reqs FUNC", "N Reqs PROB", "N Reqs _OT_", "Result"])?;
        for r in &self.rows {
            let n = [r.n_func.to_string(), r.n_prob.to_string(), r.n_other.to_string()];
            w.write_record([r.function.as_str(), &n[0], &n[1], &n[2], r.verdict.as_str()])?;
        }
        let t = [self.totals.n_func.to_string(), self.totals.n_prob.to_string(), self.totals.n_other.to_string()];
        w.write_record(["Total", &t[0], &t[1], &t[2], ""])?;
        w.flush()?;
        Ok(())
    }
}

/// Counts requirements per (function, type) over the catalog.
pub fn build_matrix(
    classified: &[ClassifiedRequirement],
    catalog: &FunctionCatalog,
) -> Result<CoverageMatrix, CoverageError> {
    let mut counts: HashMap<&str, [usize; 3]> = catalog.aliases().map(|a| (a, [0; 3])).collect();
    for r in classified {
        let slot = counts.get_mut(r.function.as_str()).ok_or_else(|| CoverageError::AliasClosureViolation {
            req_id: r.req_id.clone(),
            function: r.function.clone(),
        })?;
        slot[match r.rtype {
            RequirementType::Func => 0,
            RequirementType::Prob => 1,
            RequirementType::Other => 2,
        }] += 1;
    }
    let rows: Vec<CoverageRow> = catalog
        .aliases()
        .map(|a| {
            let [n_func, n_prob, n_other] = counts[a];
            CoverageRow { function: a.to_string(), n_func, n_prob, n_other, verdict: verdict(n_func, n_prob) }
        })
        .collect();
    let totals = Totals {
        n_func: rows.iter().map(|r| r.n_func).sum(),
        n_prob: rows.iter().map(|r| r.n_prob).sum(),
        n_other: rows.iter().map(|r| r.n_other).sum(),
    };
    Ok(CoverageMatrix { rows, totals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::architecture::CatalogEntry;
    use crate::requirements::Requirement;
    use proptest::prelude::*;

    fn catalog(aliases: &[&str]) -> FunctionCatalog {
        FunctionCatalog::new(
            aliases
                .iter()
                .map(|a| CatalogEntry { alias: a.to_string(), lineage: format!("S/{a}"), primary_system: "S".into() })
                .collect(),
        )
        .unwrap()
    }

    fn row(i: usize, f: &str, t: RequirementType) -> ClassifiedRequirement {
        let mut r = ClassifiedRequirement::unreturned(&Requirement::new(i.to_string(), "x"));
        r.function = f.into();
        r.rtype = t;
        r
    }

    #[test]
    fn boundaries() {
        assert_eq!(verdict(9, 1), Verdict::Complete);
        assert_eq!(verdict(3, 1), Verdict::Complete);
        assert_eq!(verdict(14, 0), Verdict::Missing);
        assert_eq!(verdict(2, 5), Verdict::Missing);
        assert_eq!(shortfall(0, 0), 4);
        assert_eq!(shortfall(12, 0), 1);
    }

    #[test]
    fn empty_table_all_missing() {
        let m = build_matrix(&[], &catalog(&["A", "B"])).unwrap();
        assert_eq!(m.rows.len(), 3);
        assert!(m.rows.iter().all(|r| r.total() == 0 && r.verdict == Verdict::Missing));
        assert_eq!(m.rows[2].function, "_OF_");
    }

    #[test]
    fn alias_closure() {
        let err = build_matrix(&[row(1, "ZZ", RequirementType::Func)], &catalog(&["A"])).unwrap_err();
        assert!(matches!(err, CoverageError::AliasClosureViolation { .. }));
    }

    #[test]
    fn gap_ranking() {
        use RequirementType::*;
        let mut t = Vec::new();
        t.extend((0..3).map(|i| row(i, "A", Func)));
        t.push(row(3, "A", Prob));
        t.extend((4..6).map(|i| row(i, "B", Func)));
        t.push(row(6, "C", Prob));
        let m = build_matrix(&t, &catalog(&["A", "B", "C"])).unwrap();
        let gaps: Vec<_> = m.gaps().iter().map(|r| (r.function.as_str(), r.shortfall())).collect();
        assert_eq!(gaps, [("_OF_", 4), ("C", 3), ("B", 2)]);
    }

    #[test]
    fn csv_shape() {
        let m = build_matrix(&[row(1, "A", RequirementType::Other)], &catalog(&["A"])).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "Function,N Reqs FUNC,N Reqs PROB,N Reqs _OT_,Result\nA,0,0,1,Missing\n_OF_,0,0,0,Missing\nTotal,0,0,1,\n"
        );
    }

    proptest! {
        #[test]
        fn conservation_and_monotonicity(types in proptest::collection::vec((0usize..3, 0usize..3), 0..60), extra in 0usize..2) {
            let fns = ["A", "B", "_OF_"];
            let ts = [RequirementType::Func, RequirementType::Prob, RequirementType::Other];
            let table: Vec<_> = types.iter().enumerate().map(|(i, (f, t))| row(i, fns[*f], ts[*t])).collect();
            let cat = catalog(&["A", "B"]);
            let m = build_matrix(&table, &cat).unwrap();
            prop_assert_eq!(m.rows.iter().map(CoverageRow::total).sum::<usize>(), table.len());
            let mut more = table.clone();
            more.push(row(999, "A", ts[extra]));
            let m2 = build_matrix(&more, &cat).unwrap();
            if m.row("A").unwrap().verdict == Verdict::Complete {
                prop_assert_eq!(m2.row("A").unwrap().verdict, Verdict::Complete);
            }
            let mut shuffled = table.clone();
            shuffled.reverse();
            prop_assert_eq!(build_matrix(&shuffled, &cat).unwrap(), m);
        }
    }
}
