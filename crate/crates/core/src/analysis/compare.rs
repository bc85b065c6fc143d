use serde::{Deserialize, Serialize};

use super::{max_expected_reward, reach_probability, Query};
use crate::error::Result;
use crate::model::Lmdp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub query: String,
    pub v_learned: f64,
    pub v_generating: f64,
    pub gap: f64,
}

fn evaluate(m: &Lmdp, q: &Query) -> Result<f64> {
    Ok(match q {
        Query::Reach(r) => reach_probability(m, r)?.value_at_initial,
        Query::Reward(r) => max_expected_reward(m, r)?.value_at_initial,
    })
}

/// Evaluates every query on both models.
pub fn compare_models(learned: &Lmdp, generating: &Lmdp, queries: &[Query]) -> Result<Vec<CompareRow>> {
    queries
        .iter()
        .map(|q| {
            let v_learned = evaluate(learned, q)?;
            let v_generating = evaluate(generating, q)?;
            Ok(CompareRow {
                query: q.to_string(),
                v_learned,
                v_generating,
                gap: (v_learned - v_generating).abs(),
            })
        })
        .collect()
}

pub fn rows_to_tsv(rows: &[CompareRow]) -> String {
    let mut out = String::from("query\tv_learned\tv_generating\tgap\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\n",
            r.query, r.v_learned, r.v_generating, r.gap
        ));
    }
    out
}
