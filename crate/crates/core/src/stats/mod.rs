//! Descriptive statistics with bootstrap confidence intervals.

mod bootstrap;
mod characterize;

pub use bootstrap::{bootstrap_ci, bootstrap_mean_ci};
pub use characterize::{
    action_probabilities, headline_stats, property_comparison, replied_comparison, workload_curve,
    TriageRule, WorkloadMetric, DEFAULT_MEETING_BUCKETS, DEFAULT_WORKLOAD_BUCKETS,
};

use serde::{Deserialize, Serialize};

/// Bootstrap settings shared by every table operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiConfig {
    pub resamples: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for CiConfig {
    fn default() -> Self {
        CiConfig {
            resamples: 1000,
            alpha: 0.05,
            seed: 0x0bb5_7a9c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub group: String,
    pub statistic: String,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// A named table of grouped statistics. Rows that cannot be computed are
/// omitted and explained in `notes`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatTable {
    pub name: String,
    pub rows: Vec<StatRow>,
    pub notes: Vec<String>,
}

impl StatTable {
    pub fn new(name: impl Into<String>) -> Self {
        StatTable {
            name: name.into(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn get(&self, group: &str, statistic: &str) -> Option<&StatRow> {
        self.rows
            .iter()
            .find(|r| r.group == group && r.statistic == statistic)
    }

    pub fn value(&self, group: &str, statistic: &str) -> Option<f64> {
        self.get(group, statistic).map(|r| r.value)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,statistic,value,ci_low,ci_high\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.group, r.statistic, r.value, r.ci_low, r.ci_high
            ));
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("== {} ==\n", self.name);
        let group_w = self
            .rows
            .iter()
            .map(|r| r.group.len())
            .chain(["group".len()])
            .max()
            .unwrap_or(5);
        let stat_w = self
            .rows
            .iter()
            .map(|r| r.statistic.len())
            .chain(["statistic".len()])
            .max()
            .unwrap_or(9);
        out.push_str(&format!(
            "{:<group_w$}  {:<stat_w$}  {:>10}  {:>10}  {:>10}\n",
            "group", "statistic", "value", "ci_low", "ci_high"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<group_w$}  {:<stat_w$}  {:>10.4}  {:>10.4}  {:>10.4}\n",
                r.group, r.statistic, r.value, r.ci_low, r.ci_high
            ));
        }
        for note in &self.notes {
            out.push_str(&format!("# {note}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_text_include_every_row() {
        let mut t = StatTable::new("demo");
        t.rows.push(StatRow {
            group: "a".into(),
            statistic: "rate".into(),
            value: 0.5,
            ci_low: 0.4,
            ci_high: 0.6,
        });
        t.notes.push("one note".into());
        assert!(t.to_csv().contains("a,rate,0.5,0.4,0.6"));
        let text = t.render_text();
        assert!(text.contains("demo"));
        assert!(text.contains("# one note"));
        assert_eq!(t.value("a", "rate"), Some(0.5));
        assert_eq!(t.value("a", "nope"), None);
    }
}
