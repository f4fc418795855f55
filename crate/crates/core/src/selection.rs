//! Choosing the memory model whose erasure changes are used for extraction.
//!
//! `SC` (salient changes) is the corpus mean of the share of change mass in
//! each sample's top-k sentences. BMC picks the epoch maximizing
//! `-lambda * Acc + SC`; MTEST picks the epoch with the best test accuracy.
//! Ties always go to the earliest epoch.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::erasure::{ChangeStore, ChangeVector};
use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bmc,
    Mtest,
    Max,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bmc" => Ok(Method::Bmc),
            "mtest" => Ok(Method::Mtest),
            "max" => Ok(Method::Max),
            other => Err(Error::InvalidArgument(format!("unknown selection method `{other}`"))),
        }
    }
}

/// Accuracy of one checkpoint on the test and training splits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochAccuracy {
    pub epoch: u32,
    pub test: f64,
    /// Not every caller evaluates on the training split.
    pub train: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub epoch: u32,
    pub acc_test: f64,
    pub acc_train: Option<f64>,
    pub sc: Option<f64>,
    pub bmc_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub method: Method,
    pub lambda: f64,
    pub k: usize,
    pub rows: Vec<SelectionRow>,
    pub chosen_epoch: u32,
}

impl SelectionReport {
    pub fn chosen_row(&self) -> &SelectionRow {
        self.rows
            .iter()
            .find(|r| r.epoch == self.chosen_epoch)
            .expect("chosen epoch is among the rows")
    }

    /// (train accuracy, test accuracy) of the chosen checkpoint.
    pub fn respective_acc(&self) -> (Option<f64>, f64) {
        let row = self.chosen_row();
        (row.acc_train, row.acc_test)
    }

    /// Aligned text table, chosen epoch marked with `*`.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "method={:?} lambda={} k={}",
            self.method, self.lambda, self.k
        );
        let _ = writeln!(out, "{:>6} {:>9} {:>10} {:>8} {:>9}", "epoch", "acc_test", "acc_train", "sc", "bmc");
        for r in &self.rows {
            let mark = if r.epoch == self.chosen_epoch { "*" } else { " " };
            let _ = writeln!(
                out,
                "{:>5}{} {:>9.4} {:>10} {:>8} {:>9}",
                r.epoch,
                mark,
                r.acc_test,
                fmt(r.acc_train),
                fmt(r.sc),
                fmt(r.bmc_score)
            );
        }
        out
    }
}

/// Mean over samples of (sum of the k largest changes) / (sum of all
/// changes). Samples with no change mass contribute 0.
pub fn salient_change(changes: &[ChangeVector], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if changes.is_empty() {
        return Err(Error::InvalidArgument("salient change over an empty change set".into()));
    }
    let total: f64 = changes.iter().map(|c| top_k_share(&c.values, k)).sum();
    Ok((total / changes.len() as f64).clamp(0.0, 1.0))
}

fn top_k_share(values: &[f64], k: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // one summation order for both sums keeps top <= all exactly
    let mut top = 0.0;
    let mut all = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        all += v;
        if i < k {
            top = all;
        }
    }
    if all > 0.0 {
        top / all
    } else {
        0.0
    }
}

pub fn bmc_score(acc: f64, sc: f64, lambda: f64) -> f64 {
    -lambda * acc + sc
}

/// Builds a selection report one epoch at a time, so the chosen model is
/// known as soon as training finishes.
#[derive(Debug, Clone)]
pub struct SelectionTracker {
    method: Method,
    k: usize,
    lambda: f64,
    rows: Vec<SelectionRow>,
}

impl SelectionTracker {
    pub fn new(method: Method, k: usize, lambda: f64) -> Self {
        SelectionTracker {
            method,
            k,
            lambda,
            rows: Vec::new(),
        }
    }

    /// Records one epoch. BMC needs its change vectors; MTEST uses them only
    /// to fill in the report.
    pub fn push(&mut self, acc: EpochAccuracy, changes: Option<&[ChangeVector]>) -> Result<()> {
        if !acc.test.is_finite() || acc.train.is_some_and(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite accuracy at epoch {}", acc.epoch)));
        }
        if self.rows.iter().any(|r| r.epoch == acc.epoch) {
            return Err(Error::EpochMismatch(format!("epoch {} recorded twice", acc.epoch)));
        }
        let sc = changes.map(|c| salient_change(c, self.k)).transpose()?;
        if self.method == Method::Bmc && sc.is_none() {
            return Err(Error::EpochMismatch(format!("no changes for epoch {}", acc.epoch)));
        }
        self.rows.push(SelectionRow {
            epoch: acc.epoch,
            acc_test: acc.test,
            acc_train: acc.train,
            sc,
            bmc_score: sc.map(|sc| bmc_score(acc.test, sc, self.lambda)),
        });
        Ok(())
    }

    fn key(&self, row: &SelectionRow) -> f64 {
        match self.method {
            Method::Bmc => row.bmc_score.expect("bmc rows carry a score"),
            Method::Mtest | Method::Max => row.acc_test,
        }
    }

    /// Best epoch so far.
    pub fn best(&self) -> Option<u32> {
        let mut rows: Vec<&SelectionRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.epoch);
        let mut best: Option<&SelectionRow> = None;
        for r in rows {
            if best.is_none_or(|b| self.key(r) > self.key(b)) {
                best = Some(r);
            }
        }
        best.map(|r| r.epoch)
    }

    pub fn finish(mut self) -> Result<SelectionReport> {
        let chosen_epoch = self
            .best()
            .ok_or_else(|| Error::InvalidArgument("no epochs to select from".into()))?;
        self.rows.sort_by_key(|r| r.epoch);
        Ok(SelectionReport {
            method: self.method,
            lambda: self.lambda,
            k: self.k,
            rows: self.rows,
            chosen_epoch,
        })
    }
}

/// `argmax_l (-lambda * Acc(M^l) + SC^l)`.
pub fn bmc_select(accs: &[EpochAccuracy], store: &ChangeStore, k: usize, lambda: f64) -> Result<SelectionReport> {
    let mut acc_epochs: Vec<u32> = accs.iter().map(|a| a.epoch).collect();
    acc_epochs.sort_unstable();
    let store_epochs: Vec<u32> = store.epochs().collect();
    if acc_epochs != store_epochs {
        return Err(Error::EpochMismatch(format!(
            "accuracies cover {acc_epochs:?}, changes cover {store_epochs:?}"
        )));
    }
    let mut tracker = SelectionTracker::new(Method::Bmc, k, lambda);
    for acc in accs {
        tracker.push(*acc, store.get(acc.epoch))?;
    }
    tracker.finish()
}

/// The epoch with the highest test accuracy.
pub fn mtest_select(accs: &[EpochAccuracy]) -> Result<SelectionReport> {
    let mut tracker = SelectionTracker::new(Method::Mtest, 0, 0.0);
    for acc in accs {
        tracker.push(*acc, None)?;
    }
    tracker.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(epoch: u32, values: &[f64]) -> ChangeVector {
        ChangeVector {
            sample_id: format!("s{}", values.len()),
            epoch,
            values: values.to_vec(),
        }
    }

    fn acc(epoch: u32, test: f64) -> EpochAccuracy {
        EpochAccuracy {
            epoch,
            test,
            train: Some(1.0),
        }
    }

    #[test]
    fn sc_examples() {
        assert_eq!(salient_change(&[cv(1, &[0.3, 0.2]), cv(1, &[5.0])], 2).unwrap(), 1.0);
        assert_eq!(salient_change(&[cv(1, &[1.0, 1.0, 1.0, 1.0])], 2).unwrap(), 0.5);
        let sc = salient_change(&[cv(1, &[0.9, 0.1]), cv(1, &[0.5, 0.5])], 1).unwrap();
        assert!((sc - 0.7).abs() < 1e-12);
    }

    #[test]
    fn sc_zero_mass_sample_contributes_zero() {
        let sc = salient_change(&[cv(1, &[0.0, 0.0]), cv(1, &[2.0, 0.0])], 1).unwrap();
        assert_eq!(sc, 0.5);
    }

    #[test]
    fn sc_errors() {
        assert!(salient_change(&[], 1).is_err());
        assert!(salient_change(&[cv(1, &[1.0])], 0).is_err());
    }

    #[test]
    fn bmc_hand_example() {
        let mut store = ChangeStore::new();
        // k = 1: SC is 0.4 at epoch 1 and 0.6 at epoch 2
        store.insert(1, vec![cv(1, &[0.4, 0.3, 0.3])]);
        store.insert(2, vec![cv(2, &[0.6, 0.2, 0.2])]);
        let report = bmc_select(&[acc(1, 0.9), acc(2, 0.8)], &store, 1, 0.1).unwrap();
        let scores: Vec<f64> = report.rows.iter().map(|r| r.bmc_score.unwrap()).collect();
        assert!((scores[0] - 0.31).abs() < 1e-12);
        assert!((scores[1] - 0.52).abs() < 1e-12);
        assert_eq!(report.chosen_epoch, 2);
    }

    #[test]
    fn bmc_singleton_and_mismatch() {
        let mut store = ChangeStore::new();
        store.insert(4, vec![cv(4, &[1.0])]);
        assert_eq!(bmc_select(&[acc(4, 0.5)], &store, 2, DEFAULT_LAMBDA).unwrap().chosen_epoch, 4);
        assert!(matches!(
            bmc_select(&[acc(3, 0.5)], &store, 2, DEFAULT_LAMBDA),
            Err(Error::EpochMismatch(_))
        ));
    }

    #[test]
    fn mtest_examples() {
        let r = mtest_select(&[acc(1, 0.6), acc(2, 0.7), acc(3, 0.65)]).unwrap();
        assert_eq!(r.chosen_epoch, 2);
        assert_eq!(mtest_select(&[acc(1, 0.7), acc(2, 0.7)]).unwrap().chosen_epoch, 1);
        assert!(mtest_select(&[]).is_err());
    }

    #[test]
    fn incremental_best_tracks_pushes() {
        let mut t = SelectionTracker::new(Method::Mtest, 1, 0.0);
        t.push(acc(1, 0.5), None).unwrap();
        assert_eq!(t.best(), Some(1));
        t.push(acc(2, 0.8), None).unwrap();
        assert_eq!(t.best(), Some(2));
        t.push(acc(3, 0.8), None).unwrap();
        assert_eq!(t.best(), Some(2));
        assert!(t.push(acc(3, 0.1), None).is_err());
    }

    #[test]
    fn report_table_marks_choice() {
        let r = mtest_select(&[acc(1, 0.6), acc(2, 0.7)]).unwrap();
        let table = r.render_table();
        assert!(table.lines().any(|l| l.trim_start().starts_with("2*")), "{table}");
        assert_eq!(r.respective_acc(), (Some(1.0), 0.7));
    }
}
