//! Pixel confusion counts, IoU / precision / recall / F1 and the per-class
//! report.
//!
//! Zero-denominator conventions: precision is 1 when nothing was predicted,
//! recall is 1 when nothing was there to find, IoU is 1 when prediction and
//! ground truth are both empty, and F1 is 0 when precision and recall are
//! both 0. Under these rules `F1 = 2 IoU / (1 + IoU)` holds for every count.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_dims, BinaryMask};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            fn_: self.fn_ + rhs.fn_,
            tn: self.tn + rhs.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

pub fn confusion_counts(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    check_dims(pred.dims(), gt.dims())?;
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn iou(c: &ConfusionCounts) -> f64 {
    let denom = c.tp + c.fp + c.fn_;
    if denom == 0 {
        1.0
    } else {
        c.tp as f64 / denom as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn precision_recall_f1(c: &ConfusionCounts) -> PrecisionRecallF1 {
    let ratio = |num: u64, denom: u64| {
        if denom == 0 {
            1.0
        } else {
            num as f64 / denom as f64
        }
    };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    PrecisionRecallF1 {
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScores {
    pub category: String,
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

impl CategoryScores {
    pub fn from_counts(category: impl Into<String>, counts: ConfusionCounts) -> Self {
        let prf = precision_recall_f1(&counts);
        Self {
            category: category.into(),
            iou: iou(&counts),
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            counts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAverage {
    pub iou: f64,
    pub f1: f64,
}

/// Unweighted mean of per-category IoU and F1.
pub fn aggregate_class_average(categories: &[CategoryScores]) -> Result<ClassAverage> {
    if categories.is_empty() {
        return Err(Error::Eval("class average over zero categories".into()));
    }
    let n = categories.len() as f64;
    Ok(ClassAverage {
        iou: categories.iter().map(|c| c.iou).sum::<f64>() / n,
        f1: categories.iter().map(|c| c.f1).sum::<f64>() / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub categories: Vec<CategoryScores>,
    pub class_average: ClassAverage,
}

impl EvalReport {
    /// Scores dataset-level (summed) counts per category, in the given order.
    pub fn from_counts<I, S>(counts: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, ConfusionCounts)>,
        S: Into<String>,
    {
        let categories: Vec<CategoryScores> = counts
            .into_iter()
            .map(|(name, c)| CategoryScores::from_counts(name, c))
            .collect();
        let class_average = aggregate_class_average(&categories)?;
        Ok(Self {
            categories,
            class_average,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table, scores in percent.
    pub fn to_table(&self) -> String {
        let name_w = self
            .categories
            .iter()
            .map(|c| c.category.chars().count())
            .chain(["Class Avg".len(), "category".len()])
            .max()
            .unwrap_or(8);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>10}  {:>10}  {:>10}",
            "category", "IoU", "F1", "P", "R", "TP", "FP", "FN"
        );
        for c in &self.categories {
            let _ = writeln!(
                out,
                "{:<name_w$}  {:>6.1}  {:>6.1}  {:>6.1}  {:>6.1}  {:>10}  {:>10}  {:>10}",
                c.category,
                100.0 * c.iou,
                100.0 * c.f1,
                100.0 * c.precision,
                100.0 * c.recall,
                c.counts.tp,
                c.counts.fp,
                c.counts.fn_
            );
        }
        let _ = writeln!(
            out,
            "{:<name_w$}  {:>6.1}  {:>6.1}",
            "Class Avg",
            100.0 * self.class_average.iou,
            100.0 * self.class_average.f1
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(tp: u64, fp: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, fn_, tn: 0 }
    }

    #[test]
    fn tally_cases() {
        let gt = BinaryMask::from_rows("1100/1000/0010/0001");
        let c = confusion_counts(&gt, &gt).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (5, 0, 0, 11));

        let gt = BinaryMask::from_rows("110/100");
        let c = confusion_counts(&BinaryMask::zeros(2, 3), &gt).unwrap();
        assert_eq!(c.fn_, 3);

        let c = confusion_counts(&BinaryMask::from_rows("11/00"), &BinaryMask::from_rows("10/10"))
            .unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1, 1, 1, 1));

        assert!(confusion_counts(&BinaryMask::zeros(2, 2), &BinaryMask::zeros(2, 3)).is_err());
    }

    #[test]
    fn iou_cases() {
        assert_eq!(iou(&counts(3, 1, 1)), 0.6);
        assert_eq!(iou(&counts(0, 0, 0)), 1.0);
        assert_eq!(iou(&counts(0, 5, 0)), 0.0);
    }

    #[test]
    fn prf_cases() {
        let s = precision_recall_f1(&counts(3, 1, 1));
        assert_eq!((s.precision, s.recall, s.f1), (0.75, 0.75, 0.75));

        let s = precision_recall_f1(&counts(0, 2, 3));
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));

        let s = precision_recall_f1(&counts(0, 0, 0));
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));

        // nothing predicted, something missed
        let s = precision_recall_f1(&counts(0, 0, 4));
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 0.0, 0.0));
    }

    #[test]
    fn f1_from_reported_iou() {
        // counts with IoU exactly 0.672
        let c = counts(672, 200, 128);
        assert!((iou(&c) - 0.672).abs() < 1e-15);
        let f1 = precision_recall_f1(&c).f1;
        assert!((f1 - 2.0 * 0.672 / 1.672).abs() < 1e-12);
        assert_eq!((f1 * 1000.0).round() / 10.0, 80.4);
    }

    #[test]
    fn class_average_cases() {
        let one = vec![CategoryScores::from_counts("building", counts(3, 1, 1))];
        let avg = aggregate_class_average(&one).unwrap();
        assert_eq!((avg.iou, avg.f1), (0.6, 0.75));

        let two = vec![
            CategoryScores::from_counts("a", counts(2, 3, 0)),
            CategoryScores::from_counts("b", counts(1, 4, 0)),
        ];
        assert!((aggregate_class_average(&two).unwrap().iou - 0.3).abs() < 1e-15);

        assert!(aggregate_class_average(&[]).is_err());
    }

    #[test]
    fn report_renders() {
        let report = EvalReport::from_counts([
            ("building", counts(3, 1, 1)),
            ("low vegetation", counts(0, 0, 0)),
        ])
        .unwrap();
        let table = report.to_table();
        assert!(table.contains("low vegetation"));
        assert!(table.contains("Class Avg"));
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["categories"][0]["counts"]["fn"], 1);
        assert_eq!(json["class_average"]["iou"], 0.8);
    }
}
