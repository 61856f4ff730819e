//! Evaluation protocol: EPE / Acc-S / Acc-R over dynamic-foreground,
//! static-foreground, and static-background splits with range cropping.

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::geometry::PointCloud;

/// Strict accuracy thresholds: error ≤ 0.05 m or ≤ 5% of the truth norm.
pub const ACC_STRICT: (f64, f64) = (0.05, 0.05);
/// Relaxed accuracy thresholds: error ≤ 0.1 m or ≤ 10% of the truth norm.
pub const ACC_RELAXED: (f64, f64) = (0.1, 0.1);

/// A point is dynamic when its ground-truth velocity exceeds this (m/s).
pub const DYNAMIC_SPEED: f64 = 0.5;

/// Ground-truth flow, per-point foreground annotation, and the scan gap.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub flow: FlowField,
    pub fg_mask: Vec<bool>,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    DynamicFg,
    StaticFg,
    StaticBg,
}

pub const CATEGORIES: [Category; 3] = [Category::DynamicFg, Category::StaticFg, Category::StaticBg];

impl Category {
    pub fn key(&self) -> &'static str {
        match self {
            Category::DynamicFg => "dynamic_fg",
            Category::StaticFg => "static_fg",
            Category::StaticBg => "static_bg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryMetrics {
    pub epe: f64,
    pub acc_s: f64,
    pub acc_r: f64,
}

/// Point count and metrics for one category; metrics are absent when the
/// category is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryReport {
    pub count: usize,
    pub metrics: Option<CategoryMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dynamic_fg: CategoryReport,
    pub static_fg: CategoryReport,
    pub static_bg: CategoryReport,
}

impl EvalReport {
    pub fn category(&self, c: Category) -> &CategoryReport {
        match c {
            Category::DynamicFg => &self.dynamic_fg,
            Category::StaticFg => &self.static_fg,
            Category::StaticBg => &self.static_bg,
        }
    }
}

/// Mean L2 error over the masked points.
pub fn epe(pred: &FlowField, gt: &FlowField, mask: &[bool]) -> Result<f64> {
    check_lengths(pred, gt, mask)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((p, g), &m) in pred.iter().zip(gt.iter()).zip(mask) {
        if m {
            sum += (p - g).norm();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / count as f64)
}

/// Percentage of masked points with error ≤ `abs_thresh`, or error relative
/// to the truth norm ≤ `rel_thresh`. The relative test is skipped when the
/// truth norm is zero.
pub fn accuracy(
    pred: &FlowField,
    gt: &FlowField,
    mask: &[bool],
    abs_thresh: f64,
    rel_thresh: f64,
) -> Result<f64> {
    check_lengths(pred, gt, mask)?;
    let mut hits = 0usize;
    let mut count = 0usize;
    for ((p, g), &m) in pred.iter().zip(gt.iter()).zip(mask) {
        if !m {
            continue;
        }
        count += 1;
        let err = (p - g).norm();
        let gt_norm = g.norm();
        if err <= abs_thresh || (gt_norm > 0.0 && err / gt_norm <= rel_thresh) {
            hits += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(100.0 * hits as f64 / count as f64)
}

/// Splits points by annotation and ground-truth velocity: foreground faster
/// than [`DYNAMIC_SPEED`] is dynamic, the rest of the foreground static,
/// everything unannotated background.
pub fn categorize(gt: &GroundTruth) -> Vec<Category> {
    assert!(gt.dt > 0.0, "dt must be positive");
    gt.flow
        .iter()
        .zip(&gt.fg_mask)
        .map(|(f, &fg)| {
            if !fg {
                Category::StaticBg
            } else if f.norm() / gt.dt > DYNAMIC_SPEED {
                Category::DynamicFg
            } else {
                Category::StaticFg
            }
        })
        .collect()
}

/// Mask of points inside the square |x| ≤ half_extent ∧ |y| ≤ half_extent,
/// ego at the origin.
pub fn crop_range(scan: &PointCloud, half_extent: f64) -> Vec<bool> {
    assert!(half_extent > 0.0, "half extent must be positive");
    scan.iter()
        .map(|p| p.x.abs() <= half_extent && p.y.abs() <= half_extent)
        .collect()
}

/// Crops, categorizes, and computes the three metrics per category.
pub fn evaluate(
    pred: &FlowField,
    gt: &GroundTruth,
    scan: &PointCloud,
    half_extent: f64,
) -> Result<EvalReport> {
    if pred.len() != gt.flow.len() || pred.len() != scan.len() || pred.len() != gt.fg_mask.len() {
        return Err(Error::LengthMismatch {
            context: "evaluate inputs",
            expected: scan.len(),
            actual: pred.len(),
        });
    }
    let in_range = crop_range(scan, half_extent);
    let categories = categorize(gt);

    let mut report = Vec::with_capacity(3);
    for cat in CATEGORIES {
        let mask: Vec<bool> = in_range
            .iter()
            .zip(&categories)
            .map(|(&r, c)| r && *c == cat)
            .collect();
        let count = mask.iter().filter(|&&m| m).count();
        let metrics = if count == 0 {
            None
        } else {
            Some(CategoryMetrics {
                epe: epe(pred, &gt.flow, &mask)?,
                acc_s: accuracy(pred, &gt.flow, &mask, ACC_STRICT.0, ACC_STRICT.1)?,
                acc_r: accuracy(pred, &gt.flow, &mask, ACC_RELAXED.0, ACC_RELAXED.1)?,
            })
        };
        report.push(CategoryReport { count, metrics });
    }
    Ok(EvalReport {
        dynamic_fg: report[0],
        static_fg: report[1],
        static_bg: report[2],
    })
}

fn check_lengths(pred: &FlowField, gt: &FlowField, mask: &[bool]) -> Result<()> {
    if pred.len() != gt.len() || pred.len() != mask.len() {
        return Err(Error::LengthMismatch {
            context: "flow/mask lengths",
            expected: pred.len(),
            actual: gt.len().min(mask.len()),
        });
    }
    Ok(())
}
