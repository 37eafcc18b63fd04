use std::fmt::Write as _;

use super::{ClassMetrics, ConfusionMatrix};

/// Activity class names in label order.
pub const ACTIVITY_NAMES: [&str; 6] = ["up", "down", "left", "right", "circle", "cross"];

pub const METRICS_HEADER: &str = "class,precision,recall,f1";
pub const SUMMARY_HEADER: &str = "task,accuracy,ale_m,ame_m";

/// Rounds half away from zero at `decimals` places, deciding ties on the
/// 12-digit decimal expansion so that `0.125` becomes `0.13`.
pub fn round_half_up(v: f64, decimals: u32) -> f64 {
    if !v.is_finite() {
        return v;
    }
    let d = decimals as usize;
    let text = format!("{:.*}", d.max(12), v.abs());
    let (int_part, frac_part) = text.split_once('.').expect("fixed-point format");
    let kept: String = format!("{int_part}{}", &frac_part[..d]);
    let mut digits: Vec<u8> = kept.bytes().map(|b| b - b'0').collect();
    if frac_part.as_bytes()[d] >= b'5' {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let n = digits.len();
    let text: String = digits.iter().map(|&x| (x + b'0') as char).collect();
    let value = format!("{}.{}", &text[..n - d], &text[n - d..]);
    value.parse::<f64>().expect("decimal digits").copysign(v)
}

fn fmt2(v: f64) -> String {
    format!("{:.2}", round_half_up(v, 2))
}

/// `class,precision,recall,f1`, values rounded half-up to two decimals.
pub fn metrics_csv(names: &[String], m: &ClassMetrics<f64>) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for (i, name) in names.iter().enumerate() {
        let _ = writeln!(out, "{name},{},{},{}", fmt2(m.precision[i]), fmt2(m.recall[i]), fmt2(m.f1[i]));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub task: String,
    pub accuracy: Option<f64>,
    pub ale_m: Option<f64>,
    pub ame_m: Option<f64>,
}

/// `task,accuracy,ale_m,ame_m`; accuracy in percent with two decimals,
/// distances with four. Missing values are written as `NA`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    let na = |v: Option<f64>, f: &dyn Fn(f64) -> String| v.map(f).unwrap_or_else(|| "NA".into());
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.task,
            na(r.accuracy, &|a| format!("{:.2}", round_half_up(a * 100.0, 2))),
            na(r.ale_m, &|d| format!("{:.4}", round_half_up(d, 4))),
            na(r.ame_m, &|d| format!("{:.4}", round_half_up(d, 4))),
        );
    }
    out
}

/// Counts with a header row of predicted class names; rows are ground truth.
pub fn confusion_csv(names: &[String], cm: &ConfusionMatrix) -> String {
    let mut out = String::from("truth\\pred");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (t, name) in names.iter().enumerate() {
        out.push_str(name);
        for p in 0..cm.classes() {
            let _ = write!(out, ",{}", cm.get(t, p));
        }
        out.push('\n');
    }
    out
}
