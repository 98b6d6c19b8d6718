//! Ranking measures with a rank cutoff K (default 10).
//!
//! For a thread with R Good comments and binary labels in ranked order:
//!
//! * AP = (1 / min(R, K)) * sum over Good ranks k <= K of precision@k
//! * RR = 1 / rank of the first Good comment within K, else 0
//! * AvgRec = mean over k = 1..K of (Good in top k) / min(R, K)
//!
//! Threads without any Good comment are left out of all three means and
//! counted separately.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::corpus::Thread;
use crate::error::{Error, Result};
use crate::ranker::RankedThread;

pub const DEFAULT_CUTOFF: usize = 10;

/// `None` when the list has no Good label.
pub fn average_precision(labels: &[bool], k: usize) -> Option<f64> {
    let r = labels.iter().filter(|&&g| g).count();
    if r == 0 {
        return None;
    }
    let mut hits = 0;
    let mut sum = 0.0;
    for (i, &g) in labels.iter().take(k).enumerate() {
        if g {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / r.min(k) as f64)
}

pub fn reciprocal_rank(labels: &[bool], k: usize) -> Option<f64> {
    if !labels.contains(&true) {
        return None;
    }
    Some(
        labels
            .iter()
            .take(k)
            .position(|&g| g)
            .map_or(0.0, |i| 1.0 / (i + 1) as f64),
    )
}

pub fn average_recall(labels: &[bool], k: usize) -> Option<f64> {
    let r = labels.iter().filter(|&&g| g).count();
    if r == 0 || k == 0 {
        return None;
    }
    let denom = r.min(k) as f64;
    let mut hits = 0;
    let mut sum = 0.0;
    for i in 0..k {
        if labels.get(i) == Some(&true) {
            hits += 1;
        }
        sum += hits as f64 / denom;
    }
    Some(sum / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub map: f64,
    pub avg_rec: f64,
    pub mrr: f64,
    pub k: usize,
    pub included: usize,
    pub excluded: usize,
}

fn mean_over<F>(rankings: &[Vec<bool>], f: F) -> Result<(f64, usize)>
where
    F: Fn(&[bool]) -> Option<f64>,
{
    let vals: Vec<f64> = rankings.iter().filter_map(|r| f(r)).collect();
    if vals.is_empty() {
        return Err(Error::Data("no thread with a Good comment to evaluate".into()));
    }
    Ok((vals.iter().sum::<f64>() / vals.len() as f64, vals.len()))
}

pub fn mean_average_precision(rankings: &[Vec<bool>], k: usize) -> Result<f64> {
    Ok(mean_over(rankings, |r| average_precision(r, k))?.0)
}

pub fn mrr(rankings: &[Vec<bool>], k: usize) -> Result<f64> {
    Ok(mean_over(rankings, |r| reciprocal_rank(r, k))?.0)
}

pub fn avg_rec(rankings: &[Vec<bool>], k: usize) -> Result<f64> {
    Ok(mean_over(rankings, |r| average_recall(r, k))?.0)
}

pub fn evaluate(rankings: &[Vec<bool>], k: usize) -> Result<Scores> {
    let (map, included) = mean_over(rankings, |r| average_precision(r, k))?;
    Ok(Scores {
        map,
        avg_rec: avg_rec(rankings, k)?,
        mrr: mrr(rankings, k)?,
        k,
        included,
        excluded: rankings.len() - included,
    })
}

/// Comment id to Good/not-Good for every comment in `threads`.
pub fn gold_map(threads: &[Thread]) -> HashMap<String, bool> {
    threads
        .iter()
        .flat_map(|t| t.comments.iter().map(|c| (c.id.clone(), c.binary_label().is_good())))
        .collect()
}

/// Gold labels of each ranking in rank order.
pub fn ranked_labels(rankings: &[RankedThread], gold: &HashMap<String, bool>) -> Result<Vec<Vec<bool>>> {
    rankings
        .iter()
        .map(|t| {
            t.comments
                .iter()
                .map(|c| {
                    gold.get(&c.comment_id)
                        .copied()
                        .ok_or_else(|| Error::Data(format!("unknown comment id {}", c.comment_id)))
                })
                .collect()
        })
        .collect()
}

pub fn evaluate_rankings(rankings: &[RankedThread], gold: &HashMap<String, bool>, k: usize) -> Result<Scores> {
    evaluate(&ranked_labels(rankings, gold)?, k)
}

/// Kendall's tau-b between scores and binary labels; `None` when either
/// side is constant.
pub fn kendall_tau_b(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n = scores.len().min(labels.len());
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut tie_x, mut tie_y) = (0i64, 0i64);
    let mut pairs = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1;
            let dx = scores[i].total_cmp(&scores[j]) as i64;
            let dy = labels[i] as i64 - labels[j] as i64;
            if dx == 0 {
                tie_x += 1;
            }
            if dy == 0 {
                tie_y += 1;
            }
            match dx * dy {
                p if p > 0 => concordant += 1,
                p if p < 0 => discordant += 1,
                _ => {}
            }
        }
    }
    let denom = (((pairs - tie_x) * (pairs - tie_y)) as f64).sqrt();
    (denom > 0.0).then(|| (concordant - discordant) as f64 / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn push(&mut self, method: impl Into<String>, scores: Scores) {
        self.rows.push(ReportRow {
            method: method.into(),
            scores,
        });
    }

    /// Rows by MAP descending, then method name.
    pub fn sorted_rows(&self) -> Vec<&ReportRow> {
        let mut rows: Vec<&ReportRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            b.scores
                .map
                .total_cmp(&a.scores.map)
                .then_with(|| a.method.cmp(&b.method))
        });
        rows
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

pub fn render_report(report: &EvalReport) -> String {
    let width = report
        .rows
        .iter()
        .map(|r| r.method.len())
        .max()
        .unwrap_or(0)
        .max("System".len());
    let mut s = format!("{:<width$}  {:>7}  {:>7}  {:>7}\n", "System", "MAP", "AvgRec", "MRR");
    for row in report.sorted_rows() {
        let _ = writeln!(
            s,
            "{:<width$}  {:>7}  {:>7}  {:>7}",
            row.method,
            pct(row.scores.map),
            pct(row.scores.avg_rec),
            pct(row.scores.mrr)
        );
    }
    s
}

/// Machine-readable lines:
/// `method \t map \t avg_rec \t mrr \t k \t included \t excluded`.
pub fn summary(report: &EvalReport) -> String {
    let mut s = String::new();
    for row in report.sorted_rows() {
        let c = &row.scores;
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.method, c.map, c.avg_rec, c.mrr, c.k, c.included, c.excluded
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: bool = true;
    const B: bool = false;

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[B, G], 10), Some(0.5));
        let ap = average_precision(&[G, B, G], 10).unwrap();
        assert!((ap - 0.5 * (1.0 + 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(average_precision(&[G, G, G], 2), Some(1.0));
        assert_eq!(average_precision(&[B, B], 10), None);
    }

    #[test]
    fn mrr_examples() {
        assert_eq!(reciprocal_rank(&[B, G], 10), Some(0.5));
        let mut late = vec![B; 10];
        late.push(G);
        assert_eq!(reciprocal_rank(&late, 10), Some(0.0));
        assert_eq!(mrr(&[vec![G], vec![G, B]], 10).unwrap(), 1.0);
    }

    #[test]
    fn avg_rec_examples() {
        assert_eq!(average_recall(&[G], 10), Some(1.0));
        assert!((average_recall(&[B, G], 10).unwrap() - 0.9).abs() < 1e-15);
        let mut worst = vec![B; 10];
        worst.extend(vec![G; 10]);
        let mut best = vec![G; 10];
        best.extend(vec![B; 10]);
        assert!(average_recall(&worst, 10).unwrap() < average_recall(&best, 10).unwrap());
    }

    #[test]
    fn map_means_and_exclusion() {
        let r = vec![vec![G], vec![B, G], vec![B, B]];
        assert_eq!(mean_average_precision(&r, 10).unwrap(), 0.75);
        let s = evaluate(&r, 10).unwrap();
        assert_eq!((s.included, s.excluded), (2, 1));
        assert!(evaluate(&[vec![B]], 10).is_err());
    }

    #[test]
    fn kendall_examples() {
        // 2 concordant pairs, one pair tied in the labels: 2 / sqrt(3 * 2)
        let tau = kendall_tau_b(&[3.0, 2.0, 1.0], &[G, B, B]).unwrap();
        assert!((tau - 2.0 / 6f64.sqrt()).abs() < 1e-15);
        assert_eq!(kendall_tau_b(&[1.0, 2.0], &[B, G]), Some(1.0));
        assert_eq!(kendall_tau_b(&[2.0, 1.0], &[B, G]), Some(-1.0));
        assert_eq!(kendall_tau_b(&[1.0, 2.0], &[G, G]), None);
    }

    #[test]
    fn report_rendering() {
        let mut rep = EvalReport::default();
        assert_eq!(render_report(&rep).lines().count(), 1);
        let s = |map| Scores {
            map,
            avg_rec: 0.5,
            mrr: 0.5,
            k: 10,
            included: 1,
            excluded: 0,
        };
        rep.push("zeta", s(0.782));
        rep.push("beta", s(0.5));
        rep.push("alpha", s(0.5));
        let text = render_report(&rep);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].starts_with("zeta") && lines[1].contains("78.20"));
        assert!(lines[2].starts_with("alpha"));
        assert!(lines[3].starts_with("beta"));
        assert_eq!(summary(&rep).lines().count(), 3);
    }
}
