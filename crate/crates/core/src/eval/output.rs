use std::fmt::Write;

use super::EvalReport;

/// Aligned-column summary, one line per report.
pub fn report_table(reports: &[EvalReport]) -> String {
    let header = ["predictor", "n", "mean_abs_error", "ci95", "excluded", "adjusted", "dataset"];
    let rows: Vec<[String; 7]> = reports
        .iter()
        .map(|r| {
            [
                r.meta.predictor.clone(),
                r.n.to_string(),
                format!("{:.3}", r.mean_abs_error),
                format!("{:.3}", r.ci_half_width),
                r.meta.excluded.to_string(),
                r.meta.adjusted_count.to_string(),
                r.meta.dataset.clone(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let text: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(c, (cell, w))| if c == 0 || c == 6 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
            .collect();
        writeln!(out, "{}", text.join("  ").trim_end()).unwrap();
    };
    line(&header);
    for row in &rows {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// `predictor,index,abs_error` rows for every scored pair.
pub fn errors_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("predictor,index,abs_error\n");
    for r in reports {
        for (i, e) in r.per_pair_errors.iter().enumerate() {
            writeln!(out, "{},{i},{e}", r.meta.predictor).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{aggregate_report, ReportMeta};

    fn report(name: &str, errors: &[u64]) -> EvalReport {
        aggregate_report(
            errors,
            ReportMeta {
                predictor: name.into(),
                dataset: "toy".into(),
                ..ReportMeta::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn table_has_aligned_rows() {
        let t = report_table(&[report("argmax", &[0, 3, 6]), report("naive", &[15])]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("argmax"));
        assert!(lines[1].contains("3.000") && lines[1].contains("3.395"));
        let col = lines[0].find("mean_abs_error").unwrap() + "mean_abs_error".len();
        assert!(lines[1..].iter().all(|l| l[..col].ends_with("000")));
    }

    #[test]
    fn csv_lists_every_error() {
        let csv = errors_csv(&[report("dtw", &[1, 2])]);
        assert_eq!(csv, "predictor,index,abs_error\ndtw,0,1\ndtw,1,2\n");
    }
}
