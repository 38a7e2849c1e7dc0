use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::eval::EvalRow;

pub const CSV_HEADER: &str = "test,alpha,m,rho,rate,stderr,trials";
pub const LONG_CSV_HEADER: &str = "test,alpha,m,rho,metric,value";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn new(rows: Vec<EvalRow>) -> Self {
        Self { rows }
    }

    /// Wide table, one line per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.test, r.alpha, r.m, r.rho, r.rate, r.stderr, r.trials
            );
        }
        out
    }

    /// Long table with one `(metric, value)` pair per line, for plotting tools.
    pub fn to_long_csv(&self) -> String {
        let mut out = String::from(LONG_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let key = format!("{},{},{},{}", r.test, r.alpha, r.m, r.rho);
            let _ = writeln!(out, "{key},rate,{}", r.rate);
            let _ = writeln!(out, "{key},stderr,{}", r.stderr);
            let _ = writeln!(out, "{key},trials,{}", r.trials);
        }
        out
    }

    pub fn find(&self, test: &str, alpha: f64, m: usize, rho: f64) -> Option<&EvalRow> {
        self.rows
            .iter()
            .find(|r| r.test == test && r.alpha == alpha && r.m == m && r.rho == rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let report = EvalReport::new(vec![EvalRow {
            test: "ks-conf".into(),
            alpha: 0.01,
            m: 100,
            rho: 0.0,
            rate: 0.0125,
            stderr: 0.5,
            trials: 4,
        }]);
        assert_eq!(
            report.to_csv(),
            "test,alpha,m,rho,rate,stderr,trials\nks-conf,0.01,100,0,0.0125,0.5,4\n"
        );
        assert_eq!(
            report.to_long_csv(),
            "test,alpha,m,rho,metric,value\nks-conf,0.01,100,0,rate,0.0125\n\
             ks-conf,0.01,100,0,stderr,0.5\nks-conf,0.01,100,0,trials,4\n"
        );
    }
}
