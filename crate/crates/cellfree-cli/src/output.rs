//! CSV and manifest emission. The CSV schema is fixed: header row and
//! column order never change, decimal separator is '.', and floats use the
//! shortest round-trip representation so identical runs produce identical
//! bytes.

use std::fmt::Write as _;

use cellfree_sim::sim::AvailabilityResult;

pub const CSV_HEADER: &str =
    "sweep_param,value,eta,eta_ci_lo,eta_ci_hi,mean_log10_eps,n_placements,n_fading,seed";

pub struct CsvWriter {
    buf: String,
}

impl CsvWriter {
    pub fn new() -> Self {
        CsvWriter { buf: format!("{CSV_HEADER}\r\n") }
    }

    pub fn push_row(&mut self, sweep_param: &str, value: f64, r: &AvailabilityResult) {
        let _ = write!(
            self.buf,
            "{},{},{},{},{},{},{},{},{}\r\n",
            sweep_param,
            value,
            r.eta,
            r.wilson_ci_95.0,
            r.wilson_ci_95.1,
            r.mean_log10_eps,
            r.n_placements,
            r.n_fading,
            r.seed
        );
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_stable() {
        let w = CsvWriter::new();
        let text = w.finish();
        assert!(text.starts_with(
            "sweep_param,value,eta,eta_ci_lo,eta_ci_hi,mean_log10_eps,n_placements,n_fading,seed\r\n"
        ));
    }

    #[test]
    fn rows_use_plain_decimal_notation() {
        let mut w = CsvWriter::new();
        let r = AvailabilityResult {
            eta: 0.75,
            wilson_ci_95: (0.7, 0.8),
            per_placement_log_eps: vec![],
            mean_log10_eps: -5.25,
            n_placements: 400,
            n_fading: 1,
            seed: 7,
            elapsed_secs: 0.0,
        };
        w.push_row("K", 20.0, &r);
        let text = w.finish();
        assert!(text.contains("K,20,0.75,0.7,0.8,-5.25,400,1,7\r\n"));
    }
}
