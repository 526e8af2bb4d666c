use std::io::Write;

use crate::eigen::Spectrum;

use super::convergence::ConvergenceRow;
use super::{FieldVariance, UqSummary};

/// Shortest round-trip representation, switching to exponent form for very small
/// or very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub const SPECTRUM_HEADER: &str = "index,lambda,freq_hz,multiplicity";
pub const SUMMARY_HEADER: &str = "cluster_id,lambda_ref,freq_ref_hz,var_lambda,t,M";
pub const CONVERGENCE_HEADER: &str = "t,cluster_id,err_mean,err_var,baseline_kind";
pub const VARIANCE_FIELD_HEADER: &str = "x,y,var_Ex,var_Ey,var_magnitude";

/// One row per returned eigenvalue.
pub fn write_spectrum_csv<W: Write>(spectrum: &Spectrum, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SPECTRUM_HEADER}")?;
    let mut index = 0;
    for c in &spectrum.clusters {
        for l in &c.eigenvalues {
            writeln!(
                out,
                "{index},{},{},{}",
                fmt_f64(*l),
                fmt_f64(crate::eigen::frequency_hz(*l)),
                c.multiplicity()
            )?;
            index += 1;
        }
    }
    Ok(())
}

/// One row per amplitude and cluster branch, in the cluster basis the summaries
/// were built from.
pub fn write_summary_csv<W: Write>(summaries: &[UqSummary], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for summary in summaries {
        for c in &summary.clusters {
            let f = fmt_f64(crate::eigen::frequency_hz(c.lambda));
            for v in &c.lambda_variance {
                writeln!(
                    out,
                    "{},{},{f},{},{},{}",
                    c.cluster_index,
                    fmt_f64(c.lambda),
                    fmt_f64(*v),
                    fmt_f64(summary.t),
                    summary.modes
                )?;
            }
        }
    }
    Ok(())
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CONVERGENCE_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.t),
            r.cluster_index,
            fmt_f64(r.err_mean),
            fmt_f64(r.err_var),
            r.baseline.as_str()
        )?;
    }
    Ok(())
}

pub fn write_variance_field_csv<W: Write>(
    field: &[FieldVariance],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{VARIANCE_FIELD_HEADER}")?;
    for p in field {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(p.x),
            fmt_f64(p.y),
            fmt_f64(p.var_ex),
            fmt_f64(p.var_ey),
            fmt_f64(p.magnitude())
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uq::ClusterUq;
    use nalgebra::DMatrix;

    #[test]
    fn number_format_round_trips() {
        for v in [
            0.0,
            1.0,
            -2.5,
            1e-30,
            4.2e-5,
            123456.789,
            3e17,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(4e-30), "4e-30");
        assert_eq!(fmt_f64(0.5), "0.5");
    }

    #[test]
    fn summary_rows() {
        let s = UqSummary {
            t: 0.1,
            modes: 1,
            clusters: vec![ClusterUq {
                cluster_index: 0,
                lambda: 4.0,
                lambda_covariance: DMatrix::from_diagonal_element(2, 2, 0.5),
                lambda_variance: vec![0.5, 0.0],
                vector_variance: DMatrix::zeros(1, 2),
            }],
        };
        let mut buf = Vec::new();
        write_summary_csv(&[s], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,4,"));
        assert!(lines[1].ends_with(",0.5,0.1,1"));
    }
}
