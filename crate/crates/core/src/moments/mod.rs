//! The deformation measure and moment estimation over the parameter box.

pub mod decay;
pub mod estimate;
pub mod measure;

pub use decay::{decay_study, fit_line, lattice_h, DecayTable, SlopeFit};
pub use estimate::{estimate_moments, Estimate, MomentBudget, MomentReport, OddMoment};
pub use measure::{chi1, make_measure, DeformationMeasure};

/// One CSV row per `(h, p)`: odd moments, then `p = 2` carrying the variance.
pub fn write_moment_rows<W: std::io::Write>(reports: &[MomentReport], header: &[String], out: W) -> crate::Result<()> {
    let mut w = crate::manifest::commented_csv(out, header)?;
    w.write_record(["h", "m1", "m2", "p", "kind", "value", "error"])?;
    for r in reports {
        let row = |p: u32, kind: &str, v: f64, e: f64| {
            vec![
                format!("{:e}", r.h),
                r.m[0].to_string(),
                r.m[1].to_string(),
                p.to_string(),
                kind.to_string(),
                format!("{v:e}"),
                format!("{e:e}"),
            ]
        };
        for m in &r.odd_moments {
            w.write_record(row(m.p, "odd_moment", m.value, m.error))?;
        }
        w.write_record(row(2, "variance", r.variance.value, r.variance.error))?;
        w.write_record(row(2, "second_moment", r.second_moment_re.value, r.second_moment_re.error))?;
    }
    w.flush()?;
    Ok(())
}
