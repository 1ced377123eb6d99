use std::io::{self, Write};

use super::SimRecord;

/// Bumped whenever the column set or its order changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `# key=value` header lines followed by one row per record.
/// `meta` is written after the schema version, in order.
pub fn write_csv<W: Write>(
    mut out: W,
    meta: &[(&str, String)],
    records: &[SimRecord],
    n_outputs: usize,
    n_inputs: usize,
) -> io::Result<()> {
    writeln!(out, "# schema_version={CSV_SCHEMA_VERSION}")?;
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    let mut cols = vec!["k".to_string(), "t".to_string()];
    for (prefix, count) in [("y", n_outputs), ("r", n_outputs), ("u", n_inputs), ("du", n_inputs)] {
        cols.extend((1..=count).map(|i| format!("{prefix}_{i}")));
    }
    cols.extend(
        [
            "solve_ns",
            "m_star",
            "c_star",
            "t_l",
            "t_a",
            "t_r",
            "stationarity",
            "primal_feas",
            "dual_feas",
            "comp_slack",
            "err_vs_ref",
        ]
        .map(String::from),
    );
    writeln!(out, "{}", cols.join(","))?;

    for rec in records {
        let mut row = vec![rec.k.to_string(), float(rec.t)];
        for v in [&rec.y, &rec.r, &rec.u, &rec.du] {
            row.extend(v.iter().map(|&x| float(x)));
        }
        row.push(rec.solve_ns.to_string());
        row.push(rec.m_star.to_string());
        row.push(rec.c_star.to_string());
        row.push(rec.events.dependent_adds.to_string());
        row.push(rec.events.independent_adds.to_string());
        row.push(rec.events.removals.to_string());
        let a = &rec.accuracy;
        row.push(float(a.stationarity));
        row.push(float(a.primal_feasibility));
        row.push(float(a.dual_feasibility));
        row.push(float(a.complementary_slackness));
        row.push(a.error_vs_reference.map(float).unwrap_or_default());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
