use std::io::Write;

use super::flows::MomentHierarchyState;
use crate::error::Result;

/// Writes `r, M_1..M_p, ratio_1..ratio_p` where `ratio_p` is the moment
/// divided by the supplied reference (e.g. the exact family).
pub fn write_hierarchy_csv<W: Write, F: Fn(usize, f64) -> f64>(w: W, states: &[MomentHierarchyState], reference: F) -> Result<()> {
    let p_max = states.first().map_or(0, |s| s.m.len());
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["r".to_string()];
    header.extend((1..=p_max).map(|p| format!("M{p}")));
    header.extend((1..=p_max).map(|p| format!("ratio{p}")));
    out.write_record(&header)?;
    for s in states {
        let mut row = vec![s.r.to_string()];
        row.extend(s.m.iter().map(|v| v.to_string()));
        row.extend(s.m.iter().enumerate().map(|(i, v)| (v / reference(i + 1, s.r)).to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `r` followed by named columns.
pub fn write_trajectory_csv<W: Write>(w: W, names: &[&str], r: &[f64], cols: &[Vec<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["r"];
    header.extend_from_slice(names);
    out.write_record(&header)?;
    for (i, r) in r.iter().enumerate() {
        let mut row = vec![r.to_string()];
        row.extend(cols.iter().map(|c| c[i].to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hierarchy_csv_has_ratio_columns() {
        let st = vec![MomentHierarchyState { r: 2.0, m: vec![1.0, 4.0] }];
        let mut buf = Vec::new();
        write_hierarchy_csv(&mut buf, &st, |p, _| p as f64).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("r,M1,M2,ratio1,ratio2\n2,1,4,1,2"));
    }
}
