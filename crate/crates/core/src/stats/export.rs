//! CSV tables. Floats carry 6 significant digits in `%g` style; JSON exports
//! elsewhere keep full precision.

use super::ks::KsHeatmap;
use super::summary::ClassRow;
use crate::{Error, Result};

/// `%g`-style formatting with 6 significant digits.
pub fn fmt6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_owned()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Builds a CSV document from a header and string rows.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

pub fn class_table_csv(rows: &[ClassRow]) -> Result<String> {
    csv_table(
        &[
            "method", "class", "n", "mean", "median", "q1", "q3", "min", "max", "std",
        ],
        rows.iter().map(|r| {
            let s = &r.summary;
            let mut out = vec![r.method.clone(), r.class.clone(), s.n.to_string()];
            out.extend([s.mean, s.median, s.q1, s.q3, s.min, s.max, s.std].map(fmt6));
            out
        }),
    )
}

pub fn heatmap_csv(h: &KsHeatmap) -> Result<String> {
    let mut header = vec!["method"];
    header.extend(h.methods.iter().map(String::as_str));
    csv_table(
        &header,
        h.methods.iter().zip(&h.counts).map(|(m, row)| {
            let mut out = vec![m.clone()];
            out.extend(row.iter().map(usize::to_string));
            out
        }),
    )
}

/// One row per (method, class): bin counts over `[lo, hi]`.
pub fn histogram_csv(rows: &[(String, String, Vec<usize>)], lo: f64, hi: f64) -> Result<String> {
    let bins = rows.first().map_or(0, |r| r.2.len());
    let width = (hi - lo) / bins.max(1) as f64;
    let labels: Vec<String> = (0..bins).map(|i| fmt6(lo + i as f64 * width)).collect();
    let mut header = vec!["method", "class"];
    header.extend(labels.iter().map(String::as_str));
    csv_table(
        &header,
        rows.iter().map(|(m, c, counts)| {
            let mut out = vec![m.clone(), c.clone()];
            out.extend(counts.iter().map(usize::to_string));
            out
        }),
    )
}

/// A curve family sharing one x axis: `x, series_1, series_2, ...`.
pub fn curves_csv(x_label: &str, xs: &[f64], series: &[(String, Vec<f64>)]) -> Result<String> {
    let mut header = vec![x_label];
    header.extend(series.iter().map(|s| s.0.as_str()));
    csv_table(
        &header,
        xs.iter().enumerate().map(|(i, &x)| {
            let mut out = vec![fmt6(x)];
            out.extend(series.iter().map(|s| fmt6(s.1[i])));
            out
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt6_matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (100.0, "100"),
            (1.0 / 3.0, "0.333333"),
            (2.0 / 3.0, "0.666667"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (0.0001234567, "0.000123457"),
            (0.00001234567, "1.23457e-05"),
            (-0.25, "-0.25"),
            (9.9999996, "10"),
            (99.99, "99.99"),
        ];
        for (v, want) in cases {
            assert_eq!(fmt6(v), want, "{v}");
        }
    }

    #[test]
    fn heatmap_layout() {
        let h = KsHeatmap {
            methods: vec!["a".into(), "b".into()],
            counts: vec![vec![3, 1], vec![1, 3]],
            classes: vec![],
            skipped_classes: vec![],
        };
        assert_eq!(heatmap_csv(&h).unwrap(), "method,a,b\na,3,1\nb,1,3\n");
    }

    #[test]
    fn curves_layout() {
        let csv = curves_csv("d", &[0.01, 0.02], &[("m".into(), vec![50.0, 2.0 / 3.0])]).unwrap();
        assert_eq!(csv, "d,m\n0.01,50\n0.02,0.666667\n");
    }
}
