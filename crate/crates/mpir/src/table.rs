//! Rate tables: achievable rate, capacity upper bound, gap and (when
//! `D | K`) the capacity, as exact fractions.

use std::fmt::Write;

use mpir_core::{Params, RateReport, Rational};

/// Rates of the earlier scalar-linear scheme for `N = D + 1`, as published.
/// Embedded data only; nothing here is computed.
pub const PRIOR_PUBLISHED: &[(usize, &[(usize, &str)])] = &[
    (2, &[(3, "6/7"), (4, "3/4"), (5, "42/59"), (6, "9/13"), (7, "156/229"), (8, "27/40"), (9, "1216/1811")]),
    (3, &[(4, "12/13"), (5, "6/7"), (6, "4/5"), (7, "324/415"), (8, "876/1139"), (9, "16/21"), (10, "1727/2280")]),
    (4, &[(5, "20/21"), (6, "10/11"), (7, "20/23"), (8, "5/6"), (9, "605/736"), (10, "883/1084"), (11, "953/1177")]),
];

pub fn prior_published(d: usize, k: usize) -> Option<&'static str> {
    PRIOR_PUBLISHED.iter().find(|(dd, _)| *dd == d)?.1.iter().find(|(kk, _)| *kk == k).map(|(_, r)| *r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateRow {
    pub k: usize,
    pub rate: Rational,
    pub upper_bound: Rational,
    pub gap: Rational,
    pub capacity: Option<Rational>,
    pub prior: Option<&'static str>,
}

pub fn rate_row(d: usize, k: usize) -> mpir_core::Result<RateRow> {
    let r = RateReport::new(&Params::with_default_field(k, d, 1)?)?;
    Ok(RateRow {
        k,
        rate: r.rate,
        upper_bound: r.upper_bound,
        gap: r.gap,
        capacity: r.capacity_if_divisible,
        prior: prior_published(d, k),
    })
}

pub fn rate_table(d: usize, k_min: usize, k_max: usize) -> mpir_core::Result<Vec<RateRow>> {
    (k_min..=k_max).map(|k| rate_row(d, k)).collect()
}

const HEADER: [&str; 6] = ["K", "rate", "upper_bound", "gap", "capacity_if_divisible", "prior_scheme_rate_published"];

fn cells(row: &RateRow) -> [String; 6] {
    [
        row.k.to_string(),
        row.rate.to_string(),
        row.upper_bound.to_string(),
        row.gap.to_string(),
        row.capacity.as_ref().map(ToString::to_string).unwrap_or_default(),
        row.prior.unwrap_or_default().to_string(),
    ]
}

pub fn render(rows: &[RateRow], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            writeln!(out, "{}", HEADER.join(",")).unwrap();
            for row in rows {
                writeln!(out, "{}", cells(row).join(",")).unwrap();
            }
        }
        Format::Markdown => {
            writeln!(out, "| {} |", HEADER.join(" | ")).unwrap();
            writeln!(out, "|{}", "---|".repeat(HEADER.len())).unwrap();
            for row in rows {
                let c = cells(row).map(|s| if s.is_empty() { "-".to_string() } else { s });
                writeln!(out, "| {} |", c.join(" | ")).unwrap();
            }
        }
    }
    out
}
