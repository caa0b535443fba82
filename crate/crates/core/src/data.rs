//! Price ingestion, log-return transform and synthetic QGARCH series.

use std::io::{Read, Write};
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{stream_rng, SIMULATION_STREAM};

/// Which CSV column holds the series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl Default for Column {
    fn default() -> Self {
        Column::Index(0)
    }
}

impl FromStr for Column {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    timestamps: Option<Vec<String>>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(prices: Vec<f64>, timestamps: Option<Vec<String>>) -> Result<Self> {
        if prices.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 prices, got {}",
                prices.len()
            )));
        }
        if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("price must be positive, got {}", prices[i]),
            });
        }
        if let Some(ts) = &timestamps {
            if ts.len() != prices.len() {
                return Err(Error::domain("timestamp and price counts differ"));
            }
        }
        Ok(PriceSeries { timestamps, prices })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Demeaned returns. The sample mean of `values` is zero up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    values: Vec<f64>,
}

impl ReturnSeries {
    /// Subtracts the sample mean from `raw`.
    pub fn from_raw(mut raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InsufficientData("return series is empty".into()));
        }
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("non-finite return {}", raw[i]),
            });
        }
        // second pass removes the rounding residue of the first
        for _ in 0..2 {
            let m = mean(&raw);
            raw.iter_mut().for_each(|v| *v -= m);
        }
        Ok(ReturnSeries { values: raw })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Second moment about zero, divisor `n`.
    pub fn sample_variance(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64
    }

    /// One-column CSV with a `return` header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["return"])?;
        for v in &self.values {
            w.write_record([v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Reads one numeric column of a comma-delimited file.
///
/// A header row is assumed when the selected column of the first row does
/// not parse as a number. Returned rows are 1-based file line numbers.
fn read_column<R: Read>(source: R, column: &Column) -> Result<Vec<(usize, f64, Option<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut records = reader.records().enumerate();
    let mut index = match column {
        Column::Index(i) => Some(*i),
        Column::Name(_) => None,
    };
    let mut out = Vec::new();

    let mut pending = None;
    if let Some((line, first)) = records.next() {
        let first = first?;
        let looks_like_header = match index {
            Some(i) => first.get(i).is_some_and(|f| f.parse::<f64>().is_err()),
            None => true,
        };
        if looks_like_header {
            if let Column::Name(name) = column {
                index = first.iter().position(|f| f == name);
                if index.is_none() {
                    return Err(Error::Parse {
                        row: line + 1,
                        message: format!("no column named '{name}' in header"),
                    });
                }
            }
        } else {
            pending = Some((line, first));
        }
    }
    let index = index.expect("column resolved");

    let rows = pending
        .into_iter()
        .map(Ok)
        .chain(records.map(|(line, r)| r.map(|r| (line, r))));
    for row in rows {
        let (line, record) = row?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = record.get(index).ok_or_else(|| Error::Parse {
            row: line + 1,
            message: format!("missing column {index}"),
        })?;
        let value: f64 = field.parse().map_err(|_| Error::Parse {
            row: line + 1,
            message: format!("'{field}' is not a number"),
        })?;
        let label = (index != 0).then(|| record.get(0).unwrap_or_default().to_string());
        out.push((line + 1, value, label));
    }
    Ok(out)
}

pub fn load_prices<R: Read>(source: R, column: &Column) -> Result<PriceSeries> {
    let rows = read_column(source, column)?;
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 price rows, got {}",
            rows.len()
        )));
    }
    if let Some((line, value, _)) = rows.iter().find(|(_, v, _)| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Parse {
            row: *line,
            message: format!("price must be positive, got {value}"),
        });
    }
    let timestamps = rows
        .iter()
        .map(|(_, _, label)| label.clone())
        .collect::<Option<Vec<_>>>();
    let prices = rows.into_iter().map(|(_, v, _)| v).collect();
    PriceSeries::new(prices, timestamps)
}

/// Reads a column of returns (any sign) and demeans it.
pub fn load_returns<R: Read>(source: R, column: &Column) -> Result<ReturnSeries> {
    let rows = read_column(source, column)?;
    ReturnSeries::from_raw(rows.into_iter().map(|(_, v, _)| v).collect())
}

/// Percent log returns `100 (ln(p_{i+1}/p_i) - s)`, where `s` is the mean
/// log ratio.
pub fn to_returns(prices: &PriceSeries) -> ReturnSeries {
    let log_ratios: Vec<f64> = prices
        .prices
        .windows(2)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    let values = log_ratios.into_iter().map(|r| 100.0 * r).collect();
    ReturnSeries::from_raw(values).expect("at least one finite log ratio")
}

/// Raw QGARCH path `y_t = sigma_t eps_t` with `eps_t ~ N(0, 1)`, started
/// from `sigma_1^2 = sigma1_sq`.
pub fn simulate_qgarch_raw(params: &ModelParams, n: usize, sigma1_sq: f64, seed: u64) -> Result<Vec<f64>> {
    params.check_support()?;
    if n == 0 {
        return Err(Error::domain("cannot simulate an empty series"));
    }
    if !(sigma1_sq > 0.0 && sigma1_sq.is_finite()) {
        return Err(Error::domain(format!("initial variance must be positive, got {sigma1_sq}")));
    }
    let mut rng = stream_rng(seed, SIMULATION_STREAM);
    let mut var = sigma1_sq;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let eps: f64 = StandardNormal.sample(&mut rng);
        let y = var.sqrt() * eps;
        out.push(y);
        var = params.omega + params.gamma * y + params.alpha * y * y + params.beta * var;
    }
    Ok(out)
}

/// Simulated QGARCH returns, demeaned like observed data.
pub fn simulate_qgarch(params: &ModelParams, n: usize, sigma1_sq: f64, seed: u64) -> Result<ReturnSeries> {
    ReturnSeries::from_raw(simulate_qgarch_raw(params, n, sigma1_sq, seed)?)
}
