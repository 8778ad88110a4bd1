use serde::Serialize;

use super::{SurveyError, SurveyTable};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnStats {
    pub column: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub std: f64,
    /// Bias-adjusted sample skewness; `None` when n < 3 or the column is constant.
    pub skewness: Option<f64>,
    /// Bias-adjusted sample excess kurtosis; `None` when n < 4 or the column is constant.
    pub kurtosis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsTable {
    pub columns: Vec<ColumnStats>,
}

impl StatsTable {
    pub fn get(&self, column: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.column == column)
    }

    /// `column,mean,std,skewness,kurtosis`; undefined moments are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("column,mean,std,skewness,kurtosis\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.columns {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.column,
                c.mean,
                c.std,
                opt(c.skewness),
                opt(c.kurtosis)
            ));
        }
        out
    }
}

/// Running central moments (Pébay's one-pass update).
#[derive(Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        let n1 = self.n;
        self.n += 1.0;
        let n = self.n;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }
}

/// Summary moments of one column. `None` for an empty slice.
pub fn summarize(name: &str, values: &[f64]) -> Option<ColumnStats> {
    if values.is_empty() {
        return None;
    }
    let mut m = Moments::default();
    values.iter().for_each(|&x| m.push(x));
    let n = values.len();
    let nf = n as f64;
    let std = if n > 1 {
        (m.m2 / (nf - 1.0)).sqrt()
    } else {
        0.0
    };

    let (mut skewness, mut kurtosis) = (None, None);
    if m.m2 > 0.0 {
        // biased moment ratios, then the usual small-sample corrections
        let var = m.m2 / nf;
        let g1 = (m.m3 / nf) / var.powf(1.5);
        let g2 = (m.m4 / nf) / (var * var) - 3.0;
        if n >= 3 {
            skewness = Some(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0));
        }
        if n >= 4 {
            kurtosis = Some(((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)));
        }
    }
    Some(ColumnStats {
        column: name.to_string(),
        n,
        mean: m.mean,
        std,
        skewness,
        kurtosis,
    })
}

pub fn descriptive_stats(table: &SurveyTable) -> Result<StatsTable, SurveyError> {
    if table.is_empty() {
        return Err(SurveyError::Empty);
    }
    let columns = table
        .columns()
        .into_iter()
        .map(|c| {
            let values = table.column(c).expect("listed columns exist");
            summarize(c.label(), &values).expect("table is non-empty")
        })
        .collect();
    Ok(StatsTable { columns })
}
