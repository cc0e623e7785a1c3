use super::MetricsError;

/// Ratings table: one row per respondent, one column per criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyTable {
    pub criteria: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Arithmetic mean per criterion. Ratings must lie in `[1, 5]`.
pub fn survey_means(rows: &[Vec<f64>]) -> Result<Vec<f64>, MetricsError> {
    let first = rows.first().ok_or(MetricsError::EmptySurvey)?;
    let width = first.len();
    if width == 0 {
        return Err(MetricsError::EmptySurvey);
    }
    let mut sums = vec![0.0; width];
    for (row, ratings) in rows.iter().enumerate() {
        if ratings.len() != width {
            return Err(MetricsError::RaggedRow {
                row,
                expected: width,
                found: ratings.len(),
            });
        }
        for (column, (&value, sum)) in ratings.iter().zip(&mut sums).enumerate() {
            if !(1.0..=5.0).contains(&value) {
                return Err(MetricsError::RatingOutOfRange { row, column, value });
            }
            *sum += value;
        }
    }
    Ok(sums.into_iter().map(|s| s / rows.len() as f64).collect())
}

/// Reads a ratings CSV. A first row that is not entirely numeric is taken as
/// the criterion names; otherwise criteria are named `c1`, `c2`, ...
pub fn parse_survey_csv(text: &str) -> Result<SurveyTable, MetricsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut criteria = None;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| MetricsError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push(values),
            Err(_) if i == 0 => criteria = Some(record.iter().map(String::from).collect()),
            Err(e) => {
                return Err(MetricsError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    let width = rows.first().map_or(0, Vec::len);
    let criteria = criteria.unwrap_or_else(|| (1..=width).map(|c| format!("c{c}")).collect());
    Ok(SurveyTable { criteria, rows })
}
