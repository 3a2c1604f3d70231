//! Case-crossover data model.
//!
//! A [`Stratum`] holds one case and its referent rows. Strata come either
//! from a delimited file ([`ingest_dataset`]) or from dated events expanded
//! into time-stratified referent windows ([`build_time_stratified_windows`]).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StrataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("malformed stratum `{id}`: expected exactly one case row, found {cases}")]
    MalformedStratum { id: String, cases: usize },
    #[error("stratum `{id}` has fewer than two rows")]
    TooFewRows { id: String },
    #[error("design violation in stratum `{id}`: moderator `{column}` varies within the stratum")]
    DesignViolation { id: String, column: String },
    #[error("moderator `{column}` declared binary but holds value {value}")]
    NotBinary { column: String, value: f64 },
    #[error("inconsistent dimensions: {0}")]
    Dimension(String),
    #[error("covariate series for `{id}` has no observation on referent date {date}")]
    Coverage { id: String, date: NaiveDate },
    #[error("duplicate stratum id `{0}`")]
    DuplicateId(String),
}

pub type Result<T> = std::result::Result<T, StrataError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeratorKind {
    Binary,
    Continuous,
}

/// One case with its referent window.
///
/// Rows are stored column-wise: `z[t]` is the exposure at row `t` and
/// `x[t * n_confounders + j]` is confounder `j` at row `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    id: String,
    case_index: usize,
    z: Vec<f64>,
    x: Vec<f64>,
    n_confounders: usize,
    w: Vec<f64>,
}

impl Stratum {
    pub fn new(
        id: impl Into<String>,
        case_index: usize,
        rows: Vec<(f64, Vec<f64>)>,
        w: Vec<f64>,
    ) -> Result<Self> {
        let id = id.into();
        if rows.len() < 2 {
            return Err(StrataError::TooFewRows { id });
        }
        if case_index >= rows.len() {
            return Err(StrataError::Dimension(format!(
                "stratum `{id}`: case index {case_index} out of {} rows",
                rows.len()
            )));
        }
        let n_confounders = rows[0].1.len();
        let mut z = Vec::with_capacity(rows.len());
        let mut x = Vec::with_capacity(rows.len() * n_confounders);
        for (zt, xt) in rows {
            if xt.len() != n_confounders {
                return Err(StrataError::Dimension(format!(
                    "stratum `{id}`: confounder vectors of differing length"
                )));
            }
            z.push(zt);
            x.extend(xt);
        }
        Ok(Self {
            id,
            case_index,
            z,
            x,
            n_confounders,
            w,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn case_index(&self) -> usize {
        self.case_index
    }

    pub fn n_rows(&self) -> usize {
        self.z.len()
    }

    pub fn n_confounders(&self) -> usize {
        self.n_confounders
    }

    pub fn exposure(&self) -> &[f64] {
        &self.z
    }

    pub fn confounders(&self, row: usize) -> &[f64] {
        let p = self.n_confounders;
        &self.x[row * p..(row + 1) * p]
    }

    pub fn moderators(&self) -> &[f64] {
        &self.w
    }

    /// True when the exposure takes at least two distinct values in the window.
    /// Strata without exposure variation carry no information about τ.
    pub fn has_exposure_variation(&self) -> bool {
        self.z.iter().any(|&v| v != self.z[0])
    }

    /// `x_t · β` for every row.
    pub fn confounder_part(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n_rows())
            .map(|t| dot(self.confounders(t), beta))
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub strata: Vec<Stratum>,
    pub moderator_names: Vec<String>,
    pub moderator_kinds: Vec<ModeratorKind>,
    pub confounder_names: Vec<String>,
}

impl Dataset {
    /// Validates shared dimensions and binary moderator values.
    pub fn new(
        strata: Vec<Stratum>,
        moderator_names: Vec<String>,
        moderator_kinds: Vec<ModeratorKind>,
        confounder_names: Vec<String>,
    ) -> Result<Self> {
        let pw = moderator_names.len();
        let px = confounder_names.len();
        if moderator_kinds.len() != pw {
            return Err(StrataError::Dimension(
                "moderator kinds do not match moderator names".into(),
            ));
        }
        for s in &strata {
            if s.n_confounders != px || s.w.len() != pw {
                return Err(StrataError::Dimension(format!(
                    "stratum `{}` has {} confounders and {} moderators, expected {px} and {pw}",
                    s.id,
                    s.n_confounders,
                    s.w.len()
                )));
            }
            for (j, kind) in moderator_kinds.iter().enumerate() {
                if *kind == ModeratorKind::Binary && s.w[j] != 0.0 && s.w[j] != 1.0 {
                    return Err(StrataError::NotBinary {
                        column: moderator_names[j].clone(),
                        value: s.w[j],
                    });
                }
            }
        }
        Ok(Self {
            strata,
            moderator_names,
            moderator_kinds,
            confounder_names,
        })
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    pub fn n_moderators(&self) -> usize {
        self.moderator_names.len()
    }

    pub fn n_confounders(&self) -> usize {
        self.confounder_names.len()
    }

    /// Moderator vectors, one per stratum.
    pub fn moderator_matrix(&self) -> Vec<Vec<f64>> {
        self.strata.iter().map(|s| s.w.clone()).collect()
    }

    /// Indices of strata whose window has no exposure variation.
    pub fn flagged_strata(&self) -> Vec<usize> {
        self.strata
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.has_exposure_variation())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Infers binary when every value is 0 or 1.
pub fn infer_kind<'a>(values: impl IntoIterator<Item = &'a f64>) -> ModeratorKind {
    if values.into_iter().all(|&v| v == 0.0 || v == 1.0) {
        ModeratorKind::Binary
    } else {
        ModeratorKind::Continuous
    }
}

/// Assigns roles to columns of a delimited file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub stratum_id: String,
    pub case: String,
    pub exposure: String,
    /// Confounder columns. `None` selects every column starting with `x_`.
    pub confounders: Option<Vec<String>>,
    /// Moderator columns. `None` selects every column starting with `w_`.
    pub moderators: Option<Vec<String>>,
    /// Per-moderator kind overrides, keyed by column name.
    pub moderator_kinds: BTreeMap<String, ModeratorKind>,
    pub delimiter: char,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            stratum_id: "stratum_id".into(),
            case: "case".into(),
            exposure: "z".into(),
            confounders: None,
            moderators: None,
            moderator_kinds: BTreeMap::new(),
            delimiter: ',',
        }
    }
}

struct RawRow {
    case: bool,
    z: f64,
    x: Vec<f64>,
    w: Vec<f64>,
}

/// Reads a delimited file with a header row into a [`Dataset`].
///
/// Strata keep the order in which their ids first appear; rows keep file
/// order within a stratum.
pub fn ingest_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| StrataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_reader(file, schema)
}

pub fn ingest_reader(reader: impl std::io::Read, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| StrataError::MissingColumn(name.to_owned()))
    };
    let by_prefix = |prefix: &str| -> Vec<String> {
        header
            .iter()
            .filter(|h| h.starts_with(prefix))
            .cloned()
            .collect()
    };
    let id_col = col(&schema.stratum_id)?;
    let case_col = col(&schema.case)?;
    let z_col = col(&schema.exposure)?;
    let confounder_names = schema
        .confounders
        .clone()
        .unwrap_or_else(|| by_prefix("x_"));
    let moderator_names = schema.moderators.clone().unwrap_or_else(|| by_prefix("w_"));
    let x_cols = confounder_names
        .iter()
        .map(|n| col(n))
        .collect::<Result<Vec<_>>>()?;
    let w_cols = moderator_names
        .iter()
        .map(|n| col(n))
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<RawRow>> = HashMap::new();
    for (i, record) in rdr.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let record = record?;
        let field = |c: usize, name: &str| -> Result<f64> {
            let raw = record.get(c).unwrap_or("");
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan")
            {
                return Err(StrataError::Parse {
                    row: line,
                    column: name.to_owned(),
                    message: "missing value".into(),
                });
            }
            raw.parse::<f64>().map_err(|e| StrataError::Parse {
                row: line,
                column: name.to_owned(),
                message: format!("`{raw}`: {e}"),
            })
        };
        let id = record.get(id_col).unwrap_or("").to_owned();
        if id.is_empty() {
            return Err(StrataError::Parse {
                row: line,
                column: schema.stratum_id.clone(),
                message: "missing value".into(),
            });
        }
        let case = field(case_col, &schema.case)?;
        if case != 0.0 && case != 1.0 {
            return Err(StrataError::Parse {
                row: line,
                column: schema.case.clone(),
                message: format!("case indicator must be 0 or 1, got {case}"),
            });
        }
        let z = field(z_col, &schema.exposure)?;
        let x = x_cols
            .iter()
            .zip(&confounder_names)
            .map(|(&c, n)| field(c, n))
            .collect::<Result<Vec<_>>>()?;
        let w = w_cols
            .iter()
            .zip(&moderator_names)
            .map(|(&c, n)| field(c, n))
            .collect::<Result<Vec<_>>>()?;
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push(RawRow {
            case: case == 1.0,
            z,
            x,
            w,
        });
    }

    let mut strata = Vec::with_capacity(order.len());
    for id in order {
        let rows = groups.remove(&id).expect("grouped id");
        let cases: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.case)
            .map(|(t, _)| t)
            .collect();
        if cases.len() != 1 {
            return Err(StrataError::MalformedStratum {
                id,
                cases: cases.len(),
            });
        }
        let w = rows[0].w.clone();
        for r in &rows[1..] {
            if let Some(j) = (0..w.len()).find(|&j| r.w[j] != w[j]) {
                return Err(StrataError::DesignViolation {
                    id,
                    column: moderator_names[j].clone(),
                });
            }
        }
        let rows = rows.into_iter().map(|r| (r.z, r.x)).collect();
        strata.push(Stratum::new(id, cases[0], rows, w)?);
    }

    let moderator_kinds = moderator_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            schema
                .moderator_kinds
                .get(name)
                .copied()
                .unwrap_or_else(|| infer_kind(strata.iter().map(|s| &s.w[j])))
        })
        .collect();
    Dataset::new(strata, moderator_names, moderator_kinds, confounder_names)
}

/// Writes `data` in the layout [`ingest_reader`] reads with the default
/// [`Schema`]: one row per day, moderators repeated on every row. Floats are
/// printed in shortest round-trip form, so reading back is exact.
pub fn write_dataset(writer: impl std::io::Write, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["stratum_id".to_string(), "case".into(), "z".into()];
    header.extend(data.confounder_names.iter().cloned());
    header.extend(data.moderator_names.iter().cloned());
    w.write_record(&header)?;
    for s in &data.strata {
        for t in 0..s.n_rows() {
            let mut rec = vec![
                s.id().to_string(),
                u8::from(t == s.case_index()).to_string(),
                s.exposure()[t].to_string(),
            ];
            rec.extend(s.confounders(t).iter().map(f64::to_string));
            rec.extend(s.moderators().iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Exposure and confounders observed on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub z: f64,
    pub x: Vec<f64>,
}

/// A dated event with the covariate streams needed to build its window.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseEvent {
    pub id: String,
    pub date: NaiveDate,
    pub moderators: Vec<f64>,
    pub series: BTreeMap<NaiveDate, Observation>,
}

/// Every date in the same calendar month and year as `date` that falls on
/// the same weekday, in chronological order (including `date` itself).
pub fn time_stratified_window(date: NaiveDate) -> Vec<NaiveDate> {
    let mut day = date.day0() % 7;
    let mut out = Vec::with_capacity(5);
    while let Some(d) = NaiveDate::from_ymd_opt(date.year(), date.month(), day + 1) {
        out.push(d);
        day += 7;
    }
    out
}

/// Names attached to the columns produced by [`build_time_stratified_windows`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnNames {
    pub confounders: Vec<String>,
    pub moderators: Vec<String>,
}

/// Expands each event into a stratum whose rows are the event date and every
/// other same-weekday date of its calendar month. Strata are ordered by id, so
/// the result does not depend on the order of `events`.
pub fn build_time_stratified_windows(events: &[CaseEvent], names: &ColumnNames) -> Result<Dataset> {
    let mut strata = Vec::with_capacity(events.len());
    for ev in events {
        let dates = time_stratified_window(ev.date);
        let case_index = dates
            .iter()
            .position(|&d| d == ev.date)
            .expect("event date lies in its own window");
        let rows = dates
            .iter()
            .map(|d| {
                ev.series
                    .get(d)
                    .map(|o| (o.z, o.x.clone()))
                    .ok_or_else(|| StrataError::Coverage {
                        id: ev.id.clone(),
                        date: *d,
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        strata.push(Stratum::new(ev.id.clone(), case_index, rows, ev.moderators.clone())?);
    }
    strata.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(pair) = strata.windows(2).find(|p| p[0].id == p[1].id) {
        return Err(StrataError::DuplicateId(pair[0].id.clone()));
    }
    let pw = names.moderators.len();
    let kinds = (0..pw)
        .map(|j| infer_kind(strata.iter().map(|s| &s.w[j])))
        .collect();
    Dataset::new(
        strata,
        names.moderators.clone(),
        kinds,
        names.confounders.clone(),
    )
}
