//! Two-period panel records with missing outcomes, and CSV ingestion.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// One unit of a two-period panel. Response indicators are derived from
/// outcome presence and never stored separately.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRecord {
    pub unit_id: Arc<str>,
    pub d: bool,
    pub y1: Option<f64>,
    pub y2: Option<f64>,
    /// Auxiliary (baseline) response indicators, in column order.
    pub aux: Vec<bool>,
    /// Discrete covariate categories.
    pub x: Vec<u32>,
}

impl PanelRecord {
    pub fn new(unit_id: impl Into<Arc<str>>, d: bool, y1: Option<f64>, y2: Option<f64>) -> Self {
        PanelRecord {
            unit_id: unit_id.into(),
            d,
            y1,
            y2,
            aux: Vec::new(),
            x: Vec::new(),
        }
    }

    pub fn with_aux(mut self, aux: Vec<bool>) -> Self {
        self.aux = aux;
        self
    }

    pub fn with_covariates(mut self, x: Vec<u32>) -> Self {
        self.x = x;
        self
    }

    #[inline]
    pub fn arm(&self) -> usize {
        self.d as usize
    }

    #[inline]
    pub fn r1(&self) -> bool {
        self.y1.is_some()
    }

    #[inline]
    pub fn r2(&self) -> bool {
        self.y2.is_some()
    }

    /// Outcome change Y2 - Y1, present only for complete cases.
    #[inline]
    pub fn delta(&self) -> Option<f64> {
        match (self.y1, self.y2) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        }
    }
}

/// Declared closed range of the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeSupport {
    pub min: f64,
    pub max: f64,
}

impl OutcomeSupport {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidSupport(min, max));
        }
        Ok(OutcomeSupport { min, max })
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.min && y <= self.max
    }

    /// Largest possible |Y2 - Y1|.
    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// Validated, immutable panel. Cheap to clone; bootstrap resamples share the
/// underlying records and only carry an index vector.
#[derive(Debug, Clone)]
pub struct PanelDataset {
    base: Arc<[PanelRecord]>,
    view: Option<Arc<[u32]>>,
    support: Option<OutcomeSupport>,
    aux_arity: usize,
    covariate_arity: usize,
}

impl PanelDataset {
    pub fn new(records: Vec<PanelRecord>, support: Option<OutcomeSupport>) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyDataset)?;
        let aux_arity = first.aux.len();
        let covariate_arity = first.x.len();
        let mut arms = [false; 2];
        for (index, r) in records.iter().enumerate() {
            if r.aux.len() != aux_arity {
                return Err(Error::AuxArity {
                    index,
                    found: r.aux.len(),
                    expected: aux_arity,
                });
            }
            if r.x.len() != covariate_arity {
                return Err(Error::CovariateArity {
                    index,
                    found: r.x.len(),
                    expected: covariate_arity,
                });
            }
            for y in [r.y1, r.y2].into_iter().flatten() {
                if !y.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "record {index}: non-finite outcome {y}"
                    )));
                }
                if let Some(s) = support {
                    if !s.contains(y) {
                        return Err(Error::OutOfSupport {
                            index,
                            value: y,
                            lo: s.min,
                            hi: s.max,
                        });
                    }
                }
            }
            arms[r.arm()] = true;
        }
        if !arms[0] || !arms[1] {
            return Err(Error::SingleArm(arms[1] as u8));
        }
        Ok(PanelDataset {
            base: records.into(),
            view: None,
            support,
            aux_arity,
            covariate_arity,
        })
    }

    pub fn len(&self) -> usize {
        match &self.view {
            Some(v) => v.len(),
            None => self.base.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> &PanelRecord {
        match &self.view {
            Some(v) => &self.base[v[i] as usize],
            None => &self.base[i],
        }
    }

    pub fn iter(&self) -> Records<'_> {
        Records {
            base: &self.base,
            view: self.view.as_deref().map(|v| v.iter()),
            pos: 0,
        }
    }

    pub fn support(&self) -> Option<OutcomeSupport> {
        self.support
    }

    pub fn aux_arity(&self) -> usize {
        self.aux_arity
    }

    pub fn covariate_arity(&self) -> usize {
        self.covariate_arity
    }

    pub fn arm_sizes(&self) -> [usize; 2] {
        let mut n = [0usize; 2];
        for r in self.iter() {
            n[r.arm()] += 1;
        }
        n
    }

    pub fn has_missing(&self) -> bool {
        self.iter().any(|r| !r.r1() || !r.r2())
    }

    /// Dataset made of the records at `indices` (positions in this dataset,
    /// repeats allowed). No validation: a resample may lose an arm, in which
    /// case estimators report it.
    pub fn resample(&self, indices: &[u32]) -> PanelDataset {
        let view: Arc<[u32]> = match &self.view {
            Some(v) => indices.iter().map(|&i| v[i as usize]).collect(),
            None => indices.into(),
        };
        PanelDataset {
            base: Arc::clone(&self.base),
            view: Some(view),
            support: self.support,
            aux_arity: self.aux_arity,
            covariate_arity: self.covariate_arity,
        }
    }

    pub fn to_records(&self) -> Vec<PanelRecord> {
        self.iter().cloned().collect()
    }

    /// Same records under a different declared support.
    pub fn with_support(&self, support: Option<OutcomeSupport>) -> Result<Self> {
        PanelDataset::new(self.to_records(), support)
    }

    /// Rebuild with every record transformed by `f`.
    pub fn map_records<F: FnMut(&PanelRecord) -> PanelRecord>(&self, f: F) -> Result<Self> {
        PanelDataset::new(self.iter().map(f).collect(), self.support)
    }

    /// Keep only the first `k` auxiliary indicators and drop covariates when
    /// `keep_covariates` is false.
    pub fn project(&self, k: usize, keep_covariates: bool) -> Result<Self> {
        self.map_records(|r| {
            let mut r = r.clone();
            r.aux.truncate(k);
            if !keep_covariates {
                r.x.clear();
            }
            r
        })
    }

    pub fn concat(&self, other: &PanelDataset) -> Result<Self> {
        let mut records = self.to_records();
        records.extend(other.iter().cloned());
        PanelDataset::new(records, self.support)
    }
}

pub struct Records<'a> {
    base: &'a [PanelRecord],
    view: Option<std::slice::Iter<'a, u32>>,
    pos: usize,
}

impl<'a> Iterator for Records<'a> {
    type Item = &'a PanelRecord;

    #[inline]
    fn next(&mut self) -> Option<&'a PanelRecord> {
        match &mut self.view {
            Some(v) => v.next().map(|&i| &self.base[i as usize]),
            None => {
                let r = self.base.get(self.pos);
                self.pos += 1;
                r
            }
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = match &self.view {
            Some(v) => v.len(),
            None => self.base.len().saturating_sub(self.pos),
        };
        (n, Some(n))
    }
}

impl ExactSizeIterator for Records<'_> {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuxColumn {
    /// 0/1 response indicator.
    Indicator(String),
    /// Auxiliary variable; its indicator is 1 when the cell is present.
    Variable(String),
}

impl AuxColumn {
    pub fn name(&self) -> &str {
        match self {
            AuxColumn::Indicator(n) | AuxColumn::Variable(n) => n,
        }
    }
}

/// Names of the columns to read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub id: String,
    pub d: String,
    pub y1: String,
    pub y2: String,
    pub aux: Vec<AuxColumn>,
    pub covariates: Vec<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            id: "id".into(),
            d: "d".into(),
            y1: "y1".into(),
            y2: "y2".into(),
            aux: Vec::new(),
            covariates: Vec::new(),
        }
    }
}

fn numbered(name: &str, prefix: &str) -> bool {
    name.strip_prefix(prefix)
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

impl ColumnMapping {
    /// Standard layout: `id,d,y1,y2`, plus `auxK` indicator columns, `wK`
    /// auxiliary variables and `xJ` covariates, taken in header order.
    pub fn infer<'a, I: IntoIterator<Item = &'a str>>(headers: I) -> Self {
        let mut m = ColumnMapping::default();
        for h in headers {
            let h = h.trim();
            if numbered(h, "aux") {
                m.aux.push(AuxColumn::Indicator(h.to_string()));
            } else if numbered(h, "w") {
                m.aux.push(AuxColumn::Variable(h.to_string()));
            } else if numbered(h, "x") {
                m.covariates.push(h.to_string());
            }
        }
        m
    }
}

pub(crate) fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na")
}

fn parse_outcome(cell: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if is_missing(cell) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Parse {
            row,
            column: column.to_string(),
            value: cell.to_string(),
            expected: "a finite number",
        }),
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Read a panel from CSV using an explicit column mapping.
pub fn load_panel<R: Read>(
    source: R,
    schema: &ColumnMapping,
    support: Option<OutcomeSupport>,
) -> Result<PanelDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let id = column_index(&headers, &schema.id)?;
    let d = column_index(&headers, &schema.d)?;
    let y1 = column_index(&headers, &schema.y1)?;
    let y2 = column_index(&headers, &schema.y2)?;
    let aux = schema
        .aux
        .iter()
        .map(|a| column_index(&headers, a.name()).map(|i| (i, a)))
        .collect::<Result<Vec<_>>>()?;
    let covariates = schema
        .covariates
        .iter()
        .map(|c| column_index(&headers, c).map(|i| (i, c.as_str())))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(records.len() + 2, |p| p.line() as usize);
        let field = |i: usize| row.get(i).unwrap_or("");

        let treated = match field(d) {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::InvalidTreatment {
                    row: line,
                    value: other.to_string(),
                })
            }
        };
        let mut rec = PanelRecord::new(
            field(id),
            treated,
            parse_outcome(field(y1), line, &schema.y1)?,
            parse_outcome(field(y2), line, &schema.y2)?,
        );
        for &(i, col) in &aux {
            let cell = field(i);
            let bit = match col {
                AuxColumn::Variable(_) => !is_missing(cell),
                AuxColumn::Indicator(name) => match cell {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::InvalidIndicator {
                            row: line,
                            column: name.clone(),
                            value: other.to_string(),
                        })
                    }
                },
            };
            rec.aux.push(bit);
        }
        for &(i, name) in &covariates {
            let cell = field(i);
            let v = cell.parse::<u32>().map_err(|_| Error::Parse {
                row: line,
                column: name.to_string(),
                value: cell.to_string(),
                expected: "a non-negative integer category",
            })?;
            rec.x.push(v);
        }
        records.push(rec);
    }
    PanelDataset::new(records, support)
}

/// Read a panel whose columns follow the standard layout (see
/// [`ColumnMapping::infer`]).
pub fn load_panel_auto<R: Read>(source: R, support: Option<OutcomeSupport>) -> Result<PanelDataset> {
    let mut buf = Vec::new();
    let mut source = source;
    source.read_to_end(&mut buf)?;
    let mapping = {
        let mut reader = csv::ReaderBuilder::new().from_reader(buf.as_slice());
        let headers = reader.headers()?;
        ColumnMapping::infer(headers.iter())
    };
    load_panel(buf.as_slice(), &mapping, support)
}

pub fn read_panel_file(path: impl AsRef<Path>, support: Option<OutcomeSupport>) -> Result<PanelDataset> {
    read_panel_file_with(path, support, |_| {})
}

/// Like [`read_panel_file`], letting the caller adjust the inferred mapping.
pub fn read_panel_file_with<F: FnOnce(&mut ColumnMapping)>(
    path: impl AsRef<Path>,
    support: Option<OutcomeSupport>,
    adjust: F,
) -> Result<PanelDataset> {
    let buf = std::fs::read(path)?;
    let mut mapping = {
        let mut reader = csv::ReaderBuilder::new().from_reader(buf.as_slice());
        ColumnMapping::infer(reader.headers()?.iter())
    };
    adjust(&mut mapping);
    load_panel(buf.as_slice(), &mapping, support)
}

fn fmt_outcome(y: Option<f64>) -> String {
    match y {
        Some(v) => v.to_string(),
        None => "NA".to_string(),
    }
}

/// Write in the standard layout. Auxiliary data are written as 0/1
/// indicators; values round-trip exactly.
pub fn write_panel_csv<W: Write>(data: &PanelDataset, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["id".to_string(), "d".into(), "y1".into(), "y2".into()];
    header.extend((1..=data.aux_arity()).map(|k| format!("aux{k}")));
    header.extend((1..=data.covariate_arity()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for r in data.iter() {
        let mut row = vec![
            r.unit_id.to_string(),
            (r.d as u8).to_string(),
            fmt_outcome(r.y1),
            fmt_outcome(r.y2),
        ];
        row.extend(r.aux.iter().map(|&a| (a as u8).to_string()));
        row.extend(r.x.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
