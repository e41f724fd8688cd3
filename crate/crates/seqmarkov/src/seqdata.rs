//! Categorical sequence data: alphabets, rectangular sequence panels with
//! two kinds of missing values, covariate frames, and wide-format ingestion.
//!
//! A sequence panel is an N×T grid of cells over a fixed alphabet. Two
//! missing-value kinds are distinguished: [`Cell::Unknown`] marks a position
//! where the true state exists but was not observed (internal gaps allowed),
//! while [`Cell::Padding`] right-pads shorter sequences to the common grid
//! width and may only appear as a contiguous row suffix.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::ProbabilityVector;

/// Sentinel token for [`Cell::Unknown`] in serialized grids.
pub const UNKNOWN_TOKEN: &str = "·";
/// Sentinel token for [`Cell::Padding`] in serialized grids.
pub const PADDING_TOKEN: &str = "%";

/// One grid position: an observed symbol index, an unknown observation, or
/// technical right-padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Symbol(usize),
    Unknown,
    Padding,
}

impl Cell {
    pub fn is_symbol(self) -> bool {
        matches!(self, Cell::Symbol(_))
    }

    pub fn symbol(self) -> Option<usize> {
        match self {
            Cell::Symbol(m) => Some(m),
            _ => None,
        }
    }
}

/// Ordered set of distinct observed-state labels, optionally with display
/// colors. Order is significant: it fixes symbol indices everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AlphabetRepr", into = "AlphabetRepr")]
pub struct Alphabet {
    symbols: Vec<String>,
    colors: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct AlphabetRepr {
    symbols: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    colors: Option<Vec<String>>,
}

impl TryFrom<AlphabetRepr> for Alphabet {
    type Error = Error;
    fn try_from(r: AlphabetRepr) -> Result<Self> {
        match r.colors {
            Some(colors) => Alphabet::with_colors(r.symbols, colors),
            None => Alphabet::new(r.symbols),
        }
    }
}

impl From<Alphabet> for AlphabetRepr {
    fn from(a: Alphabet) -> Self {
        AlphabetRepr { symbols: a.symbols, colors: a.colors }
    }
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: Vec<S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::InvalidInput("alphabet must have at least one symbol".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &symbols {
            if s == UNKNOWN_TOKEN || s == PADDING_TOKEN {
                return Err(Error::InvalidInput(format!(
                    "symbol {s:?} collides with a reserved missing-value sentinel"
                )));
            }
            if !seen.insert(s.clone()) {
                return Err(Error::InvalidInput(format!("duplicate symbol {s:?} in alphabet")));
            }
        }
        Ok(Alphabet { symbols, colors: None })
    }

    pub fn with_colors<S: Into<String>>(symbols: Vec<S>, colors: Vec<String>) -> Result<Self> {
        let mut a = Alphabet::new(symbols)?;
        if colors.len() != a.symbols.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} colors for {} symbols",
                colors.len(),
                a.symbols.len()
            )));
        }
        a.colors = Some(colors);
        Ok(a)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.symbols[index]
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == token)
    }

    pub fn color(&self, index: usize) -> Option<&str> {
        self.colors.as_ref().map(|c| c[index].as_str())
    }

    pub fn colors(&self) -> Option<&[String]> {
        self.colors.as_deref()
    }
}

/// Rectangular panel of categorical sequences over one alphabet.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceSetRepr", into = "SequenceSetRepr")]
pub struct SequenceSet {
    alphabet: Alphabet,
    ids: Vec<String>,
    time_labels: Vec<String>,
    cells: Vec<Cell>,
    n_rows: usize,
    n_cols: usize,
}

#[derive(Serialize, Deserialize)]
struct SequenceSetRepr {
    alphabet: Alphabet,
    ids: Vec<String>,
    time_labels: Vec<String>,
    cells: Vec<Vec<String>>,
}

impl TryFrom<SequenceSetRepr> for SequenceSet {
    type Error = Error;
    fn try_from(r: SequenceSetRepr) -> Result<Self> {
        let rows = r
            .cells
            .iter()
            .map(|row| {
                row.iter()
                    .map(|tok| token_to_cell(&r.alphabet, tok))
                    .collect::<Result<Vec<Cell>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        SequenceSet::with_time_labels(r.alphabet, r.ids, r.time_labels, rows)
    }
}

impl From<SequenceSet> for SequenceSetRepr {
    fn from(s: SequenceSet) -> Self {
        let cells = (0..s.n_rows)
            .map(|i| s.row(i).iter().map(|c| cell_to_token(&s.alphabet, *c)).collect())
            .collect();
        SequenceSetRepr {
            alphabet: s.alphabet,
            ids: s.ids,
            time_labels: s.time_labels,
            cells,
        }
    }
}

fn cell_to_token(alphabet: &Alphabet, cell: Cell) -> String {
    match cell {
        Cell::Symbol(m) => alphabet.symbol(m).to_string(),
        Cell::Unknown => UNKNOWN_TOKEN.to_string(),
        Cell::Padding => PADDING_TOKEN.to_string(),
    }
}

fn token_to_cell(alphabet: &Alphabet, token: &str) -> Result<Cell> {
    match token {
        UNKNOWN_TOKEN => Ok(Cell::Unknown),
        PADDING_TOKEN => Ok(Cell::Padding),
        tok => alphabet
            .index_of(tok)
            .map(Cell::Symbol)
            .ok_or_else(|| Error::InvalidInput(format!("token {tok:?} is not in the alphabet"))),
    }
}

impl SequenceSet {
    /// Build a panel with auto-generated ids ("1", "2", ...) and time labels.
    pub fn from_rows(alphabet: Alphabet, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let ids = (1..=rows.len()).map(|i| i.to_string()).collect();
        SequenceSet::new(alphabet, ids, rows)
    }

    /// Build a panel with explicit ids and auto-generated time labels.
    pub fn new(alphabet: Alphabet, ids: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let t = rows.first().map(|r| r.len()).unwrap_or(0);
        let time_labels = (1..=t).map(|i| i.to_string()).collect();
        SequenceSet::with_time_labels(alphabet, ids, time_labels, rows)
    }

    pub fn with_time_labels(
        alphabet: Alphabet,
        ids: Vec<String>,
        time_labels: Vec<String>,
        rows: Vec<Vec<Cell>>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("sequence set needs at least one sequence".into()));
        }
        let n_cols = rows[0].len();
        if n_cols == 0 {
            return Err(Error::InvalidInput("sequence set needs at least one time point".into()));
        }
        if ids.len() != rows.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} ids for {} sequences",
                ids.len(),
                rows.len()
            )));
        }
        if time_labels.len() != n_cols {
            return Err(Error::DimensionMismatch(format!(
                "{} time labels for {} columns",
                time_labels.len(),
                n_cols
            )));
        }
        let mut cells = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::InvalidInput(format!(
                    "ragged input: row {} has {} cells, expected {}",
                    i + 1,
                    row.len(),
                    n_cols
                )));
            }
            let mut padded = false;
            for &cell in row {
                match cell {
                    Cell::Symbol(m) if m >= alphabet.len() => {
                        return Err(Error::InvalidInput(format!(
                            "symbol index {m} out of range for alphabet of size {}",
                            alphabet.len()
                        )));
                    }
                    Cell::Padding => padded = true,
                    _ if padded => {
                        return Err(Error::InvalidInput(format!(
                            "row {} has a non-padding cell after padding; padding must be a suffix",
                            i + 1
                        )));
                    }
                    _ => {}
                }
                cells.push(cell);
            }
        }
        Ok(SequenceSet { alphabet, ids, time_labels, cells, n_rows: rows.len(), n_cols })
    }

    /// Build from rows of symbol tokens, using the serialization sentinels
    /// for missing values ("·" unknown, "%" padding).
    pub fn from_labeled_rows(
        alphabet: Alphabet,
        ids: Vec<String>,
        rows: &[Vec<String>],
    ) -> Result<Self> {
        let parsed = rows
            .iter()
            .map(|row| row.iter().map(|t| token_to_cell(&alphabet, t)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        SequenceSet::new(alphabet, ids, parsed)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn time_labels(&self) -> &[String] {
        &self.time_labels
    }

    /// Number of sequences N.
    pub fn n_sequences(&self) -> usize {
        self.n_rows
    }

    /// Grid width T (including padding).
    pub fn n_periods(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        &self.cells[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Cell]> {
        (0..self.n_rows).map(|i| self.row(i))
    }

    /// Per-sequence length: the index of the first padding cell (or T).
    /// Unknown cells count toward the length.
    pub fn sequence_lengths(&self) -> Vec<usize> {
        self.rows()
            .map(|row| row.iter().position(|c| *c == Cell::Padding).unwrap_or(self.n_cols))
            .collect()
    }

    /// Count of observed (symbol) cells; the `n` used by BIC.
    pub fn observed_cell_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_symbol()).count()
    }

    /// Empirical distribution of first-column symbols. Rows whose first cell
    /// is unknown or padding are excluded.
    pub fn first_state_distribution(&self) -> Result<ProbabilityVector> {
        let m = self.alphabet.len();
        let mut counts = vec![0u64; m];
        for row in self.rows() {
            if let Cell::Symbol(s) = row[0] {
                counts[s] += 1;
            }
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Estimation("no observed first states".into()));
        }
        let entries = counts.iter().map(|&c| c as f64 / total as f64).collect();
        ProbabilityVector::new(entries, self.alphabet.symbols().to_vec())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

/// How a wide CSV/TSV file maps onto a sequence panel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestOptions {
    /// 1-based inclusive column range holding the sequence cells.
    pub seq_cols: (usize, usize),
    /// Header name of the id column; row numbers are used when absent.
    pub id_col: Option<String>,
    /// Explicit alphabet; inferred lexicographically when absent.
    pub alphabet: Option<Alphabet>,
    /// Token marking a missing cell (after trimming). Default: empty string.
    pub missing_token: String,
    /// Field delimiter; `b','` for CSV, `b'\t'` for TSV.
    pub delimiter: u8,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            seq_cols: (1, 1),
            id_col: None,
            alphabet: None,
            missing_token: String::new(),
            delimiter: b',',
        }
    }
}

/// Row/column statistics reported by ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestSummary {
    pub n_sequences: usize,
    pub min_length: usize,
    pub max_length: usize,
    pub n_unknown: usize,
    pub n_padding: usize,
    /// 0-based indices of rows with no observed cell at all (length 0 or all
    /// unknown); they are kept in the panel but excluded from estimation.
    pub all_missing_rows: Vec<usize>,
}

/// Read a wide-format delimited file into a [`SequenceSet`].
///
/// The header row is required. Within the selected columns, a missing token
/// becomes [`Cell::Padding`] when it is part of the trailing run of missing
/// cells and [`Cell::Unknown`] otherwise.
pub fn ingest_wide_csv<P: AsRef<Path>>(
    path: P,
    options: &IngestOptions,
) -> Result<(SequenceSet, IngestSummary)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;

    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::InvalidInput("empty file: no header row".into()));
    }
    let (lo, hi) = options.seq_cols;
    if lo == 0 || hi < lo || hi > headers.len() {
        return Err(Error::InvalidInput(format!(
            "sequence columns {lo}-{hi} out of range for {} header columns",
            headers.len()
        )));
    }
    let id_idx = match &options.id_col {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::InvalidInput(format!("id column {name:?} not in header")))?,
        ),
        None => None,
    };

    let mut raw_rows: Vec<Vec<Option<String>>> = Vec::new();
    let mut ids: Vec<String> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidInput(format!("ragged or malformed row: {e}")))?;
        if record.len() != headers.len() {
            return Err(Error::InvalidInput(format!(
                "ragged input: row {} has {} fields, header has {}",
                i + 1,
                record.len(),
                headers.len()
            )));
        }
        let tokens = (lo - 1..hi)
            .map(|c| {
                let tok = record.get(c).unwrap_or("");
                if tok == options.missing_token {
                    None
                } else {
                    Some(tok.to_string())
                }
            })
            .collect();
        raw_rows.push(tokens);
        ids.push(match id_idx {
            Some(c) => record.get(c).unwrap_or_default().to_string(),
            None => (i + 1).to_string(),
        });
    }
    if raw_rows.is_empty() {
        return Err(Error::InvalidInput("empty file: no data rows".into()));
    }

    let alphabet = match &options.alphabet {
        Some(a) => {
            if !options.missing_token.is_empty() && a.index_of(&options.missing_token).is_some() {
                return Err(Error::InvalidInput(
                    "alphabet contains the missing token; cells would be ambiguous".into(),
                ));
            }
            a.clone()
        }
        None => {
            let distinct: BTreeSet<String> =
                raw_rows.iter().flatten().flatten().cloned().collect();
            Alphabet::new(distinct.into_iter().collect::<Vec<_>>())?
        }
    };

    let mut rows: Vec<Vec<Cell>> = Vec::with_capacity(raw_rows.len());
    for tokens in &raw_rows {
        let last_present = tokens.iter().rposition(Option::is_some);
        let effective_len = last_present.map(|p| p + 1).unwrap_or(0);
        let row = tokens
            .iter()
            .enumerate()
            .map(|(t, tok)| match tok {
                Some(tok) => alphabet
                    .index_of(tok)
                    .map(Cell::Symbol)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown symbol token {tok:?}"))),
                None if t < effective_len => Ok(Cell::Unknown),
                None => Ok(Cell::Padding),
            })
            .collect::<Result<Vec<Cell>>>()?;
        rows.push(row);
    }

    let time_labels = (lo - 1..hi).map(|c| headers[c].to_string()).collect();
    let set = SequenceSet::with_time_labels(alphabet, ids, time_labels, rows)?;

    let lengths = set.sequence_lengths();
    let n_unknown = set.cells.iter().filter(|c| **c == Cell::Unknown).count();
    let n_padding = set.cells.iter().filter(|c| **c == Cell::Padding).count();
    let all_missing_rows = set
        .rows()
        .enumerate()
        .filter(|(_, row)| !row.iter().any(|c| c.is_symbol()))
        .map(|(i, _)| i)
        .collect();
    let summary = IngestSummary {
        n_sequences: set.n_sequences(),
        min_length: lengths.iter().copied().min().unwrap_or(0),
        max_length: lengths.iter().copied().max().unwrap_or(0),
        n_unknown,
        n_padding,
        all_missing_rows,
    };
    Ok((set, summary))
}

/// One categorical covariate: ordered levels plus a level index per subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
    pub values: Vec<usize>,
}

impl Factor {
    pub fn from_values(name: &str, levels: Vec<String>, raw: &[String]) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput(format!("factor {name:?} has no levels")));
        }
        let values = raw
            .iter()
            .map(|v| {
                levels.iter().position(|l| l == v).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "value {v:?} of factor {name:?} is not one of its declared levels"
                    ))
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(Factor { name: name.to_string(), levels, values })
    }

    pub fn level_of(&self, subject: usize) -> &str {
        &self.levels[self.values[subject]]
    }
}

/// Covariates aligned positionally with a [`SequenceSet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariateFrame {
    ids: Vec<String>,
    factors: Vec<Factor>,
}

impl CovariateFrame {
    pub fn new(ids: Vec<String>, factors: Vec<Factor>) -> Result<Self> {
        for f in &factors {
            if f.values.len() != ids.len() {
                return Err(Error::DimensionMismatch(format!(
                    "factor {:?} has {} values for {} ids",
                    f.name,
                    f.values.len(),
                    ids.len()
                )));
            }
        }
        Ok(CovariateFrame { ids, factors })
    }

    /// A frame with ids but no covariates (intercept-only designs).
    pub fn ids_only(ids: Vec<String>) -> Self {
        CovariateFrame { ids, factors: Vec::new() }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn n_subjects(&self) -> usize {
        self.ids.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, name: &str) -> Option<&Factor> {
        self.factors.iter().find(|f| f.name == name)
    }

    /// Alignment is positional: ids must match the sequence ids in order.
    pub fn check_alignment(&self, seqs: &SequenceSet) -> Result<()> {
        if self.ids != seqs.ids() {
            return Err(Error::DimensionMismatch(
                "covariate ids do not match sequence ids in order".into(),
            ));
        }
        Ok(())
    }

    /// Read covariate columns from a delimited file. Levels default to the
    /// sorted distinct values of each column; pass explicit levels to fix
    /// their order (and hence the reference level).
    pub fn from_csv<P: AsRef<Path>>(
        path: P,
        id_col: Option<&str>,
        columns: &[(String, Option<Vec<String>>)],
        delimiter: u8,
    ) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path.as_ref())?;
        let headers = reader.headers()?.clone();
        let id_idx = match id_col {
            Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
                Error::InvalidInput(format!("id column {name:?} not in header"))
            })?),
            None => None,
        };
        let col_idx = columns
            .iter()
            .map(|(name, _)| {
                headers.iter().position(|h| h == name).ok_or_else(|| {
                    Error::InvalidInput(format!("covariate column {name:?} not in header"))
                })
            })
            .collect::<Result<Vec<usize>>>()?;

        let mut ids = Vec::new();
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); columns.len()];
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            ids.push(match id_idx {
                Some(c) => record.get(c).unwrap_or_default().to_string(),
                None => (i + 1).to_string(),
            });
            for (j, &c) in col_idx.iter().enumerate() {
                raw[j].push(record.get(c).unwrap_or_default().to_string());
            }
        }
        if ids.is_empty() {
            return Err(Error::InvalidInput("empty file: no data rows".into()));
        }

        let factors = columns
            .iter()
            .zip(&raw)
            .map(|((name, levels), values)| {
                let levels = match levels {
                    Some(l) => l.clone(),
                    None => {
                        let distinct: BTreeSet<String> = values.iter().cloned().collect();
                        distinct.into_iter().collect()
                    }
                };
                Factor::from_values(name, levels, values)
            })
            .collect::<Result<Vec<Factor>>>()?;
        CovariateFrame::new(ids, factors)
    }
}
