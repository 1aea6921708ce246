//! Annotation data model: labels, scales, the items × annotators matrix,
//! long-format ingestion and dataset filtering.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::MatrixError;

/// Level of measurement. Selects the difference function used by alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Nominal,
    Ordinal,
    Interval,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Nominal => "nominal",
            Scale::Ordinal => "ordinal",
            Scale::Interval => "interval",
        })
    }
}

impl FromStr for Scale {
    type Err = MatrixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nominal" => Ok(Scale::Nominal),
            "ordinal" => Ok(Scale::Ordinal),
            "interval" => Ok(Scale::Interval),
            other => Err(MatrixError::UnknownScale(other.to_string())),
        }
    }
}

/// A label, stored as an index into the matrix alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label(pub u32);

impl Label {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered set of distinct label texts, with numeric magnitudes when every
/// label parses as a number.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    labels: Vec<String>,
    values: Option<Vec<f64>>,
}

impl Alphabet {
    /// Builds an alphabet in the given order. Duplicates are rejected.
    pub fn new(labels: Vec<String>) -> Result<Self, MatrixError> {
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(MatrixError::DuplicateLabel(l.clone()));
            }
        }
        if labels.is_empty() {
            return Err(MatrixError::EmptyAlphabet);
        }
        let values = labels
            .iter()
            .map(|l| parse_number(l))
            .collect::<Option<Vec<f64>>>();
        Ok(Self { labels, values })
    }

    /// Sorts the distinct labels: numerically when all are numeric,
    /// lexicographically otherwise.
    pub fn from_observed<'a, I>(observed: I) -> Result<Self, MatrixError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let distinct: BTreeSet<&str> = observed.into_iter().collect();
        let mut labels: Vec<String> = distinct.into_iter().map(str::to_string).collect();
        if labels.iter().all(|l| parse_number(l).is_some()) {
            labels.sort_by(|a, b| {
                parse_number(a)
                    .unwrap()
                    .total_cmp(&parse_number(b).unwrap())
                    .then_with(|| a.cmp(b))
            });
        }
        Self::new(labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Numeric magnitudes, if every label is numeric.
    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn text(&self, label: Label) -> &str {
        &self.labels[label.index()]
    }

    /// Resolves a label text. Exact text match first, then numeric equality
    /// ("3" matches "3.0") for numeric alphabets.
    pub fn lookup(&self, text: &str) -> Option<Label> {
        let text = text.trim();
        if let Some(pos) = self.labels.iter().position(|l| l == text) {
            return Some(Label(pos as u32));
        }
        let v = parse_number(text)?;
        let values = self.values.as_ref()?;
        values.iter().position(|&x| x == v).map(|p| Label(p as u32))
    }
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Items × annotators grid of optional labels.
///
/// Cells are stored row-major (item-major). Absent cells are `None`; the
/// pipeline never imputes them.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationMatrix {
    scale: Scale,
    alphabet: Alphabet,
    items: Vec<String>,
    annotators: Vec<String>,
    cells: Vec<Option<Label>>,
}

impl AnnotationMatrix {
    /// Validates and builds a matrix. `cells` has `items.len() * annotators.len()`
    /// entries in item-major order.
    pub fn new(
        scale: Scale,
        alphabet: Alphabet,
        items: Vec<String>,
        annotators: Vec<String>,
        cells: Vec<Option<Label>>,
    ) -> Result<Self, MatrixError> {
        if items.is_empty() {
            return Err(MatrixError::NoItems);
        }
        if annotators.len() < 2 {
            return Err(MatrixError::TooFewAnnotators(annotators.len()));
        }
        if cells.len() != items.len() * annotators.len() {
            return Err(MatrixError::Shape {
                expected: items.len() * annotators.len(),
                got: cells.len(),
            });
        }
        check_unique("item", &items)?;
        check_unique("annotator", &annotators)?;
        if scale == Scale::Interval && alphabet.values().is_none() {
            return Err(MatrixError::NonNumericInterval);
        }
        if let Some(bad) = cells.iter().flatten().find(|l| l.index() >= alphabet.len()) {
            return Err(MatrixError::LabelOutOfAlphabet(bad.0.to_string()));
        }
        let m = Self {
            scale,
            alphabet,
            items,
            annotators,
            cells,
        };
        if !(0..m.n_items()).any(|k| m.present_count(k) >= 2) {
            return Err(MatrixError::NoPairableItem);
        }
        Ok(m)
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    /// Same cells, different level of measurement.
    pub fn with_scale(&self, scale: Scale) -> Result<Self, MatrixError> {
        if scale == Scale::Interval && self.alphabet.values().is_none() {
            return Err(MatrixError::NonNumericInterval);
        }
        let mut m = self.clone();
        m.scale = scale;
        Ok(m)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_annotators(&self) -> usize {
        self.annotators.len()
    }

    #[inline]
    pub fn get(&self, item: usize, annotator: usize) -> Option<Label> {
        self.cells[item * self.annotators.len() + annotator]
    }

    /// Labels of one item, one slot per annotator.
    pub fn row(&self, item: usize) -> &[Option<Label>] {
        let i = self.annotators.len();
        &self.cells[item * i..(item + 1) * i]
    }

    pub fn present_count(&self, item: usize) -> usize {
        self.row(item).iter().filter(|c| c.is_some()).count()
    }

    pub fn annotator_index(&self, id: &str) -> Option<usize> {
        self.annotators.iter().position(|a| a == id)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|a| a == id)
    }

    /// Present cells as `(item, annotator, label)`, item-major.
    pub fn present_cells(&self) -> impl Iterator<Item = (usize, usize, Label)> + '_ {
        let i = self.annotators.len();
        self.cells
            .iter()
            .enumerate()
            .filter_map(move |(idx, c)| c.map(|l| (idx / i, idx % i, l)))
    }

    #[cfg(test)]
    pub(crate) fn cells(&self) -> &[Option<Label>] {
        &self.cells
    }

    /// Copy of this matrix with one annotator's column replaced.
    pub(crate) fn with_column(&self, annotator: usize, column: &[Option<Label>]) -> Self {
        let i = self.annotators.len();
        let mut cells = self.cells.clone();
        for (k, c) in column.iter().enumerate() {
            cells[k * i + annotator] = *c;
        }
        Self {
            cells,
            ..self.clone()
        }
    }

    /// Per-item label counts (`n_items × |alphabet|`, item-major).
    pub fn label_tallies(&self) -> Vec<u32> {
        let k = self.alphabet.len();
        let mut out = vec![0u32; self.n_items() * k];
        for (item, _, label) in self.present_cells() {
            out[item * k + label.index()] += 1;
        }
        out
    }

    /// Sub-matrix over a subset of annotators (kept in this matrix's order).
    /// The alphabet is preserved.
    pub fn restrict_annotators(&self, keep: &BTreeSet<String>) -> Result<Self, MatrixError> {
        for id in keep {
            if self.annotator_index(id).is_none() {
                return Err(MatrixError::UnknownAnnotator(id.clone()));
            }
        }
        let cols: Vec<usize> = (0..self.n_annotators())
            .filter(|&a| keep.contains(&self.annotators[a]))
            .collect();
        self.select(&(0..self.n_items()).collect::<Vec<_>>(), &cols)
    }

    /// Sub-matrix over the given item and annotator positions, in the given order.
    pub fn select(&self, items: &[usize], annotators: &[usize]) -> Result<Self, MatrixError> {
        let mut cells = Vec::with_capacity(items.len() * annotators.len());
        for &k in items {
            for &a in annotators {
                cells.push(self.get(k, a));
            }
        }
        Self::new(
            self.scale,
            self.alphabet.clone(),
            items.iter().map(|&k| self.items[k].clone()).collect(),
            annotators.iter().map(|&a| self.annotators[a].clone()).collect(),
            cells,
        )
    }

    /// Canonical JSON document.
    pub fn to_document(&self) -> MatrixDocument {
        let mut cells: Vec<[usize; 3]> = self
            .present_cells()
            .map(|(k, a, l)| [k, a, l.index()])
            .collect();
        cells.sort_unstable();
        MatrixDocument {
            scale: self.scale,
            alphabet: self.alphabet.labels.clone(),
            items: self.items.clone(),
            annotators: self.annotators.clone(),
            cells,
        }
    }

    pub fn from_document(doc: &MatrixDocument) -> Result<Self, MatrixError> {
        let alphabet = Alphabet::new(doc.alphabet.clone())?;
        let (n, i) = (doc.items.len(), doc.annotators.len());
        let mut cells = vec![None; n * i];
        for &[k, a, l] in &doc.cells {
            if k >= n || a >= i || l >= alphabet.len() {
                return Err(MatrixError::CellIndex { item: k, annotator: a, label: l });
            }
            let slot = &mut cells[k * i + a];
            if slot.is_some() {
                return Err(MatrixError::DuplicateCell {
                    item: doc.items[k].clone(),
                    annotator: doc.annotators[a].clone(),
                });
            }
            *slot = Some(Label(l as u32));
        }
        Self::new(doc.scale, alphabet, doc.items.clone(), doc.annotators.clone(), cells)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("matrix document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MatrixError> {
        let doc: MatrixDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }

    /// Writes the long format (`annotator_id,item_id,label`, comma-delimited).
    pub fn write_long_format<W: std::io::Write>(&self, out: W) -> Result<(), MatrixError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["annotator_id", "item_id", "label"])?;
        for (k, a, l) in self.present_cells() {
            w.write_record([&self.annotators[a], &self.items[k], self.alphabet.text(l)])?;
        }
        w.flush().map_err(|e| MatrixError::Io(e.to_string()))?;
        Ok(())
    }
}

fn check_unique(what: &'static str, ids: &[String]) -> Result<(), MatrixError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(MatrixError::DuplicateId { what, id: id.clone() });
        }
    }
    Ok(())
}

/// Serialized form of a matrix. Cells are `[item_idx, annotator_idx, label_idx]`,
/// zero-based and sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub scale: Scale,
    pub alphabet: Vec<String>,
    pub items: Vec<String>,
    pub annotators: Vec<String>,
    pub cells: Vec<[usize; 3]>,
}

/// One parsed long-format row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongRow {
    pub annotator: String,
    pub item: String,
    pub label: String,
}

/// Parses a long-format table (comma or tab, detected from the header line)
/// with columns `annotator_id`, `item_id`, `label` in any order.
pub fn read_long_rows<R: Read>(mut source: R) -> Result<Vec<LongRow>, MatrixError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| MatrixError::Io(e.to_string()))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let header = text.lines().find(|l| !l.trim().is_empty()).ok_or(MatrixError::Empty)?;
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ca), Some(ci), Some(cl)) = (col("annotator_id"), col("item_id"), col("label")) else {
        return Err(MatrixError::Header(headers.iter().collect::<Vec<_>>().join(",")));
    };
    if headers.len() != 3 {
        return Err(MatrixError::Header(headers.iter().collect::<Vec<_>>().join(",")));
    }

    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| MatrixError::Malformed {
            line: n + 2,
            msg: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(MatrixError::Malformed {
                line: n + 2,
                msg: format!("expected 3 columns, found {}", record.len()),
            });
        }
        rows.push(LongRow {
            annotator: record[ca].to_string(),
            item: record[ci].to_string(),
            label: record[cl].to_string(),
        });
    }
    if rows.is_empty() {
        return Err(MatrixError::Empty);
    }
    Ok(rows)
}

/// Loads a long-format table into a matrix. The alphabet is the sorted set of
/// observed labels; items and annotators are sorted by identifier, so row
/// order does not matter.
pub fn load_long_format<R: Read>(source: R, scale: Scale) -> Result<AnnotationMatrix, MatrixError> {
    let rows = read_long_rows(source)?;
    let alphabet = Alphabet::from_observed(rows.iter().map(|r| r.label.as_str()))?;
    matrix_from_rows(&rows, scale, alphabet)
}

/// Like [`load_long_format`] but with a caller-supplied label order. Labels
/// not in `alphabet` are an error.
pub fn load_long_format_with_alphabet<R: Read>(
    source: R,
    scale: Scale,
    alphabet: Alphabet,
) -> Result<AnnotationMatrix, MatrixError> {
    let rows = read_long_rows(source)?;
    matrix_from_rows(&rows, scale, alphabet)
}

fn matrix_from_rows(
    rows: &[LongRow],
    scale: Scale,
    alphabet: Alphabet,
) -> Result<AnnotationMatrix, MatrixError> {
    for r in rows {
        if r.label.is_empty() || (scale == Scale::Interval && parse_number(&r.label).is_none()) {
            return Err(MatrixError::UnparseableLabel {
                label: r.label.clone(),
                scale,
            });
        }
    }
    let items: Vec<String> = rows
        .iter()
        .map(|r| r.item.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let annotators: Vec<String> = rows
        .iter()
        .map(|r| r.annotator.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let item_pos: HashMap<&str, usize> = items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let ann_pos: HashMap<&str, usize> =
        annotators.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let width = annotators.len();
    let mut cells = vec![None; items.len() * width];
    for r in rows {
        let label = alphabet
            .lookup(&r.label)
            .ok_or_else(|| MatrixError::LabelOutOfAlphabet(r.label.clone()))?;
        let slot = &mut cells[item_pos[r.item.as_str()] * width + ann_pos[r.annotator.as_str()]];
        if slot.is_some() {
            return Err(MatrixError::DuplicateCell {
                item: r.item.clone(),
                annotator: r.annotator.clone(),
            });
        }
        *slot = Some(label);
    }
    AnnotationMatrix::new(scale, alphabet, items, annotators, cells)
}

/// Two disjoint, equal-size, non-empty annotator groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAssignment {
    group_a: BTreeSet<String>,
    group_b: BTreeSet<String>,
}

impl GroupAssignment {
    pub fn new<A, B>(group_a: A, group_b: B) -> Result<Self, MatrixError>
    where
        A: IntoIterator<Item = String>,
        B: IntoIterator<Item = String>,
    {
        let group_a: BTreeSet<String> = group_a.into_iter().collect();
        let group_b: BTreeSet<String> = group_b.into_iter().collect();
        if group_a.is_empty() || group_b.is_empty() {
            return Err(MatrixError::InvalidGroups("groups must be non-empty".into()));
        }
        if group_a.len() != group_b.len() {
            return Err(MatrixError::InvalidGroups(format!(
                "groups must have equal size ({} vs {})",
                group_a.len(),
                group_b.len()
            )));
        }
        if let Some(shared) = group_a.intersection(&group_b).next() {
            return Err(MatrixError::InvalidGroups(format!(
                "annotator {shared} is in both groups"
            )));
        }
        Ok(Self { group_a, group_b })
    }

    /// Splits a matrix's annotators in half by position: first half A, second half B.
    pub fn halves(matrix: &AnnotationMatrix) -> Result<Self, MatrixError> {
        let ids = matrix.annotators();
        let g = ids.len() / 2;
        Self::new(ids[..g].iter().cloned(), ids[g..2 * g].iter().cloned())
    }

    pub fn group_a(&self) -> &BTreeSet<String> {
        &self.group_a
    }

    pub fn group_b(&self) -> &BTreeSet<String> {
        &self.group_b
    }

    pub fn group_size(&self) -> usize {
        self.group_a.len()
    }
}

/// Selects a sub-matrix and an equal-size two-group split such that at least
/// `min_items` items are each labelled by at least `min_coders_per_item`
/// annotators from each group, and every selected annotator labels at least
/// one kept item.
///
/// Annotators are ranked by the number of items they labelled (ties by id);
/// a window of `2 * group_size` consecutive ranks is taken, starting at the
/// top and sliding down on infeasibility. Within a window, ranks alternate
/// between group A and group B.
pub fn filter_dataset(
    raw: &AnnotationMatrix,
    group_size: usize,
    min_items: usize,
    min_coders_per_item: usize,
) -> Result<(AnnotationMatrix, GroupAssignment), MatrixError> {
    if min_items < 1 || min_coders_per_item < 2 || group_size < 1 {
        return Err(MatrixError::InvalidFilter(format!(
            "need group_size >= 1, min_items >= 1, min_coders_per_item >= 2 \
             (got {group_size}, {min_items}, {min_coders_per_item})"
        )));
    }
    let width = 2 * group_size;
    if raw.n_annotators() < width {
        return Err(MatrixError::Infeasible(format!(
            "{} annotators available, {} required",
            raw.n_annotators(),
            width
        )));
    }
    if min_coders_per_item > group_size {
        return Err(MatrixError::Infeasible(format!(
            "{min_coders_per_item} coders per item cannot come from groups of {group_size}"
        )));
    }

    let mut ranked: Vec<(usize, usize)> = (0..raw.n_annotators())
        .map(|a| ((0..raw.n_items()).filter(|&k| raw.get(k, a).is_some()).count(), a))
        .collect();
    ranked.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| raw.annotators()[x.1].cmp(&raw.annotators()[y.1])));

    for offset in 0..=(ranked.len() - width) {
        let window = &ranked[offset..offset + width];
        let (mut a_cols, mut b_cols) = (Vec::new(), Vec::new());
        for (rank, &(_, col)) in window.iter().enumerate() {
            if rank % 2 == 0 { a_cols.push(col) } else { b_cols.push(col) }
        }
        let covers = |k: usize, cols: &[usize]| cols.iter().filter(|&&a| raw.get(k, a).is_some()).count();
        let kept: Vec<usize> = (0..raw.n_items())
            .filter(|&k| covers(k, &a_cols) >= min_coders_per_item && covers(k, &b_cols) >= min_coders_per_item)
            .collect();
        if kept.len() < min_items {
            continue;
        }
        let all_active = a_cols
            .iter()
            .chain(&b_cols)
            .all(|&a| kept.iter().any(|&k| raw.get(k, a).is_some()));
        if !all_active {
            continue;
        }
        let mut cols: Vec<usize> = window.iter().map(|&(_, c)| c).collect();
        cols.sort_unstable();
        let sub = raw.select(&kept, &cols)?;
        let name = |c: &usize| raw.annotators()[*c].clone();
        let groups = GroupAssignment::new(a_cols.iter().map(name), b_cols.iter().map(name))?;
        return Ok((sub, groups));
    }
    Err(MatrixError::Infeasible(format!(
        "no window of {width} annotators covers {min_items} items with {min_coders_per_item} coders per group"
    )))
}

/// Occurrence counts of each label over present cells, in alphabet order.
pub fn label_histogram(matrix: &AnnotationMatrix) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> =
        matrix.alphabet().labels().iter().map(|l| (l.clone(), 0)).collect();
    for (_, _, l) in matrix.present_cells() {
        *out.get_mut(matrix.alphabet().text(l)).unwrap() += 1;
    }
    out
}
