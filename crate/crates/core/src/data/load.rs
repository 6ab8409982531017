use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::types::{Interaction, ItemId, ItemMeta, RawDataset, UserId};
use crate::error::{Error, Result};

/// Where the raw logs live and how to read them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum DatasetSource {
    /// `ratings.csv`, `movies.csv` and (optionally) `tags.csv` in one directory.
    Movielens(MovieLensSource),
    /// Any delimited log with a configurable column mapping.
    Columnar(ColumnarSource),
}

impl DatasetSource {
    pub(crate) fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            DatasetSource::Movielens(s) => fix(&mut s.dir),
            DatasetSource::Columnar(s) => {
                fix(&mut s.log);
                if let Some(items) = &mut s.items {
                    fix(&mut items.path);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MovieLensSource {
    pub dir: PathBuf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimestampUnit {
    #[default]
    Seconds,
    Milliseconds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnarSource {
    pub log: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub user_column: String,
    pub item_column: String,
    /// Feedback column, e.g. `rating` or `is_click`.
    pub signal_column: String,
    pub timestamp_column: String,
    #[serde(default)]
    pub timestamp_unit: TimestampUnit,
    #[serde(default)]
    pub items: Option<ItemFileSpec>,
}

/// Item feature file with multi-valued category (and optionally tag) columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemFileSpec {
    pub path: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub item_column: String,
    pub category_column: String,
    #[serde(default = "default_delimiter")]
    pub category_separator: char,
    #[serde(default)]
    pub title_column: Option<String>,
    #[serde(default)]
    pub tag_column: Option<String>,
    #[serde(default = "default_tag_separator")]
    pub tag_separator: char,
}

fn default_delimiter() -> char {
    ','
}

fn default_tag_separator() -> char {
    '|'
}

/// Reads every interaction and the item metadata described by `source`.
///
/// Interactions come back sorted by `(timestamp, user, item)`. Interacted
/// items without metadata are kept with empty metadata (a warning is logged).
pub fn load_interactions(source: &DatasetSource) -> Result<RawDataset> {
    let mut raw = match source {
        DatasetSource::Movielens(s) => load_movielens(s)?,
        DatasetSource::Columnar(s) => load_columnar(s)?,
    };
    raw.interactions
        .sort_by(|a, b| (a.timestamp, a.user, a.item).cmp(&(b.timestamp, b.user, b.item)));

    let mut missing = 0usize;
    for i in &raw.interactions {
        if !raw.items.contains_key(&i.item) {
            raw.items.insert(i.item, ItemMeta::empty(i.item));
            missing += 1;
        }
    }
    if missing > 0 {
        log::warn!("{missing} interacted items have no metadata; kept with empty metadata");
    }
    log::info!(
        "loaded {} interactions, {} users, {} interacted items",
        raw.interactions.len(),
        raw.user_count(),
        raw.interacted_item_count()
    );
    Ok(raw)
}

fn load_movielens(source: &MovieLensSource) -> Result<RawDataset> {
    let ratings = source.dir.join("ratings.csv");
    let interactions = read_interactions(
        &ratings,
        b',',
        ["userId", "movieId", "rating", "timestamp"],
        TimestampUnit::Seconds,
    )?;

    let mut items = BTreeMap::new();
    let movies = source.dir.join("movies.csv");
    let mut table = Table::open(&movies, b',')?;
    let (c_id, c_title, c_genres) = (
        table.column("movieId")?,
        table.column("title")?,
        table.column("genres")?,
    );
    while let Some(row) = table.next_row()? {
        let item = ItemId(table.parse(&row, c_id, "movieId")?);
        let categories = table
            .text(&row, c_genres, "genres")?
            .split('|')
            .map(str::trim)
            .filter(|g| !g.is_empty())
            .map(str::to_string)
            .collect();
        items.insert(
            item,
            ItemMeta {
                item,
                title: table.text(&row, c_title, "title")?.to_string(),
                categories,
                tags: Vec::new(),
            },
        );
    }

    let tags = source.dir.join("tags.csv");
    if tags.exists() {
        let mut table = Table::open(&tags, b',')?;
        let (c_id, c_tag) = (table.column("movieId")?, table.column("tag")?);
        while let Some(row) = table.next_row()? {
            let item = ItemId(table.parse(&row, c_id, "movieId")?);
            let tag = table.text(&row, c_tag, "tag")?.to_string();
            items
                .entry(item)
                .or_insert_with(|| ItemMeta::empty(item))
                .tags
                .push(tag);
        }
    } else {
        log::warn!("{} not found; items carry no tags", tags.display());
    }

    Ok(RawDataset {
        interactions,
        items,
    })
}

fn load_columnar(source: &ColumnarSource) -> Result<RawDataset> {
    let interactions = read_interactions(
        &source.log,
        delimiter_byte(source.delimiter)?,
        [
            source.user_column.as_str(),
            source.item_column.as_str(),
            source.signal_column.as_str(),
            source.timestamp_column.as_str(),
        ],
        source.timestamp_unit,
    )?;

    let mut items = BTreeMap::new();
    if let Some(spec) = &source.items {
        let mut table = Table::open(&spec.path, delimiter_byte(spec.delimiter)?)?;
        let c_id = table.column(&spec.item_column)?;
        let c_cat = table.column(&spec.category_column)?;
        let c_title = spec
            .title_column
            .as_deref()
            .map(|c| table.column(c))
            .transpose()?;
        let c_tag = spec
            .tag_column
            .as_deref()
            .map(|c| table.column(c))
            .transpose()?;
        while let Some(row) = table.next_row()? {
            let item = ItemId(table.parse(&row, c_id, &spec.item_column)?);
            let categories = split_multi(
                table.text(&row, c_cat, &spec.category_column)?,
                spec.category_separator,
            )
            .collect();
            let title = match c_title {
                Some(c) => table.text(&row, c, "title")?.to_string(),
                None => String::new(),
            };
            let tags = match c_tag {
                Some(c) => split_multi(table.text(&row, c, "tags")?, spec.tag_separator).collect(),
                None => Vec::new(),
            };
            items.insert(
                item,
                ItemMeta {
                    item,
                    title,
                    categories,
                    tags,
                },
            );
        }
    }
    Ok(RawDataset {
        interactions,
        items,
    })
}

/// Splits `"[8, 11]"`-style or `"8|11"`-style multi-value cells.
fn split_multi(cell: &str, sep: char) -> impl Iterator<Item = String> + '_ {
    cell.trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(sep)
        .map(|s| s.trim().trim_matches(|c| c == '"' || c == '\'').trim())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
}

fn delimiter_byte(c: char) -> Result<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::Config(format!("delimiter {c:?} must be a single ASCII character")))
}

fn read_interactions(
    path: &Path,
    delimiter: u8,
    columns: [&str; 4],
    unit: TimestampUnit,
) -> Result<Vec<Interaction>> {
    let mut table = Table::open(path, delimiter)?;
    let idx = [
        table.column(columns[0])?,
        table.column(columns[1])?,
        table.column(columns[2])?,
        table.column(columns[3])?,
    ];
    let mut out = Vec::new();
    while let Some(row) = table.next_row()? {
        let user = UserId(table.parse(&row, idx[0], columns[0])?);
        let item = ItemId(table.parse(&row, idx[1], columns[1])?);
        let feedback: f64 = table.parse(&row, idx[2], columns[2])?;
        if !feedback.is_finite() {
            return Err(table.error(&row, columns[2], "feedback must be finite"));
        }
        let raw_ts: f64 = table.parse(&row, idx[3], columns[3])?;
        let timestamp = match unit {
            TimestampUnit::Seconds => raw_ts,
            TimestampUnit::Milliseconds => raw_ts / 1000.0,
        }
        .floor();
        if !(timestamp >= 0.0 && timestamp.is_finite()) {
            return Err(table.error(&row, columns[3], "timestamp must be >= 0"));
        }
        out.push(Interaction {
            user,
            item,
            feedback,
            timestamp: timestamp as i64,
        });
    }
    if out.is_empty() {
        return Err(Error::NoInteractions(path.to_path_buf()));
    }
    Ok(out)
}

struct Table {
    path: PathBuf,
    reader: csv::Reader<File>,
    headers: csv::StringRecord,
}

impl Table {
    fn open(path: &Path, delimiter: u8) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| csv_error(path, 1, "<header>", e))?
            .clone();
        Ok(Table {
            path: path.to_path_buf(),
            reader,
            headers,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').trim() == name)
            .ok_or_else(|| Error::Parse {
                file: self.path.clone(),
                line: 1,
                field: name.to_string(),
                message: "column missing from header".into(),
            })
    }

    fn next_row(&mut self) -> Result<Option<csv::StringRecord>> {
        let mut row = csv::StringRecord::new();
        match self.reader.read_record(&mut row) {
            Ok(true) => Ok(Some(row)),
            Ok(false) => Ok(None),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                Err(csv_error(&self.path, line, "<row>", e))
            }
        }
    }

    fn text<'r>(&self, row: &'r csv::StringRecord, idx: usize, field: &str) -> Result<&'r str> {
        row.get(idx)
            .ok_or_else(|| self.error(row, field, "missing field"))
    }

    fn parse<T: FromStr>(&self, row: &csv::StringRecord, idx: usize, field: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let text = self.text(row, idx, field)?.trim();
        text.parse::<T>()
            .map_err(|e| self.error(row, field, &format!("cannot parse {text:?}: {e}")))
    }

    fn error(&self, row: &csv::StringRecord, field: &str, message: &str) -> Error {
        Error::Parse {
            file: self.path.clone(),
            line: row.position().map_or(0, |p| p.line()),
            field: field.to_string(),
            message: message.to_string(),
        }
    }
}

fn csv_error(path: &Path, line: u64, field: &str, e: csv::Error) -> Error {
    Error::Parse {
        file: path.to_path_buf(),
        line,
        field: field.to_string(),
        message: e.to_string(),
    }
}
