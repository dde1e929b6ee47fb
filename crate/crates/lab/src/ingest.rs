//! Building a signed replay corpus from a raw ratings file.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use oneclass_core::SignedMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingsFormat {
    /// `UserID::MovieID::Rating::Timestamp`, timestamp optional.
    DoubleColon,
    /// Comma separated with a header row naming `userId`, `movieId` (or
    /// `itemId`), `rating` and optionally `timestamp`.
    Csv,
}

impl std::str::FromStr for RatingsFormat {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dcolon" | "::" => Ok(Self::DoubleColon),
            "csv" => Ok(Self::Csv),
            other => bail!("unknown ratings format `{other}` (use dcolon or csv)"),
        }
    }
}

impl RatingsFormat {
    /// `.dat` files use `::`, everything else is taken as CSV.
    pub fn guess(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("dat") => Self::DoubleColon,
            _ => Self::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: u64,
    pub item: u64,
    pub rating: f32,
    pub timestamp: Option<i64>,
}

/// Ratings with at most one entry per `(user, item)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawRatings {
    pub ratings: Vec<Rating>,
    /// Rows read before duplicate resolution.
    pub rows_read: usize,
    pub duplicates: usize,
}

impl RawRatings {
    pub fn n_users(&self) -> usize {
        let mut ids: Vec<u64> = self.ratings.iter().map(|r| r.user).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn n_items(&self) -> usize {
        let mut ids: Vec<u64> = self.ratings.iter().map(|r| r.item).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Keeps the latest rating per `(user, item)` by timestamp, ties and missing
/// timestamps going to the later row.
fn resolve(rows: Vec<Rating>) -> RawRatings {
    let rows_read = rows.len();
    let mut latest: HashMap<(u64, u64), usize> = HashMap::with_capacity(rows.len());
    for (idx, r) in rows.iter().enumerate() {
        latest
            .entry((r.user, r.item))
            .and_modify(|kept| {
                let old = &rows[*kept];
                let newer = match (old.timestamp, r.timestamp) {
                    (Some(a), Some(b)) => b >= a,
                    _ => true,
                };
                if newer {
                    *kept = idx;
                }
            })
            .or_insert(idx);
    }
    let mut keep: Vec<usize> = latest.into_values().collect();
    keep.sort_unstable();
    let ratings: Vec<Rating> = keep.into_iter().map(|i| rows[i]).collect();
    RawRatings { duplicates: rows_read - ratings.len(), rows_read, ratings }
}

fn parse_double_colon<R: BufRead>(reader: R) -> Result<Vec<Rating>> {
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.with_context(|| format!("reading line {}", n + 1))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split("::").collect();
        ensure!(parts.len() == 3 || parts.len() == 4, "line {}: expected 3 or 4 `::` fields, got `{line}`", n + 1);
        let field = |i: usize, what: &str| -> Result<&str> {
            let f = parts[i].trim();
            ensure!(!f.is_empty(), "line {}: empty {what}", n + 1);
            Ok(f)
        };
        rows.push(Rating {
            user: field(0, "user id")?.parse().with_context(|| format!("line {}: user id", n + 1))?,
            item: field(1, "item id")?.parse().with_context(|| format!("line {}: item id", n + 1))?,
            rating: field(2, "rating")?.parse().with_context(|| format!("line {}: rating", n + 1))?,
            timestamp: match parts.get(3) {
                Some(ts) => Some(ts.trim().parse().with_context(|| format!("line {}: timestamp", n + 1))?),
                None => None,
            },
        });
    }
    Ok(rows)
}

fn parse_csv<R: Read>(reader: R) -> Result<Vec<Rating>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
    let col = |names: &[&str]| header.iter().position(|h| names.contains(&h.as_str()));
    let user = col(&["userid", "user_id", "user"]).context("CSV header lacks a user column")?;
    let item = col(&["movieid", "movie_id", "itemid", "item_id", "item"]).context("CSV header lacks an item column")?;
    let rating = col(&["rating"]).context("CSV header lacks a rating column")?;
    let timestamp = col(&["timestamp"]);
    let mut rows = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let line = n + 2;
        let rec = rec.with_context(|| format!("line {line}"))?;
        let get = |i: usize| rec.get(i).with_context(|| format!("line {line}: missing field {}", header[i]));
        rows.push(Rating {
            user: get(user)?.parse().with_context(|| format!("line {line}: user id"))?,
            item: get(item)?.parse().with_context(|| format!("line {line}: item id"))?,
            rating: get(rating)?.parse().with_context(|| format!("line {line}: rating"))?,
            timestamp: match timestamp {
                Some(i) => Some(get(i)?.parse().with_context(|| format!("line {line}: timestamp"))?),
                None => None,
            },
        });
    }
    Ok(rows)
}

pub fn parse_ratings<R: Read>(reader: R, format: RatingsFormat) -> Result<RawRatings> {
    let rows = match format {
        RatingsFormat::DoubleColon => parse_double_colon(BufReader::new(reader))?,
        RatingsFormat::Csv => parse_csv(reader)?,
    };
    ensure!(!rows.is_empty(), "no ratings parsed");
    let raw = resolve(rows);
    log::info!(
        "parsed {} rows: {} ratings, {} duplicates, {} users, {} items",
        raw.rows_read,
        raw.ratings.len(),
        raw.duplicates,
        raw.n_users(),
        raw.n_items()
    );
    Ok(raw)
}

pub fn read_ratings(path: &Path, format: RatingsFormat) -> Result<RawRatings> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_ratings(f, format).with_context(|| format!("in {}", path.display()))
}

/// `+1` for ratings of 4 and above, `-1` below. Half stars are accepted.
pub fn binarize_value(rating: f32) -> Result<i8> {
    ensure!(
        (0.5..=5.0).contains(&rating) && (rating * 2.0).fract() == 0.0,
        "rating {rating} is not on the 1 to 5 star scale"
    );
    Ok(if rating >= 4.0 { 1 } else { -1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedRating {
    pub user: u64,
    pub item: u64,
    pub sign: i8,
}

/// Sparse signed ratings; absent pairs are 0.
pub fn binarize(raw: &RawRatings) -> Result<Vec<SignedRating>> {
    raw.ratings
        .iter()
        .map(|r| Ok(SignedRating { user: r.user, item: r.item, sign: binarize_value(r.rating)? }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// Bias filter, then the most rated survivors.
    Debiased,
    /// The most rated items, no bias filter.
    MostRated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub n_users_out: usize,
    pub n_items_out: usize,
    pub min_item_count: usize,
    /// Largest admitted `|#pos - #neg| / #rated`.
    pub bias_tolerance: f64,
    pub mode: SelectionMode,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { n_users_out: 1000, n_items_out: 500, min_item_count: 1, bias_tolerance: 0.1, mode: SelectionMode::Debiased }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ItemCounts {
    pub positive: usize,
    pub negative: usize,
}

impl ItemCounts {
    pub fn rated(&self) -> usize {
        self.positive + self.negative
    }

    pub fn relative_bias(&self) -> f64 {
        (self.positive as f64 - self.negative as f64).abs() / self.rated() as f64
    }
}

/// Ids sorted by count descending, then id ascending.
fn rank(counts: &HashMap<u64, usize>) -> Vec<u64> {
    let mut ids: Vec<(u64, usize)> = counts.iter().map(|(&id, &c)| (id, c)).collect();
    ids.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ids.into_iter().map(|(id, _)| id).collect()
}

/// Cuts a dense signed matrix out of sparse signed ratings.
///
/// Items are filtered (by count, and by bias in debiased mode) and the most
/// rated survivors kept; users are then ranked by their number of ratings on
/// the selected items. Rows and columns are in selection order.
pub fn select_submatrix(ratings: &[SignedRating], cfg: &SelectionConfig) -> Result<SignedMatrix> {
    let mut items: HashMap<u64, ItemCounts> = HashMap::new();
    for r in ratings {
        let c = items.entry(r.item).or_default();
        if r.sign > 0 {
            c.positive += 1;
        } else if r.sign < 0 {
            c.negative += 1;
        }
    }
    let survivors: HashMap<u64, usize> = items
        .iter()
        .filter(|(_, c)| c.rated() >= cfg.min_item_count.max(1))
        .filter(|(_, c)| cfg.mode == SelectionMode::MostRated || c.relative_bias() <= cfg.bias_tolerance)
        .map(|(&id, c)| (id, c.rated()))
        .collect();
    if survivors.len() < cfg.n_items_out {
        bail!(
            "only {} items pass the filters but {} were requested; try a larger bias tolerance (now {})",
            survivors.len(),
            cfg.n_items_out,
            cfg.bias_tolerance
        );
    }
    let col_ids: Vec<u64> = rank(&survivors).into_iter().take(cfg.n_items_out).collect();
    let col_of: HashMap<u64, usize> = col_ids.iter().enumerate().map(|(j, &id)| (id, j)).collect();

    let mut users: HashMap<u64, usize> = HashMap::new();
    for r in ratings.iter().filter(|r| r.sign != 0 && col_of.contains_key(&r.item)) {
        *users.entry(r.user).or_default() += 1;
    }
    if users.len() < cfg.n_users_out {
        bail!("only {} users rated the selected items but {} were requested", users.len(), cfg.n_users_out);
    }
    let row_ids: Vec<u64> = rank(&users).into_iter().take(cfg.n_users_out).collect();
    let row_of: HashMap<u64, usize> = row_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let n_cols = col_ids.len();
    let mut entries = vec![0i8; row_ids.len() * n_cols];
    for r in ratings {
        if let (Some(&i), Some(&j)) = (row_of.get(&r.user), col_of.get(&r.item)) {
            entries[i * n_cols + j] = r.sign;
        }
    }
    Ok(SignedMatrix::with_ids(row_ids.len(), n_cols, entries, row_ids, col_ids)?)
}

/// Row-major grid of `-1`, `0` and `1` tokens, one matrix row per line.
pub fn grid_to_string(m: &SignedMatrix) -> String {
    let mut out = String::with_capacity(m.n_rows() * m.n_cols() * 3);
    for u in 0..m.n_rows() {
        for (j, v) in m.row(u).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            out.push_str(match v {
                1 => "1",
                -1 => "-1",
                _ => "0",
            });
        }
        out.push('\n');
    }
    out
}

pub fn parse_grid(text: &str) -> Result<SignedMatrix> {
    let mut entries = Vec::new();
    let mut n_cols = None;
    let mut n_rows = 0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = entries.len();
        for tok in line.split_whitespace() {
            let v: i8 = tok.parse().with_context(|| format!("line {}: bad token `{tok}`", n + 1))?;
            ensure!((-1..=1).contains(&v), "line {}: token {v} is not -1, 0 or 1", n + 1);
            entries.push(v);
        }
        let width = entries.len() - before;
        match n_cols {
            None => n_cols = Some(width),
            Some(c) => ensure!(c == width, "line {}: {width} tokens, expected {c}", n + 1),
        }
        n_rows += 1;
    }
    let n_cols = n_cols.context("empty grid")?;
    Ok(SignedMatrix::new(n_rows, n_cols, entries)?)
}

pub fn write_grid(m: &SignedMatrix, path: &Path) -> Result<()> {
    fs::write(path, grid_to_string(m)).with_context(|| format!("writing {}", path.display()))
}

pub fn read_grid(path: &Path) -> Result<SignedMatrix> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_grid(&text).with_context(|| format!("in {}", path.display()))
}

/// Sidecar lines describing a built corpus.
pub fn corpus_metadata(m: &SignedMatrix, cfg: &SelectionConfig, source: &str) -> Vec<(String, String)> {
    let stats = m.stats();
    let join = |ids: &[u64]| ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
    vec![
        ("source".into(), source.into()),
        ("n_rows".into(), m.n_rows().to_string()),
        ("n_cols".into(), m.n_cols().to_string()),
        ("positive_fraction".into(), stats.positive.to_string()),
        ("negative_fraction".into(), stats.negative.to_string()),
        ("mode".into(), match cfg.mode {
            SelectionMode::Debiased => "debiased".into(),
            SelectionMode::MostRated => "most-rated".into(),
        }),
        ("n_users_out".into(), cfg.n_users_out.to_string()),
        ("n_items_out".into(), cfg.n_items_out.to_string()),
        ("min_item_count".into(), cfg.min_item_count.to_string()),
        ("bias_tolerance".into(), cfg.bias_tolerance.to_string()),
        ("filter_order".into(), "bias filter, then rating count".into()),
        ("user_ranking".into(), "ratings on the selected items".into()),
        ("tie_break".into(), "ascending original id".into()),
        ("row_ids".into(), join(m.row_ids())),
        ("col_ids".into(), join(m.col_ids())),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_double_colon_row() {
        let raw = parse_ratings("1::10::4::978300760\n".as_bytes(), RatingsFormat::DoubleColon).unwrap();
        assert_eq!(raw.ratings, vec![Rating { user: 1, item: 10, rating: 4.0, timestamp: Some(978300760) }]);
    }

    #[test]
    fn later_timestamp_wins() {
        let text = "1::10::3::100\n1::10::5::200\n2::10::2::300\n";
        let raw = parse_ratings(text.as_bytes(), RatingsFormat::DoubleColon).unwrap();
        assert_eq!(raw.ratings.len(), 2);
        assert_eq!(raw.duplicates, 1);
        assert_eq!(raw.ratings.iter().find(|r| r.user == 1).unwrap().rating, 5.0);

        let text = "1::10::5::200\n1::10::3::100\n";
        let raw = parse_ratings(text.as_bytes(), RatingsFormat::DoubleColon).unwrap();
        assert_eq!(raw.ratings[0].rating, 5.0);

        let text = "userId,movieId,rating\n1,10,3\n1,10,5\n";
        let raw = parse_ratings(text.as_bytes(), RatingsFormat::Csv).unwrap();
        assert_eq!(raw.ratings[0].rating, 5.0);
    }

    #[test]
    fn empty_and_malformed_files() {
        let err = parse_ratings("".as_bytes(), RatingsFormat::DoubleColon).unwrap_err();
        assert_eq!(err.to_string(), "no ratings parsed");
        let err = parse_ratings("1::2::3::4\n1::x::3::4\n".as_bytes(), RatingsFormat::DoubleColon).unwrap_err();
        assert!(format!("{err:#}").contains("line 2"), "{err:#}");
        let err = parse_ratings("userId,movieId,rating\n1,2\n".as_bytes(), RatingsFormat::Csv).unwrap_err();
        assert!(format!("{err:#}").contains("line 2"), "{err:#}");
    }

    #[test]
    fn csv_with_header() {
        let text = "userId,movieId,rating,timestamp\n3,7,4.5,11\n4,7,2,12\n";
        let raw = parse_ratings(text.as_bytes(), RatingsFormat::Csv).unwrap();
        assert_eq!(raw.ratings.len(), 2);
        assert_eq!(raw.ratings[0], Rating { user: 3, item: 7, rating: 4.5, timestamp: Some(11) });
    }

    #[test]
    fn binarization_rule() {
        assert_eq!(binarize_value(4.0).unwrap(), 1);
        assert_eq!(binarize_value(5.0).unwrap(), 1);
        assert_eq!(binarize_value(3.0).unwrap(), -1);
        assert_eq!(binarize_value(1.0).unwrap(), -1);
        assert_eq!(binarize_value(3.5).unwrap(), -1);
        let err = binarize_value(6.0).unwrap_err();
        assert!(err.to_string().contains('6'));
        assert!(binarize_value(0.0).is_err());
        assert!(binarize_value(2.25).is_err());
    }

    #[test]
    fn balanced_item_passes_zero_tolerance() {
        let mut ratings = Vec::new();
        for u in 0..20 {
            ratings.push(SignedRating { user: u, item: 1, sign: if u < 10 { 1 } else { -1 } });
            ratings.push(SignedRating { user: u, item: 2, sign: 1 });
        }
        let cfg = SelectionConfig { n_users_out: 20, n_items_out: 1, bias_tolerance: 0.0, ..Default::default() };
        let m = select_submatrix(&ratings, &cfg).unwrap();
        assert_eq!(m.col_ids(), &[1]);
        let cfg = SelectionConfig { n_items_out: 2, ..cfg };
        let err = select_submatrix(&ratings, &cfg).unwrap_err();
        assert!(err.to_string().contains("only 1 items"), "{err}");
    }

    #[test]
    fn grid_tokens() {
        let m = SignedMatrix::new(2, 2, vec![1, 0, -1, 1]).unwrap();
        let text = grid_to_string(&m);
        assert_eq!(text, "1 0\n-1 1\n");
        assert_eq!(text.split_whitespace().count(), 4);
        assert_eq!(grid_to_string(&parse_grid(&text).unwrap()), text);
        assert!(parse_grid("1 0\n1\n").is_err());
        assert!(parse_grid("2 0\n").is_err());
    }
}
