use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::Pair;

/// Ratings strictly above this value count as positive interactions.
pub const DEFAULT_RATING_THRESHOLD: f64 = 3.0;

/// Reads `user_id<TAB>item_id<TAB>rating<TAB>timestamp` records and keeps the
/// pairs rated strictly above `rating_threshold`, deduplicated in file order.
///
/// The timestamp column is optional and ignored. Blank lines are skipped.
pub fn load_interactions(path: &Path, rating_threshold: f64) -> Result<Vec<Pair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let mut fields = line.split('\t');
        let (user, item, rating) = match (fields.next(), fields.next(), fields.next()) {
            (Some(u), Some(i), Some(r)) if !u.is_empty() && !i.is_empty() => (u, i, r),
            _ => {
                return Err(parse_err(
                    "expected user_id<TAB>item_id<TAB>rating[<TAB>timestamp]".into(),
                ))
            }
        };
        let rating: f64 = rating
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("rating {rating:?} is not a number")))?;
        if !rating.is_finite() {
            return Err(parse_err(format!("rating {rating} is not finite")));
        }
        if rating > rating_threshold {
            let pair = (user.to_string(), item.to_string());
            if seen.insert(pair.clone()) {
                pairs.push(pair);
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Data(format!(
            "{}: no interactions rated above {rating_threshold}",
            path.display()
        )));
    }
    Ok(pairs)
}

/// Writes `user_id<TAB>item_id` lines.
pub fn write_pairs(path: &Path, pairs: &[Pair]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (u, i) in pairs {
        writeln!(w, "{u}\t{i}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `user_id<TAB>item_id` lines; extra columns are ignored.
pub fn read_pairs(path: &Path) -> Result<Vec<Pair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        match (fields.next(), fields.next()) {
            (Some(u), Some(i)) if !u.is_empty() && !i.is_empty() => {
                pairs.push((u.to_string(), i.to_string()))
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: "expected user_id<TAB>item_id".into(),
                })
            }
        }
    }
    Ok(pairs)
}
