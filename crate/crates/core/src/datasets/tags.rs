use std::fs;
use std::path::Path;
use std::sync::Arc;

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::{index_of, sorted_unique, FeatureKind, FeatureMatrix, Pair};

/// Reads `item_id<TAB>tag` lines.
pub fn load_tags(path: &Path) -> Result<Vec<Pair>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match line.split_once('\t') {
            Some((item, tag)) if !item.is_empty() && !tag.is_empty() => {
                out.push((item.to_string(), tag.trim_end_matches('\r').to_string()))
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: "expected item_id<TAB>tag".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Multi-hot `|V| x n` tag-item matrix over a lexicographically sorted vocabulary.
///
/// Assignments for items outside `item_ids` are ignored.
pub fn build_tag_matrix(assignments: &[Pair], item_ids: &Arc<[String]>) -> FeatureMatrix {
    let items = index_of(item_ids);
    let known: Vec<(usize, &str)> = assignments
        .iter()
        .filter_map(|(item, tag)| items.get(item.as_str()).map(|&c| (c, tag.as_str())))
        .collect();
    let skipped = assignments.len() - known.len();
    if skipped > 0 {
        warn!("ignoring {skipped} tag assignments for unknown items");
    }
    let vocab = sorted_unique(known.iter().map(|(_, t)| *t));
    let rows = index_of(&vocab);
    let mut values = DMatrix::zeros(vocab.len(), item_ids.len());
    for (c, tag) in known {
        values[(rows[tag], c)] = 1.0;
    }
    let matrix = FeatureMatrix {
        values,
        kind: FeatureKind::Tag,
        item_ids: item_ids.clone(),
        row_labels: Some(vocab),
    };
    let untagged = matrix.empty_columns().len();
    if untagged > 0 {
        warn!("{untagged} of {} items have no tags", item_ids.len());
    }
    matrix
}
