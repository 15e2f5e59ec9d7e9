use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A named item type; child types (e.g. episodes) point at their parent type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemType {
    pub name: String,
    pub parent_type: Option<String>,
}

/// The closed set of item types a catalog may use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemTypes {
    types: Vec<ItemType>,
}

impl Default for ItemTypes {
    fn default() -> Self {
        ItemTypes::new(vec![
            ItemType { name: "show".into(), parent_type: None },
            ItemType { name: "audiobook".into(), parent_type: None },
            ItemType { name: "episode".into(), parent_type: Some("show".into()) },
        ])
        .expect("default item types are valid")
    }
}

impl ItemTypes {
    pub fn new(types: Vec<ItemType>) -> Result<Self> {
        for (i, t) in types.iter().enumerate() {
            if t.name.is_empty() || t.name.contains(char::is_whitespace) {
                return Err(Error::validation(format!("invalid item type name `{}`", t.name)));
            }
            if types[..i].iter().any(|o| o.name == t.name) {
                return Err(Error::validation(format!("duplicate item type `{}`", t.name)));
            }
        }
        for t in &types {
            if let Some(p) = &t.parent_type {
                if p == &t.name {
                    return Err(Error::validation(format!("type `{}` is its own parent", t.name)));
                }
                let parent = types
                    .iter()
                    .find(|o| &o.name == p)
                    .ok_or_else(|| Error::validation(format!("type `{}` has unknown parent `{p}`", t.name)))?;
                if parent.parent_type.is_some() {
                    return Err(Error::validation(format!(
                        "type `{}` would have a grandparent; only one level of parenthood is allowed",
                        t.name
                    )));
                }
            }
        }
        Ok(ItemTypes { types })
    }

    pub fn get(&self, name: &str) -> Option<&ItemType> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ItemType> {
        self.types.iter()
    }

    pub fn top_level(&self) -> impl Iterator<Item = &ItemType> {
        self.types.iter().filter(|t| t.parent_type.is_none())
    }

    /// Child type whose parent is `name`, if any.
    pub fn child_of(&self, name: &str) -> Option<&ItemType> {
        self.types.iter().find(|t| t.parent_type.as_deref() == Some(name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemRecord {
    pub item_id: u64,
    pub item_type: String,
    pub parent_id: Option<u64>,
    /// Precomputed text features; `None` when a provider must supply them.
    pub features: Option<Vec<f64>>,
}

/// Validated item catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    types: ItemTypes,
    items: Vec<ItemRecord>,
    index: HashMap<u64, usize>,
    d_text: Option<usize>,
}

impl Catalog {
    pub fn new(types: ItemTypes, items: Vec<ItemRecord>) -> Result<Self> {
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if index.insert(item.item_id, i).is_some() {
                return Err(Error::validation(format!("duplicate item_id {}", item.item_id)));
            }
        }
        let mut d_text = None;
        for item in &items {
            let ty = types.get(&item.item_type).ok_or_else(|| {
                Error::validation(format!("item {} has unknown type `{}`", item.item_id, item.item_type))
            })?;
            match (&ty.parent_type, item.parent_id) {
                (Some(parent_type), Some(pid)) => {
                    let parent = index.get(&pid).map(|&j| &items[j]).ok_or_else(|| {
                        Error::validation(format!("item {} references missing parent {pid}", item.item_id))
                    })?;
                    if &parent.item_type != parent_type {
                        return Err(Error::validation(format!(
                            "item {} parent {pid} has type `{}`, expected `{parent_type}`",
                            item.item_id, parent.item_type
                        )));
                    }
                }
                (Some(_), None) => {
                    return Err(Error::validation(format!(
                        "item {} of child type `{}` has no parent_id",
                        item.item_id, item.item_type
                    )))
                }
                (None, Some(_)) => {
                    return Err(Error::validation(format!(
                        "item {} of top-level type `{}` must not have a parent_id",
                        item.item_id, item.item_type
                    )))
                }
                (None, None) => {}
            }
            if let Some(f) = &item.features {
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::validation(format!("item {} has non-finite features", item.item_id)));
                }
                match d_text {
                    None => d_text = Some(f.len()),
                    Some(d) if d != f.len() => {
                        return Err(Error::validation(format!(
                            "item {} has {} features, expected {d}",
                            item.item_id,
                            f.len()
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(Catalog { types, items, index, d_text })
    }

    pub fn types(&self) -> &ItemTypes {
        &self.types
    }

    pub fn items(&self) -> &[ItemRecord] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Feature dimension of the precomputed features, if any item has them.
    pub fn d_text(&self) -> Option<usize> {
        self.d_text
    }

    pub fn position(&self, item_id: u64) -> Option<usize> {
        self.index.get(&item_id).copied()
    }

    pub fn get(&self, item_id: u64) -> Result<&ItemRecord> {
        self.position(item_id)
            .map(|i| &self.items[i])
            .ok_or(Error::UnknownItem(item_id))
    }

    pub fn is_top_level(&self, item_id: u64) -> Result<bool> {
        Ok(self.get(item_id)?.parent_id.is_none())
    }

    /// Maps a child item to its parent; top-level items map to themselves.
    pub fn lift(&self, item_id: u64) -> Result<u64> {
        Ok(self.get(item_id)?.parent_id.unwrap_or(item_id))
    }

    /// Top-level items of `item_type` in catalog order.
    pub fn top_level_of_type<'a>(&'a self, item_type: &'a str) -> impl Iterator<Item = &'a ItemRecord> + 'a {
        self.items
            .iter()
            .filter(move |r| r.parent_id.is_none() && r.item_type == item_type)
    }

    pub fn top_level_items(&self) -> impl Iterator<Item = &ItemRecord> {
        self.items.iter().filter(|r| r.parent_id.is_none())
    }
}

fn parse_features(line: usize, field: &str) -> Result<Vec<f64>> {
    field
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .map_err(|e| Error::parse(line, format!("bad feature value `{s}`: {e}")))
        })
        .collect()
}

/// Reads a feature file of `item_id<TAB>v1,v2,...` lines.
fn load_feature_file(path: &Path) -> Result<HashMap<u64, Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 1, format!("feature file {}: expected two fields", path.display())))?;
        let id = id
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::parse(i + 1, format!("feature file {}: bad item id: {e}", path.display())))?;
        out.insert(id, parse_features(i + 1, values)?);
    }
    Ok(out)
}

/// Parses a catalog of `item_id<TAB>item_type<TAB>parent_id<TAB>features`
/// lines. `parent_id` and `features` may be empty. A features field of the
/// form `@path` looks the item up in a feature file (`item_id<TAB>v1,v2,...`)
/// resolved against `base_dir`.
pub fn parse_catalog<R: BufRead>(reader: R, types: ItemTypes, base_dir: Option<&Path>) -> Result<Catalog> {
    let mut records = Vec::new();
    let mut feature_files: HashMap<PathBuf, HashMap<u64, Vec<f64>>> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(lineno, format!("expected 4 tab-separated fields, got {}", fields.len())));
        }
        let item_id = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::parse(lineno, format!("bad item_id: {e}")))?;
        let item_type = fields[1].trim().to_string();
        let parent_id = match fields[2].trim() {
            "" => None,
            s => Some(s.parse::<u64>().map_err(|e| Error::parse(lineno, format!("bad parent_id: {e}")))?),
        };
        let features = match fields[3].trim() {
            "" => None,
            s if s.starts_with('@') => {
                let rel = Path::new(&s[1..]);
                let path = match base_dir {
                    Some(b) if rel.is_relative() => b.join(rel),
                    _ => rel.to_path_buf(),
                };
                if !feature_files.contains_key(&path) {
                    let loaded = load_feature_file(&path)?;
                    feature_files.insert(path.clone(), loaded);
                }
                let v = feature_files[&path].get(&item_id).cloned().ok_or_else(|| {
                    Error::parse(lineno, format!("item {item_id} missing from feature file {}", path.display()))
                })?;
                Some(v)
            }
            s => Some(parse_features(lineno, s)?),
        };
        records.push(ItemRecord { item_id, item_type, parent_id, features });
    }
    Catalog::new(types, records)
}

pub fn write_catalog<W: Write>(catalog: &Catalog, mut w: W) -> Result<()> {
    for r in catalog.items() {
        let parent = r.parent_id.map(|p| p.to_string()).unwrap_or_default();
        let features = r
            .features
            .as_ref()
            .map(|f| f.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            .unwrap_or_default();
        writeln!(w, "{}\t{}\t{}\t{}", r.item_id, r.item_type, parent, features)?;
    }
    Ok(())
}
