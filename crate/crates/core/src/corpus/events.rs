use std::io::{BufRead, Write};

use super::Catalog;
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// One consumption record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InteractionEvent {
    pub user_id: u64,
    pub item_id: u64,
    /// Seconds since the epoch, never negative.
    pub timestamp: i64,
}

/// Parses `user_id<TAB>item_id<TAB>timestamp` lines; blank lines are skipped.
pub fn parse_interactions<R: BufRead>(reader: R) -> Result<Vec<InteractionEvent>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let mut next = |name: &str| {
            fields
                .next()
                .map(str::trim)
                .ok_or_else(|| Error::parse(lineno, format!("missing field `{name}`")))
        };
        let user = next("user_id")?;
        let item = next("item_id")?;
        let ts = next("timestamp")?;
        if fields.next().is_some() {
            return Err(Error::parse(lineno, "expected exactly 3 tab-separated fields"));
        }
        let user_id = user
            .parse()
            .map_err(|e| Error::parse(lineno, format!("bad user_id `{user}`: {e}")))?;
        let item_id = item
            .parse()
            .map_err(|e| Error::parse(lineno, format!("bad item_id `{item}`: {e}")))?;
        let timestamp: i64 = ts
            .parse()
            .map_err(|e| Error::parse(lineno, format!("bad timestamp `{ts}`: {e}")))?;
        if timestamp < 0 {
            return Err(Error::validation(format!("line {lineno}: negative timestamp {timestamp}")));
        }
        out.push(InteractionEvent { user_id, item_id, timestamp });
    }
    Ok(out)
}

pub fn write_interactions<W: Write>(events: &[InteractionEvent], mut w: W) -> Result<()> {
    for e in events {
        writeln!(w, "{}\t{}\t{}", e.user_id, e.item_id, e.timestamp)?;
    }
    Ok(())
}

/// Fails on the first event whose item is not in `catalog`.
pub fn check_events(events: &[InteractionEvent], catalog: &Catalog) -> Result<()> {
    for e in events {
        catalog.get(e.item_id)?;
    }
    Ok(())
}
