use crate::corpus::{InteractionEvent, SECONDS_PER_DAY};
use crate::error::{Error, Result};

/// Disjoint train and test windows ending at an anchor timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSplit {
    pub train: Vec<InteractionEvent>,
    pub test: Vec<InteractionEvent>,
    /// First instant after the train window. Profiles for the test period
    /// use events strictly before it.
    pub cutoff_time: i64,
    pub anchor: i64,
}

/// Split anchored at the latest event timestamp `T`: test is
/// `(T - test_days, T]` and train is `(T - train_days - test_days, T - test_days]`.
pub fn temporal_split(events: &[InteractionEvent], train_days: u32, test_days: u32) -> Result<EvalSplit> {
    let anchor = events
        .iter()
        .map(|e| e.timestamp)
        .max()
        .ok_or_else(|| Error::Empty("cannot split an empty event log".into()))?;
    temporal_split_at(events, anchor, train_days, test_days)
}

/// Same windows as [`temporal_split`] but ending at `anchor`; later events
/// are dropped.
pub fn temporal_split_at(events: &[InteractionEvent], anchor: i64, train_days: u32, test_days: u32) -> Result<EvalSplit> {
    if train_days < 1 {
        return Err(Error::validation("train_days must be >= 1"));
    }
    let test_start = anchor - i64::from(test_days) * SECONDS_PER_DAY;
    let train_start = test_start - i64::from(train_days) * SECONDS_PER_DAY;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for e in events {
        if e.timestamp > test_start && e.timestamp <= anchor {
            test.push(*e);
        } else if e.timestamp > train_start && e.timestamp <= test_start {
            train.push(*e);
        }
    }
    train.sort_by_key(|e| (e.timestamp, e.user_id, e.item_id));
    test.sort_by_key(|e| (e.timestamp, e.user_id, e.item_id));
    Ok(EvalSplit { train, test, cutoff_time: test_start + 1, anchor })
}
