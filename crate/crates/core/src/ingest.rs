//! Interaction-log ingestion: TSV loading, threshold filtering, per-user
//! sequence building and the sequence-level train/test split.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionEvent {
    pub user: String,
    pub item: String,
    pub timestamp: u64,
}

/// Bijection between opaque string ids and dense indices `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `id`, inserting it at the end if unseen.
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

impl FromIterator<String> for Vocab {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut v = Vocab::new();
        for id in iter {
            v.intern(&id);
        }
        v
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionLog {
    pub events: Vec<InteractionEvent>,
    pub user_vocab: Vocab,
    pub item_vocab: Vocab,
}

impl InteractionLog {
    /// Builds a log from events, assigning vocabulary indices in first-seen order.
    pub fn from_events(events: Vec<InteractionEvent>) -> Self {
        let mut user_vocab = Vocab::new();
        let mut item_vocab = Vocab::new();
        for e in &events {
            user_vocab.intern(&e.user);
            item_vocab.intern(&e.item);
        }
        Self {
            events,
            user_vocab,
            item_vocab,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_vocab.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Reads a `user<TAB>item<TAB>timestamp` file (UTF-8, no header).
pub fn load_interactions(path: impl AsRef<Path>) -> Result<InteractionLog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_interactions(&text, path)
}

pub fn parse_interactions(text: &str, path: &Path) -> Result<InteractionLog> {
    let mut events = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: n + 1,
            message,
        };
        let mut fields = line.split('\t');
        let (Some(user), Some(item), Some(ts), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(err(format!(
                "expected 3 tab-separated fields, got {}",
                line.split('\t').count()
            )));
        };
        if user.is_empty() || item.is_empty() {
            return Err(err("empty user or item id".into()));
        }
        let timestamp = ts
            .trim()
            .parse::<u64>()
            .map_err(|e| err(format!("bad timestamp {ts:?}: {e}")))?;
        events.push(InteractionEvent {
            user: user.to_owned(),
            item: item.to_owned(),
            timestamp,
        });
    }
    if events.is_empty() {
        return Err(Error::EmptyInput(path.display().to_string()));
    }
    Ok(InteractionLog::from_events(events))
}

pub fn write_interactions(path: impl AsRef<Path>, events: &[InteractionEvent]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for e in events {
        writeln!(w, "{}\t{}\t{}", e.user, e.item, e.timestamp)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterThresholds {
    pub min_user: usize,
    pub min_item: usize,
    pub max_user: Option<usize>,
    pub min_unique_items: usize,
}

impl FilterThresholds {
    pub const NONE: FilterThresholds = FilterThresholds {
        min_user: 0,
        min_item: 0,
        max_user: None,
        min_unique_items: 0,
    };
}

/// Applies the user and item thresholds repeatedly until nothing changes.
///
/// A user pass drops users with too few events, too many events (when
/// `max_user` is set) or too few distinct items; an item pass drops items
/// with too few interactions. Vocabularies are rebuilt densely afterward.
pub fn filter_dataset(log: &InteractionLog, th: FilterThresholds) -> Result<InteractionLog> {
    let mut events = log.events.clone();
    loop {
        let before = events.len();

        let mut per_user: HashMap<&str, (usize, HashSet<&str>)> = HashMap::new();
        for e in &events {
            let entry = per_user.entry(&e.user).or_default();
            entry.0 += 1;
            entry.1.insert(&e.item);
        }
        let drop_users: HashSet<String> = per_user
            .into_iter()
            .filter(|(_, (n, uniq))| {
                *n < th.min_user
                    || th.max_user.is_some_and(|max| *n > max)
                    || uniq.len() < th.min_unique_items
            })
            .map(|(u, _)| u.to_owned())
            .collect();
        events.retain(|e| !drop_users.contains(&e.user));

        let mut per_item: HashMap<&str, usize> = HashMap::new();
        for e in &events {
            *per_item.entry(&e.item).or_default() += 1;
        }
        let drop_items: HashSet<String> = per_item
            .into_iter()
            .filter(|(_, n)| *n < th.min_item)
            .map(|(i, _)| i.to_owned())
            .collect();
        events.retain(|e| !drop_items.contains(&e.item));

        if events.len() == before {
            break;
        }
    }
    if events.is_empty() {
        return Err(Error::EmptyResult(format!("{th:?}")));
    }
    Ok(InteractionLog::from_events(events))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Full,
    Train,
    Test,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Full => "full",
            SplitTag::Train => "train",
            SplitTag::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    pub user: usize,
    pub items: Vec<usize>,
}

/// Per-user, time-ordered item-index sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceDataset {
    pub split: SplitTag,
    pub sequences: Vec<Sequence>,
    pub users: Vocab,
    pub items: Vocab,
}

impl SequenceDataset {
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.sequences.iter().map(|s| s.items.len()).sum()
    }

    /// Number of (input, target) steps across all sequences.
    pub fn n_transitions(&self) -> usize {
        self.sequences.iter().map(|s| s.items.len().saturating_sub(1)).sum()
    }

    /// Builds a dataset directly from index sequences; ids are the decimal indices.
    pub fn from_index_sequences(n_items: usize, seqs: Vec<Vec<usize>>) -> Self {
        let items = (0..n_items).map(|i| i.to_string()).collect();
        let users = (0..seqs.len()).map(|u| u.to_string()).collect();
        Self {
            split: SplitTag::Full,
            sequences: seqs
                .into_iter()
                .enumerate()
                .map(|(user, items)| Sequence { user, items })
                .collect(),
            users,
            items,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_items();
        for s in &self.sequences {
            if s.items.len() < 2 {
                return Err(Error::Contract(format!(
                    "sequence of user {} has length {}",
                    s.user,
                    s.items.len()
                )));
            }
            if let Some(&bad) = s.items.iter().find(|&&i| i >= n) {
                return Err(Error::IndexOutOfRange { index: bad, len: n });
            }
        }
        Ok(())
    }
}

/// Sorts each user's events by timestamp (stable, so ties keep file order)
/// and drops users left with fewer than two events.
pub fn build_sequences(log: &InteractionLog) -> Result<SequenceDataset> {
    if log.is_empty() {
        return Err(Error::EmptyInput("interaction log".into()));
    }
    let mut per_user: Vec<Vec<(u64, usize)>> = vec![Vec::new(); log.n_users()];
    for e in &log.events {
        let u = log.user_vocab.get(&e.user).expect("user in vocab");
        let i = log.item_vocab.get(&e.item).expect("item in vocab");
        per_user[u].push((e.timestamp, i));
    }
    let sequences = per_user
        .into_iter()
        .enumerate()
        .filter_map(|(user, mut evs)| {
            evs.sort_by_key(|&(t, _)| t);
            (evs.len() >= 2).then(|| Sequence {
                user,
                items: evs.into_iter().map(|(_, i)| i).collect(),
            })
        })
        .collect();
    Ok(SequenceDataset {
        split: SplitTag::Full,
        sequences,
        users: log.user_vocab.clone(),
        items: log.item_vocab.clone(),
    })
}

/// Assigns whole sequences to train (`floor(ratio * count)`) or test.
///
/// Items are re-indexed densely over those seen in train; test sequences lose
/// unseen items and are dropped if that leaves fewer than two.
pub fn split_train_test(
    ds: &SequenceDataset,
    train_ratio: f64,
    seed: u64,
) -> Result<(SequenceDataset, SequenceDataset)> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_ratio must be in (0, 1), got {train_ratio}"
        )));
    }
    let n = ds.sequences.len();
    let n_train = (train_ratio * n as f64).floor() as usize;
    if n_train == 0 {
        return Err(Error::EmptyResult(format!(
            "train split of {n} sequences at ratio {train_ratio}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut Rng::seed_from_u64(seed));
    let mut is_train = vec![false; n];
    for &i in &order[..n_train] {
        is_train[i] = true;
    }

    let mut remap: Vec<Option<usize>> = vec![None; ds.n_items()];
    let mut items = Vocab::new();
    for (s, _) in ds.sequences.iter().zip(&is_train).filter(|(_, &t)| t) {
        for &i in &s.items {
            if remap[i].is_none() {
                remap[i] = Some(items.intern(ds.items.id(i)));
            }
        }
    }

    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    for (s, &t) in ds.sequences.iter().zip(&is_train) {
        let mapped: Vec<usize> = s.items.iter().filter_map(|&i| remap[i]).collect();
        if t {
            train.push(Sequence {
                user: s.user,
                items: mapped,
            });
        } else if mapped.len() >= 2 {
            test.push(Sequence {
                user: s.user,
                items: mapped,
            });
        }
    }
    let make = |split, sequences| SequenceDataset {
        split,
        sequences,
        users: ds.users.clone(),
        items: items.clone(),
    };
    Ok((make(SplitTag::Train, train), make(SplitTag::Test, test)))
}

/// Writes `user_index<TAB>item,item,...` lines.
pub fn write_dataset(path: impl AsRef<Path>, ds: &SequenceDataset) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for s in &ds.sequences {
        let items: Vec<String> = s.items.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{}\t{}", s.user, items.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `dense_index<TAB>opaque_id` lines.
pub fn write_vocab(path: impl AsRef<Path>, vocab: &Vocab) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (i, id) in vocab.ids().iter().enumerate() {
        writeln!(w, "{i}\t{id}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vocab(path: impl AsRef<Path>) -> Result<Vocab> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut vocab = Vocab::new();
    for (n, line) in text.lines().enumerate() {
        let err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: n + 1,
            message,
        };
        let (idx, id) = line
            .split_once('\t')
            .ok_or_else(|| err("expected index<TAB>id".into()))?;
        let idx: usize = idx.parse().map_err(|e| err(format!("bad index: {e}")))?;
        if idx != vocab.len() {
            return Err(err(format!("index {idx} out of sequence")));
        }
        vocab.intern(id);
    }
    Ok(vocab)
}

pub fn read_dataset(
    path: impl AsRef<Path>,
    split: SplitTag,
    users: Vocab,
    items: Vocab,
) -> Result<SequenceDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut sequences = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: n + 1,
            message,
        };
        let (user, rest) = line
            .split_once('\t')
            .ok_or_else(|| err("expected user<TAB>items".into()))?;
        let user: usize = user.parse().map_err(|e| err(format!("bad user: {e}")))?;
        let items = rest
            .split(',')
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(format!("bad item index: {e}")))?;
        sequences.push(Sequence { user, items });
    }
    let ds = SequenceDataset {
        split,
        sequences,
        users,
        items,
    };
    ds.validate()?;
    Ok(ds)
}
