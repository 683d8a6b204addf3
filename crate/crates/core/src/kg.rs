//! Knowledge-graph storage: label dictionaries and the three fixed splits.
//!
//! Triple files are UTF-8 TSV, one `subject<TAB>predicate<TAB>object` per
//! line, no quoting. Ids are dense and assigned in first-seen order over
//! train, then valid, then test (subject before object within a line).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type EntityId = u32;
pub type RelationId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub s: EntityId,
    pub p: RelationId,
    pub o: EntityId,
}

impl Triple {
    pub const fn new(s: EntityId, p: RelationId, o: EntityId) -> Self {
        Triple { s, p, o }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{other}'")),
        }
    }
}

/// Which slot of a triple a link-prediction query leaves open.
///
/// `Head` is the query `(?, p, o)`, `Tail` is `(s, p, ?)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Head,
    Tail,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Head, Direction::Tail];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Head => "head",
            Direction::Tail => "tail",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "head" => Ok(Direction::Head),
            "tail" => Ok(Direction::Tail),
            other => Err(format!("unknown direction '{other}'")),
        }
    }
}

/// Bijection between labels and dense ids `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dictionary {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Dictionary {
    fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Serializable dump of both dictionaries, in id order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryDump {
    pub entities: Vec<String>,
    pub relations: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    name: String,
    entities: Dictionary,
    relations: Dictionary,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
}

/// Parses the three split files of one graph. The graph is named after the
/// directory holding the training file.
pub fn parse_kg(train: &Path, valid: &Path, test: &Path) -> Result<KnowledgeGraph> {
    let name = train
        .parent()
        .and_then(Path::file_name)
        .and_then(|n| n.to_str())
        .unwrap_or("kg")
        .to_owned();
    KnowledgeGraph::parse(name, train, valid, test)
}

impl KnowledgeGraph {
    pub fn parse(name: impl Into<String>, train: &Path, valid: &Path, test: &Path) -> Result<Self> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let files = [
            (train.display().to_string(), read(train)?),
            (valid.display().to_string(), read(valid)?),
            (test.display().to_string(), read(test)?),
        ];
        Self::build(name.into(), &files)
    }

    /// Builds a graph from in-memory TSV text for each split.
    pub fn from_tsv(name: impl Into<String>, train: &str, valid: &str, test: &str) -> Result<Self> {
        let files = [
            ("train".to_owned(), train.to_owned()),
            ("valid".to_owned(), valid.to_owned()),
            ("test".to_owned(), test.to_owned()),
        ];
        Self::build(name.into(), &files)
    }

    fn build(name: String, files: &[(String, String); 3]) -> Result<Self> {
        let mut entities = Dictionary::default();
        let mut relations = Dictionary::default();
        let mut splits: [Vec<Triple>; 3] = Default::default();
        let mut seen: HashMap<Triple, Split> = HashMap::new();

        for (slot, (split, (file, text))) in [Split::Train, Split::Valid, Split::Test]
            .into_iter()
            .zip(files.iter())
            .enumerate()
        {
            let mut local = HashSet::new();
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.strip_suffix('\r').unwrap_or(raw);
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split('\t').collect();
                if fields.len() != 3 {
                    return Err(Error::Parse {
                        file: file.clone(),
                        line: lineno + 1,
                        found: fields.len(),
                    });
                }
                let t = Triple {
                    s: entities.intern(fields[0]),
                    p: relations.intern(fields[1]),
                    o: entities.intern(fields[2]),
                };
                if !local.insert(t) {
                    return Err(Error::DuplicateTriple {
                        file: file.clone(),
                        line: lineno + 1,
                        split,
                    });
                }
                if let Some(&first) = seen.get(&t) {
                    return Err(Error::CrossSplitDuplicate {
                        s: fields[0].to_owned(),
                        p: fields[1].to_owned(),
                        o: fields[2].to_owned(),
                        first,
                        second: split,
                    });
                }
                seen.insert(t, split);
                splits[slot].push(t);
            }
        }

        let [train, valid, test] = splits;
        if train.is_empty() {
            return Err(Error::EmptySplit(Split::Train));
        }
        Ok(KnowledgeGraph {
            name,
            entities,
            relations,
            train,
            valid,
            test,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn entities(&self) -> &Dictionary {
        &self.entities
    }

    pub fn relations(&self) -> &Dictionary {
        &self.relations
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    /// Every triple of every split.
    pub fn all_triples(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    pub fn dictionaries(&self) -> DictionaryDump {
        DictionaryDump {
            entities: self.entities.labels().to_vec(),
            relations: self.relations.labels().to_vec(),
        }
    }

    /// Renders one split back to TSV using the original labels.
    pub fn split_to_tsv(&self, split: Split) -> String {
        let mut out = String::new();
        for t in self.split(split) {
            out.push_str(self.entities.label(t.s).unwrap_or_default());
            out.push('\t');
            out.push_str(self.relations.label(t.p).unwrap_or_default());
            out.push('\t');
            out.push_str(self.entities.label(t.o).unwrap_or_default());
            out.push('\n');
        }
        out
    }

    /// Writes `train.txt`, `valid.txt` and `test.txt` into `dir`.
    pub fn write_tsv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for split in [Split::Train, Split::Valid, Split::Test] {
            let path = dir.join(format!("{split}.txt"));
            fs::write(&path, self.split_to_tsv(split)).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Loads a directory written by [`KnowledgeGraph::write_tsv`].
    pub fn load_dir(name: impl Into<String>, dir: &Path) -> Result<Self> {
        Self::parse(
            name,
            &dir.join("train.txt"),
            &dir.join("valid.txt"),
            &dir.join("test.txt"),
        )
    }
}
