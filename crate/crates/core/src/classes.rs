//! COCO category table and the default class priority order.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassTableError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate class id {0}")]
    DuplicateId(u32),
    #[error("duplicate class name {0:?}")]
    DuplicateName(String),
    #[error("unknown class name {0:?}")]
    UnknownName(String),
}

/// The 80 COCO categories with their dataset ids (1..=90 with gaps).
pub const COCO_CATEGORIES: [(u32, &str); 80] = [
    (1, "person"),
    (2, "bicycle"),
    (3, "car"),
    (4, "motorcycle"),
    (5, "airplane"),
    (6, "bus"),
    (7, "train"),
    (8, "truck"),
    (9, "boat"),
    (10, "traffic light"),
    (11, "fire hydrant"),
    (13, "stop sign"),
    (14, "parking meter"),
    (15, "bench"),
    (16, "bird"),
    (17, "cat"),
    (18, "dog"),
    (19, "horse"),
    (20, "sheep"),
    (21, "cow"),
    (22, "elephant"),
    (23, "bear"),
    (24, "zebra"),
    (25, "giraffe"),
    (27, "backpack"),
    (28, "umbrella"),
    (31, "handbag"),
    (32, "tie"),
    (33, "suitcase"),
    (34, "frisbee"),
    (35, "skis"),
    (36, "snowboard"),
    (37, "sports ball"),
    (38, "kite"),
    (39, "baseball bat"),
    (40, "baseball glove"),
    (41, "skateboard"),
    (42, "surfboard"),
    (43, "tennis racket"),
    (44, "bottle"),
    (46, "wine glass"),
    (47, "cup"),
    (48, "fork"),
    (49, "knife"),
    (50, "spoon"),
    (51, "bowl"),
    (52, "banana"),
    (53, "apple"),
    (54, "sandwich"),
    (55, "orange"),
    (56, "broccoli"),
    (57, "carrot"),
    (58, "hot dog"),
    (59, "pizza"),
    (60, "donut"),
    (61, "cake"),
    (62, "chair"),
    (63, "couch"),
    (64, "potted plant"),
    (65, "bed"),
    (67, "dining table"),
    (70, "toilet"),
    (72, "tv"),
    (73, "laptop"),
    (74, "mouse"),
    (75, "remote"),
    (76, "keyboard"),
    (77, "cell phone"),
    (78, "microwave"),
    (79, "oven"),
    (80, "toaster"),
    (81, "sink"),
    (82, "refrigerator"),
    (84, "book"),
    (85, "clock"),
    (86, "vase"),
    (87, "scissors"),
    (88, "teddy bear"),
    (89, "hair drier"),
    (90, "toothbrush"),
];

/// COCO category ids ordered by instance count in train2017, most frequent
/// first. Person leads by an order of magnitude.
const COCO_BY_FREQUENCY: [u32; 80] = [
    1, 3, 62, 84, 44, 47, 67, 51, 10, 31, 28, 16, 9, 8, 15, 20, 52, 38, 4, 27, 64, 21, 46, 57, 49,
    56, 60, 2, 35, 86, 19, 32, 77, 55, 61, 37, 85, 33, 50, 42, 6, 53, 59, 72, 63, 75, 81, 41, 22,
    18, 48, 24, 5, 25, 73, 43, 88, 17, 7, 54, 65, 70, 40, 79, 39, 58, 76, 36, 34, 82, 74, 13, 90,
    11, 78, 87, 23, 14, 80, 89,
];

/// Mapping between dataset class ids and names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTable {
    entries: Vec<(u32, String)>,
    by_id: HashMap<u32, usize>,
}

impl Default for ClassTable {
    fn default() -> Self {
        Self::coco()
    }
}

impl ClassTable {
    pub fn coco() -> Self {
        Self::from_entries(COCO_CATEGORIES.iter().map(|&(id, n)| (id, n.to_string())))
            .expect("builtin table is consistent")
    }

    pub fn from_entries(
        entries: impl IntoIterator<Item = (u32, String)>,
    ) -> Result<Self, ClassTableError> {
        let mut table = Self {
            entries: Vec::new(),
            by_id: HashMap::new(),
        };
        for (id, name) in entries {
            if table.by_id.contains_key(&id) {
                return Err(ClassTableError::DuplicateId(id));
            }
            if table.entries.iter().any(|(_, n)| *n == name) {
                return Err(ClassTableError::DuplicateName(name));
            }
            table.by_id.insert(id, table.entries.len());
            table.entries.push((id, name));
        }
        Ok(table)
    }

    /// Parses a class table file: one `id name` pair per line. Blank lines
    /// and lines starting with `#` are ignored; names may contain spaces.
    pub fn parse(text: &str) -> Result<Self, ClassTableError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, name) = line.split_once(char::is_whitespace).ok_or_else(|| {
                ClassTableError::Parse {
                    line: i + 1,
                    reason: "expected `<id> <name>`".into(),
                }
            })?;
            let id = id.parse().map_err(|e| ClassTableError::Parse {
                line: i + 1,
                reason: format!("bad class id {id:?}: {e}"),
            })?;
            entries.push((id, name.trim().to_string()));
        }
        Self::from_entries(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassTableError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ClassTableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.by_id.get(&id).map(|&i| self.entries[i].1.as_str())
    }

    pub fn contains(&self, id: u32) -> bool {
        self.by_id.contains_key(&id)
    }

    /// Case-insensitive name lookup.
    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.entries
            .iter()
            .find(|(_, n)| n.eq_ignore_ascii_case(name.trim()))
            .map(|(id, _)| *id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.entries.iter().map(|(id, n)| (*id, n.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Class ids in priority order, highest first. Classes not listed share the
/// lowest tier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityTable {
    order: Vec<u32>,
}

impl Default for PriorityTable {
    /// Person first, then the remaining COCO classes by dataset frequency.
    fn default() -> Self {
        Self {
            order: COCO_BY_FREQUENCY.to_vec(),
        }
    }
}

impl PriorityTable {
    /// Builds a table, rejecting duplicates.
    pub fn new(order: Vec<u32>) -> Result<Self, ClassTableError> {
        let mut seen = std::collections::HashSet::new();
        for &id in &order {
            if !seen.insert(id) {
                return Err(ClassTableError::DuplicateId(id));
            }
        }
        Ok(Self { order })
    }

    pub fn empty() -> Self {
        Self { order: Vec::new() }
    }

    /// Parses a priority file: one class name per line, highest first.
    pub fn parse(text: &str, classes: &ClassTable) -> Result<Self, ClassTableError> {
        let mut order = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let id = classes
                .id_of(line)
                .ok_or_else(|| ClassTableError::UnknownName(line.to_string()))?;
            order.push(id);
        }
        Self::new(order)
    }

    pub fn load(path: impl AsRef<Path>, classes: &ClassTable) -> Result<Self, ClassTableError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ClassTableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, classes)
    }

    /// Tier index: position in the list, or `len()` for unlisted classes.
    pub fn tier(&self, class_id: u32) -> usize {
        self.order
            .iter()
            .position(|&id| id == class_id)
            .unwrap_or(self.order.len())
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.order
    }
}
