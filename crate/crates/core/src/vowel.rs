//! Vowel dictionary: word → pinyin final → rhyme class.
//!
//! Rhyme logic everywhere else in the crate works on [`VowelId`]s. Two words
//! rhyme when their ids are equal. Ids are assigned by sorting the class
//! names, so loading the same file twice always produces the same ids.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const BUILTIN_FINALS: &str = include_str!("../data/finals.tsv");

/// Rhyme class index. `NULL_VOWEL` marks non-word tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VowelId(pub u16);

pub const NULL_VOWEL: VowelId = VowelId(0);

impl VowelId {
    pub fn is_null(self) -> bool {
        self == NULL_VOWEL
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VowelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// How finals are grouped into rhyme classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Equivalence {
    /// Drop the medial glide: `iang`/`uang` → `ang`, `uai` → `ai`, `üan` → `an`.
    #[default]
    StripMedial,
    /// Every distinct final is its own class.
    Identity,
}

impl Equivalence {
    pub fn rhyme_class(self, final_: &str) -> String {
        match self {
            Equivalence::Identity => final_.to_string(),
            Equivalence::StripMedial => strip_medial(final_).to_string(),
        }
    }
}

impl std::str::FromStr for Equivalence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strip-medial" | "strip_medial" | "medial" => Ok(Equivalence::StripMedial),
            "identity" | "exact" => Ok(Equivalence::Identity),
            other => Err(Error::Config(format!("unknown equivalence {other:?}"))),
        }
    }
}

fn strip_medial(final_: &str) -> &str {
    match final_ {
        "ia" | "ua" => "a",
        "iao" => "ao",
        "ian" | "uan" | "üan" => "an",
        "iang" | "uang" => "ang",
        "ie" | "üe" => "e",
        "iong" => "ong",
        "iou" | "iu" => "ou",
        "uo" => "o",
        "uei" | "ui" => "ei",
        "uen" | "un" => "en",
        "ueng" => "eng",
        "uai" => "ai",
        other => other,
    }
}

/// Lowercase, `v` → `ü`. Finals must be alphabetic.
fn normalize_final(raw: &str) -> Option<String> {
    let s: String = raw
        .trim()
        .chars()
        .map(|c| match c {
            'v' | 'V' => 'ü',
            c => c.to_lowercase().next().unwrap_or(c),
        })
        .collect();
    if s.is_empty() || !s.chars().all(char::is_alphabetic) {
        return None;
    }
    Some(s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VowelDictionary {
    entries: HashMap<String, String>,
    equivalence: Equivalence,
    class_ids: HashMap<String, VowelId>,
    class_names: Vec<String>,
}

impl Default for VowelDictionary {
    fn default() -> Self {
        Self::from_entries(HashMap::new(), Equivalence::default())
    }
}

impl VowelDictionary {
    /// Reads a `word<TAB>final` file with the default equivalence.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with(path, Equivalence::default())
    }

    pub fn load_with(path: impl AsRef<Path>, equivalence: Equivalence) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, equivalence)
    }

    pub fn parse(text: &str, equivalence: Equivalence) -> Result<Self> {
        let mut entries: HashMap<String, String> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (word, final_) = match (fields.next(), fields.next(), fields.next()) {
                (Some(w), Some(f), None) => (w.trim(), f),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "expected `word<TAB>final`".into(),
                    })
                }
            };
            if word.is_empty() || word.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("bad word {word:?}"),
                });
            }
            let final_ = normalize_final(final_).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("bad final {final_:?}"),
            })?;
            insert_entry(&mut entries, word, final_)?;
        }
        Ok(Self::from_entries(entries, equivalence))
    }

    /// Builds a dictionary from `(word, final)` pairs.
    pub fn from_pairs<I, W, F>(pairs: I, equivalence: Equivalence) -> Result<Self>
    where
        I: IntoIterator<Item = (W, F)>,
        W: AsRef<str>,
        F: AsRef<str>,
    {
        let mut entries = HashMap::new();
        for (w, f) in pairs {
            let f = normalize_final(f.as_ref())
                .ok_or_else(|| Error::invalid(format!("bad final {:?}", f.as_ref())))?;
            insert_entry(&mut entries, w.as_ref(), f)?;
        }
        Ok(Self::from_entries(entries, equivalence))
    }

    /// The shipped table of GB2312 characters, default equivalence.
    pub fn builtin() -> &'static VowelDictionary {
        static BUILTIN: OnceLock<VowelDictionary> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            VowelDictionary::parse(BUILTIN_FINALS, Equivalence::StripMedial)
                .expect("built-in finals table is well formed")
        })
    }

    pub fn builtin_with(equivalence: Equivalence) -> VowelDictionary {
        Self::builtin().with_equivalence(equivalence)
    }

    pub fn with_equivalence(&self, equivalence: Equivalence) -> VowelDictionary {
        Self::from_entries(self.entries.clone(), equivalence)
    }

    /// Entries of `other` replace or extend ours.
    pub fn overridden_by(&self, other: &VowelDictionary) -> VowelDictionary {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().map(|(k, v)| (k.clone(), v.clone())));
        Self::from_entries(entries, self.equivalence)
    }

    fn from_entries(entries: HashMap<String, String>, equivalence: Equivalence) -> Self {
        let names: BTreeSet<String> = entries
            .values()
            .map(|f| equivalence.rhyme_class(f))
            .collect();
        let mut class_names = Vec::with_capacity(names.len() + 1);
        class_names.push(String::new());
        class_names.extend(names);
        assert!(class_names.len() <= u16::MAX as usize, "too many rhyme classes");
        let class_ids = class_names
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, n)| (n.clone(), VowelId(i as u16)))
            .collect();
        Self {
            entries,
            equivalence,
            class_ids,
            class_names,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn equivalence(&self) -> Equivalence {
        self.equivalence
    }

    /// Number of rhyme classes, not counting `NULL_VOWEL`.
    pub fn num_classes(&self) -> usize {
        self.class_names.len() - 1
    }

    /// Size of a table indexed by `VowelId` (classes plus the null slot).
    pub fn table_size(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_name(&self, id: VowelId) -> Option<&str> {
        match id.index() {
            0 => None,
            i => self.class_names.get(i).map(String::as_str),
        }
    }

    pub fn class_id(&self, class: &str) -> Option<VowelId> {
        self.class_ids.get(class).copied()
    }

    /// Raw final of a word. Words without an entry fall back to their last
    /// character, which carries the rhyme.
    pub fn final_of(&self, word: &str) -> Result<&str> {
        if let Some(f) = self.entries.get(word) {
            return Ok(f);
        }
        let mut chars = word.chars();
        if let Some(last) = chars.next_back() {
            if chars.next().is_some() {
                let mut buf = [0u8; 4];
                if let Some(f) = self.entries.get(&*last.encode_utf8(&mut buf)) {
                    return Ok(f);
                }
            }
        }
        Err(Error::UnknownWord(word.to_string()))
    }

    pub fn vowel_of(&self, word: &str) -> Result<VowelId> {
        let f = self.final_of(word)?;
        let class = self.equivalence.rhyme_class(f);
        Ok(self.class_ids[&class])
    }

    pub fn same_rhyme(&self, a: &str, b: &str) -> Result<bool> {
        Ok(self.vowel_of(a)? == self.vowel_of(b)?)
    }

    /// Entries sorted by word, for writing the dictionary back out.
    pub fn sorted_entries(&self) -> Vec<(&str, &str)> {
        let mut v: Vec<_> = self
            .entries
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect();
        v.sort_unstable();
        v
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (w, f) in self.sorted_entries() {
            out.push_str(w);
            out.push('\t');
            out.push_str(f);
            out.push('\n');
        }
        out
    }
}

fn insert_entry(entries: &mut HashMap<String, String>, word: &str, final_: String) -> Result<()> {
    match entries.get(word) {
        Some(prev) if *prev != final_ => Err(Error::DuplicateConflict {
            word: word.to_string(),
            first: prev.clone(),
            second: final_,
        }),
        Some(_) => Ok(()),
        None => {
            entries.insert(word.to_string(), final_);
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_two_entries() {
        let d = VowelDictionary::parse("寨\tai\n菜\tai\n", Equivalence::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.num_classes(), 1);
        assert!(d.same_rhyme("寨", "菜").unwrap());
    }

    #[test]
    fn empty_dictionary_fails_every_lookup() {
        let d = VowelDictionary::parse("", Equivalence::default()).unwrap();
        assert!(d.is_empty());
        assert!(matches!(d.vowel_of("寨"), Err(Error::UnknownWord(_))));
    }

    #[test]
    fn identical_duplicate_is_accepted() {
        let d = VowelDictionary::parse("寨\tai\n寨\tai\n", Equivalence::default()).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn conflicting_duplicate_is_rejected() {
        let err = VowelDictionary::parse("寨\tai\n寨\tan\n", Equivalence::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateConflict { .. }));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err =
            VowelDictionary::parse("# header\n寨\tai\n菜 ai\n", Equivalence::default()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = VowelDictionary::parse("寨\ta1\n", Equivalence::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn load_missing_file_is_io_error() {
        let err = VowelDictionary::load("/nonexistent/finals.tsv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn builtin_rhyme_groups() {
        let d = VowelDictionary::builtin();
        let ai = d.class_id("ai").unwrap();
        assert_eq!(d.vowel_of("寨").unwrap(), ai);
        assert_eq!(d.vowel_of("爱").unwrap(), d.vowel_of("菜").unwrap());
        // glide stripped: xiang / liang / mang
        assert!(d.same_rhyme("象", "量").unwrap());
        assert!(d.same_rhyme("仰", "茫").unwrap());
        assert!(!d.same_rhyme("寨", "象").unwrap());
        assert!(matches!(d.vowel_of("@"), Err(Error::UnknownWord(_))));
    }

    #[test]
    fn identity_equivalence_keeps_medials_apart() {
        let d = VowelDictionary::builtin_with(Equivalence::Identity);
        assert!(d.same_rhyme("象", "量").unwrap());
        assert!(!d.same_rhyme("仰", "茫").unwrap());
        assert!(d.num_classes() > VowelDictionary::builtin().num_classes());
    }

    #[test]
    fn multi_character_word_uses_last_character() {
        let d = VowelDictionary::builtin();
        assert_eq!(d.vowel_of("简朴的寨").unwrap(), d.vowel_of("寨").unwrap());
        // an explicit entry wins over the fallback
        let o = VowelDictionary::parse("地方\tong\n", Equivalence::default()).unwrap();
        let merged = d.overridden_by(&o);
        assert_eq!(merged.final_of("地方").unwrap(), "ong");
    }

    #[test]
    fn null_vowel_never_assigned_to_words() {
        let d = VowelDictionary::builtin();
        for (w, _) in d.sorted_entries() {
            assert!(!d.vowel_of(w).unwrap().is_null());
        }
        assert_eq!(d.class_name(NULL_VOWEL), None);
    }

    #[test]
    fn loading_twice_gives_identical_mappings() {
        let a = VowelDictionary::parse(BUILTIN_FINALS, Equivalence::default()).unwrap();
        let b = VowelDictionary::parse(BUILTIN_FINALS, Equivalence::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_tsv(), b.to_tsv());
    }

    #[test]
    fn same_rhyme_matches_final_comparison_on_random_dictionary() {
        const FINALS: [&str; 8] = ["a", "o", "e", "ai", "ei", "ao", "ou", "an"];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let words: Vec<(String, &str)> = (0..100)
            .map(|i| (format!("w{i}"), FINALS[rng.gen_range(0..FINALS.len())]))
            .collect();
        let d = VowelDictionary::from_pairs(words.iter().map(|(w, f)| (w, f)), Equivalence::Identity)
            .unwrap();
        for (wa, fa) in &words {
            for (wb, fb) in &words {
                assert_eq!(d.same_rhyme(wa, wb).unwrap(), fa == fb, "{wa} {wb}");
            }
        }
    }

    proptest! {
        #[test]
        fn same_rhyme_is_an_equivalence(assign in proptest::collection::vec(0usize..6, 1..24)) {
            const FINALS: [&str; 6] = ["ia", "a", "uang", "ang", "i", "iong"];
            let pairs: Vec<(String, &str)> = assign
                .iter()
                .enumerate()
                .map(|(i, &f)| (format!("x{i}"), FINALS[f]))
                .collect();
            let d = VowelDictionary::from_pairs(pairs.iter().map(|(w, f)| (w, f)), Equivalence::StripMedial).unwrap();
            let words: Vec<&String> = pairs.iter().map(|(w, _)| w).collect();
            for a in &words {
                prop_assert!(d.same_rhyme(a, a).unwrap());
                prop_assert_eq!(d.vowel_of(a).unwrap(), d.vowel_of(a).unwrap());
                for b in &words {
                    prop_assert_eq!(d.same_rhyme(a, b).unwrap(), d.same_rhyme(b, a).unwrap());
                    for c in &words {
                        if d.same_rhyme(a, b).unwrap() && d.same_rhyme(b, c).unwrap() {
                            prop_assert!(d.same_rhyme(a, c).unwrap());
                        }
                    }
                }
            }
        }
    }
}
