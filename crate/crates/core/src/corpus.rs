//! Annotated lyrics, vocabulary, and reverse-order feature sequences.
//!
//! Lyric lines mark a beat-aligned word with a leading `*`:
//!
//! ```text
//! 我长大的地方像一*个简朴*的寨
//! ```
//!
//! Chinese text is split into single characters; anything else falls back to
//! whitespace-delimited words. A corpus file groups songs under `#SONG <id>`
//! headers with an optional `#FREQ <S|M|F>` line.
//!
//! For the model every sentence is written right to left so that the rhyming
//! tail of a line sits at intra-sentence positions 0, 1, 2, …; sentences keep
//! their original order.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use crate::align::FreqLabel;
use crate::error::{Error, Result};
use crate::vowel::{VowelDictionary, VowelId, NULL_VOWEL};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    pub text: String,
    pub beat: bool,
}

impl Word {
    pub fn new(text: impl Into<String>, beat: bool) -> Self {
        Self {
            text: text.into(),
            beat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Sentence {
    pub words: Vec<Word>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words right to left; index `k` is intra-sentence position `k`.
    pub fn reversed(&self) -> impl Iterator<Item = &Word> {
        self.words.iter().rev()
    }

    pub fn beat_count(&self) -> usize {
        self.words.iter().filter(|w| w.beat).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Song {
    pub id: String,
    pub sentences: Vec<Sentence>,
    pub freq: Option<FreqLabel>,
}

impl Song {
    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn beat_count(&self) -> usize {
        self.sentences.iter().map(Sentence::beat_count).sum()
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.sentences.iter().flat_map(|s| &s.words)
    }

    fn validate(&self) -> Result<()> {
        if self.sentences.is_empty() {
            return Err(Error::invalid(format!("song {:?} has no sentences", self.id)));
        }
        if let Some(i) = self.sentences.iter().position(Sentence::is_empty) {
            return Err(Error::invalid(format!(
                "song {:?}: sentence {i} is empty",
                self.id
            )));
        }
        Ok(())
    }
}

pub(crate) fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2A6DF)
}

fn is_separator_punct(c: char) -> bool {
    matches!(
        c,
        ',' | '.' | '!' | '?' | ';' | ':' | '"' | '(' | ')' | '，' | '。' | '！' | '？' | '、'
            | '；' | '：' | '“' | '”' | '‘' | '’' | '（' | '）' | '《' | '》' | '…' | '—'
            | '·' | '「' | '」' | '『' | '』' | '～'
    )
}

/// Splits one lyric line into words with beat flags.
pub fn tokenize_line(line: &str) -> std::result::Result<Vec<Word>, String> {
    let mut words = Vec::new();
    let mut run = String::new();
    let mut run_beat = false;
    let mut pending_beat = false;

    let flush = |run: &mut String, run_beat: bool, words: &mut Vec<Word>| {
        if !run.is_empty() {
            words.push(Word::new(std::mem::take(run), run_beat));
        }
    };

    for c in line.chars() {
        if c == '*' {
            flush(&mut run, run_beat, &mut words);
            if pending_beat {
                return Err("`*` followed by another `*`".into());
            }
            pending_beat = true;
        } else if c.is_whitespace() || is_separator_punct(c) {
            flush(&mut run, run_beat, &mut words);
            if pending_beat {
                return Err("`*` not immediately followed by a word".into());
            }
        } else if is_cjk(c) {
            flush(&mut run, run_beat, &mut words);
            words.push(Word::new(c.to_string(), pending_beat));
            pending_beat = false;
        } else {
            if run.is_empty() {
                run_beat = pending_beat;
                pending_beat = false;
            }
            run.push(c);
        }
    }
    flush(&mut run, run_beat, &mut words);
    if pending_beat {
        return Err("dangling `*` at end of line".into());
    }
    Ok(words)
}

fn parse_lyric_line(line: &str, line_no: usize) -> Result<Option<Sentence>> {
    let words = tokenize_line(line).map_err(|message| Error::Parse {
        line: line_no,
        message,
    })?;
    Ok((!words.is_empty()).then_some(Sentence { words }))
}

/// Parses the lyric lines of a single song.
pub fn parse_song(text: &str) -> Result<Song> {
    let mut sentences = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if let Some(s) = parse_lyric_line(line, idx + 1)? {
            sentences.push(s);
        }
    }
    if sentences.is_empty() {
        return Err(Error::invalid("no lyric lines"));
    }
    Ok(Song {
        id: "song".into(),
        sentences,
        freq: None,
    })
}

fn render_sentence(out: &mut String, sentence: &Sentence) {
    let mut prev_cjk: Option<bool> = None;
    for w in &sentence.words {
        let single_cjk = {
            let mut cs = w.text.chars();
            matches!((cs.next(), cs.next()), (Some(c), None) if is_cjk(c))
        };
        if let Some(p) = prev_cjk {
            if !(p && single_cjk) {
                out.push(' ');
            }
        }
        if w.beat {
            out.push('*');
        }
        out.push_str(&w.text);
        prev_cjk = Some(single_cjk);
    }
    out.push('\n');
}

/// Inverse of [`parse_song`].
pub fn render_song(song: &Song) -> String {
    let mut out = String::new();
    for s in &song.sentences {
        render_sentence(&mut out, s);
    }
    out
}

pub fn render_corpus(songs: &[Song]) -> String {
    let mut out = String::new();
    for (i, song) in songs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "#SONG {}", song.id);
        if let Some(f) = song.freq {
            let _ = writeln!(out, "#FREQ {f}");
        }
        out.push_str(&render_song(song));
    }
    out
}

pub fn parse_corpus(text: &str) -> Result<Vec<Song>> {
    let mut songs: Vec<Song> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("#SONG") {
            let id = rest.trim();
            songs.push(Song {
                id: if id.is_empty() {
                    format!("song-{}", songs.len() + 1)
                } else {
                    id.to_string()
                },
                sentences: Vec::new(),
                freq: None,
            });
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("#FREQ") {
            let song = songs.last_mut().ok_or_else(|| Error::Parse {
                line: line_no,
                message: "#FREQ before the first #SONG".into(),
            })?;
            song.freq = Some(rest.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad frequency label {:?}", rest.trim()),
            })?);
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let sentence = parse_lyric_line(line, line_no)?;
        let song = songs.last_mut().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "lyric line before the first #SONG header".into(),
        })?;
        song.sentences.extend(sentence);
    }
    for s in &songs {
        s.validate()?;
    }
    Ok(songs)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Song>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const START: TokenId = 1;
pub const SEP: TokenId = 2;
pub const BEAT: TokenId = 3;
pub const FREQ_SLOW: TokenId = 4;
pub const FREQ_MEDIUM: TokenId = 5;
pub const FREQ_FAST: TokenId = 6;
pub const UNK: TokenId = 7;
pub const NUM_SPECIAL: usize = 8;

const SPECIAL_TOKENS: [&str; NUM_SPECIAL] = [
    "[PAD]", "[START]", "[SEP]", "[BEAT]", "[S]", "[M]", "[F]", "[UNK]",
];

pub fn freq_token(label: FreqLabel) -> TokenId {
    match label {
        FreqLabel::Slow => FREQ_SLOW,
        FreqLabel::Medium => FREQ_MEDIUM,
        FreqLabel::Fast => FREQ_FAST,
    }
}

fn freq_of_token(token: TokenId) -> Option<FreqLabel> {
    match token {
        FREQ_SLOW => Some(FreqLabel::Slow),
        FREQ_MEDIUM => Some(FreqLabel::Medium),
        FREQ_FAST => Some(FreqLabel::Fast),
        _ => None,
    }
}

/// Token inventory: control tokens first, then words in sorted order, each
/// with its rhyme class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    vowels: Vec<VowelId>,
    index: HashMap<String, TokenId>,
}

impl Vocab {
    /// Every word in `songs`. Words the dictionary cannot resolve get
    /// `NULL_VOWEL` and a warning.
    pub fn build<'a>(songs: impl IntoIterator<Item = &'a Song>, dict: &VowelDictionary) -> Self {
        let words: BTreeSet<&str> = songs
            .into_iter()
            .flat_map(|s| s.words())
            .map(|w| w.text.as_str())
            .collect();
        let mut unknown = 0usize;
        let pairs: Vec<(String, VowelId)> = words
            .into_iter()
            .map(|w| {
                let v = dict.vowel_of(w).unwrap_or_else(|_| {
                    unknown += 1;
                    if unknown <= 10 {
                        warn!("no vowel for {w:?}; using the null vowel");
                    }
                    NULL_VOWEL
                });
                (w.to_string(), v)
            })
            .collect();
        if unknown > 10 {
            warn!("{unknown} words in total have no vowel entry");
        }
        Self::from_words(pairs).expect("sorted unique words")
    }

    /// Special tokens are prepended; `words` must be unique.
    pub fn from_words(words: Vec<(String, VowelId)>) -> Result<Self> {
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut vowels = vec![NULL_VOWEL; NUM_SPECIAL];
        for (w, v) in words {
            tokens.push(w);
            vowels.push(v);
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(Self {
            tokens,
            vowels,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == NUM_SPECIAL
    }

    pub fn id(&self, word: &str) -> Option<TokenId> {
        self.index.get(word).copied().filter(|&i| i as usize >= NUM_SPECIAL)
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn vowel(&self, id: TokenId) -> VowelId {
        self.vowels[id as usize]
    }

    pub fn vowels(&self) -> &[VowelId] {
        &self.vowels
    }

    pub fn is_word(id: TokenId) -> bool {
        id as usize >= NUM_SPECIAL || id == UNK
    }

    /// `(word, vowel)` for every non-special token.
    pub fn words(&self) -> impl Iterator<Item = (&str, VowelId)> {
        self.tokens[NUM_SPECIAL..]
            .iter()
            .zip(&self.vowels[NUM_SPECIAL..])
            .map(|(t, &v)| (t.as_str(), v))
    }

    /// Largest vowel id plus one.
    pub fn vowel_table_size(&self) -> usize {
        self.vowels.iter().map(|v| v.index()).max().unwrap_or(0) + 1
    }

    /// Number of distinct non-null vowels carried by word tokens.
    pub fn vowel_coverage(&self) -> usize {
        self.vowels
            .iter()
            .filter(|v| !v.is_null())
            .collect::<HashSet<_>>()
            .len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeConfig {
    pub max_len: usize,
    /// Size of the intra-sentence position table; larger offsets clamp.
    pub intra_cap: usize,
    /// Size of the sentence-index table; larger indices clamp.
    pub sent_cap: usize,
    /// Pad with `[PAD]` up to `max_len`.
    pub pad: bool,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self {
            max_len: 1024,
            intra_cap: 32,
            sent_cap: 128,
            pad: false,
        }
    }
}

/// Parallel per-position features. The absolute position is the index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureSequence {
    pub tokens: Vec<TokenId>,
    pub vowels: Vec<VowelId>,
    pub intra_pos: Vec<usize>,
    pub sent_idx: Vec<usize>,
    /// Set when the song did not fit in `max_len`.
    pub truncated: bool,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn push(&mut self, token: TokenId, vowel: VowelId, intra: usize, sent: usize) {
        self.tokens.push(token);
        self.vowels.push(vowel);
        self.intra_pos.push(intra);
        self.sent_idx.push(sent);
    }

    pub fn truncate(&mut self, len: usize) {
        self.tokens.truncate(len);
        self.vowels.truncate(len);
        self.intra_pos.truncate(len);
        self.sent_idx.truncate(len);
    }

    pub fn prefix(&self, len: usize) -> FeatureSequence {
        let mut s = self.clone();
        s.truncate(len);
        s
    }

    pub fn pad_to(&mut self, len: usize) {
        while self.len() < len {
            self.push(PAD, NULL_VOWEL, 0, 0);
        }
    }

    /// Number of positions that are not `[PAD]`.
    pub fn unpadded_len(&self) -> usize {
        self.tokens.iter().position(|&t| t == PAD).unwrap_or(self.len())
    }

    /// Space-separated token strings, for logs and transcripts.
    pub fn transcript(&self, vocab: &Vocab) -> String {
        self.tokens
            .iter()
            .map(|&t| vocab.token(t))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Tracks intra-sentence and sentence indices while a stream is built.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PositionTracker {
    pub words_in_sentence: usize,
    pub sentence: usize,
}

impl PositionTracker {
    /// Features for `token` at the current point, then advances.
    pub fn place(&mut self, token: TokenId, cfg: &EncodeConfig) -> (usize, usize) {
        let sent = self.sentence.min(cfg.sent_cap - 1);
        let intra = match token {
            SEP | START | PAD | FREQ_SLOW | FREQ_MEDIUM | FREQ_FAST => 0,
            _ => self.words_in_sentence.min(cfg.intra_cap - 1),
        };
        match token {
            SEP => {
                self.words_in_sentence = 0;
                self.sentence += 1;
            }
            t if Vocab::is_word(t) => self.words_in_sentence += 1,
            _ => {}
        }
        (intra, sent)
    }
}

pub(crate) fn push_token(
    seq: &mut FeatureSequence,
    tracker: &mut PositionTracker,
    token: TokenId,
    vocab: &Vocab,
    cfg: &EncodeConfig,
) {
    let (intra, sent) = tracker.place(token, cfg);
    seq.push(token, vocab.vowel(token), intra, sent);
}

/// Appends one sentence right to left, `[BEAT]` before each beat word, then `[SEP]`.
pub(crate) fn push_sentence(
    seq: &mut FeatureSequence,
    tracker: &mut PositionTracker,
    sentence: &Sentence,
    vocab: &Vocab,
    cfg: &EncodeConfig,
) {
    for w in sentence.reversed() {
        if w.beat {
            push_token(seq, tracker, BEAT, vocab, cfg);
        }
        let id = vocab.id(&w.text).unwrap_or(UNK);
        push_token(seq, tracker, id, vocab, cfg);
    }
    push_token(seq, tracker, SEP, vocab, cfg);
}

/// `[START]`, the frequency token if the song has a label, then each sentence
/// reversed with `[BEAT]`s and a closing `[SEP]`.
pub fn encode_training_sequence(song: &Song, vocab: &Vocab, cfg: &EncodeConfig) -> FeatureSequence {
    let mut seq = FeatureSequence::default();
    let mut tracker = PositionTracker::default();
    push_token(&mut seq, &mut tracker, START, vocab, cfg);
    if let Some(label) = song.freq {
        push_token(&mut seq, &mut tracker, freq_token(label), vocab, cfg);
    }
    for s in &song.sentences {
        push_sentence(&mut seq, &mut tracker, s, vocab, cfg);
    }
    if seq.len() > cfg.max_len {
        warn!(
            "song {:?}: {} tokens truncated to {}",
            song.id,
            seq.len(),
            cfg.max_len
        );
        seq.truncate(cfg.max_len);
        seq.truncated = true;
    }
    if cfg.pad {
        seq.pad_to(cfg.max_len);
    }
    seq
}

pub fn encode_corpus(songs: &[Song], vocab: &Vocab, cfg: &EncodeConfig) -> Vec<FeatureSequence> {
    songs
        .iter()
        .map(|s| encode_training_sequence(s, vocab, cfg))
        .collect()
}

/// Restores original word order and beat flags. On a truncated sequence an
/// unterminated trailing sentence is dropped.
pub fn decode_sequence(seq: &FeatureSequence, vocab: &Vocab) -> Result<Song> {
    let err = |position: usize, message: &str| Error::Structure {
        position,
        message: message.to_string(),
    };
    let end = seq.unpadded_len();
    if seq.tokens[end..].iter().any(|&t| t != PAD) {
        return Err(err(end, "token after [PAD]"));
    }
    let tokens = &seq.tokens[..end];
    if tokens.first() != Some(&START) {
        return Err(err(0, "stream must begin with [START]"));
    }
    let mut pos = 1;
    let freq = tokens.get(1).and_then(|&t| freq_of_token(t));
    if freq.is_some() {
        pos = 2;
    }

    let mut sentences = Vec::new();
    let mut current: Vec<Word> = Vec::new();
    let mut beat_pending = false;
    while pos < tokens.len() {
        let t = tokens[pos];
        match t {
            SEP => {
                if beat_pending {
                    return Err(err(pos, "[BEAT] before [SEP]"));
                }
                if current.is_empty() {
                    return Err(err(pos, "empty sentence"));
                }
                current.reverse();
                sentences.push(Sentence {
                    words: std::mem::take(&mut current),
                });
            }
            BEAT => {
                if beat_pending {
                    return Err(err(pos, "consecutive [BEAT] tokens"));
                }
                beat_pending = true;
            }
            START | PAD | FREQ_SLOW | FREQ_MEDIUM | FREQ_FAST => {
                return Err(err(pos, "control token inside the lyric stream"));
            }
            word => {
                current.push(Word::new(vocab.token(word), beat_pending));
                beat_pending = false;
            }
        }
        pos += 1;
    }
    if (!current.is_empty() || beat_pending) && !seq.truncated {
        return Err(err(tokens.len(), "last sentence not closed by [SEP]"));
    }
    if sentences.is_empty() {
        return Err(err(tokens.len(), "no complete sentence"));
    }
    Ok(Song {
        id: "decoded".into(),
        sentences,
        freq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str) -> Sentence {
        parse_song(text).unwrap().sentences.remove(0)
    }

    fn two_line_song() -> Song {
        parse_song("我*抬头*仰望。\n天空*的苍*茫。\n").unwrap()
    }

    #[test]
    fn parses_beat_marks() {
        let sent = s("我长大的地方像一*个简朴*的寨");
        let text: String = sent.words.iter().map(|w| w.text.as_str()).collect();
        assert_eq!(text, "我长大的地方像一个简朴的寨");
        let beats: Vec<&str> = sent
            .words
            .iter()
            .filter(|w| w.beat)
            .map(|w| w.text.as_str())
            .collect();
        assert_eq!(beats, ["个", "的"]);
        assert!(sent.words[8].beat && sent.words[11].beat);
    }

    #[test]
    fn line_without_marks_has_no_beats() {
        assert_eq!(s("简朴的看着简朴的海").beat_count(), 0);
    }

    #[test]
    fn whitespace_fallback_and_mixed_text() {
        let sent = s("*yo check 这*个 mic");
        let got: Vec<(&str, bool)> = sent.words.iter().map(|w| (w.text.as_str(), w.beat)).collect();
        assert_eq!(
            got,
            [("yo", true), ("check", false), ("这", false), ("个", true), ("mic", false)]
        );
        assert_eq!(render_song(&Song { id: "x".into(), sentences: vec![sent.clone()], freq: None }),
            "*yo check 这*个 mic\n");
    }

    #[test]
    fn parse_errors() {
        assert!(parse_song("").is_err());
        assert!(parse_song("\n  \n").is_err());
        assert!(matches!(parse_song("我抬头*\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_song("好\n我 * 抬头\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_song("**抬\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn render_marks_beat_word() {
        let song = Song {
            id: "x".into(),
            sentences: vec![Sentence {
                words: vec![Word::new("ka", false), Word::new("mo", true), Word::new("li", false)],
            }],
            freq: None,
        };
        assert_eq!(render_song(&song), "ka *mo li\n");
        assert_eq!(parse_song(&render_song(&song)).unwrap().sentences, song.sentences);
        assert_eq!(render_song(&parse_song("我长大的地方\n").unwrap()), "我长大的地方\n");
    }

    #[test]
    fn corpus_file_round_trip() {
        let text = "#SONG a\n#FREQ F\n我*抬头\n天空\n\n#SONG b\n# comment\n*仰望\n";
        let songs = parse_corpus(text).unwrap();
        assert_eq!(songs.len(), 2);
        assert_eq!(songs[0].freq, Some(FreqLabel::Fast));
        assert_eq!(songs[1].sentences.len(), 1);
        assert_eq!(parse_corpus(&render_corpus(&songs)).unwrap(), songs);
        assert!(matches!(parse_corpus("我\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_corpus("#SONG a\n#SONG b\n我\n").is_err());
    }

    #[test]
    fn encodes_figure_sample_in_reverse() {
        let song = two_line_song();
        let dict = VowelDictionary::builtin();
        let vocab = Vocab::build([&song], dict);
        let seq = encode_training_sequence(&song, &vocab, &EncodeConfig::default());
        assert_eq!(
            seq.transcript(&vocab),
            "[START] 望 [BEAT] 仰 头 [BEAT] 抬 我 [SEP] [BEAT] 茫 苍 [BEAT] 的 空 天 [SEP]"
        );
        assert_eq!(seq.intra_pos, [0, 0, 1, 1, 2, 3, 3, 4, 0, 0, 0, 1, 2, 2, 3, 4, 0]);
        assert_eq!(seq.sent_idx, [0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1]);
        for (i, &t) in seq.tokens.iter().enumerate() {
            assert_eq!(seq.vowels[i].is_null(), !Vocab::is_word(t), "position {i}");
        }
        let back = decode_sequence(&seq, &vocab).unwrap();
        assert_eq!(back.sentences, song.sentences);
        assert_eq!(render_song(&back), "我*抬头*仰望\n天空*的苍*茫\n");
    }

    #[test]
    fn rhyming_tails_share_intra_positions() {
        let song = parse_song("一个简朴的寨\n简朴*的菜\n").unwrap();
        let dict = VowelDictionary::builtin();
        let vocab = Vocab::build([&song], dict);
        let seq = encode_training_sequence(&song, &vocab, &EncodeConfig::default());
        let words_at = |sent: usize, k: usize| {
            (0..seq.len())
                .find(|&i| seq.sent_idx[i] == sent && seq.intra_pos[i] == k && Vocab::is_word(seq.tokens[i]))
                .map(|i| vocab.token(seq.tokens[i]))
        };
        assert_eq!(words_at(0, 0), Some("寨"));
        assert_eq!(words_at(1, 0), Some("菜"));
        assert_eq!(words_at(0, 1), Some("的"));
        assert_eq!(words_at(1, 1), Some("的"));
    }

    #[test]
    fn one_word_sentence() {
        let song = parse_song("寨\n").unwrap();
        let vocab = Vocab::build([&song], VowelDictionary::builtin());
        let seq = encode_training_sequence(&song, &vocab, &EncodeConfig::default());
        assert_eq!(seq.transcript(&vocab), "[START] 寨 [SEP]");
        assert_eq!(seq.intra_pos[1], 0);
    }

    #[test]
    fn frequency_token_follows_start() {
        let mut song = two_line_song();
        song.freq = Some(FreqLabel::Slow);
        let vocab = Vocab::build([&song], VowelDictionary::builtin());
        let seq = encode_training_sequence(&song, &vocab, &EncodeConfig::default());
        assert_eq!(&seq.tokens[..2], &[START, FREQ_SLOW]);
        assert_eq!(decode_sequence(&seq, &vocab).unwrap().freq, Some(FreqLabel::Slow));
    }

    #[test]
    fn truncation_is_flagged_and_decodes_complete_prefix() {
        let song = two_line_song();
        let vocab = Vocab::build([&song], VowelDictionary::builtin());
        let cfg = EncodeConfig { max_len: 12, ..EncodeConfig::default() };
        let seq = encode_training_sequence(&song, &vocab, &cfg);
        assert!(seq.truncated);
        assert_eq!(seq.len(), 12);
        let back = decode_sequence(&seq, &vocab).unwrap();
        assert_eq!(back.sentences, song.sentences[..1]);

        let padded = encode_training_sequence(&song, &vocab, &EncodeConfig { max_len: 24, pad: true, ..cfg });
        assert_eq!(padded.len(), 24);
        assert_eq!(padded.unpadded_len(), 17);
        assert_eq!(decode_sequence(&padded, &vocab).unwrap().sentences, song.sentences);
    }

    #[test]
    fn caps_clamp_positions() {
        let song = parse_song("一二三四五六七八\n").unwrap();
        let vocab = Vocab::build([&song], VowelDictionary::builtin());
        let cfg = EncodeConfig { intra_cap: 4, sent_cap: 1, ..EncodeConfig::default() };
        let seq = encode_training_sequence(&song, &vocab, &cfg);
        assert_eq!(seq.intra_pos, [0, 0, 1, 2, 3, 3, 3, 3, 3, 0]);
        assert!(seq.sent_idx.iter().all(|&s| s == 0));
    }

    #[test]
    fn malformed_streams_are_rejected() {
        let song = two_line_song();
        let vocab = Vocab::build([&song], VowelDictionary::builtin());
        let w = vocab.id("我").unwrap();
        let mk = |tokens: &[TokenId]| {
            let mut seq = FeatureSequence::default();
            for &t in tokens {
                seq.push(t, vocab.vowel(t), 0, 0);
            }
            seq
        };
        let cases: [(&[TokenId], usize); 6] = [
            (&[START, SEP], 1),
            (&[START, w, BEAT, SEP], 3),
            (&[w, SEP], 0),
            (&[START, BEAT, BEAT, w, SEP], 2),
            (&[START, w, SEP, START], 3),
            (&[START, w], 2),
        ];
        for (tokens, at) in cases {
            match decode_sequence(&mk(tokens), &vocab) {
                Err(Error::Structure { position, .. }) => assert_eq!(position, at, "{tokens:?}"),
                other => panic!("{tokens:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_words_encode_as_unk_with_null_vowel() {
        let song = parse_song("我 zzz\n").unwrap();
        let vocab = Vocab::build([&song], VowelDictionary::builtin());
        assert_eq!(vocab.vowel(vocab.id("zzz").unwrap()), NULL_VOWEL);
        let other = Vocab::build([&two_line_song()], VowelDictionary::builtin());
        let seq = encode_training_sequence(&song, &other, &EncodeConfig::default());
        assert_eq!(seq.tokens[1], UNK);
        assert!(seq.vowels[1].is_null());
    }
}
