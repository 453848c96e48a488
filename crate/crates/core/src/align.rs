//! Beat–lyric alignment from timestamps, and beat-frequency labels.
//!
//! Each beat is attached to the nearest word whose timestamp lies within
//! half an average word duration of it. Beats with no word in that window
//! stay unaligned.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{Sentence, Song, Word};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimedWord {
    pub word: String,
    /// Seconds. Midpoint of the word's interval when start/end are known.
    pub t: f64,
}

impl TimedWord {
    pub fn new(word: impl Into<String>, t: f64) -> Self {
        Self {
            word: word.into(),
            t,
        }
    }

    pub fn from_interval(word: impl Into<String>, start: f64, end: f64) -> Self {
        Self::new(word, 0.5 * (start + end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedBeat {
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// `(beat_index, word_index)`, ordered by beat index.
    pub pairs: Vec<(usize, usize)>,
    pub r: f64,
}

impl AlignmentResult {
    pub fn beat_flags(&self, n_words: usize) -> Vec<bool> {
        let mut flags = vec![false; n_words];
        for &(_, w) in &self.pairs {
            flags[w] = true;
        }
        flags
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AlignOptions {
    /// At most one beat per word, assigned greedily nearest pair first.
    pub injective: bool,
}

/// `r = total_duration / |words|`.
pub fn average_word_duration(words: &[TimedWord], total_duration: f64) -> Result<f64> {
    if words.is_empty() {
        return Err(Error::invalid("average word duration of an empty word list"));
    }
    if !(total_duration > 0.0 && total_duration.is_finite()) {
        return Err(Error::invalid(format!(
            "total duration must be positive, got {total_duration}"
        )));
    }
    Ok(total_duration / words.len() as f64)
}

pub fn align_beats(words: &[TimedWord], beats: &[TimedBeat], r: f64) -> AlignmentResult {
    align_beats_with(words, beats, r, AlignOptions::default())
}

/// `words` and `beats` must be sorted by time.
pub fn align_beats_with(
    words: &[TimedWord],
    beats: &[TimedBeat],
    r: f64,
    opts: AlignOptions,
) -> AlignmentResult {
    debug_assert!(words.windows(2).all(|w| w[0].t <= w[1].t));
    debug_assert!(beats.windows(2).all(|b| b[0].t <= b[1].t));
    let half = r / 2.0;
    let pairs = if opts.injective {
        align_injective(words, beats, half)
    } else {
        beats
            .iter()
            .enumerate()
            .filter_map(|(j, b)| nearest_word(words, b.t, half).map(|w| (j, w)))
            .collect()
    };
    AlignmentResult { pairs, r }
}

/// Nearest word within `half` of `t`; ties go to the earlier word.
fn nearest_word(words: &[TimedWord], t: f64, half: f64) -> Option<usize> {
    let after = words.partition_point(|w| w.t < t);
    let mut best: Option<(f64, usize)> = None;
    if after > 0 {
        // earliest word sharing the timestamp just before `t`
        let prev_t = words[after - 1].t;
        let first = words.partition_point(|w| w.t < prev_t);
        best = Some(((t - prev_t).abs(), first));
    }
    if after < words.len() {
        let d = (words[after].t - t).abs();
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, after));
        }
    }
    best.filter(|&(d, _)| d <= half).map(|(_, i)| i)
}

fn align_injective(words: &[TimedWord], beats: &[TimedBeat], half: f64) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    for (j, b) in beats.iter().enumerate() {
        let lo = words.partition_point(|w| w.t < b.t - half);
        for (i, w) in words.iter().enumerate().skip(lo) {
            let d = (b.t - w.t).abs();
            if w.t > b.t + half {
                break;
            }
            if d <= half {
                candidates.push((d, j, i));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut beat_used = vec![false; beats.len()];
    let mut word_used = vec![false; words.len()];
    let mut pairs = Vec::new();
    for (_, j, i) in candidates {
        if !beat_used[j] && !word_used[i] {
            beat_used[j] = true;
            word_used[i] = true;
            pairs.push((j, i));
        }
    }
    pairs.sort_unstable();
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FreqLabel {
    Slow,
    Medium,
    Fast,
}

impl FreqLabel {
    pub const ALL: [FreqLabel; 3] = [FreqLabel::Slow, FreqLabel::Medium, FreqLabel::Fast];

    pub fn letter(self) -> char {
        match self {
            FreqLabel::Slow => 'S',
            FreqLabel::Medium => 'M',
            FreqLabel::Fast => 'F',
        }
    }
}

impl fmt::Display for FreqLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for FreqLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s" | "slow" => Ok(FreqLabel::Slow),
            "m" | "medium" => Ok(FreqLabel::Medium),
            "f" | "fast" => Ok(FreqLabel::Fast),
            other => Err(Error::invalid(format!("unknown frequency label {other:?}"))),
        }
    }
}

/// Words-per-beat buckets. A ratio within `medium_tolerance` of
/// `medium_center` is MEDIUM; below the band SLOW, above it FAST.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqThresholds {
    pub medium_center: f64,
    pub medium_tolerance: f64,
}

impl Default for FreqThresholds {
    fn default() -> Self {
        Self {
            medium_center: 3.0,
            medium_tolerance: 0.25,
        }
    }
}

impl FreqThresholds {
    pub fn label(&self, ratio: f64) -> FreqLabel {
        if (ratio - self.medium_center).abs() <= self.medium_tolerance {
            FreqLabel::Medium
        } else if ratio < self.medium_center {
            FreqLabel::Slow
        } else {
            FreqLabel::Fast
        }
    }
}

/// Total words over total beats, and its bucket.
pub fn beat_frequency(song: &Song, thresholds: &FreqThresholds) -> Result<(f64, FreqLabel)> {
    let (words, beats) = song
        .sentences
        .iter()
        .flat_map(|s| &s.words)
        .fold((0usize, 0usize), |(w, b), word| (w + 1, b + word.beat as usize));
    if beats == 0 {
        return Err(Error::invalid(format!(
            "song {:?} has no beats; frequency undefined",
            song.id
        )));
    }
    let ratio = words as f64 / beats as f64;
    Ok((ratio, thresholds.label(ratio)))
}

/// One song block of a timestamp file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimedSong {
    pub id: String,
    /// Words grouped by lyric sentence.
    pub sentences: Vec<Vec<TimedWord>>,
    /// `(start, end)` of every word, parallel to the flattened sentences.
    pub intervals: Vec<(f64, f64)>,
    pub beats: Vec<TimedBeat>,
    pub duration: Option<f64>,
}

impl TimedSong {
    pub fn words(&self) -> Vec<TimedWord> {
        self.sentences.iter().flatten().cloned().collect()
    }

    /// Explicit `DURATION`, else the span from first word start to last word end.
    pub fn total_duration(&self) -> f64 {
        self.duration.unwrap_or_else(|| {
            let start = self.intervals.iter().map(|i| i.0).fold(f64::INFINITY, f64::min);
            let end = self.intervals.iter().map(|i| i.1).fold(f64::NEG_INFINITY, f64::max);
            end - start
        })
    }

    /// Aligns beats to words and returns the `*`-annotated song.
    pub fn align(&self, opts: AlignOptions) -> Result<(Song, AlignmentResult)> {
        let words = self.words();
        let r = average_word_duration(&words, self.total_duration())?;
        // stable sort keeps lyric order among equal timestamps
        let mut order: Vec<usize> = (0..words.len()).collect();
        order.sort_by(|&a, &b| words[a].t.total_cmp(&words[b].t));
        let sorted: Vec<TimedWord> = order.iter().map(|&i| words[i].clone()).collect();
        let mut beats = self.beats.clone();
        beats.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut result = align_beats_with(&sorted, &beats, r, opts);
        for pair in &mut result.pairs {
            pair.1 = order[pair.1];
        }
        let flags = result.beat_flags(words.len());
        let mut flat = flags.into_iter();
        let sentences = self
            .sentences
            .iter()
            .map(|s| Sentence {
                words: s
                    .iter()
                    .map(|w| Word::new(w.word.clone(), flat.next().unwrap_or(false)))
                    .collect(),
            })
            .collect();
        let song = Song {
            id: self.id.clone(),
            sentences,
            freq: None,
        };
        Ok((song, result))
    }
}

/// Parses a timestamp file: `#SONG <id>` headers, then `WORD <w> <start> <end>`,
/// `BEAT <t>`, `DURATION <s>` and `SEP` (end of lyric sentence) records.
pub fn parse_timestamps(text: &str) -> Result<Vec<TimedSong>> {
    let mut songs: Vec<TimedSong> = Vec::new();
    let mut open_sentence: Vec<TimedWord> = Vec::new();

    fn close(song: Option<&mut TimedSong>, open: &mut Vec<TimedWord>) {
        if let Some(song) = song {
            if !open.is_empty() {
                song.sentences.push(std::mem::take(open));
            }
        }
    }

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: &str| Error::Parse {
            line: line_no,
            message: message.to_string(),
        };
        if let Some(rest) = line.strip_prefix("#SONG") {
            close(songs.last_mut(), &mut open_sentence);
            let id = rest.trim();
            songs.push(TimedSong {
                id: if id.is_empty() {
                    format!("song-{}", songs.len() + 1)
                } else {
                    id.to_string()
                },
                ..TimedSong::default()
            });
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let song = songs
            .last_mut()
            .ok_or_else(|| err("record before the first #SONG header"))?;
        let time = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| err(&format!("bad time {s:?}")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(err(&format!("time must be finite and non-negative, got {v}")));
            }
            Ok(v)
        };
        match fields.as_slice() {
            ["WORD", w, start, end] => {
                let (s, e) = (time(start)?, time(end)?);
                if e < s {
                    return Err(err("word ends before it starts"));
                }
                song.intervals.push((s, e));
                open_sentence.push(TimedWord::from_interval(*w, s, e));
            }
            ["BEAT", t] => song.beats.push(TimedBeat { t: time(t)? }),
            ["DURATION", d] => song.duration = Some(time(d)?),
            ["SEP"] => {
                if !open_sentence.is_empty() {
                    song.sentences.push(std::mem::take(&mut open_sentence));
                }
            }
            _ => return Err(err(&format!("unrecognized record {line:?}"))),
        }
    }
    close(songs.last_mut(), &mut open_sentence);
    for s in &songs {
        if s.sentences.is_empty() {
            return Err(Error::invalid(format!("song {:?} has no words", s.id)));
        }
    }
    Ok(songs)
}

pub fn load_timestamps(path: impl AsRef<Path>) -> Result<Vec<TimedSong>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_timestamps(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_song;

    fn words(ts: &[f64]) -> Vec<TimedWord> {
        ts.iter()
            .enumerate()
            .map(|(i, &t)| TimedWord::new(format!("w{i}"), t))
            .collect()
    }

    fn beats(ts: &[f64]) -> Vec<TimedBeat> {
        ts.iter().map(|&t| TimedBeat { t }).collect()
    }

    #[test]
    fn average_duration() {
        assert_eq!(average_word_duration(&words(&[0.0; 10]), 20.0).unwrap(), 2.0);
        assert_eq!(average_word_duration(&words(&[0.0]), 3.0).unwrap(), 3.0);
        assert!(average_word_duration(&[], 3.0).is_err());
        assert!(average_word_duration(&words(&[0.0]), 0.0).is_err());
    }

    #[test]
    fn exact_coincidence_aligns() {
        let res = align_beats(&words(&[1.0]), &beats(&[1.0]), 1.0);
        assert_eq!(res.pairs, vec![(0, 0)]);
    }

    #[test]
    fn beat_outside_window_stays_unaligned() {
        let res = align_beats(&words(&[1.0]), &beats(&[5.0]), 1.0);
        assert!(res.pairs.is_empty());
        // boundary |Δ| == r/2 is inside
        let res = align_beats(&words(&[1.0]), &beats(&[1.5]), 1.0);
        assert_eq!(res.pairs, vec![(0, 0)]);
    }

    #[test]
    fn ties_go_to_earlier_word() {
        let res = align_beats(&words(&[1.0, 2.0]), &beats(&[1.5]), 2.0);
        assert_eq!(res.pairs, vec![(0, 0)]);
        let res = align_beats(&words(&[1.0, 1.0, 2.0]), &beats(&[1.2]), 2.0);
        assert_eq!(res.pairs, vec![(0, 0)]);
    }

    #[test]
    fn empty_inputs() {
        assert!(align_beats(&[], &beats(&[1.0]), 1.0).pairs.is_empty());
        assert!(align_beats(&words(&[1.0]), &[], 1.0).pairs.is_empty());
    }

    #[test]
    fn a_word_may_take_several_beats_unless_injective() {
        let w = words(&[1.0, 3.0]);
        let b = beats(&[0.9, 1.1]);
        assert_eq!(align_beats(&w, &b, 1.0).pairs, vec![(0, 0), (1, 0)]);
        let inj = align_beats_with(&w, &b, 1.0, AlignOptions { injective: true });
        assert_eq!(inj.pairs, vec![(0, 0)]);
    }

    #[test]
    fn frequency_label_examples() {
        let t = FreqThresholds::default();
        assert_eq!(t.label(4.3), FreqLabel::Fast);
        assert_eq!(t.label(2.1), FreqLabel::Slow);
        assert_eq!(t.label(3.0), FreqLabel::Medium);
        assert_eq!(t.label(2.6), FreqLabel::Slow);
    }

    #[test]
    fn frequency_of_song() {
        let song = parse_song("*我长大的*地方\n像一*个简朴*寨\n").unwrap();
        let (ratio, label) = beat_frequency(&song, &FreqThresholds::default()).unwrap();
        assert_eq!(ratio, 3.0);
        assert_eq!(label, FreqLabel::Medium);
        let flat = parse_song("我长大的地方\n").unwrap();
        assert!(beat_frequency(&flat, &FreqThresholds::default()).is_err());
    }

    #[test]
    fn timestamp_file_round_trip_to_annotated_song() {
        let text = "#SONG demo\nWORD 我 0.0 0.5\nWORD 抬 0.5 1.0\nWORD 头 1.0 1.5\nBEAT 0.76\nSEP\n\
                    WORD 仰 1.5 2.0\nWORD 望 2.0 2.5\nBEAT 1.74\nBEAT 9.0\n";
        let songs = parse_timestamps(text).unwrap();
        assert_eq!(songs.len(), 1);
        assert_eq!(songs[0].sentences.len(), 2);
        let (song, res) = songs[0].align(AlignOptions::default()).unwrap();
        assert_eq!(res.r, 0.5);
        assert_eq!(res.pairs, vec![(0, 1), (1, 3)]);
        assert_eq!(crate::corpus::render_song(&song), "我*抬头\n*仰望\n");
    }

    #[test]
    fn timestamp_errors_carry_line_numbers() {
        assert!(matches!(
            parse_timestamps("WORD a 0 1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_timestamps("#SONG x\nWORD a 0 1\nBEAT -1\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_timestamps("#SONG x\nNOTE a\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
