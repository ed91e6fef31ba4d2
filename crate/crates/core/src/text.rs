//! Stimuli, regions of interest and focal areas.
//!
//! Character positions are 1-based and intervals are half-open, so a
//! stimulus of `N` characters is covered by `[1, N + 1)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("stimulus `{0}` is empty")]
    EmptyStimulus(String),
    #[error("stimulus `{0}` contains no non-whitespace character")]
    AllWhitespace(String),
    #[error("interval [{start}, {end}) is invalid for a stimulus of {len} characters")]
    BadInterval { start: usize, end: usize, len: usize },
    #[error("regions do not segment the stimulus: {0}")]
    NotSegmentative(String),
    #[error("region 1 is skipped; focal areas start at region 2")]
    SkippedRegion,
    #[error("region index {index} out of range 1..={count}")]
    RegionOutOfRange { index: usize, count: usize },
    #[error("invalid focal spec `{0}`")]
    BadFocalSpec(String),
    #[error("unknown whitespace convention `{0}`")]
    BadConvention(String),
}

/// An immutable experimental stimulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stimulus {
    id: String,
    text: String,
    chars: Vec<char>,
}

impl Stimulus {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, TextError> {
        let id = id.into();
        let text = text.into();
        if text.is_empty() {
            return Err(TextError::EmptyStimulus(id));
        }
        let chars = text.chars().collect();
        Ok(Self { id, text, chars })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    /// Number of characters (not bytes).
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The yield of `interval` as an owned string.
    pub fn slice(&self, interval: Interval) -> String {
        self.chars[interval.start - 1..interval.end - 1].iter().collect()
    }

    /// The context strictly before position `pos`, i.e. the yield of `[1, pos)`.
    pub fn prefix_before(&self, pos: usize) -> String {
        self.chars[..pos - 1].iter().collect()
    }
}

/// Half-open character interval `[start, end)` with 1-based positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    /// Checks `1 <= start < end <= len + 1`.
    pub fn new(start: usize, end: usize, len: usize) -> Result<Self, TextError> {
        if start >= 1 && start < end && end <= len + 1 {
            Ok(Self { start, end })
        } else {
            Err(TextError::BadInterval { start, end, len })
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Where whitespace between words is attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Convention {
    #[serde(rename = "leading")]
    LeadingWhitespace,
    #[serde(rename = "trailing")]
    TrailingWhitespace,
}

impl Convention {
    pub const ALL: [Convention; 2] = [Convention::LeadingWhitespace, Convention::TrailingWhitespace];

    pub fn name(self) -> &'static str {
        match self {
            Convention::LeadingWhitespace => "leading",
            Convention::TrailingWhitespace => "trailing",
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Convention {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "leading" => Ok(Convention::LeadingWhitespace),
            "trailing" => Ok(Convention::TrailingWhitespace),
            other => Err(TextError::BadConvention(other.to_string())),
        }
    }
}

/// A segmentative sequence of regions of interest over one stimulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiSequence {
    stimulus: Stimulus,
    regions: Vec<Interval>,
    convention: Convention,
}

impl RoiSequence {
    /// Builds a sequence from explicit intervals, validating that they tile the stimulus.
    pub fn from_intervals(
        stimulus: Stimulus,
        regions: Vec<Interval>,
        convention: Convention,
    ) -> Result<Self, TextError> {
        let mut expected = 1;
        for r in &regions {
            Interval::new(r.start, r.end, stimulus.len())?;
            if r.start != expected {
                return Err(TextError::NotSegmentative(format!(
                    "region {r} starts at {}, expected {expected}",
                    r.start
                )));
            }
            expected = r.end;
        }
        if expected != stimulus.len() + 1 {
            return Err(TextError::NotSegmentative(format!(
                "regions end at {expected}, stimulus ends at {}",
                stimulus.len() + 1
            )));
        }
        Ok(Self { stimulus, regions, convention })
    }

    pub fn stimulus(&self) -> &Stimulus {
        &self.stimulus
    }

    pub fn regions(&self) -> &[Interval] {
        &self.regions
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Number of regions `K`.
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Region `k` (1-based).
    pub fn region(&self, k: usize) -> Result<Interval, TextError> {
        if k == 0 || k > self.regions.len() {
            return Err(TextError::RegionOutOfRange { index: k, count: self.regions.len() });
        }
        Ok(self.regions[k - 1])
    }

    /// Yield of region `k` (1-based).
    pub fn region_yield(&self, k: usize) -> Result<String, TextError> {
        Ok(self.stimulus.slice(self.region(k)?))
    }

    pub fn yields(&self) -> Vec<String> {
        self.regions.iter().map(|r| self.stimulus.slice(*r)).collect()
    }
}

/// Splits a stimulus into word regions, attaching each whitespace run to
/// the following word (leading) or the preceding word (trailing).
///
/// Whitespace before the first word always joins the first region and
/// whitespace after the last word always joins the last region.
pub fn segment_rois(stimulus: &Stimulus, convention: Convention) -> Result<RoiSequence, TextError> {
    let chars = stimulus.chars();
    // 0-based [start, end) of every maximal non-whitespace run.
    let mut words: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        words.push((start, i));
    }
    if words.is_empty() {
        return Err(TextError::AllWhitespace(stimulus.id().to_string()));
    }

    let n = chars.len();
    let k = words.len();
    let mut regions = Vec::with_capacity(k);
    for (idx, &(ws, we)) in words.iter().enumerate() {
        let (start, end) = match convention {
            Convention::LeadingWhitespace => {
                let start = if idx == 0 { 0 } else { words[idx - 1].1 };
                let end = if idx + 1 == k { n } else { we };
                (start, end)
            }
            Convention::TrailingWhitespace => {
                let start = if idx == 0 { 0 } else { ws };
                let end = if idx + 1 == k { n } else { words[idx + 1].0 };
                (start, end)
            }
        };
        regions.push(Interval { start: start + 1, end: end + 1 });
    }
    RoiSequence::from_intervals(stimulus.clone(), regions, convention)
}

/// How a focal area is derived from its region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FocalSpec {
    /// The region itself.
    FullRoi,
    /// The first `n` characters of the region.
    Fixed(usize),
    /// Sized by the word identification span `s` measured from the
    /// preferred viewing location in the previous region.
    Dynamic(usize),
    /// The region plus the next `n` characters of the stimulus.
    LookAhead(usize),
    /// The region plus the whole next region.
    LookAheadFull,
}

impl FocalSpec {
    /// The ten focal areas of the 2-by-10 design, in table order.
    pub fn standard() -> Vec<FocalSpec> {
        vec![
            FocalSpec::FullRoi,
            FocalSpec::Fixed(3),
            FocalSpec::Dynamic(7),
            FocalSpec::Dynamic(8),
            FocalSpec::LookAhead(3),
            FocalSpec::LookAhead(4),
            FocalSpec::LookAhead(5),
            FocalSpec::LookAhead(6),
            FocalSpec::LookAhead(7),
            FocalSpec::LookAheadFull,
        ]
    }

    /// Parses a comma separated list such as `full,fixed:3,lookahead:3..7`.
    pub fn parse_list(s: &str) -> Result<Vec<FocalSpec>, TextError> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" || part == "standard" {
                out.extend(Self::standard());
                continue;
            }
            if let Some((kind, range)) = part.split_once(':') {
                if let Some((lo, hi)) = range.split_once("..") {
                    let lo: usize = lo.parse().map_err(|_| TextError::BadFocalSpec(part.into()))?;
                    let hi: usize = hi.parse().map_err(|_| TextError::BadFocalSpec(part.into()))?;
                    if lo > hi {
                        return Err(TextError::BadFocalSpec(part.into()));
                    }
                    for n in lo..=hi {
                        out.push(format!("{kind}:{n}").parse()?);
                    }
                    continue;
                }
            }
            out.push(part.parse()?);
        }
        Ok(out)
    }
}

impl fmt::Display for FocalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FocalSpec::FullRoi => f.write_str("full"),
            FocalSpec::Fixed(n) => write!(f, "fixed:{n}"),
            FocalSpec::Dynamic(s) => write!(f, "dynamic:{s}"),
            FocalSpec::LookAhead(n) => write!(f, "lookahead:{n}"),
            FocalSpec::LookAheadFull => f.write_str("lookahead:full"),
        }
    }
}

impl FromStr for FocalSpec {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TextError::BadFocalSpec(s.to_string());
        let positive = |v: &str| match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(bad()),
        };
        match s.split_once(':') {
            None if s == "full" => Ok(FocalSpec::FullRoi),
            Some(("fixed", n)) => Ok(FocalSpec::Fixed(positive(n)?)),
            Some(("dynamic", n)) => Ok(FocalSpec::Dynamic(positive(n)?)),
            Some(("lookahead", "full")) => Ok(FocalSpec::LookAheadFull),
            Some(("lookahead", n)) => Ok(FocalSpec::LookAhead(positive(n)?)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for FocalSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FocalSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A focal area `[alpha, beta)` attached to region `roi_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FocalArea {
    pub interval: Interval,
    pub roi_index: usize,
}

/// Preferred viewing location `ceil(len / 2) - 1` (0-based offset into the region).
pub fn preferred_viewing_location(len: usize) -> usize {
    len.div_ceil(2).saturating_sub(1)
}

/// Number of characters of the current region covered by a dynamic focal
/// area, given the previous region's length and the span `s`.
///
/// Counts the span characters left over after those strictly right of the
/// fixation inside the previous region: `v + s + 1 - prev_len`.
pub fn dynamic_size(prev_len: usize, cur_len: usize, span: usize) -> usize {
    let v = preferred_viewing_location(prev_len);
    (v + span + 1).saturating_sub(prev_len).min(cur_len)
}

/// Focal area of region `k` (1-based, `k >= 2`). `Ok(None)` marks an
/// empty dynamic focal area.
pub fn focal_area(rois: &RoiSequence, k: usize, spec: FocalSpec) -> Result<Option<FocalArea>, TextError> {
    let count = rois.len();
    if k == 0 || k > count {
        return Err(TextError::RegionOutOfRange { index: k, count });
    }
    if k == 1 {
        return Err(TextError::SkippedRegion);
    }
    let roi = rois.region(k)?;
    let n = rois.stimulus().len();
    let interval = match spec {
        FocalSpec::FullRoi => roi,
        FocalSpec::Fixed(w) => Interval { start: roi.start, end: roi.start + w.min(roi.len()) },
        FocalSpec::Dynamic(s) => {
            let prev = rois.region(k - 1)?;
            let size = dynamic_size(prev.len(), roi.len(), s);
            if size == 0 {
                return Ok(None);
            }
            Interval { start: roi.start, end: roi.start + size }
        }
        FocalSpec::LookAhead(w) => {
            if k == count {
                roi
            } else {
                Interval { start: roi.start, end: (roi.end + w).min(n + 1) }
            }
        }
        FocalSpec::LookAheadFull => {
            if k == count {
                roi
            } else {
                Interval { start: roi.start, end: rois.region(k + 1)?.end }
            }
        }
    };
    debug_assert!(interval.overlaps(&roi));
    Ok(Some(FocalArea { interval, roi_index: k }))
}

/// Focal yields for every spec (rows) and every region `k >= 2` (columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FocalTable {
    pub convention: Convention,
    pub specs: Vec<FocalSpec>,
    /// `cells[s][k - 2]` is the yield of spec `s` at region `k`.
    pub cells: Vec<Vec<Option<String>>>,
}

impl FocalTable {
    pub fn roi_indices(&self) -> std::ops::RangeInclusive<usize> {
        let cols = self.cells.first().map_or(0, Vec::len);
        2..=cols + 1
    }
}

pub fn focal_table(rois: &RoiSequence, specs: &[FocalSpec]) -> Result<FocalTable, TextError> {
    let mut cells = Vec::with_capacity(specs.len());
    for &spec in specs {
        let mut row = Vec::with_capacity(rois.len().saturating_sub(1));
        for k in 2..=rois.len() {
            let area = focal_area(rois, k, spec)?;
            row.push(area.map(|a| rois.stimulus().slice(a.interval)));
        }
        cells.push(row);
    }
    Ok(FocalTable { convention: rois.convention(), specs: specs.to_vec(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ANNE: &str = "Anne lost control and laughed.";

    fn rois(convention: Convention) -> RoiSequence {
        segment_rois(&Stimulus::new("s1", ANNE).unwrap(), convention).unwrap()
    }

    fn yield_of(rois: &RoiSequence, k: usize, spec: FocalSpec) -> String {
        let a = focal_area(rois, k, spec).unwrap().unwrap();
        rois.stimulus().slice(a.interval)
    }

    #[test]
    fn segments_both_conventions() {
        assert_eq!(
            rois(Convention::LeadingWhitespace).yields(),
            vec!["Anne", " lost", " control", " and", " laughed."]
        );
        assert_eq!(
            rois(Convention::TrailingWhitespace).yields(),
            vec!["Anne ", "lost ", "control ", "and ", "laughed."]
        );
        let hi = Stimulus::new("h", "Hi").unwrap();
        assert_eq!(segment_rois(&hi, Convention::LeadingWhitespace).unwrap().yields(), vec!["Hi"]);
    }

    #[test]
    fn whitespace_runs_attach_as_blocks() {
        let s = Stimulus::new("w", " a \t b\n").unwrap();
        let lead = segment_rois(&s, Convention::LeadingWhitespace).unwrap();
        assert_eq!(lead.yields(), vec![" a", " \t b\n"]);
        let trail = segment_rois(&s, Convention::TrailingWhitespace).unwrap();
        assert_eq!(trail.yields(), vec![" a \t ", "b\n"]);
    }

    #[test]
    fn rejects_blank_stimuli() {
        let s = Stimulus::new("b", "  \u{3000}").unwrap();
        assert!(matches!(
            segment_rois(&s, Convention::TrailingWhitespace),
            Err(TextError::AllWhitespace(_))
        ));
        assert!(Stimulus::new("e", "").is_err());
    }

    #[test]
    fn dynamic_matches_table_entries() {
        let t = rois(Convention::TrailingWhitespace);
        assert_eq!(yield_of(&t, 3, FocalSpec::Dynamic(7)), "contr");
        assert_eq!(yield_of(&t, 4, FocalSpec::Dynamic(8)), "and ");
        let l = rois(Convention::LeadingWhitespace);
        assert_eq!(yield_of(&l, 4, FocalSpec::Dynamic(7)), " an");
    }

    #[test]
    fn fixed_and_lookahead() {
        let t = rois(Convention::TrailingWhitespace);
        let l = rois(Convention::LeadingWhitespace);
        assert_eq!(yield_of(&t, 2, FocalSpec::Fixed(3)), "los");
        assert_eq!(yield_of(&l, 2, FocalSpec::Fixed(3)), " lo");
        assert_eq!(yield_of(&t, 4, FocalSpec::LookAhead(3)), "and lau");
        assert_eq!(yield_of(&t, 5, FocalSpec::LookAhead(5)), "laughed.");
        assert_eq!(yield_of(&l, 4, FocalSpec::LookAheadFull), " and laughed.");
        assert_eq!(yield_of(&t, 3, FocalSpec::LookAhead(5)), "control and l");

        let short = segment_rois(&Stimulus::new("x", "b a c").unwrap(), Convention::TrailingWhitespace).unwrap();
        assert_eq!(yield_of(&short, 2, FocalSpec::Fixed(3)), "a ");
    }

    #[test]
    fn dynamic_zero_is_missing() {
        // previous region has 22 characters: v = 10, 10 + 7 + 1 - 22 < 0
        let s = Stimulus::new("z", "incomprehensibilities ok").unwrap();
        let r = segment_rois(&s, Convention::TrailingWhitespace).unwrap();
        assert_eq!(focal_area(&r, 2, FocalSpec::Dynamic(7)).unwrap(), None);
    }

    #[test]
    fn index_errors() {
        let t = rois(Convention::TrailingWhitespace);
        assert_eq!(focal_area(&t, 1, FocalSpec::FullRoi), Err(TextError::SkippedRegion));
        assert!(matches!(
            focal_area(&t, 6, FocalSpec::FullRoi),
            Err(TextError::RegionOutOfRange { index: 6, count: 5 })
        ));
    }

    #[test]
    fn two_region_table() {
        let r = segment_rois(&Stimulus::new("t", "ab cd").unwrap(), Convention::LeadingWhitespace).unwrap();
        let table = focal_table(&r, &[FocalSpec::FullRoi]).unwrap();
        assert_eq!(table.cells, vec![vec![Some(" cd".to_string())]]);
        assert_eq!(table.roi_indices(), 2..=2);
    }

    #[test]
    fn spec_parsing_round_trips() {
        let specs = FocalSpec::parse_list("full,fixed:3,dynamic:7,dynamic:8,lookahead:3..7,lookahead:full").unwrap();
        assert_eq!(specs, FocalSpec::standard());
        for s in &specs {
            assert_eq!(&s.to_string().parse::<FocalSpec>().unwrap(), s);
        }
        assert!("fixed:0".parse::<FocalSpec>().is_err());
        assert!("bogus".parse::<FocalSpec>().is_err());
        assert!(FocalSpec::parse_list("").unwrap().is_empty());
    }

    #[test]
    fn explicit_intervals_must_tile() {
        let s = Stimulus::new("s", "abcd").unwrap();
        let ok = RoiSequence::from_intervals(
            s.clone(),
            vec![Interval { start: 1, end: 3 }, Interval { start: 3, end: 5 }],
            Convention::LeadingWhitespace,
        );
        assert!(ok.is_ok());
        let gap = RoiSequence::from_intervals(
            s,
            vec![Interval { start: 1, end: 2 }, Interval { start: 3, end: 5 }],
            Convention::LeadingWhitespace,
        );
        assert!(matches!(gap, Err(TextError::NotSegmentative(_))));
    }
}
