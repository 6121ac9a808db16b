use std::collections::HashMap;

use crate::corpus::{paragraph_ngrams, Paragraph};

use super::Frame;

/// N-gram orders used for subframe indicators.
pub const INDICATOR_ORDERS: [usize; 2] = [2, 3];

/// A paragraph together with the frames it was annotated with (possibly none).
#[derive(Clone, Debug)]
pub struct AnnotatedParagraph<'a> {
    pub paragraph: &'a Paragraph,
    pub frames: Vec<Frame>,
}

#[derive(Clone, Debug, Default)]
struct GramCounts {
    total: u64,
    per_frame: [u64; 15],
    units: u64,
}

/// Single-pass counter for `ln(P(g|f) / P(g))`.
///
/// `P(g|f)` is the share of `g` among all counted grams in units (paragraphs or
/// documents) labelled `f`; `P(g)` is the same share over every unit.
#[derive(Clone, Debug)]
pub struct PmiCounter {
    orders: Vec<usize>,
    grams: HashMap<String, GramCounts>,
    total: u64,
    frame_totals: [u64; 15],
    units: u64,
}

impl PmiCounter {
    pub fn new(orders: &[usize]) -> Self {
        PmiCounter {
            orders: orders.to_vec(),
            grams: HashMap::new(),
            total: 0,
            frame_totals: [0; 15],
            units: 0,
        }
    }

    pub fn add(&mut self, paragraph: &Paragraph, frames: &[Frame]) {
        let grams: Vec<String> = self
            .orders
            .iter()
            .flat_map(|&n| paragraph_ngrams(paragraph, n))
            .collect();
        self.add_grams(grams, frames);
    }

    /// Adds one counting unit given its grams with multiplicity.
    pub fn add_grams(&mut self, grams: Vec<String>, frames: &[Frame]) {
        self.units += 1;
        let n = grams.len() as u64;
        self.total += n;
        for f in frames {
            self.frame_totals[f.ordinal()] += n;
        }
        let mut seen: Vec<&String> = Vec::new();
        let mut local: HashMap<&String, u64> = HashMap::new();
        for g in &grams {
            let c = local.entry(g).or_insert(0);
            if *c == 0 {
                seen.push(g);
            }
            *c += 1;
        }
        for g in seen {
            let c = local[g];
            let entry = self.grams.entry(g.clone()).or_default();
            entry.total += c;
            entry.units += 1;
            for f in frames {
                entry.per_frame[f.ordinal()] += c;
            }
        }
    }

    pub fn units(&self) -> u64 {
        self.units
    }

    pub fn frame_total(&self, frame: Frame) -> u64 {
        self.frame_totals[frame.ordinal()]
    }

    /// Fraction of units containing `gram`.
    pub fn unit_fraction(&self, gram: &str) -> f64 {
        match self.grams.get(gram) {
            Some(c) if self.units > 0 => c.units as f64 / self.units as f64,
            _ => 0.0,
        }
    }

    /// Natural-log PMI; `-inf` when the gram never occurs under `frame`.
    pub fn pmi(&self, gram: &str, frame: Frame) -> f64 {
        let Some(c) = self.grams.get(gram) else {
            return f64::NEG_INFINITY;
        };
        let in_frame = c.per_frame[frame.ordinal()];
        let frame_total = self.frame_totals[frame.ordinal()];
        if in_frame == 0 || frame_total == 0 {
            return f64::NEG_INFINITY;
        }
        let conditional = in_frame as f64 / frame_total as f64;
        let marginal = c.total as f64 / self.total as f64;
        (conditional / marginal).ln()
    }

    /// All counted grams, sorted.
    pub fn grams(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.grams.keys().map(String::as_str).collect();
        out.sort_unstable();
        out
    }
}

/// PMI of an indicator-order gram with a frame, by direct two-pass counting.
pub fn pmi(gram: &str, frame: Frame, annotated: &[AnnotatedParagraph]) -> f64 {
    let mut all = 0u64;
    let mut all_g = 0u64;
    let mut in_f = 0u64;
    let mut in_f_g = 0u64;
    for ap in annotated {
        let grams: Vec<String> = INDICATOR_ORDERS
            .iter()
            .flat_map(|&n| paragraph_ngrams(ap.paragraph, n))
            .collect();
        let hits = grams.iter().filter(|g| *g == gram).count() as u64;
        all += grams.len() as u64;
        all_g += hits;
        if ap.frames.contains(&frame) {
            in_f += grams.len() as u64;
            in_f_g += hits;
        }
    }
    if in_f_g == 0 {
        return f64::NEG_INFINITY;
    }
    ((in_f_g as f64 / in_f as f64) / (all_g as f64 / all as f64)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn para(text: &str) -> Paragraph {
        Paragraph::from_text("d", 0, text)
    }

    #[test]
    fn ratio_four() {
        // f-units: 100 grams, 4 of them `g`; corpus: 400 grams, 4 of them `g`.
        let mut c = PmiCounter::new(&[1]);
        let mut f_grams = vec!["g".to_string(); 4];
        f_grams.extend((0..96).map(|i| format!("a{i}")));
        c.add_grams(f_grams, &[Frame::Economic]);
        c.add_grams((0..300).map(|i| format!("b{i}")).collect(), &[Frame::Morality]);
        assert!((c.pmi("g", Frame::Economic) - 4f64.ln()).abs() < 1e-12);
        assert!((c.pmi("g", Frame::Economic) - 1.3863).abs() < 1e-4);
        assert_eq!(c.pmi("g", Frame::Morality), f64::NEG_INFINITY);
        assert_eq!(c.pmi("zzz", Frame::Morality), f64::NEG_INFINITY);
    }

    #[test]
    fn exclusive_gram_half_corpus() {
        // frame f holds half of all grams and every occurrence of `x y`.
        let p1 = para("x y q");
        let p2 = para("r s t");
        let ann = [
            AnnotatedParagraph { paragraph: &p1, frames: vec![Frame::Legality] },
            AnnotatedParagraph { paragraph: &p2, frames: vec![] },
        ];
        assert!((pmi("x y", Frame::Legality, &ann) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn uniform_gram_zero() {
        let p1 = para("a b c");
        let p2 = para("a b d");
        let ann = [
            AnnotatedParagraph { paragraph: &p1, frames: vec![Frame::Economic] },
            AnnotatedParagraph { paragraph: &p2, frames: vec![Frame::Morality] },
        ];
        assert!(pmi("a b", Frame::Economic, &ann).abs() < 1e-12);
    }
}
