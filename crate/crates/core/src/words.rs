//! Words over generators and their inverses.
//!
//! Generators are numbered; the printed alphabet is `a, b, c, …` for
//! generators and `A, B, C, …` for their inverses.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub gen: usize,
    pub inv: bool,
}

pub type Word = Vec<Letter>;

impl Letter {
    pub fn gen(gen: usize) -> Letter {
        Letter { gen, inv: false }
    }

    pub fn inverse(self) -> Letter {
        Letter {
            gen: self.gen,
            inv: !self.inv,
        }
    }

    /// Position in the fixed shortlex alphabet: generators, then inverses.
    pub fn rank(self, k: usize) -> usize {
        self.gen + if self.inv { k } else { 0 }
    }

    pub fn from_rank(r: usize, k: usize) -> Letter {
        Letter {
            gen: r % k,
            inv: r >= k,
        }
    }
}

impl serde::Serialize for Letter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_word(&[*self]))
    }
}

impl<'de> serde::Deserialize<'de> for Letter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Letter, D::Error> {
        let s = String::deserialize(d)?;
        match parse_word(&s).map_err(serde::de::Error::custom)?.as_slice() {
            [l] => Ok(*l),
            _ => Err(serde::de::Error::custom(format!("`{s}` is not one letter"))),
        }
    }
}

pub fn format_word(w: &[Letter]) -> String {
    if w.is_empty() {
        return "1".into();
    }
    w.iter()
        .map(|l| {
            let c = (b'a' + (l.gen % 26) as u8) as char;
            if l.inv {
                c.to_ascii_uppercase()
            } else {
                c
            }
        })
        .collect()
}

/// Parses `format_word` output; `1` or the empty string is the empty word.
pub fn parse_word(s: &str) -> Result<Word> {
    let s = s.trim();
    if s == "1" {
        return Ok(Vec::new());
    }
    s.chars()
        .map(|c| {
            if c.is_ascii_lowercase() {
                Ok(Letter::gen((c as u8 - b'a') as usize))
            } else if c.is_ascii_uppercase() {
                Ok(Letter::gen((c as u8 - b'A') as usize).inverse())
            } else {
                Err(Error::BadLetter(c.to_string()))
            }
        })
        .collect()
}

/// Free reduction.
pub fn reduce(w: &[Letter]) -> Word {
    let mut out: Word = Vec::with_capacity(w.len());
    for &l in w {
        if out.last() == Some(&l.inverse()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn inverse(w: &[Letter]) -> Word {
    w.iter().rev().map(|l| l.inverse()).collect()
}

pub fn concat(parts: &[&[Letter]]) -> Word {
    reduce(&parts.concat())
}

/// `w^e` for any integer `e`, reduced.
pub fn power(w: &[Letter], e: i64) -> Word {
    let base = if e < 0 { inverse(w) } else { w.to_vec() };
    let mut out = Vec::with_capacity(base.len() * e.unsigned_abs() as usize);
    for _ in 0..e.unsigned_abs() {
        out.extend_from_slice(&base);
    }
    reduce(&out)
}

pub fn is_reduced(w: &[Letter]) -> bool {
    w.windows(2).all(|p| p[1] != p[0].inverse())
}

/// Shortlex comparison key.
pub fn shortlex_key(w: &[Letter], k: usize) -> (usize, Vec<usize>) {
    (w.len(), w.iter().map(|l| l.rank(k)).collect())
}

/// All reduced words of length `min_len..=max_len` over `k` generators, in
/// shortlex order.
pub fn reduced_words(k: usize, min_len: usize, max_len: usize) -> Vec<Word> {
    let mut out = Vec::new();
    let mut layer: Vec<Word> = vec![Vec::new()];
    for len in 0..=max_len {
        if len >= min_len {
            out.extend(layer.iter().cloned());
        }
        if len == max_len {
            break;
        }
        let mut next = Vec::new();
        for w in &layer {
            for r in 0..2 * k {
                let l = Letter::from_rank(r, k);
                if w.last() != Some(&l.inverse()) {
                    let mut v = w.clone();
                    v.push(l);
                    next.push(v);
                }
            }
        }
        layer = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn format_and_parse() {
        let w = parse_word("abAB").unwrap();
        assert_eq!(format_word(&w), "abAB");
        assert_eq!(parse_word("1").unwrap(), Vec::<Letter>::new());
        assert!(parse_word("a1").is_err());
        assert_eq!(format_word(&reduce(&parse_word("abBA").unwrap())), "1");
    }

    #[test]
    fn enumeration_counts() {
        // 1 + 4 + 12 + 36 reduced words up to length 3 in rank 2.
        let ws = reduced_words(2, 0, 3);
        assert_eq!(ws.len(), 53);
        assert!(ws.iter().all(|w| is_reduced(w)));
        let keys: Vec<_> = ws.iter().map(|w| shortlex_key(w, 2)).collect();
        assert!(keys.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(format_word(&ws[1]), "a");
        assert_eq!(format_word(&ws[3]), "A");
    }

    fn word() -> impl Strategy<Value = Word> {
        prop::collection::vec((0usize..3, any::<bool>()), 0..12).prop_map(|v| {
            v.into_iter()
                .map(|(gen, inv)| Letter { gen, inv })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn reduce_is_idempotent(w in word()) {
            let r = reduce(&w);
            prop_assert!(is_reduced(&r));
            prop_assert_eq!(reduce(&r), r.clone());
        }

        #[test]
        fn inverse_cancels(w in word(), u in word()) {
            prop_assert!(concat(&[&w, &inverse(&w)]).is_empty());
            prop_assert_eq!(inverse(&concat(&[&w, &u])), concat(&[&inverse(&u), &inverse(&w)]));
        }

        #[test]
        fn powers_add(w in word(), i in -3i64..4, j in -3i64..4) {
            prop_assert_eq!(concat(&[&power(&w, i), &power(&w, j)]), power(&w, i + j));
        }
    }
}
