//! Enumerated-list marker detection.
//!
//! Candidate markers are accepted only when they continue an open list
//! level in sequence (`(b)` after `(a)`, `(ii)` after `(i)`, ...) or open a
//! new level with its first ordinal. That keeps cross-references such as
//! "subsection 5(2)" from being mistaken for list items.

use serde::Deserialize;

/// Which marker families are recognised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkerToggles {
    /// `(a)`, `(b)`, ... and `(A)`, `(B)`, ...
    pub paren_letters: bool,
    /// `(i)`, `(ii)`, ...
    pub paren_roman: bool,
    /// `(1)`, `(2)`, ...
    pub paren_digits: bool,
    /// `1.`, `2.`, ... at line start
    pub dot_digits: bool,
    /// `•` and `-` at line start
    pub bullets: bool,
}

impl Default for MarkerToggles {
    fn default() -> Self {
        Self {
            paren_letters: true,
            paren_roman: true,
            paren_digits: true,
            dot_digits: true,
            bullets: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Lower,
    Upper,
    Roman,
    Digit,
    DotDigit,
    Bullet(char),
}

#[derive(Debug, Clone, Copy)]
struct Reading {
    family: Family,
    ordinal: u32,
}

/// A marker accepted as a list item boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Marker {
    /// Byte offset of the marker in the block.
    pub start: usize,
    /// Byte offset where the item content begins.
    pub content_start: usize,
    pub depth: usize,
    pub text: String,
}

fn roman_value(s: &str) -> Option<u32> {
    const NUMERALS: [&str; 39] = [
        "i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix", "x", "xi", "xii", "xiii", "xiv",
        "xv", "xvi", "xvii", "xviii", "xix", "xx", "xxi", "xxii", "xxiii", "xxiv", "xxv", "xxvi",
        "xxvii", "xxviii", "xxix", "xxx", "xxxi", "xxxii", "xxxiii", "xxxiv", "xxxv", "xxxvi",
        "xxxvii", "xxxviii", "xxxix",
    ];
    NUMERALS.iter().position(|n| *n == s).map(|p| p as u32 + 1)
}

/// Parses a marker candidate at byte `pos`. Returns its readings and the
/// byte offset just past the marker (not including trailing whitespace).
fn parse_candidate(block: &str, pos: usize, toggles: &MarkerToggles) -> Option<(Vec<Reading>, usize)> {
    let rest = &block[pos..];
    let first = rest.chars().next()?;
    let mut readings = Vec::new();
    let end;
    if first == '(' {
        let close = rest[1..].find(')')? + 1;
        let inner = &rest[1..close];
        if inner.is_empty() || inner.len() > 6 {
            return None;
        }
        if inner.bytes().all(|b| b.is_ascii_digit()) {
            if inner.len() > 3 || !toggles.paren_digits {
                return None;
            }
            readings.push(Reading {
                family: Family::Digit,
                ordinal: inner.parse().ok()?,
            });
        } else if inner.bytes().all(|b| b.is_ascii_lowercase()) {
            if toggles.paren_letters && inner.len() == 1 {
                readings.push(Reading {
                    family: Family::Lower,
                    ordinal: u32::from(inner.as_bytes()[0] - b'a') + 1,
                });
            }
            if toggles.paren_roman {
                if let Some(v) = roman_value(inner) {
                    readings.push(Reading {
                        family: Family::Roman,
                        ordinal: v,
                    });
                }
            }
        } else if inner.len() == 1 && inner.as_bytes()[0].is_ascii_uppercase() {
            if toggles.paren_letters {
                readings.push(Reading {
                    family: Family::Upper,
                    ordinal: u32::from(inner.as_bytes()[0] - b'A') + 1,
                });
            }
        } else {
            return None;
        }
        end = pos + close + 1;
    } else if first.is_ascii_digit() {
        if !toggles.dot_digits {
            return None;
        }
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        if digits > 3 || rest.as_bytes().get(digits) != Some(&b'.') {
            return None;
        }
        readings.push(Reading {
            family: Family::DotDigit,
            ordinal: rest[..digits].parse().ok()?,
        });
        end = pos + digits + 1;
    } else if first == '\u{2022}' || first == '-' {
        if !toggles.bullets {
            return None;
        }
        readings.push(Reading {
            family: Family::Bullet(first),
            ordinal: 1,
        });
        end = pos + first.len_utf8();
    } else {
        return None;
    }
    // A marker must be followed by whitespace.
    match block[end..].chars().next() {
        Some(c) if c.is_whitespace() => Some((readings, end)),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Context {
    LineStart,
    /// After `:` or `;` (optionally followed by "and"/"or").
    Separator,
    /// After `,` or `.`; only good enough to continue an open level.
    Weak,
    None,
}

fn context_before(before: &str) -> Context {
    let trimmed = before.trim_end_matches([' ', '\t']);
    if trimmed.is_empty() || trimmed.ends_with('\n') {
        return Context::LineStart;
    }
    let mut t = trimmed.trim_end();
    for conj in ["and", "or"] {
        if let Some(head) = t.strip_suffix(conj) {
            if head.ends_with(char::is_whitespace) {
                t = head.trim_end();
                break;
            }
        }
    }
    match t.chars().last() {
        Some(':' | ';') => Context::Separator,
        Some(',' | '.') => Context::Weak,
        _ => Context::None,
    }
}

struct Level {
    family: Family,
    last: u32,
}

/// Finds accepted list markers in `block`, in textual order.
pub(crate) fn find_markers(block: &str, toggles: &MarkerToggles) -> Vec<Marker> {
    let mut stack: Vec<Level> = Vec::new();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < block.len() {
        let c = block[pos..].chars().next().unwrap_or(' ');
        let step = c.len_utf8();
        let Some((readings, end)) = parse_candidate(block, pos, toggles) else {
            pos += step;
            continue;
        };
        let ctx = context_before(&block[..pos]);
        let line_only = readings
            .iter()
            .any(|r| matches!(r.family, Family::DotDigit | Family::Bullet(_)));
        if ctx == Context::None || (line_only && ctx != Context::LineStart) {
            pos += step;
            continue;
        }

        let mut accepted = None;
        'levels: for depth in (0..stack.len()).rev() {
            for r in &readings {
                let level = &stack[depth];
                let continues = r.family == level.family
                    && (matches!(r.family, Family::Bullet(_)) || r.ordinal == level.last + 1);
                if continues {
                    accepted = Some((depth, *r));
                    break 'levels;
                }
            }
        }
        if accepted.is_none() && ctx != Context::Weak {
            accepted = readings
                .iter()
                .find(|r| r.ordinal == 1 && stack.iter().all(|l| l.family != r.family))
                .map(|r| (stack.len(), *r));
        }
        let Some((depth, reading)) = accepted else {
            pos += step;
            continue;
        };
        stack.truncate(depth);
        stack.push(Level {
            family: reading.family,
            last: reading.ordinal,
        });

        let content_start = end
            + block[end..]
                .char_indices()
                .find(|(_, c)| !c.is_whitespace())
                .map(|(i, _)| i)
                .unwrap_or(block.len() - end);
        out.push(Marker {
            start: pos,
            content_start,
            depth,
            text: block[pos..end].to_string(),
        });
        pos = end;
    }
    out
}
