//! Script-aware text helpers shared by the corpus, baseline and metric code.
//!
//! Chinese and Japanese text has no word delimiters, so lengths and tokens are
//! measured per character there and per whitespace token elsewhere.

/// True for CJK ideographs, kana and hangul syllables.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xAC00..=0xD7AF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF)
}

pub fn contains_cjk(text: &str) -> bool {
    text.chars().any(is_cjk)
}

/// Punctuation in either ASCII or the CJK/full-width blocks.
pub fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c as u32,
            0x2010..=0x2027 | 0x3000..=0x303F | 0xFF01..=0xFF0F | 0xFF1A..=0xFF20
            | 0xFF3B..=0xFF40 | 0xFF5B..=0xFF65)
}

/// Length used for model budgets: non-whitespace characters for CJK text,
/// whitespace tokens otherwise.
pub fn token_len(text: &str) -> usize {
    if contains_cjk(text) {
        text.chars().filter(|c| !c.is_whitespace()).count()
    } else {
        text.split_whitespace().count()
    }
}

/// Tokens for overlap metrics: every non-whitespace character of a CJK chunk,
/// whole whitespace-delimited chunks otherwise.
pub fn metric_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if contains_cjk(chunk) {
            out.extend(chunk.chars().map(String::from));
        } else {
            out.push(chunk.to_string());
        }
    }
    out
}

/// Tokens for embedding lookup.
///
/// Space-delimited chunks are used whole (outer punctuation trimmed). CJK
/// chunks are segmented by greedy longest match against `in_vocab`, falling
/// back to single characters; `max_chars` bounds the match length.
pub fn lookup_tokens<F>(text: &str, max_chars: usize, in_vocab: F) -> Vec<String>
where
    F: Fn(&str) -> bool,
{
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if !contains_cjk(chunk) {
            let trimmed = chunk.trim_matches(is_punct);
            if !trimmed.is_empty() {
                out.push(trimmed.to_string());
            }
            continue;
        }
        let chars: Vec<char> = chunk.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if is_punct(chars[i]) {
                i += 1;
                continue;
            }
            let longest = max_chars.min(chars.len() - i).max(1);
            let mut taken = 1;
            for len in (2..=longest).rev() {
                let candidate: String = chars[i..i + len].iter().collect();
                if in_vocab(&candidate) {
                    taken = len;
                    break;
                }
            }
            out.push(chars[i..i + taken].iter().collect());
            i += taken;
        }
    }
    out
}
