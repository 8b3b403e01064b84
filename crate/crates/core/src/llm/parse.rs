//! Turning raw completions into rephrasings, program text and selections.

use thiserror::Error;

use crate::model::{normalize_answer, RephrasedQuery};

/// Splits a completion into exactly `n` rephrasings.
///
/// List markers (`1.`, `2)`, `-`, `*`) are stripped, blank lines and exact
/// duplicates skipped, extra lines dropped. Missing slots are filled with
/// `original` so the caller always gets `n` branches.
pub fn parse_rephrasings(completion: &str, n: usize, original: &str) -> Vec<RephrasedQuery> {
    let mut found: Vec<&str> = Vec::with_capacity(n);
    for line in completion.lines() {
        if found.len() == n {
            break;
        }
        let text = strip_list_marker(line.trim()).trim();
        if text.is_empty() || found.contains(&text) {
            continue;
        }
        found.push(text);
    }
    while found.len() < n {
        found.push(original);
    }
    found
        .into_iter()
        .enumerate()
        .map(|(i, text)| RephrasedQuery { index: i + 1, text: text.to_string() })
        .collect()
}

fn strip_list_marker(line: &str) -> &str {
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return rest;
        }
    }
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                return rest;
            }
        }
    }
    line
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no program found in completion")]
pub struct EmptyProgram;

/// Extracts program text: unwraps the first markdown fence if any, then drops
/// prose preceding the first top-level `def` or assignment line.
pub fn parse_program(completion: &str) -> Result<String, EmptyProgram> {
    let body = fenced_body(completion).unwrap_or(completion);
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        if is_code_start(line) {
            return Ok(body[offset..].to_string());
        }
        offset += line.len();
    }
    Err(EmptyProgram)
}

fn fenced_body(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let after = &text[open + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        if line.trim_start().starts_with("```") {
            return Some(&body[..offset]);
        }
        offset += line.len();
    }
    Some(body)
}

fn is_code_start(line: &str) -> bool {
    if line.starts_with("def ") {
        return true;
    }
    let ident_len = line
        .char_indices()
        .take_while(|(i, c)| c.is_ascii_alphabetic() || *c == '_' || (*i > 0 && c.is_ascii_digit()))
        .count();
    if ident_len == 0 {
        return false;
    }
    let rest = line[ident_len..].trim_start_matches([' ', '\t']);
    rest.starts_with('=') && !rest.starts_with("==")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Index(usize),
    NoMatch,
}

/// Maps a selection completion onto a 0-based option index.
///
/// Tried in order: the whole completion equals a non-numeric option; a
/// leading 1-based number in range; the first option occurring in the
/// completion as whole words (after normalization).
pub fn parse_selection<S: AsRef<str>>(completion: &str, options: &[S]) -> Selection {
    let normalized = normalize_answer(completion);
    let opts: Vec<String> = options.iter().map(|o| normalize_answer(o.as_ref())).collect();

    if let Some(i) = opts.iter().position(|o| !is_integer(o) && *o == normalized) {
        return Selection::Index(i);
    }
    if let Some(k) = leading_integer(completion.trim_start()) {
        if (1..=opts.len()).contains(&k) {
            return Selection::Index(k - 1);
        }
    }
    opts.iter()
        .position(|o| !o.is_empty() && contains_whole_words(&normalized, o))
        .map_or(Selection::NoMatch, Selection::Index)
}

fn is_integer(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn leading_integer(s: &str) -> Option<usize> {
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 || digits > 6 {
        return None;
    }
    if s[digits..].chars().next().is_some_and(char::is_alphanumeric) {
        return None;
    }
    s[..digits].parse().ok()
}

fn contains_whole_words(haystack: &str, needle: &str) -> bool {
    haystack.match_indices(needle).any(|(start, _)| {
        let end = start + needle.len();
        let before = haystack[..start].chars().next_back();
        let after = haystack[end..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(r: &[RephrasedQuery]) -> Vec<&str> {
        r.iter().map(|q| q.text.as_str()).collect()
    }

    #[test]
    fn rephrasings_from_numbered_list() {
        let r = parse_rephrasings("1. What color is the car?\n2. State the car's color.", 2, "Q?");
        assert_eq!(texts(&r), ["What color is the car?", "State the car's color."]);
        assert_eq!(r.iter().map(|q| q.index).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn rephrasings_pad_and_truncate() {
        assert_eq!(texts(&parse_rephrasings("", 3, "Q?")), ["Q?", "Q?", "Q?"]);
        let five = "a\nb\nc\nd\ne";
        assert_eq!(texts(&parse_rephrasings(five, 3, "Q?")), ["a", "b", "c"]);
        assert_eq!(texts(&parse_rephrasings("- a\n\n* a\n3) b", 3, "Q")), ["a", "b", "Q"]);
        assert_eq!(texts(&parse_rephrasings("2020 was a year", 1, "Q")), ["2020 was a year"]);
    }

    #[test]
    fn program_unfenced_identity() {
        let src = "def execute_command(image):\n    return query(image, 'what is this?')\n";
        assert_eq!(parse_program(src).unwrap(), src);
    }

    #[test]
    fn program_fence_stripped() {
        let completion = "Here you go:\n```python\ndef execute_command(image):\n    return 'yes'\n```\nHope it helps.";
        assert_eq!(parse_program(completion).unwrap(), "def execute_command(image):\n    return 'yes'\n");
    }

    #[test]
    fn program_leading_prose_trimmed() {
        let completion = "Sure. The code:\nanswer = 1\ndef execute_command(image):\n    return answer\n";
        assert_eq!(parse_program(completion).unwrap(), "answer = 1\ndef execute_command(image):\n    return answer\n");
        assert_eq!(parse_program("x == 1\ny = 2").unwrap(), "y = 2");
    }

    #[test]
    fn program_prose_only() {
        assert_eq!(parse_program("I cannot answer"), Err(EmptyProgram));
        assert_eq!(parse_program(""), Err(EmptyProgram));
        assert_eq!(parse_program("```\nno code here\n```"), Err(EmptyProgram));
    }

    #[test]
    fn selection_rules() {
        let yn = ["yes", "no"];
        assert_eq!(parse_selection("2", &yn), Selection::Index(1));
        assert_eq!(parse_selection("The answer is no.", &yn), Selection::Index(1));
        assert_eq!(parse_selection("maybe", &yn), Selection::NoMatch);
        assert_eq!(parse_selection("it is not obvious", &yn), Selection::NoMatch);
        assert_eq!(parse_selection("7", &yn), Selection::NoMatch);
        assert_eq!(parse_selection("2. no", &yn), Selection::Index(1));
        assert_eq!(parse_selection("2 dogs", &["3 dogs", "2 dogs"]), Selection::Index(1));
        assert_eq!(parse_selection("2", &["2", "5"]), Selection::Index(1));
        assert_eq!(parse_selection("  YES ", &yn), Selection::Index(0));
    }

    proptest! {
        #[test]
        fn selection_in_bounds(c in "\\PC{0,24}", opts in proptest::collection::vec("[a-z0-9 ]{0,6}", 1..6)) {
            if let Selection::Index(i) = parse_selection(&c, &opts) {
                prop_assert!(i < opts.len());
            }
        }

        #[test]
        fn rephrasings_always_n(c in "\\PC{0,80}", n in 1usize..6) {
            let r = parse_rephrasings(&c, n, "orig");
            prop_assert_eq!(r.len(), n);
            prop_assert!(r.iter().all(|q| !q.text.trim().is_empty()));
        }
    }
}
