//! Reply parsers for the construction prompts. Each is lenient about
//! markdown emphasis and spacing and strict about the labelled lines it
//! needs.

use std::sync::LazyLock;

use regex::Regex;

static CLAIM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^[\s*_#>-]*claim\s*\d+[\s*_]*:[\s*_]*(.*?)\s*$").unwrap());
static PREMISE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?im)^[\s*_#>-]*premise\s*\d+[\s*_]*:[\s*_]*(.*?)\s*$").unwrap());
static JUDGEMENT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?im)^[\s*_#>-]*judge?ment[\s*_]*:[\s*_]*(true|false)\b").unwrap()
});

const NOT_CHECK_WORTHY: &str = "no check-worthy claims available";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decomposition {
    Claims(Vec<String>),
    NotCheckWorthy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyChoice {
    PremiseOnly,
    CorrectionOnly,
    Both,
}

/// Labelled values of the form `Label: value`, ignoring the label's case and
/// surrounding emphasis.
fn labelled_lines<'a>(reply: &'a str, label: &str) -> Vec<&'a str> {
    reply
        .lines()
        .filter_map(|line| {
            let line = line.trim_start_matches(|c: char| c.is_whitespace() || "*_#>-".contains(c));
            let (head, rest) = line.split_once(':')?;
            let head = head.trim_matches(|c: char| c.is_whitespace() || c == '*' || c == '_');
            head.eq_ignore_ascii_case(label)
                .then(|| rest.trim_matches(|c: char| c.is_whitespace() || c == '*'))
        })
        .filter(|v| !v.is_empty())
        .collect()
}

fn strip_quotes(text: &str) -> String {
    text.trim().trim_matches('"').trim().to_owned()
}

pub fn parse_claims(reply: &str) -> Result<Decomposition, String> {
    let claims: Vec<String> = CLAIM
        .captures_iter(reply)
        .map(|c| strip_quotes(&c[1]))
        .collect();
    if claims
        .iter()
        .any(|c| c.to_ascii_lowercase().contains(NOT_CHECK_WORTHY))
        || (claims.is_empty() && reply.to_ascii_lowercase().contains(NOT_CHECK_WORTHY))
    {
        return Ok(Decomposition::NotCheckWorthy);
    }
    let claims: Vec<String> = claims.into_iter().filter(|c| !c.is_empty()).collect();
    if claims.is_empty() {
        return Err("no `Claim k:` lines in decomposition reply".into());
    }
    Ok(Decomposition::Claims(claims))
}

pub fn parse_strategy(reply: &str) -> Option<StrategyChoice> {
    let text = labelled_lines(reply, "output")
        .first()
        .copied()
        .unwrap_or(reply)
        .to_ascii_lowercase();
    let premise = text.contains("logical relation");
    let correction = text.contains("statement perturbation");
    let both = text
        .split(|c: char| !c.is_ascii_alphabetic())
        .any(|w| w == "both");
    match (both, premise, correction) {
        (true, _, _) | (false, true, true) => Some(StrategyChoice::Both),
        (false, true, false) => Some(StrategyChoice::PremiseOnly),
        (false, false, true) => Some(StrategyChoice::CorrectionOnly),
        (false, false, false) => None,
    }
}

/// Judgement (if stated) and premises with the "not applicable" sentinel
/// removed.
pub fn parse_premises(reply: &str) -> Result<(Option<bool>, Vec<String>), String> {
    let judgement = JUDGEMENT
        .captures(reply)
        .map(|c| c[1].eq_ignore_ascii_case("true"));
    let mut sentinel = false;
    let mut premises = Vec::new();
    for caps in PREMISE.captures_iter(reply) {
        let text = strip_quotes(&caps[1]);
        let lower = text.to_ascii_lowercase();
        if lower.starts_with("no ") && lower.contains("premises applicable") {
            sentinel = true;
        } else if !text.is_empty() {
            premises.push(text);
        }
    }
    if judgement.is_none() && premises.is_empty() && !sentinel {
        return Err("reply has neither a Judgement line nor premises".into());
    }
    Ok((judgement, premises))
}

pub fn parse_question(reply: &str) -> Option<String> {
    labelled_lines(reply, "question")
        .first()
        .map(|q| strip_quotes(q))
        .filter(|q| !q.is_empty())
}

pub fn parse_revised(reply: &str) -> Option<String> {
    labelled_lines(reply, "revised answer")
        .first()
        .map(|q| strip_quotes(q))
        .filter(|q| !q.is_empty())
}

pub fn parse_output(reply: &str) -> Option<String> {
    labelled_lines(reply, "output")
        .first()
        .map(|q| strip_quotes(q))
        .filter(|q| !q.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claims() {
        let reply = "Claim 1: The world's largest desert is Antarctica.\nClaim 2: Antarctica is larger than the Sahara.";
        assert_eq!(
            parse_claims(reply).unwrap(),
            Decomposition::Claims(vec![
                "The world's largest desert is Antarctica.".into(),
                "Antarctica is larger than the Sahara.".into()
            ])
        );
        assert_eq!(
            parse_claims("Claim 1: No check-worthy claims available.").unwrap(),
            Decomposition::NotCheckWorthy
        );
        assert_eq!(
            parse_claims("No check-worthy claims available.").unwrap(),
            Decomposition::NotCheckWorthy
        );
        let single = "Claim 1: The software 'Photoshop' was released by Adobe Systems in 1988.";
        assert!(matches!(parse_claims(single).unwrap(), Decomposition::Claims(c) if c.len() == 1));
        assert!(parse_claims("Sure! Here you go.").is_err());
        assert!(
            matches!(parse_claims("**Claim 1:** a\n- Claim 2 : b").unwrap(), Decomposition::Claims(c) if c == ["a", "b"])
        );
    }

    #[test]
    fn strategy() {
        assert_eq!(
            parse_strategy("Output: Logical Relation"),
            Some(StrategyChoice::PremiseOnly)
        );
        assert_eq!(
            parse_strategy("Statement Perturbation"),
            Some(StrategyChoice::CorrectionOnly)
        );
        assert_eq!(parse_strategy("Output: both"), Some(StrategyChoice::Both));
        assert_eq!(parse_strategy("BOTH"), Some(StrategyChoice::Both));
        assert_eq!(parse_strategy("I would pick the first one"), None);
    }

    #[test]
    fn premises() {
        let reply = "Judgement: True\nPremise 1: A.\nPremise 2: B.";
        assert_eq!(
            parse_premises(reply).unwrap(),
            (Some(true), vec!["A.".into(), "B.".into()])
        );
        let reply = "Judgement: False\nPremise 1: No supportive premises applicable.";
        assert_eq!(parse_premises(reply).unwrap(), (Some(false), vec![]));
        assert_eq!(
            parse_premises("Premise 1: No contradictory premises applicable.").unwrap(),
            (None, vec![])
        );
        assert!(parse_premises("The statement is false.").is_err());
    }

    #[test]
    fn labelled() {
        assert_eq!(
            parse_question("Masked statement: x\nQuestion: Who created Bitcoin in 2009?").unwrap(),
            "Who created Bitcoin in 2009?"
        );
        assert_eq!(
            parse_revised("Revised Answer: Water freezes at 0 °C.").unwrap(),
            "Water freezes at 0 °C."
        );
        assert_eq!(parse_revised("**Revised Answer**: \"x\"").unwrap(), "x");
        assert_eq!(
            parse_output("Output: John Russell Reynolds was born in London.").unwrap(),
            "John Russell Reynolds was born in London."
        );
        assert_eq!(parse_question("no label"), None);
        assert_eq!(parse_revised("Revised Answer:   "), None);
    }
}
