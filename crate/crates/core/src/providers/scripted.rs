//! A deterministic offline backend driven by a table of canned answers.
//!
//! Requests are routed by template name and the statement recovered from the
//! rendered built-in prompt. Anything the table does not mention gets a
//! neutral default, so small tables still produce complete trees.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatResponse, LlmProvider, ProviderError, ProviderIdentity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedDecomposition {
    Claims(Vec<String>),
    /// Any string: the statement holds no check-worthy claim.
    NotCheckWorthy(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedWorld {
    /// Statement to probed confidence. Unlisted statements score 0.5.
    pub confidence: BTreeMap<String, f64>,
    pub decompose: BTreeMap<String, ScriptedDecomposition>,
    /// Raw strategy replies, e.g. `"Output: both"`.
    pub strategy: BTreeMap<String, String>,
    /// Raw supportive-premise replies.
    pub supportive: BTreeMap<String, String>,
    pub contradictory: BTreeMap<String, String>,
    pub question: BTreeMap<String, String>,
    /// Question to sampled answers, cycled up to the requested count.
    pub answers: BTreeMap<String, Vec<String>>,
    /// Answer to revised statement.
    pub revise: BTreeMap<String, String>,
    /// `[premise, hypothesis, label]`; identical texts entail, others are neutral.
    pub nli: Vec<[String; 3]>,
}

impl ScriptedWorld {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn reply(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let prompt = request.rendered_prompt.as_str();
        let name = request.template_name.as_str();
        let family = name
            .rsplit_once('_')
            .map_or(name, |(head, tail)| match tail {
                "gpt" | "llama" => head,
                _ => name,
            });
        let text = match family {
            "confidence" => {
                let statement = after_last(prompt, &["True or False? ", "Statement: "])?;
                let c = self.confidence.get(statement).copied().unwrap_or(0.5);
                let word = if c >= 0.5 { "True" } else { "False" };
                // raw probabilities are deliberately unnormalized
                return Ok(ChatResponse {
                    texts: vec![word.into()],
                    candidate_probs: Some((0.9 * c, 0.9 * (1.0 - c))),
                    provider_meta: "scripted".into(),
                });
            }
            "decompose" => {
                let statement = after_last(prompt, &["Statement: "])?;
                match self.decompose.get(statement) {
                    Some(ScriptedDecomposition::Claims(claims)) => claims
                        .iter()
                        .enumerate()
                        .map(|(i, c)| format!("Claim {}: {c}", i + 1))
                        .collect::<Vec<_>>()
                        .join("\n"),
                    Some(ScriptedDecomposition::NotCheckWorthy(_)) => {
                        "Claim 1: No check-worthy claims available.".into()
                    }
                    None => format!("Claim 1: {statement}"),
                }
            }
            "strategy" => {
                let statement = after_last(prompt, &["Target statement: "])?;
                self.strategy
                    .get(statement)
                    .cloned()
                    .unwrap_or_else(|| "Output: Logical Relation".into())
            }
            "premise_supportive" => {
                let statement = after_last(prompt, &["Target statement: "])?;
                self.supportive.get(statement).cloned().unwrap_or_else(|| {
                    "Judgement: True\nPremise 1: No supportive premises applicable.".into()
                })
            }
            "premise_contradictory" => {
                let statement = after_last(prompt, &["Target statement: "])?;
                self.contradictory
                    .get(statement)
                    .cloned()
                    .unwrap_or_else(|| {
                        "Judgement: True\nPremise 1: No contradictory premises applicable.".into()
                    })
            }
            "question" => {
                let statement = after_last(prompt, &["Statement: "])?;
                let question = self
                    .question
                    .get(statement)
                    .cloned()
                    .unwrap_or_else(|| format!("Is it true that {statement}"));
                format!("Question: {question}")
            }
            "answer" => {
                let question = prompt.trim();
                let pool = self.answers.get(question).filter(|a| !a.is_empty());
                let texts = (0..request.sample_count as usize)
                    .map(|i| {
                        pool.map_or_else(|| "I am not sure.".to_owned(), |a| a[i % a.len()].clone())
                    })
                    .collect();
                return Ok(ChatResponse {
                    texts,
                    candidate_probs: None,
                    provider_meta: "scripted".into(),
                });
            }
            "revise" => {
                let answer = after_last(prompt, &["**Background Knowledge**: "])?;
                let statement = after_last(prompt, &["**Statement**: "])?;
                let revised = self.revise.get(answer).map_or(statement, String::as_str);
                format!("Revised Answer: {revised}")
            }
            "nli" => {
                let premise = after_last(prompt, &["Premise: "])?;
                let hypothesis = after_last(prompt, &["Hypothesis: "])?;
                match self
                    .nli
                    .iter()
                    .find(|[p, h, _]| p == premise && h == hypothesis)
                {
                    Some([_, _, label]) => label.clone(),
                    None if premise == hypothesis => "entailment".into(),
                    None => "neutral".into(),
                }
            }
            "decontextualize" => {
                let statement = after_last(prompt, &["Target statement: "])?;
                format!("Output: {statement}")
            }
            other => {
                return Err(ProviderError::InvalidRequest(format!(
                    "no script for template {other:?}"
                )))
            }
        };
        Ok(ChatResponse {
            texts: vec![text],
            candidate_probs: None,
            provider_meta: "scripted".into(),
        })
    }
}

/// Rest of the line after the last occurrence of any marker.
fn after_last<'a>(prompt: &'a str, markers: &[&str]) -> Result<&'a str, ProviderError> {
    markers
        .iter()
        .filter_map(|m| prompt.rfind(m).map(|i| i + m.len()))
        .max()
        .map(|start| prompt[start..].lines().next().unwrap_or("").trim_end())
        .ok_or_else(|| ProviderError::InvalidRequest(format!("prompt lacks any of {markers:?}")))
}

pub struct ScriptedProvider {
    world: ScriptedWorld,
    identity: ProviderIdentity,
}

impl ScriptedProvider {
    pub fn new(world: ScriptedWorld, identity: ProviderIdentity) -> Self {
        Self { world, identity }
    }
}

impl LlmProvider for ScriptedProvider {
    fn identity(&self) -> ProviderIdentity {
        self.identity.clone()
    }

    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.check()?;
        self.world.reply(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::PromptCatalog;

    fn provider(world: ScriptedWorld) -> ScriptedProvider {
        ScriptedProvider::new(world, ProviderIdentity::new("scripted", "m"))
    }

    #[test]
    fn routes_builtin_prompts() {
        let catalog = PromptCatalog::builtin();
        let mut world = ScriptedWorld::default();
        world.confidence.insert("Sky is blue.".into(), 0.8);
        world
            .nli
            .push(["A".into(), "B".into(), "contradiction".into()]);
        let p = provider(world);

        let prompt = catalog
            .render("confidence_llama", &[("statement", "Sky is blue.")])
            .unwrap();
        let r = p
            .chat(
                &ChatRequest::greedy("confidence_llama", prompt, 1)
                    .with_token_probs("True", "False"),
            )
            .unwrap();
        let (a, b) = r.candidate_probs.unwrap();
        assert!((a / (a + b) - 0.8).abs() < 1e-12);

        let prompt = catalog
            .render("nli", &[("premise", "A"), ("hypothesis", "B")])
            .unwrap();
        assert_eq!(
            p.chat(&ChatRequest::greedy("nli", prompt, 8))
                .unwrap()
                .texts,
            ["contradiction"]
        );
        let prompt = catalog
            .render("nli", &[("premise", "B"), ("hypothesis", "A")])
            .unwrap();
        assert_eq!(
            p.chat(&ChatRequest::greedy("nli", prompt, 8))
                .unwrap()
                .texts,
            ["neutral"]
        );

        let prompt = catalog
            .render("decompose_gpt", &[("statement", "X and Y.")])
            .unwrap();
        assert_eq!(
            p.chat(&ChatRequest::greedy("decompose_gpt", prompt, 8))
                .unwrap()
                .texts,
            ["Claim 1: X and Y."]
        );
    }

    #[test]
    fn samples_cycle_answers() {
        let mut world = ScriptedWorld::default();
        world
            .answers
            .insert("Q?".into(), vec!["a".into(), "b".into()]);
        let p = provider(world);
        let r = p
            .chat(&ChatRequest::sampled("answer", "Q?\n", 0.7, 5, 8))
            .unwrap();
        assert_eq!(r.texts, ["a", "b", "a", "b", "a"]);
    }
}
