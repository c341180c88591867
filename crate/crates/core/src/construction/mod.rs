//! Belief tree construction: strategy routing, statement generation,
//! confidence probing and NLI relation mapping.
//!
//! [`TreeBuilder::build`] expands a FIFO frontier starting at the root.
//! Each popped node is decomposed when allowed; otherwise (or when
//! decomposition yields fewer than two claims) it gets premise and/or
//! correction children, whichever the strategy selector picks. Sibling
//! candidates are classified and probed concurrently, then added in reply
//! order so identical replies always give identical trees.

mod parse;

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{
    parse_claims, parse_output, parse_premises, parse_question, parse_revised, parse_strategy,
    Decomposition, StrategyChoice,
};

use crate::prompts::{PromptCatalog, PromptError, PromptVariant};
use crate::providers::{ChatRequest, LlmProvider, NliProvider, NliVerdict, ProviderError};
use crate::tree::{BeliefNode, BeliefTree, NodeId, Relation, Statement, Strategy, TreeError};

const TRUE_TOKEN: &str = "True";
const FALSE_TOKEN: &str = "False";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructionError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("could not parse {step} reply: {message}")]
    Parse { step: &'static str, message: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("invalid construction config: {0}")]
    InvalidConfig(String),
}

impl ConstructionError {
    fn parse(step: &'static str, message: impl Into<String>) -> Self {
        ConstructionError::Parse {
            step,
            message: message.into(),
        }
    }

    /// Failures that only cost the statement being generated.
    pub fn is_recoverable(&self) -> bool {
        match self {
            ConstructionError::Parse { .. } => true,
            ConstructionError::Provider(e) => e.is_content_error(),
            _ => false,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConstructionError::Provider(e) => e.kind(),
            ConstructionError::Parse { .. } => "ParseError",
            ConstructionError::Prompt(_) => "PromptError",
            ConstructionError::Tree(_) => "TreeError",
            ConstructionError::InvalidConfig(_) => "InvalidConfig",
        }
    }
}

type Result<T, E = ConstructionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnabledStrategies {
    pub decomposition: bool,
    pub premise: bool,
    pub correction: bool,
}

impl Default for EnabledStrategies {
    fn default() -> Self {
        Self {
            decomposition: true,
            premise: true,
            correction: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstructionConfig {
    pub max_depth: u32,
    pub correction_samples: u32,
    pub correction_temperature: f64,
    pub decompose_root_only: bool,
    /// Must stay false: correction nodes are leaves.
    pub expand_correction_nodes: bool,
    pub strategies: EnabledStrategies,
    pub parallelism: usize,
    pub prompt_variant: PromptVariant,
    /// Estimate confidence from this many sampled True/False answers when the
    /// backend reports no token probabilities.
    pub sampling_fallback: Option<u32>,
    pub max_tokens: u32,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        Self {
            max_depth: 2,
            correction_samples: 5,
            correction_temperature: 0.7,
            decompose_root_only: true,
            expand_correction_nodes: false,
            strategies: EnabledStrategies::default(),
            parallelism: 4,
            prompt_variant: PromptVariant::Gpt,
            sampling_fallback: None,
            max_tokens: 512,
        }
    }
}

impl ConstructionConfig {
    pub fn check(&self) -> Result<()> {
        let invalid = |m: &str| Err(ConstructionError::InvalidConfig(m.to_owned()));
        if self.correction_samples == 0 {
            return invalid("correction_samples must be at least 1");
        }
        if !(self.correction_temperature.is_finite() && self.correction_temperature >= 0.0) {
            return invalid("correction_temperature must be a finite non-negative number");
        }
        if self.expand_correction_nodes {
            return invalid(
                "expand_correction_nodes cannot be enabled: correction nodes are leaves",
            );
        }
        if self.parallelism == 0 {
            return invalid("parallelism must be at least 1");
        }
        if self.sampling_fallback == Some(0) {
            return invalid("sampling_fallback needs at least one sample");
        }
        if self.max_tokens == 0 {
            return invalid("max_tokens must be at least 1");
        }
        Ok(())
    }
}

/// Prompt-level operations against one chat provider.
pub struct Generator<'a> {
    llm: &'a dyn LlmProvider,
    catalog: &'a PromptCatalog,
    variant: PromptVariant,
    max_tokens: u32,
    sampling_fallback: Option<u32>,
}

impl<'a> Generator<'a> {
    pub fn new(
        llm: &'a dyn LlmProvider,
        catalog: &'a PromptCatalog,
        config: &ConstructionConfig,
    ) -> Self {
        Self {
            llm,
            catalog,
            variant: config.prompt_variant,
            max_tokens: config.max_tokens,
            sampling_fallback: config.sampling_fallback,
        }
    }

    fn ask(&self, template: &str, values: &[(&str, &str)], max_tokens: u32) -> Result<String> {
        let prompt = self.catalog.render(template, values)?;
        let response = self
            .llm
            .chat(&ChatRequest::greedy(template, prompt, max_tokens))?;
        Ok(response.first_text()?.to_owned())
    }

    pub fn decompose(&self, statement: &str) -> Result<Decomposition> {
        let template = self.variant.template("decompose");
        let reply = self.ask(&template, &[("statement", statement)], self.max_tokens)?;
        parse_claims(&reply).map_err(|m| ConstructionError::parse("decomposition", m))
    }

    /// Unparseable replies fall back to running both strategies.
    pub fn select_strategy(&self, statement: &str) -> Result<StrategyChoice> {
        let template = self.variant.template("strategy");
        let reply = self.ask(&template, &[("statement", statement)], 16)?;
        Ok(parse_strategy(&reply).unwrap_or_else(|| {
            log::warn!("unrecognized strategy reply {reply:?}; using both");
            StrategyChoice::Both
        }))
    }

    /// Supportive premises when the model judges the statement true,
    /// otherwise contradictory ones. A missing judgement counts as true.
    pub fn generate_premises(&self, statement: &str) -> Result<(bool, Vec<String>)> {
        let reply = self.ask(
            "premise_supportive",
            &[("statement", statement)],
            self.max_tokens,
        )?;
        let (judgement, premises) = parse_premises(&reply)
            .map_err(|m| ConstructionError::parse("supportive premises", m))?;
        if judgement.unwrap_or(true) {
            return Ok((true, premises));
        }
        let reply = self.ask(
            "premise_contradictory",
            &[("statement", statement)],
            self.max_tokens,
        )?;
        let (_, premises) = parse_premises(&reply)
            .map_err(|m| ConstructionError::parse("contradictory premises", m))?;
        Ok((false, premises))
    }

    /// Question, `n` sampled answers, one revision per answer. Revisions are
    /// deduplicated by exact text and may repeat the statement itself.
    pub fn generate_corrections(
        &self,
        statement: &str,
        n: u32,
        temperature: f64,
    ) -> Result<Vec<String>> {
        let template = self.variant.template("question");
        let reply = self.ask(&template, &[("statement", statement)], self.max_tokens)?;
        let question = parse_question(&reply)
            .ok_or_else(|| ConstructionError::parse("question", "no `Question:` line"))?;

        let prompt = self.catalog.render("answer", &[("question", &question)])?;
        let request = ChatRequest::sampled("answer", prompt, temperature, n, self.max_tokens);
        let answers = self.llm.chat(&request)?.texts;
        if answers.is_empty() {
            return Err(ConstructionError::parse("answer", "no sampled answers"));
        }

        let mut seen = HashSet::new();
        let mut revised = Vec::new();
        let mut failures = 0;
        for answer in &answers {
            let reply = self.ask(
                "revise",
                &[("answer", answer), ("statement", statement)],
                self.max_tokens,
            )?;
            match parse_revised(&reply) {
                Some(text) => {
                    if seen.insert(text.clone()) {
                        revised.push(text);
                    }
                }
                None => {
                    log::warn!("revision reply without `Revised Answer:` line dropped");
                    failures += 1;
                }
            }
        }
        if failures == answers.len() {
            return Err(ConstructionError::parse(
                "revision",
                "no `Revised Answer:` line in any reply",
            ));
        }
        Ok(revised)
    }

    /// `p(True) / (p(True) + p(False))` at the first generated position.
    pub fn probe_confidence(&self, statement: &str) -> Result<f64> {
        let template = self.variant.template("confidence");
        let prompt = self
            .catalog
            .render(&template, &[("statement", statement)])?;
        let request = ChatRequest::greedy(template.as_str(), prompt.clone(), 1)
            .with_token_probs(TRUE_TOKEN, FALSE_TOKEN);
        let response = self.llm.chat(&request)?;
        match response.candidate_probs {
            Some((a, b)) => {
                if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                    return Err(ProviderError::MalformedResponse(format!(
                        "candidate probabilities ({a}, {b})"
                    ))
                    .into());
                }
                if a + b > 0.0 {
                    return Ok(a / (a + b));
                }
            }
            None => log::debug!("backend returned no token probabilities"),
        }
        match self.sampling_fallback {
            Some(k) => self.sampled_confidence(&template, prompt, k),
            None => Err(ProviderError::MissingTokens.into()),
        }
    }

    fn sampled_confidence(&self, template: &str, prompt: String, samples: u32) -> Result<f64> {
        let response = self
            .llm
            .chat(&ChatRequest::sampled(template, prompt, 1.0, samples, 2))?;
        let (mut yes, mut answered) = (0usize, 0usize);
        for text in &response.texts {
            let word = text.trim().trim_matches(|c: char| !c.is_ascii_alphabetic());
            let word = word
                .split(|c: char| !c.is_ascii_alphabetic())
                .next()
                .unwrap_or("");
            if word.eq_ignore_ascii_case(TRUE_TOKEN) {
                yes += 1;
                answered += 1;
            } else if word.eq_ignore_ascii_case(FALSE_TOKEN) {
                answered += 1;
            }
        }
        if answered == 0 {
            return Err(ProviderError::MissingTokens.into());
        }
        Ok(yes as f64 / answered as f64)
    }
}

/// Maps the two directed NLI verdicts to a relation; `None` means the pair
/// is unrelated and the child is discarded.
pub fn map_verdicts(forward: NliVerdict, backward: NliVerdict) -> Option<Relation> {
    use NliVerdict::*;
    match (forward, backward) {
        (Contradict, _) | (_, Contradict) => Some(Relation::Contradiction),
        (Entail, Entail) => Some(Relation::Equivalence),
        (Entail, Neutral) => Some(Relation::Entailment),
        (Neutral, Entail) => Some(Relation::ReverseEntailment),
        (Neutral, Neutral) => None,
    }
}

/// NLI in both directions: (parent ⊢ child) then (child ⊢ parent).
pub fn classify_relation(
    parent: &str,
    child: &str,
    nli: &dyn NliProvider,
) -> Result<Option<Relation>, ProviderError> {
    let forward = nli.nli(parent, child)?;
    let backward = nli.nli(child, parent)?;
    Ok(map_verdicts(forward, backward))
}

struct Candidate {
    text: String,
    strategy: Strategy,
}

pub struct TreeBuilder {
    llm: Arc<dyn LlmProvider>,
    nli: Arc<dyn NliProvider>,
    catalog: Arc<PromptCatalog>,
    config: ConstructionConfig,
    pool: Arc<rayon::ThreadPool>,
}

impl TreeBuilder {
    pub fn new(
        llm: Arc<dyn LlmProvider>,
        nli: Arc<dyn NliProvider>,
        catalog: Arc<PromptCatalog>,
        config: ConstructionConfig,
    ) -> Result<Self> {
        config.check()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .thread_name(|i| format!("btprop-worker-{i}"))
            .build()
            .map_err(|e| ConstructionError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            llm,
            nli,
            catalog,
            config,
            pool: Arc::new(pool),
        })
    }

    pub fn config(&self) -> &ConstructionConfig {
        &self.config
    }

    pub fn catalog(&self) -> &PromptCatalog {
        &self.catalog
    }

    pub fn llm(&self) -> &Arc<dyn LlmProvider> {
        &self.llm
    }

    /// Runs `f` on the builder's worker pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    fn generator(&self) -> Generator<'_> {
        Generator::new(self.llm.as_ref(), &self.catalog, &self.config)
    }

    pub fn build(&self, statement: Statement) -> Result<BeliefTree> {
        self.pool.install(|| self.build_inner(statement))
    }

    fn build_inner(&self, statement: Statement) -> Result<BeliefTree> {
        if statement.is_blank() {
            return Err(TreeError::EmptyStatement(NodeId(0)).into());
        }
        let confidence = self.generator().probe_confidence(&statement.text)?;
        let mut tree = BeliefTree::with_root(statement, confidence, self.config.max_depth)?;
        let mut frontier = VecDeque::from([tree.root_id()]);
        while let Some(id) = frontier.pop_front() {
            let node = tree.node(id).expect("frontier holds tree nodes").clone();
            if node.depth >= self.config.max_depth || node.strategy == Strategy::Correction {
                continue;
            }
            for child in self.expand(&mut tree, &node)? {
                let child_node = tree.node(child).expect("just added");
                if child_node.depth < self.config.max_depth
                    && child_node.strategy != Strategy::Correction
                {
                    frontier.push_back(child);
                }
            }
        }
        debug_assert!(tree.is_valid(), "{:?}", tree.validate());
        Ok(tree)
    }

    /// Adds children under `node` and returns their ids in order.
    fn expand(&self, tree: &mut BeliefTree, node: &BeliefNode) -> Result<Vec<NodeId>> {
        let text = node.statement.text.as_str();
        let strategies = self.config.strategies;
        if strategies.decomposition && (node.depth == 0 || !self.config.decompose_root_only) {
            if let Some(ids) = self.try_decompose(tree, node)? {
                return Ok(ids);
            }
        }

        let generator = self.generator();
        let choice = match (strategies.premise, strategies.correction) {
            (false, false) => return Ok(Vec::new()),
            (true, false) => StrategyChoice::PremiseOnly,
            (false, true) => StrategyChoice::CorrectionOnly,
            (true, true) => match generator.select_strategy(text) {
                Ok(choice) => choice,
                Err(e) if e.is_recoverable() => {
                    log::warn!(
                        "node {}: strategy selection failed, using both: {e}",
                        node.id
                    );
                    StrategyChoice::Both
                }
                Err(e) => return Err(e),
            },
        };

        let mut candidates = Vec::new();
        if choice != StrategyChoice::CorrectionOnly {
            match generator.generate_premises(text) {
                Ok((_, premises)) => {
                    candidates.extend(premises.into_iter().map(|text| Candidate {
                        text,
                        strategy: Strategy::Premise,
                    }))
                }
                Err(e) if e.is_recoverable() => {
                    log::warn!("node {}: premises dropped: {e}", node.id)
                }
                Err(e) => return Err(e),
            }
        }
        if choice != StrategyChoice::PremiseOnly {
            let n = self.config.correction_samples;
            match generator.generate_corrections(text, n, self.config.correction_temperature) {
                Ok(corrections) => {
                    candidates.extend(corrections.into_iter().map(|text| Candidate {
                        text,
                        strategy: Strategy::Correction,
                    }))
                }
                Err(e) if e.is_recoverable() => {
                    log::warn!("node {}: corrections dropped: {e}", node.id)
                }
                Err(e) => return Err(e),
            }
        }

        let mut seen = HashSet::new();
        candidates.retain(|c| !c.text.trim().is_empty() && seen.insert(c.text.clone()));

        let scored: Vec<Result<Option<(Relation, f64)>>> = candidates
            .par_iter()
            .map(|c| self.score_candidate(text, c))
            .collect();
        let mut ids = Vec::new();
        for (candidate, outcome) in candidates.into_iter().zip(scored) {
            let (relation, confidence) = match outcome {
                Ok(Some(scored)) => scored,
                Ok(None) => continue,
                Err(e) if e.is_recoverable() => {
                    log::warn!(
                        "node {}: candidate {:?} dropped: {e}",
                        node.id,
                        candidate.text
                    );
                    continue;
                }
                Err(e) => return Err(e),
            };
            let id = tree.next_id();
            let child = BeliefNode::new(
                id,
                Statement::new(candidate.text),
                confidence,
                candidate.strategy,
                Some(relation),
            );
            tree.add_child(node.id, child)?;
            ids.push(id);
        }
        Ok(ids)
    }

    /// Relation to the parent and confidence, or `None` for unrelated pairs.
    fn score_candidate(
        &self,
        parent: &str,
        candidate: &Candidate,
    ) -> Result<Option<(Relation, f64)>> {
        let Some(relation) = classify_relation(parent, &candidate.text, self.nli.as_ref())? else {
            return Ok(None);
        };
        let confidence = match candidate.strategy {
            Strategy::Correction => 1.0,
            _ => self.generator().probe_confidence(&candidate.text)?,
        };
        Ok(Some((relation, confidence)))
    }

    /// Adds a decomposition group when the statement splits into two or more
    /// claims that all probe cleanly. `None` sends the caller to the other
    /// strategies.
    fn try_decompose(
        &self,
        tree: &mut BeliefTree,
        node: &BeliefNode,
    ) -> Result<Option<Vec<NodeId>>> {
        let claims = match self.generator().decompose(&node.statement.text) {
            Ok(Decomposition::Claims(claims)) => claims,
            Ok(Decomposition::NotCheckWorthy) => return Ok(None),
            Err(e) if e.is_recoverable() => {
                log::warn!("node {}: decomposition dropped: {e}", node.id);
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let mut seen = HashSet::new();
        let claims: Vec<String> = claims
            .into_iter()
            .filter(|c| seen.insert(c.clone()))
            .collect();
        if claims.len() < 2 {
            return Ok(None);
        }
        let generator = self.generator();
        let probed: Vec<Result<f64>> = claims
            .par_iter()
            .map(|c| generator.probe_confidence(c))
            .collect();
        let mut confidences = Vec::with_capacity(claims.len());
        for outcome in probed {
            match outcome {
                Ok(c) => confidences.push(c),
                Err(e) if e.is_recoverable() => {
                    log::warn!("node {}: decomposition group dropped: {e}", node.id);
                    return Ok(None);
                }
                Err(e) => return Err(e),
            }
        }
        let first = tree.next_id().0;
        let members: Vec<BeliefNode> = claims
            .into_iter()
            .zip(confidences)
            .enumerate()
            .map(|(i, (text, confidence))| {
                BeliefNode::new(
                    NodeId(first + i as u32),
                    Statement::new(text),
                    confidence,
                    Strategy::Decomposition,
                    None,
                )
            })
            .collect();
        let ids = members.iter().map(|m| m.id).collect();
        tree.add_decomposition_group(node.id, members)?;
        Ok(Some(ids))
    }
}
