//! Grid experiments from a JSON plan: one augmentation pipeline per run,
//! evaluated on the plan's test split and collected into one table.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use log::{info, warn};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::json;

use subaug::corpus::{build_vocabulary, Corpus};
use subaug::evalkit::{align, oov_prf, Cell, ComparisonTable, EvalReport, SpellingModel};
use subaug::genaug::{
    generate_corpus, ingest_external_text, run_pipeline, AugmentedCorpusSet, GenerationConfig, NgramSequenceModel,
    PipelineConfig, PipelineMode, PipelineReport,
};
use subaug::ngram::{count_ngrams, train_kn, write_arpa};

use crate::args::ExperimentArgs;
use crate::commands::{load_words, Context};
use crate::manifest::{config_hash, write_if_changed, Manifest};
use crate::{DataError, UsageError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Generation {
    /// Train an n-gram generator on `corpus` and sample from it.
    Ngram {
        corpus: PathBuf,
        order: usize,
        config: GenerationConfig,
    },
    /// Use text produced elsewhere.
    External { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub order: usize,
    pub inventory: usize,
    pub budget_bytes: Option<u64>,
    pub corpus_weight: f64,
    pub seed: u64,
    pub generation: Generation,
}

fn present<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Option<u64>>, D::Error> {
    Option::<u64>::deserialize(d).map(Some)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub id: String,
    pub mode: PipelineMode,
    #[serde(default)]
    pub vocab_cap: Option<usize>,
    /// Absent: the default budget. `null`: no pruning.
    #[serde(default, deserialize_with = "present")]
    pub budget_bytes: Option<Option<u64>>,
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default)]
    pub inventory: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub generation: Option<Generation>,
    /// Recognizer output aligned with the plan's references, for OOV P/R/F1.
    #[serde(default)]
    pub hypotheses: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plan {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub eval: PathBuf,
    #[serde(default)]
    pub references: Option<PathBuf>,
    pub defaults: Defaults,
    pub runs: Vec<RunSpec>,
}

/// Everything that determines a run's outputs, with paths resolved.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedRun {
    pub id: String,
    pub pipeline: PipelineConfig,
    pub generation: Generation,
    pub references: Option<PathBuf>,
    pub hypotheses: Option<PathBuf>,
}

impl Plan {
    pub fn load(path: &Path) -> Result<Plan> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read plan {}: {e}", path.display())))?;
        let mut plan: Plan =
            serde_json::from_str(&text).map_err(|e| UsageError(format!("invalid plan {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        plan.resolve(&base);
        plan.validate()?;
        Ok(plan)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.train);
        fix(&mut self.valid);
        fix(&mut self.eval);
        self.references.iter_mut().for_each(fix);
        let fix_gen = |g: &mut Generation| match g {
            Generation::Ngram { corpus, .. } => fix(corpus),
            Generation::External { path } => fix(path),
        };
        fix_gen(&mut self.defaults.generation);
        for r in &mut self.runs {
            r.generation.iter_mut().for_each(fix_gen);
            r.hypotheses.iter_mut().for_each(fix);
        }
    }

    fn validate(&self) -> Result<()> {
        if self.runs.is_empty() {
            bail!(UsageError("the plan has no runs".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for r in &self.runs {
            if !seen.insert(r.id.as_str()) {
                bail!(UsageError(format!("run id `{}` is used twice", r.id)));
            }
            if r.id.is_empty() || r.id.contains(['/', '\\']) || r.id.starts_with('.') {
                bail!(UsageError(format!("run id `{}` cannot name a directory", r.id)));
            }
            if r.hypotheses.is_some() && self.references.is_none() {
                bail!(UsageError(format!("run `{}` has hypotheses but the plan has no references", r.id)));
            }
        }
        for p in self.paths() {
            if !p.is_file() {
                bail!(UsageError(format!("plan refers to missing file {}", p.display())));
            }
        }
        Ok(())
    }

    fn paths(&self) -> Vec<&Path> {
        let mut out: Vec<&Path> = vec![&self.train, &self.valid, &self.eval];
        out.extend(self.references.as_deref());
        let gens = std::iter::once(&self.defaults.generation).chain(self.runs.iter().filter_map(|r| r.generation.as_ref()));
        for g in gens {
            out.push(match g {
                Generation::Ngram { corpus, .. } => corpus,
                Generation::External { path } => path,
            });
        }
        out.extend(self.runs.iter().filter_map(|r| r.hypotheses.as_deref()));
        out
    }

    pub fn resolved(&self, r: &RunSpec) -> ResolvedRun {
        let d = &self.defaults;
        let mut pipeline = PipelineConfig::new(r.mode);
        pipeline.order = r.order.unwrap_or(d.order);
        pipeline.inventory = r.inventory.unwrap_or(d.inventory);
        pipeline.vocab_cap = r.vocab_cap;
        pipeline.budget_bytes = r.budget_bytes.unwrap_or(d.budget_bytes);
        pipeline.corpus_weight = d.corpus_weight;
        pipeline.seed = r.seed.unwrap_or(d.seed);
        ResolvedRun {
            id: r.id.clone(),
            pipeline,
            generation: r.generation.clone().unwrap_or_else(|| d.generation.clone()),
            references: r.hypotheses.as_ref().and(self.references.clone()),
            hypotheses: r.hypotheses.clone(),
        }
    }
}

impl ResolvedRun {
    fn inputs(&self, plan: &Plan) -> Vec<PathBuf> {
        let mut out = vec![plan.train.clone(), plan.valid.clone(), plan.eval.clone()];
        out.push(match &self.generation {
            Generation::Ngram { corpus, .. } => corpus.clone(),
            Generation::External { path } => path.clone(),
        });
        out.extend(self.references.iter().cloned());
        out.extend(self.hypotheses.iter().cloned());
        out
    }
}

/// What a finished run contributes to the tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunSummary {
    vocab: u64,
    inventory: Option<u64>,
    footprint: u64,
    ppl: f64,
    ppl_open: Option<f64>,
    ppl_bnlm: f64,
    ppl_bnlm_open: Option<f64>,
    oov_rate: f64,
    oov_p: Option<f64>,
    oov_r: Option<f64>,
    oov_f1: Option<f64>,
}

#[derive(Serialize)]
struct RunReport<'a> {
    run: &'a ResolvedRun,
    summary: &'a RunSummary,
    pipeline: &'a PipelineReport,
    eval_mixed: &'a EvalReport,
    eval_bnlm: &'a EvalReport,
}

struct Shared {
    train: Corpus,
    valid: Corpus,
    eval: Corpus,
    spelling: SpellingModel,
    generated: HashMap<String, AugmentedCorpusSet>,
}

pub fn budget_label(budget: Option<u64>) -> String {
    match budget {
        None => "unpruned".into(),
        Some(b) if b >= 1_000_000 && b % 1_000_000 == 0 => format!("{}MB", b / 1_000_000),
        Some(b) if b >= 1_000 && b % 1_000 == 0 => format!("{}KB", b / 1_000),
        Some(b) => format!("{b}B"),
    }
}

fn mode_name(mode: PipelineMode) -> &'static str {
    match mode {
        PipelineMode::Word => "word",
        PipelineMode::SubwordBpe => "subword-bpe",
        PipelineMode::SubwordMorfessor => "subword-morfessor",
    }
}

fn mode_rank(mode: PipelineMode) -> u8 {
    match mode {
        PipelineMode::Word => 0,
        PipelineMode::SubwordBpe => 1,
        PipelineMode::SubwordMorfessor => 2,
    }
}

fn generation_corpus(shared: &mut Shared, generation: &Generation, out_dir: &Path) -> Result<AugmentedCorpusSet> {
    let key = config_hash(generation);
    if let Some(set) = shared.generated.get(&key) {
        return Ok(set.clone());
    }
    let set = match generation {
        Generation::External { path } => ingest_external_text(path, Default::default())
            .with_context(|| format!("ingesting {}", path.display()))?,
        Generation::Ngram { corpus, order, config } => {
            info!("training the order-{order} generator on {}", corpus.display());
            let text = load_words(corpus)?;
            let generator = NgramSequenceModel::new(train_kn(&count_ngrams(&text, *order, None)?)?);
            info!("sampling {} tokens", config.target_token_count);
            let set = generate_corpus(&generator, &shared.train, config)?;
            let file = out_dir.join("generated").join(format!("{}.txt", &key[..16]));
            write_if_changed(&file, set.generated.to_text().as_bytes())?;
            set
        }
    };
    shared.generated.insert(key, set.clone());
    Ok(set)
}

fn execute_run(shared: &mut Shared, run: &ResolvedRun, dir: &Path, out_dir: &Path) -> Result<RunSummary> {
    let generated = generation_corpus(shared, &run.generation, out_dir)?;
    let out = run_pipeline(&shared.train, &generated, &shared.valid, &run.pipeline)?;
    let tok = out.tokenizer.as_ref();
    let mut eval_mixed = EvalReport::evaluate(format!("{}/mixed", run.id), &out.mixed, tok, &shared.eval, Some(&shared.spelling))?;
    eval_mixed.mixture_weights = Some(out.weights.clone());
    let eval_bnlm = EvalReport::evaluate(format!("{}/bnlm", run.id), &out.bnlm, tok, &shared.eval, Some(&shared.spelling))?;
    if let (Some(refs), Some(hyps)) = (&run.references, &run.hypotheses) {
        let r = load_words(refs)?;
        let h = load_words(hyps)?;
        if r.sentences().len() != h.sentences().len() {
            bail!(DataError(format!(
                "{} reference lines but {} hypothesis lines",
                r.sentences().len(),
                h.sentences().len()
            )));
        }
        let pairs: Vec<_> = r.sentences().iter().zip(h.sentences()).map(|(x, y)| align(x, y)).collect();
        eval_mixed = eval_mixed.with_oov_prf(&oov_prf(&pairs, &build_vocabulary(&shared.train, None)?));
    }
    let summary = RunSummary {
        vocab: eval_mixed.token_inventory_size as u64,
        inventory: out.report.tokenizer_inventory_size.map(|n| n as u64),
        footprint: eval_mixed.footprint_bytes,
        ppl: eval_mixed.perplexity_per_word,
        ppl_open: eval_mixed.perplexity_per_word_open,
        ppl_bnlm: eval_bnlm.perplexity_per_word,
        ppl_bnlm_open: eval_bnlm.perplexity_per_word_open,
        oov_rate: eval_mixed.oov_rate,
        oov_p: eval_mixed.oov_precision,
        oov_r: eval_mixed.oov_recall,
        oov_f1: eval_mixed.oov_f1,
    };
    let mut outputs = vec![dir.join("report.json"), dir.join("mixed.arpa")];
    write_arpa(&out.mixed, &outputs[1]).with_context(|| format!("writing {}", outputs[1].display()))?;
    if let Some(t) = tok {
        let p = dir.join("tokenizer.txt");
        write_if_changed(&p, t.to_text().as_bytes())?;
        outputs.push(p);
    }
    let report = RunReport {
        run,
        summary: &summary,
        pipeline: &out.report,
        eval_mixed: &eval_mixed,
        eval_bnlm: &eval_bnlm,
    };
    write_if_changed(&outputs[0], (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    Ok(summary)
}

fn cached_summary(path: &Path) -> Option<RunSummary> {
    let text = std::fs::read_to_string(path).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    serde_json::from_value(value.get("summary")?.clone()).ok()
}

const COLUMNS: [&str; 14] = [
    "run",
    "model",
    "vocab",
    "inventory",
    "budget",
    "footprint",
    "ppl",
    "ppl_open",
    "ppl_bnlm",
    "ppl_bnlm_open",
    "oov_rate",
    "oov_p",
    "oov_r",
    "oov_f1",
];

fn real(v: Option<f64>) -> Cell {
    v.map_or(Cell::Empty, Cell::Real)
}

fn row(run: &ResolvedRun, result: &Result<RunSummary, String>) -> Vec<Cell> {
    let mut cells = vec![
        Cell::Text(run.id.clone()),
        Cell::Text(mode_name(run.pipeline.mode).into()),
    ];
    match result {
        Ok(s) => cells.extend([
            Cell::Int(s.vocab),
            s.inventory.map_or(Cell::Empty, Cell::Int),
            Cell::Text(budget_label(run.pipeline.budget_bytes)),
            Cell::Int(s.footprint),
            Cell::Real(s.ppl),
            real(s.ppl_open),
            Cell::Real(s.ppl_bnlm),
            real(s.ppl_bnlm_open),
            Cell::Real(s.oov_rate),
            real(s.oov_p),
            real(s.oov_r),
            real(s.oov_f1),
        ]),
        Err(e) => {
            cells.push(Cell::Failed(e.clone()));
            cells.extend(std::iter::repeat(Cell::Empty).take(COLUMNS.len() - 3));
            cells[4] = Cell::Text(budget_label(run.pipeline.budget_bytes));
        }
    }
    cells
}

pub fn run(ctx: &Context, a: &ExperimentArgs) -> Result<()> {
    let plan = Plan::load(&a.plan)?;
    let mut runs: Vec<ResolvedRun> = plan.runs.iter().map(|r| plan.resolved(r)).collect();
    runs.sort_by_key(|r| {
        let p = &r.pipeline;
        (p.budget_bytes.unwrap_or(u64::MAX), mode_rank(p.mode), p.vocab_cap.unwrap_or(usize::MAX))
    });
    let mut shared = Shared {
        train: load_words(&plan.train)?,
        valid: load_words(&plan.valid)?,
        eval: load_words(&plan.eval)?,
        spelling: SpellingModel::from_corpus(&Corpus::default()),
        generated: HashMap::new(),
    };
    shared.spelling = SpellingModel::from_corpus(&shared.train);

    let mut results: Vec<Result<RunSummary, String>> = Vec::new();
    for run in &runs {
        let dir = a.out_dir.join("runs").join(&run.id);
        let manifest_file = dir.join("manifest.json");
        let hash = config_hash(run);
        let inputs = run.inputs(&plan);
        if a.cache {
            let current = Manifest::read(&manifest_file).is_ok_and(|m| m.is_current(&hash, &inputs));
            if let Some(s) = current.then(|| cached_summary(&dir.join("report.json"))).flatten() {
                info!("run {}: cached", run.id);
                results.push(Ok(s));
                continue;
            }
        }
        info!("run {}: {:?}", run.id, run.pipeline);
        let result = std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating {}", dir.display()))
            .and_then(|()| execute_run(&mut shared, run, &dir, &a.out_dir));
        match result {
            Ok(s) => {
                let mut outputs = vec![dir.join("report.json"), dir.join("mixed.arpa")];
                if run.pipeline.mode.is_subword() {
                    outputs.push(dir.join("tokenizer.txt"));
                }
                Manifest::new(ctx.argv.clone(), Some(run.pipeline.seed), hash, &inputs, &outputs)?
                    .write(&manifest_file)?;
                results.push(Ok(s));
            }
            Err(e) => {
                warn!("run {} failed: {e:#}", run.id);
                results.push(Err(format!("{e:#}")));
            }
        }
    }

    let mut table = ComparisonTable::new(COLUMNS);
    for (run, result) in runs.iter().zip(&results) {
        table.push(row(run, result))?;
    }
    let mut budgets: Vec<Option<u64>> = Vec::new();
    for r in &runs {
        if !budgets.contains(&r.pipeline.budget_bytes) {
            budgets.push(r.pipeline.budget_bytes);
        }
    }
    budgets.sort_by_key(|b| b.unwrap_or(u64::MAX));
    let labels: Vec<String> = budgets.iter().map(|b| budget_label(*b)).collect();
    let entries: Vec<(String, u64, String, Cell)> = runs
        .iter()
        .zip(&results)
        .map(|(r, res)| {
            let model = match r.pipeline.vocab_cap {
                Some(cap) if !r.pipeline.mode.is_subword() => format!("word-{cap}"),
                _ => mode_name(r.pipeline.mode).to_string(),
            };
            let (vocab, cell) = match res {
                Ok(s) => (s.vocab, real(s.ppl_open.or(Some(s.ppl)))),
                Err(e) => (r.pipeline.vocab_cap.unwrap_or(0) as u64, Cell::Failed(e.clone())),
            };
            (model, vocab, budget_label(r.pipeline.budget_bytes), cell)
        })
        .collect();
    let pivot = ComparisonTable::by_budget("ppl_open", &labels, &entries);

    let text = format!("{}\n{}", table.to_text(), pivot.to_text());
    let value = json!({ "runs": table.to_json(), "by_budget": pivot.to_json() });
    let outputs = [a.out_dir.join("table.txt"), a.out_dir.join("table.json")];
    write_if_changed(&outputs[0], text.as_bytes())?;
    write_if_changed(&outputs[1], (serde_json::to_string_pretty(&value)? + "\n").as_bytes())?;
    let mut inputs = vec![a.plan.clone()];
    for r in &runs {
        for p in r.inputs(&plan) {
            if !inputs.contains(&p) {
                inputs.push(p);
            }
        }
    }
    let hash = config_hash(&json!({ "runs": runs, "seed": ctx.seed }));
    Manifest::new(ctx.argv.clone(), ctx.seed, hash, &inputs, &outputs)?.write(&a.out_dir.join("manifest.json"))?;
    ctx.emit(text.trim_end(), value);
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        bail!(DataError(format!("{failed} of {} runs failed", runs.len())));
    }
    Ok(())
}
