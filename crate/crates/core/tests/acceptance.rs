//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use propscope::backend::{
    complete_structured, parse_structured, Backend, Message, PromptRequest, ReplayBackend, ReplayStore, ScriptEntry,
    ScriptedBackend, StructuredOutput, StructuredOutputError,
};
use propscope::cli::{agreement_reports, evaluate, execute_run, parse_annotations, parse_predictions, RunConfig};
use propscope::corpus::{dedup_corpus, parse_corpus, read_corpus, Article, DedupConfig, DedupReason, LabelSpace};
use propscope::eval::{
    fleiss_kappa, mean_pairwise_jaccard, prf_multilabel, render_report, render_reports, AgreementError, ReportFormat,
    RunMetadata, Task,
};
use propscope::fanta::{run_fanta, ExtractionMode, FantaConfig};
use propscope::labels::{BiasLabel, Event, GroupId, Side, TechniqueId};
use propscope::prompt::PromptSettings;
use propscope::taxonomy::{NarrativeTaxonomy, TechniqueCatalog};
use propscope::tptc::{run_tptc, TptcConfig};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

/// Precision, recall, F1 and support of one label.
type Row = (f64, f64, f64, f64);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn labels() -> (NarrativeTaxonomy, TechniqueCatalog) {
    (NarrativeTaxonomy::bundled(), TechniqueCatalog::bundled())
}

fn fixture_corpus(tax: &NarrativeTaxonomy, cat: &TechniqueCatalog) -> Vec<Article> {
    read_corpus(&fixtures().join("corpus.jsonl"), &LabelSpace::new(tax, cat)).expect("fixture corpus")
}

// ---------------------------------------------------------------- metrics

/// Per-label counts by walking every (item, label) cell.
fn oracle_metrics(gold: &[Vec<bool>], pred: &[Vec<bool>], k: usize) -> [f64; 9] {
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let f1 = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let mut rows = Vec::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0.0, 0.0, 0.0);
    for l in 0..k {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for (g, p) in gold.iter().zip(pred) {
            match (g[l], p[l]) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                _ => {}
            }
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        let (pr, rc) = (div(tp, tp + fp), div(tp, tp + fn_));
        rows.push((pr, rc, f1(pr, rc), tp + fn_));
    }
    let (mp, mr) = (div(tp_all, tp_all + fp_all), div(tp_all, tp_all + fn_all));
    let n = k as f64;
    let support: f64 = rows.iter().map(|r| r.3).sum();
    let mean = |f: &dyn Fn(&Row) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let wmean = |f: &dyn Fn(&Row) -> f64| div(rows.iter().map(|r| f(r) * r.3).sum::<f64>(), support);
    [
        mp,
        mr,
        f1(mp, mr),
        mean(&|r| r.0),
        mean(&|r| r.1),
        mean(&|r| r.2),
        wmean(&|r| r.0),
        wmean(&|r| r.1),
        wmean(&|r| r.2),
    ]
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let k = rng.gen_range(1..=10);
        let items = rng.gen_range(1..=50);
        let density: f64 = rng.gen_range(0.0..1.0);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<bool> { (0..k).map(|_| rng.gen_bool(density)).collect() };
        let gold: Vec<Vec<bool>> = (0..items).map(|_| draw(&mut rng)).collect();
        let pred: Vec<Vec<bool>> = (0..items).map(|_| draw(&mut rng)).collect();
        let to_sets = |rows: &[Vec<bool>]| -> Vec<BTreeSet<usize>> {
            rows.iter().map(|r| (0..k).filter(|&l| r[l]).collect()).collect()
        };
        let universe: Vec<usize> = (0..k).collect();
        let scores = prf_multilabel(&to_sets(&gold), &to_sets(&pred), &universe).map_err(|e| e.to_string())?;
        let expected = oracle_metrics(&gold, &pred, k);
        for (a, b) in scores.averages.values().iter().zip(expected) {
            let d = (a - b).abs();
            worst = worst.max(d);
            ensure(d <= 1e-9, || format!("trial {trial}: {a} vs oracle {b}"))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("1000 instances, max deviation {worst:.1e}, {secs:.2} s"))
}

// -------------------------------------------------------------- agreement

/// Fleiss' kappa from its textbook definition, in floating point.
fn oracle_fleiss(matrix: &[Vec<usize>]) -> f64 {
    let n = matrix[0].iter().sum::<usize>() as f64;
    let items = matrix.len() as f64;
    let k = matrix[0].len();
    let p_i: Vec<f64> = matrix
        .iter()
        .map(|row| (row.iter().map(|&c| (c * c) as f64).sum::<f64>() - n) / (n * (n - 1.0)))
        .collect();
    let p_bar = p_i.iter().sum::<f64>() / items;
    let p_e: f64 = (0..k)
        .map(|j| {
            let pj = matrix.iter().map(|r| r[j] as f64).sum::<f64>() / (items * n);
            pj * pj
        })
        .sum();
    (p_bar - p_e) / (1.0 - p_e)
}

fn agreement() -> Outcome {
    let (tax, cat) = labels();
    let read = |name: &str| {
        parse_annotations(&std::fs::read_to_string(fixtures().join("agreement").join(name)).unwrap())
            .map_err(|e| e.to_string())
    };

    // unanimity
    let unanimous = read("unanimous.jsonl")?;
    let bias = agreement_reports(&unanimous, Task::Bias, &tax, &cat).map_err(|e| e.to_string())?;
    ensure(bias[0].fleiss_kappa == Some(1.0), || format!("unanimous bias kappa {:?}", bias[0].fleiss_kappa))?;
    for task in [Task::Narrative, Task::Technique] {
        for r in agreement_reports(&unanimous, task, &tax, &cat).map_err(|e| e.to_string())? {
            ensure(r.mean_label_kappa == Some(1.0), || format!("unanimous {task} kappa {:?}", r.mean_label_kappa))?;
            ensure(r.per_label_kappa.values().all(|&k| k == 1.0), || format!("unanimous {task} per-label"))?;
            ensure(r.mean_pairwise_jaccard == Some(1.0), || format!("unanimous {task} jaccard"))?;
        }
    }
    ensure(fleiss_kappa(&[vec![3, 0], vec![0, 3], vec![3, 0]]) == Ok(1.0), || "unanimous matrix".into())?;

    // planted 3-rater fixture against the direct formula
    let planted = read("planted.jsonl")?;
    let mut by_item: BTreeMap<String, Vec<BiasLabel>> = BTreeMap::new();
    let mut sets: BTreeMap<(Event, String), Vec<BTreeSet<String>>> = BTreeMap::new();
    for l in &planted {
        by_item.entry(l.item.clone()).or_default().push(l.bias.as_deref().unwrap().parse().unwrap());
        sets.entry((l.event, l.item.clone()))
            .or_default()
            .push(l.narratives.clone().unwrap().into_iter().collect());
    }
    let matrix: Vec<Vec<usize>> = by_item
        .values()
        .map(|ratings| BiasLabel::ALL.iter().map(|b| ratings.iter().filter(|r| *r == b).count()).collect())
        .collect();
    let expected_bias = oracle_fleiss(&matrix);
    let got = agreement_reports(&planted, Task::Bias, &tax, &cat).map_err(|e| e.to_string())?[0]
        .fleiss_kappa
        .ok_or("planted bias kappa undefined")?;
    ensure((got - expected_bias).abs() <= 1e-9, || format!("planted bias kappa {got} vs {expected_bias}"))?;

    let grid: Vec<Vec<BTreeSet<String>>> = sets.into_values().collect();
    let universe: BTreeSet<&String> = grid.iter().flatten().flatten().collect();
    let mut per_label = Vec::new();
    for label in universe {
        let m: Vec<Vec<usize>> = grid
            .iter()
            .map(|item| {
                let yes = item.iter().filter(|s| s.contains(label)).count();
                vec![yes, item.len() - yes]
            })
            .collect();
        per_label.push(oracle_fleiss(&m));
    }
    let expected_mean = per_label.iter().sum::<f64>() / per_label.len() as f64;
    let mut jac = Vec::new();
    for item in &grid {
        for a in 0..item.len() {
            for b in a + 1..item.len() {
                let u = item[a].union(&item[b]).count();
                jac.push(if u == 0 { 1.0 } else { item[a].intersection(&item[b]).count() as f64 / u as f64 });
            }
        }
    }
    let expected_jac = jac.iter().sum::<f64>() / jac.len() as f64;
    let narr = &agreement_reports(&planted, Task::Narrative, &tax, &cat).map_err(|e| e.to_string())?[0];
    let mk = narr.mean_label_kappa.ok_or("planted label kappa undefined")?;
    let mj = narr.mean_pairwise_jaccard.ok_or("no jaccard")?;
    ensure((mk - expected_mean).abs() <= 1e-9, || format!("label kappa {mk} vs {expected_mean}"))?;
    ensure((mj - expected_jac).abs() <= 1e-9, || format!("jaccard {mj} vs {expected_jac}"))?;

    // undefined kappa and empty-set Jaccard
    ensure(
        fleiss_kappa(&[vec![3, 0, 0], vec![3, 0, 0]]) == Err(AgreementError::Undefined),
        || "single-category input did not raise undefined-kappa".into(),
    )?;
    let empty: Vec<Vec<BTreeSet<u8>>> = vec![vec![BTreeSet::new(), BTreeSet::new(), BTreeSet::new()]];
    ensure(mean_pairwise_jaccard(&empty) == Ok(1.0), || "both-empty Jaccard is not 1".into())?;

    Ok(format!(
        "unanimous kappa 1.0; planted bias kappa {got:.6}, label kappa {mk:.6}, jaccard {mj:.6} match the oracle"
    ))
}

// --------------------------------------------------------------- taxonomy

fn taxonomy() -> Outcome {
    let (tax, cat) = labels();
    for (event, total, govt, opp) in [(Event::Caa, 11, 7, 4), (Event::Farmers, 9, 4, 5)] {
        let classes = tax.classes(event);
        let g = classes.iter().filter(|c| c.side == Side::ProGovt).count();
        let o = classes.iter().filter(|c| c.side == Side::ProOpp).count();
        ensure((classes.len(), g, o) == (total, govt, opp), || {
            format!("{event}: {} narratives ({g}/{o})", classes.len())
        })?;
    }
    ensure(cat.techniques().len() == 20, || format!("{} techniques", cat.techniques().len()))?;
    ensure(cat.groups().len() == 7, || format!("{} groups", cat.groups().len()))?;

    let expected: [(u8, &[(u8, &str)]); 7] = [
        (
            1,
            &[
                (9, "Appeal to Emotion, Fear, Prejudice"),
                (7, "Loaded Language"),
                (11, "Flag-Waving"),
                (8, "Name Calling and Labeling"),
                (20, "Glittering Generalities"),
                (10, "Slogans"),
            ],
        ),
        (
            2,
            &[(6, "Red Herring"), (4, "Whataboutism"), (16, "Obfuscation, Intentional Vagueness"), (3, "Straw Man")],
        ),
        (
            3,
            &[
                (1, "Causal Oversimplification"),
                (2, "Black-and-white Fallacy"),
                (13, "Thought-Terminating Clichés"),
                (19, "Assertion"),
            ],
        ),
        (4, &[(8, "Name Calling and Labeling"), (15, "Smears"), (5, "Reductio ad Hitlerum")]),
        (5, &[(18, "Appeal to Authority"), (14, "Bandwagon")]),
        (6, &[(3, "Straw Man"), (12, "Exaggeration and Minimization")]),
        (7, &[(17, "Doubt"), (16, "Obfuscation, Intentional Vagueness")]),
    ];
    let mut union = BTreeSet::new();
    for (g, members) in expected {
        let group = cat.group(GroupId(g)).ok_or_else(|| format!("G{g} missing"))?;
        let got: BTreeSet<TechniqueId> = group.members.iter().copied().collect();
        let want: BTreeSet<TechniqueId> = members.iter().map(|(t, _)| TechniqueId(*t)).collect();
        ensure(got == want, || format!("G{g} members {got:?} != {want:?}"))?;
        for (t, name) in members {
            let tech = cat.technique(TechniqueId(*t)).ok_or_else(|| format!("T{t} missing"))?;
            ensure(tech.name == *name, || format!("T{t} is named {}", tech.name))?;
        }
        union.extend(got);
    }
    ensure(union.len() == 20, || format!("group union covers {} techniques", union.len()))?;
    Ok("CAA 11 (7/4), Farmers 9 (4/5), 20 techniques, 7 groups, union covers T1-T20".into())
}

// ------------------------------------------------------ pipeline invariants

fn script(name: &str) -> ScriptedBackend {
    ScriptedBackend::load(&fixtures().join("scripts").join(name)).expect("script")
}

fn replay() -> ReplayBackend {
    ReplayBackend::new(ReplayStore::existing(fixtures().join("replay")).expect("replay store"))
}

fn pipeline_invariants() -> Outcome {
    let (tax, cat) = labels();
    let corpus = fixture_corpus(&tax, &cat);
    ensure(corpus.len() == 12, || format!("fixture has {} articles", corpus.len()))?;
    let mut sorted = corpus.clone();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let settings = PromptSettings::new("gpt-4o-mini");
    let mut checked = 0usize;

    for (mode, script_name, full, neutral) in [
        (ExtractionMode::TwoHop, "fanta.json", 4, 3),
        (ExtractionMode::Concise, "fanta_concise.json", 3, 2),
    ] {
        let cfg = FantaConfig::new(settings.clone(), mode);
        let backends: [Box<dyn Backend>; 2] = [Box::new(script(script_name)), Box::new(replay())];
        for backend in &backends {
            for article in &sorted {
                let before = backend.usage().requests;
                let rec = run_fanta(article, &cfg, backend.as_ref(), &tax)
                    .map_err(|e| format!("{mode:?} {}: {e}", article.id))?;
                let used = backend.usage().requests - before;
                let want = if rec.bias == BiasLabel::Neutral { neutral } else { full };
                ensure(used == want, || format!("{mode:?} {}: {used} requests, expected {want}", article.id))?;
                ensure(rec.bias != BiasLabel::Neutral || rec.narratives.is_empty(), || {
                    format!("{}: neutral record with narratives", article.id)
                })?;
                for id in &rec.narratives {
                    let class = tax.class(*id).ok_or_else(|| format!("{}: unknown narrative {id}", article.id))?;
                    ensure(class.event == article.event && class.side.as_bias() == rec.bias, || {
                        format!("{}: narrative {id} outside the {} branch", article.id, rec.bias)
                    })?;
                }
                checked += 1;
            }
        }
    }

    let cfg = TptcConfig::new(settings);
    let backends: [Box<dyn Backend>; 2] = [Box::new(script("tptc.json")), Box::new(replay())];
    for backend in &backends {
        for article in &sorted {
            let before = backend.usage().requests;
            let pred = run_tptc(article, &cfg, backend.as_ref(), &cat).map_err(|e| format!("tptc {}: {e}", article.id))?;
            let used = backend.usage().requests - before;
            ensure(used == 1 + pred.detections.len() as u64, || {
                format!("tptc {}: {used} requests for {} detections", article.id, pred.detections.len())
            })?;
            let allowed: BTreeSet<TechniqueId> = pred
                .detections
                .iter()
                .flat_map(|d| cat.group(d.group).map(|g| g.members.clone()).unwrap_or_default())
                .collect();
            ensure(pred.techniques.is_subset(&allowed), || {
                format!("tptc {}: {:?} not within {:?}", article.id, pred.techniques, allowed)
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} records over 12 articles, scripted and replay backends"))
}

// ------------------------------------------------------------ determinism

fn run_and_report(dir: &Path, pipeline: &str, tax: &NarrativeTaxonomy, cat: &TechniqueCatalog) -> Result<Vec<u8>, String> {
    let mut cfg = RunConfig::load(&fixtures().join("replay.toml")).map_err(|e| e.to_string())?;
    cfg.pipeline = pipeline.parse()?;
    cfg.output = Some(dir.to_path_buf());
    let manifest = execute_run(&cfg).map_err(|e| e.to_string())?;
    ensure(manifest.usage.network_calls == 0, || "replay run touched the network".into())?;
    let predictions = std::fs::read(dir.join("predictions.jsonl")).map_err(|e| e.to_string())?;
    let gold = fixture_corpus(tax, cat);
    let mut bytes = predictions.clone();
    let tasks: &[Task] = match pipeline {
        "tptc" => &[Task::Technique],
        _ => &[Task::Bias, Task::Narrative],
    };
    for &task in tasks {
        let preds = parse_predictions(&String::from_utf8_lossy(&predictions), task).map_err(|e| e.to_string())?;
        let run = RunMetadata {
            setting: pipeline.to_string(),
            backend: Some(manifest.backend.to_string()),
            model: Some(manifest.model.clone()),
            timestamp: None,
            config_digest: Some(manifest.config_digest.clone()),
        };
        let report = evaluate(&gold, &preds, task, tax, cat, run).map_err(|e| e.to_string())?;
        bytes.extend(render_report(&report, ReportFormat::Json).map_err(|e| e.to_string())?.into_bytes());
        bytes.extend(render_report(&report, ReportFormat::Markdown).map_err(|e| e.to_string())?.into_bytes());
    }
    Ok(bytes)
}

fn determinism() -> Outcome {
    let (tax, cat) = labels();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut total = 0;
    for pipeline in ["fanta", "fanta-concise", "tptc"] {
        let a = run_and_report(&dir.path().join(format!("{pipeline}-1")), pipeline, &tax, &cat)?;
        let b = run_and_report(&dir.path().join(format!("{pipeline}-2")), pipeline, &tax, &cat)?;
        ensure(a == b, || format!("{pipeline}: outputs differ between runs"))?;
        total += a.len();
    }
    Ok(format!("fanta, fanta-concise, tptc: predictions and reports identical ({total} bytes compared)"))
}

// --------------------------------------------------------------- cleaning

fn cleaning() -> Outcome {
    let (tax, cat) = labels();
    let text = std::fs::read_to_string(fixtures().join("dedup.jsonl")).map_err(|e| e.to_string())?;
    let articles = parse_corpus(&text, &LabelSpace::new(&tax, &cat)).map_err(|e| e.to_string())?;
    let out = dedup_corpus(&articles, &DedupConfig::default());
    let removed: BTreeMap<&str, DedupReason> = out.removed.iter().map(|r| (r.duplicate_id.as_str(), r.reason)).collect();
    let expected = BTreeMap::from([
        ("dup-content", DedupReason::Content),
        ("dup-title", DedupReason::Title),
        ("dup-url", DedupReason::Url),
    ]);
    ensure(removed == expected, || format!("removed {removed:?}"))?;
    let kept: Vec<&str> = out.kept.iter().map(|a| a.id.as_str()).collect();
    let want: Vec<&str> = articles
        .iter()
        .map(|a| a.id.as_str())
        .filter(|id| !expected.contains_key(id))
        .collect();
    ensure(kept == want, || format!("kept {kept:?}"))?;
    let again = dedup_corpus(&out.kept, &DedupConfig::default());
    ensure(again.removed.is_empty() && again.kept == out.kept, || "second pass changed the corpus".into())?;
    Ok(format!("{} in, 3 planted duplicates removed (url, title, content), second pass removes 0", articles.len()))
}

// ----------------------------------------------------- structured output

#[derive(Debug, Deserialize, PartialEq)]
struct Verdict {
    bias: String,
}

impl StructuredOutput for Verdict {
    fn validate(&self) -> Result<(), String> {
        ensure(!self.bias.is_empty(), || "empty bias".into())
    }
}

fn structured_output() -> Outcome {
    let want = Verdict { bias: "Neutral".into() };
    let shapes = [
        ("fenced", "```json\n{\"bias\": \"Neutral\"}\n```"),
        ("prefixed", "Sure! Here is my answer: {\"bias\": \"Neutral\"}"),
        ("trailing prose", "{\"bias\": \"Neutral\"}\n\nThe article reports both sides evenly."),
        ("all three", "Answer below.\n```\n{\"bias\": \"Neutral\"}\n```\nHope this helps {sic}."),
    ];
    for (name, text) in shapes {
        let got = parse_structured::<Verdict>(text).map_err(|e| format!("{name}: {e}"))?;
        ensure(got == want, || format!("{name}: parsed {got:?}"))?;
    }

    let request = PromptRequest::new("m", "check.bias", vec![Message::user("classify")]);
    let backend = ScriptedBackend::new([
        ScriptEntry::new("check.bias", "I cannot decide."),
        ScriptEntry::new("check.bias", "Still no JSON here."),
        ScriptEntry::new("check.bias", "{\"bias\": \"Neutral\"}"),
    ]);
    match complete_structured::<Verdict>(&backend, &request) {
        Err(StructuredOutputError::Unparseable { schema_id, .. }) => {
            ensure(schema_id == "check.bias", || format!("error names schema {schema_id}"))?
        }
        other => return Err(format!("expected an unparseable error, got {other:?}")),
    }
    ensure(backend.calls().len() == 2, || format!("{} requests, expected original + 1 repair", backend.calls().len()))?;

    let repaired = ScriptedBackend::new([
        ScriptEntry::new("check.bias", "no json"),
        ScriptEntry::new("check.bias", "{\"bias\": \"Pro-Opp\"}"),
    ]);
    let out = complete_structured::<Verdict>(&repaired, &request).map_err(|e| e.to_string())?;
    ensure(out.value.bias == "Pro-Opp" && out.completions.len() == 2, || "repair not applied".into())?;
    Ok("fenced, prefixed and trailing-prose replies parse; garbage fails after exactly one repair".into())
}

// ---------------------------------------------------------- report layout

fn report_fidelity() -> Outcome {
    let (tax, cat) = labels();
    let gold = fixture_corpus(&tax, &cat);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for pipeline in ["fanta", "fanta-concise"] {
        let mut cfg = RunConfig::load(&fixtures().join("replay.toml")).map_err(|e| e.to_string())?;
        cfg.pipeline = pipeline.parse()?;
        cfg.output = Some(dir.path().join(pipeline));
        execute_run(&cfg).map_err(|e| e.to_string())?;
        let text = std::fs::read_to_string(dir.path().join(pipeline).join("predictions.jsonl")).unwrap();
        let preds = parse_predictions(&text, Task::Narrative).map_err(|e| e.to_string())?;
        let run = RunMetadata {
            setting: pipeline.into(),
            ..RunMetadata::default()
        };
        reports.push(evaluate(&gold, &preds, Task::Narrative, &tax, &cat, run).map_err(|e| e.to_string())?);
    }
    let md = render_reports(&reports).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = md.lines().collect();
    let header = "| Prompt Settings | Pre | Rec | F1 | Pre | Rec | F1 | Pre | Rec | F1 |";
    let groups = "Column groups: Micro (Pre, Rec, F1) | Macro (Pre, Rec, F1) | Weighted (Pre, Rec, F1)";
    let mut tables = 0;
    for event in ["CAA", "FARMERS"] {
        let at = lines
            .iter()
            .position(|l| *l == format!("## {event}"))
            .ok_or_else(|| format!("no section for {event}"))?;
        let h = lines[at..].iter().position(|l| *l == header).ok_or("nine-column header missing")? + at;
        ensure(lines[at..h].contains(&groups), || "column-group caption missing".into())?;
        for (row, report) in reports.iter().enumerate() {
            let line = lines[h + 2 + row];
            let cells: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
            ensure(cells.len() == 10, || format!("row `{line}` has {} cells", cells.len()))?;
            ensure(cells[0] == report.run.setting, || format!("row label {}", cells[0]))?;
            let metrics = report.events.iter().find(|e| e.event == event).ok_or("event missing")?.metrics;
            for (cell, value) in cells[1..].iter().zip(metrics.values()) {
                ensure(*cell == format!("{value:.3}"), || format!("{event} cell {cell} != {value:.3}"))?;
            }
        }
        tables += 1;
    }
    Ok(format!("{tables} tables, one row per setting, Micro/Macro/Weighted x Pre/Rec/F1"))
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("metric-oracle", metric_oracle),
        ("agreement", agreement),
        ("taxonomy", taxonomy),
        ("pipeline-invariants", pipeline_invariants),
        ("determinism", determinism),
        ("cleaning", cleaning),
        ("structured-output", structured_output),
        ("report-fidelity", report_fidelity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
