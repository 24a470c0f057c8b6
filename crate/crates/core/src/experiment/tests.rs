use std::fs;

use super::*;
use crate::data::TaskKind;
use crate::eval::EvalResult;
use crate::perturb::{PerturbationStrategy, Position};

const MINIMAL: &str = "[task]\nkind = \"copy\"\n\n[training]\nseed = 7\n";

fn tiny() -> ExperimentConfig {
    ExperimentConfig::from_toml(
        r#"
[task]
kind = "reverse"
vocab_size = 12
len_range = [2, 5]
n_train = 64
n_valid = 16
n_test = 16

[model]
d_model = 16
n_heads = 2
n_layers_enc = 1
n_layers_dec = 1
d_ffn = 32
max_len = 8

[strategy.word_dropout]
position = "both"

[training]
seed = 3
steps = 12
batch_size = 8

[eval]
eval_every = 5
ratios = [0.0, 0.2]
"#,
    )
    .unwrap()
}

#[test]
fn minimal_config_gets_defaults() {
    let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
    assert_eq!(c.task.kind, TaskKind::Copy);
    assert_eq!((c.task.vocab_size, c.task.len_range), (32, (4, 10)));
    assert_eq!((c.model.d_model, c.model.max_len), (64, 32));
    assert!(c.strategy.is_none());
    assert_eq!(
        (c.training.steps, c.training.batch_size, c.training.lr),
        (3000, 32, 5e-4)
    );
    assert_eq!(c.eval.ratios, vec![0.0, 0.01, 0.05, 0.10]);
    let echoed = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
    assert_eq!(echoed, c);
}

#[test]
fn config_errors_name_the_problem() {
    let err = ExperimentConfig::from_toml("[task]\nkind = \"copy\"\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("training"), "{err}");
    let err = ExperimentConfig::from_toml("[task]\nkind = \"copy\"\n[training]\nsteps = 5\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("training") && err.contains("seed"), "{err}");

    let typo = format!("{MINIMAL}\n[strategy.adversarial]\nposition = \"both\"\nepslion = 0.5\n");
    let err = ExperimentConfig::from_toml(&typo).unwrap_err().to_string();
    assert!(
        err.contains("epslion") && err.contains("strategy.adversarial"),
        "{err}"
    );

    let ss = format!("{MINIMAL}\n[strategy.replacement]\nkind = \"ss\"\nposition = \"enc\"\n");
    let err = ExperimentConfig::from_toml(&ss).unwrap_err().to_string();
    assert!(err.contains("decoder only"), "{err}");

    let long = "[task]\nkind = \"copy\"\nlen_range = [4, 31]\n[training]\nseed = 1\n";
    assert!(ExperimentConfig::from_toml(long).is_err());
    let bad_kind = "[task]\nkind = \"shuffle\"\n[training]\nseed = 1\n";
    assert!(ExperimentConfig::from_toml(bad_kind)
        .unwrap_err()
        .to_string()
        .contains("task.kind"));
}

#[test]
fn splits_are_distinct_and_reproducible() {
    let c = tiny();
    let train = c.dataset(Split::Train).unwrap();
    let test = c.dataset(Split::Test).unwrap();
    assert_eq!(train.len(), 64);
    assert_eq!(test, c.dataset(Split::Test).unwrap());
    assert_ne!(test.pairs, c.dataset(Split::Valid).unwrap().pairs);
}

#[test]
fn train_run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let result = train_run(&tiny(), &out, TrainOptions::default()).unwrap();
    assert_eq!(result.strategy, "wdrop");
    assert_eq!(result.test.n_examples, 16);
    assert!(!out.join(INCOMPLETE_MARKER).exists());

    let metrics = fs::read_to_string(out.join(METRICS_FILE)).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(
        lines[0],
        "step,wall_s,tokens,nll_clean,nll_perturbed,vat_kl,objective,replaced_src,replaced_tgt"
    );
    assert_eq!(lines.len(), 13);
    assert!(lines[1].starts_with("0,,"));
    let timing = fs::read_to_string(out.join(TIMING_FILE)).unwrap();
    assert_eq!(timing.lines().count(), 13);
    let valid = fs::read_to_string(out.join(VALID_FILE)).unwrap();
    let steps: Vec<&str> = valid
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(steps, ["5", "10", "12"]);
    assert_eq!(
        ExperimentConfig::load(&out.join(CONFIG_FILE)).unwrap(),
        tiny()
    );
    assert_eq!(read_result(&out).unwrap(), result);

    let timed = tmp.path().join("timed");
    train_run(
        &tiny(),
        &timed,
        TrainOptions {
            record_timing: true,
        },
    )
    .unwrap();
    let row = fs::read_to_string(timed.join(METRICS_FILE))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    assert!(row.split(',').nth(1).unwrap().parse::<f64>().unwrap() > 0.0);
}

#[test]
fn evaluate_and_robustness_from_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let result = train_run(&tiny(), &run, TrainOptions::default()).unwrap();
    let ckpt = run.join(CHECKPOINT_FILE);

    let e = evaluate_run(&ckpt, &tmp.path().join("eval")).unwrap();
    assert_eq!(e, result.test);
    let text = fs::read_to_string(tmp.path().join("eval").join(EVAL_FILE)).unwrap();
    assert!(text.starts_with("token_acc,seq_acc,bleu,n_examples\n"));

    let table = robustness_run(&ckpt, Some(&[0.05, 0.5]), &tmp.path().join("rob")).unwrap();
    assert_eq!(
        table.rows.iter().map(|r| r.0).collect::<Vec<_>>(),
        vec![0.0, 0.05, 0.5]
    );
    assert_eq!(table.get(0.0).unwrap(), &result.test);
    assert!(tmp.path().join("rob").join(ROBUSTNESS_FILE).exists());
}

#[test]
fn mismatched_checkpoint_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    train_run(&tiny(), &run, TrainOptions::default()).unwrap();
    let mut other = tiny();
    other.model.d_model = 8;
    fs::write(run.join(CONFIG_FILE), other.to_toml().unwrap()).unwrap();
    assert!(evaluate_run(&run.join(CHECKPOINT_FILE), &tmp.path().join("eval")).is_err());
}

#[test]
fn bench_speed_starts_with_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let strategies = ["wdrop", "adv"].map(|s| PerturbationStrategy::from_name(s).unwrap());
    let rows = bench_speed_run(&tiny(), &strategies, 5, tmp.path()).unwrap();
    assert_eq!(
        rows.iter().map(|r| r.strategy.as_str()).collect::<Vec<_>>(),
        ["none", "wdrop", "adv"]
    );
    assert_eq!(rows[0].ratio_vs_baseline, 1.0);
    assert_eq!(rows[2].position, Position::Both.as_str());
    let csv = fs::read_to_string(tmp.path().join(SPEED_FILE)).unwrap();
    assert!(csv.starts_with("strategy,position,tokens_per_sec,ratio_vs_baseline\nnone,-,"));
    assert!(csv.lines().nth(1).unwrap().ends_with(",1.00"));
}

fn result(strategy: &str, seed: u64, acc: f64, tps: f64) -> RunResult {
    RunResult {
        strategy: strategy.to_string(),
        position: "dec".to_string(),
        seed,
        steps: 10,
        tokens_per_sec: Some(tps),
        final_objective: 0.1,
        test: EvalResult {
            token_accuracy: acc,
            sequence_accuracy: acc / 2.0,
            bleu: acc,
            n_examples: 5,
        },
    }
}

#[test]
fn report_aggregates_seeds() {
    let runs = vec![
        result("none", 1, 0.5, 100.0),
        result("rep_uni", 1, 0.6, 90.0),
        result("none", 2, 0.7, 110.0),
        result("rep_uni", 2, 0.8, 80.0),
        result("none", 3, 0.9, 90.0),
        result("rep_uni", 3, 1.0, 100.0),
    ];
    let rows = aggregate(&runs, None);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].n_runs, 3);
    assert!((rows[0].token_acc.mean - 0.7).abs() < 1e-12);
    assert_eq!((rows[0].token_acc.min, rows[0].token_acc.max), (0.5, 0.9));
    assert_eq!(rows[0].token_acc.cell(2), "0.70 ± 0.20");
    assert!(rows[1].ratio_vs_baseline.is_none());
    let rows = aggregate(&runs, Some(&runs[0]));
    assert!((rows[1].ratio_vs_baseline.unwrap() - 0.9).abs() < 1e-12);
}

#[test]
fn report_reads_run_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for (i, r) in [result("none", 1, 0.5, 100.0), result("adv", 1, 0.4, 50.0)]
        .iter()
        .enumerate()
    {
        let d = tmp.path().join(format!("r{i}"));
        fs::create_dir_all(&d).unwrap();
        fs::write(d.join(RESULT_FILE), serde_json::to_string(r).unwrap()).unwrap();
        dirs.push(d);
    }
    let out = tmp.path().join("report.csv");
    report_run(&dirs, Some(&dirs[0]), &out).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(2).unwrap().ends_with(",0.50"));
    assert!(report_run(&[tmp.path().join("missing")], None, &out).is_err());
}

#[test]
fn failure_marker_records_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = OutputDir::create(tmp.path()).unwrap();
    let _ = dir.fail(crate::Error::EmptyCorpus);
    assert_eq!(
        fs::read_to_string(tmp.path().join(INCOMPLETE_MARKER)).unwrap(),
        "empty corpus\n"
    );
}
