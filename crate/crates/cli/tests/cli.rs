use std::path::Path;
use std::process::Command;

use negdiff_cli::format::{decode_checkpoint, read_dataset, write_dataset};
use negdiff_cli::{cmd_bias, cmd_eval, cmd_gen_data, cmd_sample, cmd_train, RunConfig, SampleStrategy};
use negdiff_core::rng::{stream, Domain};
use negdiff_core::{DatasetHeader, Denoiser, GeneratedDataset, Provenance, Strategy as Negative};
use proptest::prelude::*;

fn small() -> RunConfig {
    let mut c = RunConfig::default();
    for (k, v) in [
        ("data.identities", "12"),
        ("data.samples_per_id", "4"),
        ("train.epochs", "2"),
        ("net.hidden", "16"),
        ("sampler.steps", "10"),
        ("sample.identities", "6"),
        ("sample.per_identity", "3"),
        ("eval.folds", "3"),
    ] {
        c.set(k, v).unwrap();
    }
    c
}

fn negdiff(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_negdiff"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[test]
fn gen_data_writes_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toy.nfd");
    let ds = cmd_gen_data(&RunConfig::default(), &out).unwrap();
    assert_eq!(ds.record_count(), 200 * 32);
    let back = read_dataset(&out).unwrap();
    assert_eq!(back.header.provenance, Provenance::ToyData);
    assert_eq!(back.record_count(), 6400);

    let mut none = RunConfig::default();
    none.set("data.identities", "0").unwrap();
    assert!(cmd_gen_data(&none, &dir.path().join("empty.nfd")).is_err());
    assert!(cmd_gen_data(&small(), &dir.path().join("missing/dir/toy.nfd")).is_err());
}

#[test]
fn zero_epochs_writes_the_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.set("train.epochs", "0").unwrap();
    cmd_gen_data(&cfg, &dir.path().join("toy.nfd")).unwrap();
    cmd_train(&cfg, &dir.path().join("toy.nfd"), &dir.path().join("m.ckpt")).unwrap();
    let (model, _) = decode_checkpoint(&std::fs::read(dir.path().join("m.ckpt")).unwrap()).unwrap();
    let tc = cfg.train_config();
    let init = Denoiser::new(
        tc.net.clone(),
        tc.schedule_steps,
        &mut stream(tc.seed, Domain::Init, 0, 0),
    )
    .unwrap();
    assert_eq!(model, init);
}

#[test]
fn train_rejects_mismatched_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    cmd_gen_data(&cfg, &dir.path().join("toy.nfd")).unwrap();
    let mut other = cfg.clone();
    other.set("data.dim", "8").unwrap();
    assert!(cmd_train(&other, &dir.path().join("toy.nfd"), &dir.path().join("m.ckpt")).is_err());
    std::fs::write(dir.path().join("junk.nfd"), b"NFD1 but not really").unwrap();
    assert!(cmd_train(&cfg, &dir.path().join("junk.nfd"), &dir.path().join("m.ckpt")).is_err());
}

#[test]
fn sample_strategies_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let mut cfg = small();
    cmd_gen_data(&cfg, &p("toy.nfd")).unwrap();
    cmd_train(&cfg, &p("toy.nfd"), &p("m.ckpt")).unwrap();

    cfg.sample_strategy = SampleStrategy::Negative(Negative::Null);
    let s = cmd_sample(&cfg, &p("m.ckpt"), &p("null.nfd")).unwrap();
    assert_eq!(s.dataset.record_count(), 18);
    assert!(s
        .assignment
        .unwrap()
        .pairs
        .iter()
        .all(|x| x.vector.iter().all(|&v| v == 0.0)));
    let manifest = std::fs::read_to_string(p("null.manifest.tsv")).unwrap();
    assert_eq!(manifest.lines().count(), 6);
    assert!(manifest.lines().all(|l| l.ends_with("\tnull\tNULL")), "{manifest}");

    cfg.sample_strategy = SampleStrategy::Baseline;
    cmd_sample(&cfg, &p("m.ckpt"), &p("base.nfd")).unwrap();
    assert!(!p("base.manifest.tsv").exists());
    assert!(cmd_sample(&cfg, &p("absent.ckpt"), &p("x.nfd")).is_err());
}

#[test]
fn eval_of_perfect_clusters_has_zero_eer() {
    let dir = tempfile::tempdir().unwrap();
    // each identity hugs its own axis, with a small wobble toward the next one
    let axis = |i: usize, wobble: f64| {
        let mut v = vec![0.0; 4];
        v[i] = 1.0;
        v[(i + 1) % 4] = wobble;
        v
    };
    let groups: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|i| vec![axis(i, 0.0), axis(i, 0.1 + 0.05 * i as f64), axis(i, -0.2)])
        .collect();
    let header = DatasetHeader {
        identities: 4,
        samples_per_identity: 3,
        dim: 4,
        provenance: Provenance::Baseline,
        guidance_w: 0.0,
        sampler: None,
        seed: 0,
    };
    let path = dir.path().join("clusters.nfd");
    write_dataset(&path, &GeneratedDataset::new(header.clone(), groups.clone()).unwrap()).unwrap();
    let mut cfg = RunConfig::default();
    cfg.set("eval.folds", "2").unwrap();
    let out = dir.path().join("m.csv");
    let r = cmd_eval(&cfg, &path, Some(&out)).unwrap();
    assert_eq!(r.report.eer, 0.0);
    assert_eq!(r.accuracy, 100.0);
    let first = std::fs::read(&out).unwrap();
    cmd_eval(&cfg, &path, Some(&out)).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), first);
    assert!(dir.path().join("m.hist.csv").exists());

    let single = GeneratedDataset::new(
        DatasetHeader {
            identities: 1,
            ..header
        },
        vec![groups[0].clone()],
    )
    .unwrap();
    write_dataset(&path, &single).unwrap();
    assert!(cmd_eval(&cfg, &path, None).is_err());
}

fn metric(table: &str, key: &str) -> f64 {
    table
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("no {key} in {table}"))
        .parse()
        .unwrap()
}

#[test]
fn bias_table_rows() {
    for (accs, std, ser) in [
        ([88.50, 93.38, 85.38, 86.62], 3.52, 2.21),
        ([70.33, 72.18, 69.97, 65.55], 2.81, 1.23),
        ([86.38, 89.40, 84.23, 83.20], 2.74, 1.58),
    ] {
        let t = cmd_bias(&accs).unwrap();
        assert!((metric(&t, "std") - std).abs() <= 0.01, "{t}");
        assert!((metric(&t, "ser") - ser).abs() <= 0.01, "{t}");
    }
    let t = cmd_bias(&[90.0; 4]).unwrap();
    assert!(t.contains("std,0.000000") && t.contains("ser,1.000000"), "{t}");
    assert!(cmd_bias(&[100.0, 90.0]).is_err());
}

#[test]
fn binary_reports_errors_on_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = negdiff(dir.path(), &["sample", "missing.ckpt", "--out", "x.nfd"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "));

    let out = negdiff(dir.path(), &["gen-data", "--set", "no.such.key=1", "--out", "t.nfd"]);
    assert!(!out.status.success());
    let out = negdiff(dir.path(), &["bias", "90,100"]);
    assert!(!out.status.success());
}

#[test]
fn binary_config_overrides_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = negdiff(dir.path(), &["config", "--seed", "9", "--set", "sampler.steps=50"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = RunConfig::parse_str(&text).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.sampler_steps, 50);
    std::fs::write(dir.path().join("run.cfg"), &text).unwrap();
    let again = negdiff(dir.path(), &["config", "--config", "run.cfg"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    (
        any::<u64>(),
        1usize..500,
        1e-6f64..1.0,
        prop::collection::vec(1usize..256, 1..4),
        0.0f64..1.0,
        0.0f64..5.0,
        prop::sample::select(vec!["baseline", "close-neg", "rand-neg", "mid-neg", "far-neg", "null"]),
        prop::bool::ANY,
        -2.0f64..0.0,
    )
        .prop_map(|(seed, n, lr, hidden, drop, w, strategy, ddpm, lo)| {
            let mut c = RunConfig {
                seed,
                data_identities: n,
                train_learning_rate: lr,
                net_hidden: hidden,
                train_dropout_prob: drop,
                sampler_guidance_w: w,
                sample_strategy: strategy.parse().unwrap(),
                eval_hist_lo: lo,
                ..RunConfig::default()
            };
            c.set("sampler.mode", if ddpm { "ddpm" } else { "ddim" }).unwrap();
            c
        })
}

proptest! {
    #[test]
    fn config_text_round_trips(cfg in arb_config()) {
        let text = cfg.to_string();
        prop_assert_eq!(RunConfig::parse_str(&text).unwrap(), cfg);
    }
}
