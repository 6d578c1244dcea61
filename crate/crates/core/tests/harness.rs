use rand::Rng;

use hetpricing::harness::baseline::GridUcb;
use hetpricing::harness::episode::{substream, CONTEXT_STREAM};
use hetpricing::harness::output::{read_csv, write_csv};
use hetpricing::harness::{aggregate, cumulative_regret, run_with_learner, Prepared, RunConfig};
use hetpricing::instances::AdversarySpec;
use hetpricing::learner::Feedback;
use hetpricing::learner::{FixedPrice, Learner, LearnerRng, Quote};
use hetpricing::pricing::{Context, TypeDistribution};
use hetpricing::PricingError;

fn two_dim_instance() -> TypeDistribution {
    TypeDistribution::from_pairs(
        2,
        vec![
            (vec![0.3, 0.5], 0.3),
            (vec![0.6, 0.2], 0.3),
            (vec![0.5, 0.7], 0.4),
        ],
    )
    .unwrap()
}

#[test]
fn grid_ucb_concentrates_on_point_mass() {
    let d = TypeDistribution::point_mass(vec![0.5]).unwrap();
    let mut l = GridUcb::with_prices(vec![0.25, 0.5, 0.75], 10_000).unwrap();
    let recs = run_with_learner(
        &d,
        &AdversarySpec::scalar(),
        &mut l,
        10_000,
        0,
        false,
        |_, _| {},
    )
    .unwrap();
    let last = &recs[7_500..];
    let freq = last.iter().filter(|r| r.price == 0.5).count() as f64 / last.len() as f64;
    assert!(freq >= 0.9, "final-quarter frequency {freq}");
}

fn config(text: &str) -> RunConfig {
    RunConfig::from_json(text).unwrap()
}

#[test]
fn csv_is_byte_identical_across_runs() {
    let cfg = config(
        r#"{"instance": {"kind": "lb_base", "K": 4}, "learner": "ops", "K": 4,
            "cover": {"kind": "cube", "dim": 1, "K": 2, "eps": 0.4},
            "T": 500, "seeds": [5, 6], "invariant_checks": true}"#,
    );
    let bytes = || {
        let runs = Prepared::new(cfg.clone()).unwrap().run_all().unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &runs).unwrap();
        buf
    };
    let a = bytes();
    assert_eq!(a, bytes());
    let parsed = read_csv(a.as_slice()).unwrap();
    assert_eq!(parsed.len(), 1000);
}

#[test]
fn every_learner_runs_from_config() {
    let one_d = r#""instance": {"kind": "lb_base", "K": 4}"#;
    let two_d = r#""instance": {"kind": "custom", "dist": {"dim": 2, "atoms": [
        {"theta": [0.3, 0.5], "w": 0.5}, {"theta": [0.6, 0.2], "w": 0.5}]}},
        "adversary": {"kind": "iid_basis"}"#;
    let cases = [
        (
            one_d,
            r#""learner": "ops", "K": 4, "cover": {"kind": "layered", "dim": 1, "eps": 0.9, "layers": 2}"#,
        ),
        (
            one_d,
            r#""learner": "pops", "eps": 0.1, "cover": {"kind": "cube", "dim": 1, "K": 2, "eps": 0.5}"#,
        ),
        (one_d, r#""learner": "zoomv""#),
        (one_d, r#""learner": "zoomv", "variance_blind": true"#),
        (one_d, r#""learner": "grid_ucb", "grid_step": 0.05"#),
        (one_d, r#""learner": "fixed", "price": 0.5"#),
        (two_d, r#""learner": "identifier""#),
        (two_d, r#""learner": "plugin""#),
    ];
    for (inst, learner) in cases {
        let cfg = config(&format!(
            r#"{{{inst}, {learner}, "T": 300, "seeds": [0, 1, 2], "invariant_checks": true}}"#
        ));
        let runs = Prepared::new(cfg).unwrap().run_all().unwrap();
        let curves: Vec<(u64, Vec<f64>)> = runs
            .iter()
            .map(|(s, r)| (*s, cumulative_regret(r)))
            .collect();
        for (_, r) in &runs {
            assert!(r.iter().all(|x| x.gap >= 0.0));
            assert!(r.windows(2).all(|w| w[1].cum_regret >= w[0].cum_regret));
        }
        let summary = aggregate("x", &curves).unwrap();
        summary.validate().unwrap();
    }
}

#[test]
fn benchmark_beats_audit_grid() {
    let d = two_dim_instance();
    let adv = AdversarySpec::IidSphere;
    let mut rng = substream(11, CONTEXT_STREAM);
    for t in 1..=50 {
        let (u, _) = adv.next_context(2, t, &mut rng).unwrap();
        let q = d.project(&u).unwrap();
        let best = q.best_revenue();
        for i in 0..=1000 {
            let p = i as f64 / 1000.0;
            assert!(q.rev(p) <= best + 1e-9);
        }
    }
}

#[test]
fn learners_share_context_stream() {
    let d = two_dim_instance();
    let adv = AdversarySpec::IidBasis;
    let mut a = FixedPrice::new(0.2).unwrap();
    let mut b = hetpricing::type_feedback::Plugin::new();
    let ra = run_with_learner(&d, &adv, &mut a, 200, 9, false, |_, _| {}).unwrap();
    let rb = run_with_learner(&d, &adv, &mut b, 200, 9, false, |_, _| {}).unwrap();
    let ids =
        |r: &[hetpricing::harness::RoundRecord]| r.iter().map(|x| x.context_id).collect::<Vec<_>>();
    assert_eq!(ids(&ra), ids(&rb));
}

/// Draws from its RNG and reports a broken invariant at round 3.
struct Faulty {
    rounds: u64,
}

impl Learner for Faulty {
    fn name(&self) -> &str {
        "faulty"
    }

    fn select(&mut self, _u: &Context, rng: &mut LearnerRng) -> hetpricing::Result<Quote> {
        Ok(Quote::plain(rng.random::<f64>()))
    }

    fn observe(&mut self, _fb: &Feedback<'_>) -> hetpricing::Result<()> {
        self.rounds += 1;
        Ok(())
    }

    fn check_invariants(&self) -> Result<(), String> {
        if self.rounds >= 3 {
            Err("broken".into())
        } else {
            Ok(())
        }
    }
}

#[test]
fn invariant_failure_reports_round() {
    let d = TypeDistribution::point_mass(vec![0.5]).unwrap();
    let mut l = Faulty { rounds: 0 };
    let err =
        run_with_learner(&d, &AdversarySpec::scalar(), &mut l, 10, 0, true, |_, _| {}).unwrap_err();
    assert!(
        matches!(err, PricingError::InvariantViolated { round: 3, .. }),
        "{err:?}"
    );
    let mut l = Faulty { rounds: 0 };
    assert!(run_with_learner(
        &d,
        &AdversarySpec::scalar(),
        &mut l,
        10,
        0,
        false,
        |_, _| {}
    )
    .is_ok());
}

#[test]
fn exhausted_script_is_an_error() {
    let d = TypeDistribution::point_mass(vec![0.5]).unwrap();
    let adv = AdversarySpec::Scripted {
        contexts: vec![Context::scalar(); 3],
        wrap: false,
    };
    let mut l = FixedPrice::new(0.5).unwrap();
    let err = run_with_learner(&d, &adv, &mut l, 5, 0, false, |_, _| {}).unwrap_err();
    assert!(matches!(err, PricingError::ContextsExhausted(4)));
}

#[test]
fn emitted_files_read_back() {
    use hetpricing::harness::{emit_csv, emit_json, Summary};
    let cfg = config(
        r#"{"instance": {"kind": "lb_base", "K": 4}, "learner": "zoomv", "T": 64, "seeds": [1, 2]}"#,
    );
    let runs = Prepared::new(cfg).unwrap().run_all().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("r.csv");
    emit_csv(&csv_path, &runs).unwrap();
    let back = read_csv(std::fs::File::open(&csv_path).unwrap()).unwrap();
    assert_eq!(back.len(), 128);
    let curves: Vec<(u64, Vec<f64>)> = runs
        .iter()
        .map(|(s, r)| (*s, cumulative_regret(r)))
        .collect();
    let summary = aggregate("zoomv", &curves).unwrap();
    let json_path = dir.path().join("s.json");
    emit_json(&json_path, &summary).unwrap();
    let parsed: Summary =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    parsed.validate().unwrap();
    assert_eq!(
        parsed.checkpoints.iter().map(|c| c.t).collect::<Vec<_>>(),
        vec![1, 2, 4, 8, 16, 32, 64]
    );
    assert!(emit_json(&dir.path().join("missing/s.json"), &summary).is_err());
}
