use std::sync::{Arc, Mutex};

use dagbandit::dag::{Dag, EdgeId, Path};
use dagbandit::edge_bandit::EdgeBandit;
use dagbandit::harness::{
    build_learner, exp3_params, play, run_rng, AlgoSpec, Exp3, Feedback, FeedbackModel, Learner,
    LossModel, QueryRate, Request,
};
use dagbandit::FeedbackError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Recorder {
    inner: Box<dyn Learner>,
    chosen: Vec<Vec<EdgeId>>,
    requests: Vec<Request>,
}

impl Learner for Recorder {
    fn model(&self) -> FeedbackModel {
        self.inner.model()
    }

    fn choose(&mut self, rng: &mut ChaCha8Rng) -> (Path, Request) {
        let (path, request) = self.inner.choose(rng);
        self.chosen.push(path.edges().to_vec());
        self.requests.push(request);
        (path, request)
    }

    fn observe(&mut self, feedback: Feedback) -> Result<(), FeedbackError> {
        self.inner.observe(feedback)
    }
}

fn trajectory(spec: &AlgoSpec, dag: &Dag, rows: &[Vec<f64>], seed: u64) -> (Vec<Vec<EdgeId>>, Vec<f64>) {
    let n = rows.len() as u64;
    let (inner, _) = build_learner(spec, dag, n, 0.01).unwrap();
    let mut recorder = Recorder {
        inner,
        chosen: Vec::new(),
        requests: Vec::new(),
    };
    let model = LossModel::Scripted(rows.to_vec());
    let mut learner_rng = run_rng(seed, 0, 1);
    let mut loss_rng = run_rng(seed, 0, 0);
    let (cumulative, _) = play(&mut recorder, "probe", dag, &model, Some(rows), n, &mut learner_rng, &mut loss_rng).unwrap();
    (recorder.chosen, cumulative)
}

fn test_graph() -> Dag {
    Dag::from_labeled_edges(
        5,
        vec![(0, 1), (0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (3, 4), (0, 3)],
    )
    .unwrap()
}

fn random_rows(dag: &Dag, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dag.edge_count()).map(|_| rng.random()).collect()).collect()
}

fn perturb_unchosen(rows: &[Vec<f64>], chosen: &[Vec<EdgeId>], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.iter()
        .zip(chosen)
        .map(|(row, path)| {
            row.iter()
                .enumerate()
                .map(|(e, &l)| if path.contains(&e) { l } else { rng.random() })
                .collect()
        })
        .collect()
}

fn resplit_chosen(rows: &[Vec<f64>], chosen: &[Vec<EdgeId>], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.iter()
        .zip(chosen)
        .map(|(row, path)| {
            let mut out: Vec<f64> = (0..row.len()).map(|_| rng.random()).collect();
            let total: f64 = path.iter().map(|&e| row[e]).sum();
            let mut weights: Vec<f64> = path.iter().map(|_| rng.random::<f64>() + 0.1).collect();
            let w: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|x| *x /= w);
            for (&e, share) in path.iter().zip(&weights) {
                out[e] = total * share;
            }
            out
        })
        .collect()
}

#[test]
fn edge_level_learners_ignore_unchosen_edges() {
    let dag = test_graph();
    let rows = random_rows(&dag, 400, 7);
    for spec in [
        AlgoSpec::Edge,
        AlgoSpec::LabelEfficient(QueryRate::Epsilon(0.4)),
        AlgoSpec::Tracking { switches: 2 },
    ] {
        let (chosen, cumulative) = trajectory(&spec, &dag, &rows, 11);
        for trial in 0..3 {
            let altered = perturb_unchosen(&rows, &chosen, 100 + trial);
            assert_ne!(altered, rows);
            let (again, cumulative_again) = trajectory(&spec, &dag, &altered, 11);
            assert_eq!(again, chosen, "{} trajectory changed", spec.id());
            assert_eq!(cumulative_again, cumulative);
        }
    }
}

#[test]
fn path_feedback_learners_see_only_path_sums() {
    let dag = test_graph();
    let rows = random_rows(&dag, 400, 8);
    for spec in [AlgoSpec::Restricted { spanner_c: 2.0 }, AlgoSpec::Exp3] {
        let (chosen, cumulative) = trajectory(&spec, &dag, &rows, 12);
        for trial in 0..3 {
            let altered = resplit_chosen(&rows, &chosen, 200 + trial);
            let (again, cumulative_again) = trajectory(&spec, &dag, &altered, 12);
            assert_eq!(again, chosen, "{} trajectory changed", spec.id());
            for (a, b) in cumulative.iter().zip(&cumulative_again) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn feedback_matches_requests() {
    let dag = test_graph();
    let rows = random_rows(&dag, 400, 9);
    let (inner, _) = build_learner(&AlgoSpec::LabelEfficient(QueryRate::Epsilon(0.3)), &dag, 400, 0.01).unwrap();
    let mut recorder = Recorder {
        inner,
        chosen: Vec::new(),
        requests: Vec::new(),
    };
    let model = LossModel::Scripted(rows.clone());
    let (mut a, mut b) = (run_rng(3, 0, 1), run_rng(3, 0, 0));
    play(&mut recorder, "le", &dag, &model, Some(&rows), 400, &mut a, &mut b).unwrap();
    let queries = recorder.requests.iter().filter(|&&r| r == Request::EdgeLosses).count();
    assert!(recorder.requests.iter().all(|&r| matches!(r, Request::EdgeLosses | Request::Nothing)));
    assert!((80..=160).contains(&queries), "{queries} queries");
}

#[test]
fn adaptive_adversary_sees_only_past_paths() {
    let dag = test_graph();
    let n = 400u64;
    let seen: Arc<Mutex<Vec<Vec<Vec<EdgeId>>>>> = Arc::default();
    let log = Arc::clone(&seen);
    let edges = dag.edge_count();
    let model = LossModel::Adaptive(Arc::new(move |t, history: &[Path], rng: &mut ChaCha8Rng| {
        assert_eq!(history.len() as u64, t - 1);
        log.lock().unwrap().push(history.iter().map(|p| p.edges().to_vec()).collect());
        let last = history.last().map(|p| p.edges().to_vec()).unwrap_or_default();
        (0..edges)
            .map(|e| if last.contains(&e) { 1.0 } else { 0.5 * rng.random::<f64>() })
            .collect()
    }));
    for spec in [AlgoSpec::Edge, AlgoSpec::Restricted { spanner_c: 2.0 }] {
        seen.lock().unwrap().clear();
        let (inner, _) = build_learner(&spec, &dag, n, 0.01).unwrap();
        let mut recorder = Recorder {
            inner,
            chosen: Vec::new(),
            requests: Vec::new(),
        };
        let (mut a, mut b) = (run_rng(5, 0, 1), run_rng(5, 0, 0));
        let (_, faced) = play(&mut recorder, "adaptive", &dag, &model, None, n, &mut a, &mut b).unwrap();
        assert_eq!(faced.len() as u64, n);
        let seen = seen.lock().unwrap();
        assert_eq!(seen.len() as u64, n);
        for (t, history) in seen.iter().enumerate() {
            assert_eq!(history.as_slice(), &recorder.chosen[..t]);
        }
    }
}

#[test]
fn exp3_coincides_with_edge_bandit_on_parallel_edges() {
    let arms = 6;
    let n = 500;
    let delta = 0.01;
    let dag = Dag::parallel_edges(arms);
    let mut exp3 = Exp3::tuned(&dag, n, delta).unwrap();
    let mut bandit = EdgeBandit::tuned(dag.clone(), n, delta).unwrap();
    let p = exp3_params(n, delta, arms).unwrap();
    let q = bandit.params();
    assert!((p.eta - q.eta).abs() < 1e-15);
    assert!((p.gamma - q.gamma).abs() < 1e-15);
    assert!((p.beta - q.beta).abs() < 1e-15);

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..n {
        for (arm, path) in exp3.paths().iter().enumerate() {
            let diff = (exp3.probabilities()[arm] - bandit.path_probability(path)).abs();
            assert!(diff < 1e-12, "arm {arm} differs by {diff}");
        }
        let arm = exp3.choose(&mut rng);
        let path = exp3.paths()[arm].clone();
        let e = path.edges()[0];
        let loss = if e.is_multiple_of(2) { 0.2 } else { rng.random() };
        exp3.update(arm, loss).unwrap();
        bandit.update(&path, &[(e, loss)]).unwrap();
    }
}
