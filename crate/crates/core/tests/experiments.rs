use expr_lab::experiments::{evaluate_re, train, ModelKind, Span, Task, TaskSpec, TrainConfig};

fn small(model: ModelKind, task: Task) -> TaskSpec {
    TaskSpec {
        train_k: Span::new(1, 6).unwrap(),
        train_c: Span::new(1, 6).unwrap(),
        hidden_dim: 8,
        seeds: vec![1],
        ..TaskSpec::desk(task, model)
    }
}

#[test]
fn trained_mean_model_ignores_k_on_uc() {
    let cfg = TrainConfig { epochs: 5, batch_size: 8, ..TrainConfig::default() };
    let out = train(&small(ModelKind::Mean, Task::Uc), &cfg, 1).unwrap();
    let t = evaluate_re(&out.model, Task::Uc, ModelKind::Mean, 1, Span::new(31, 100).unwrap(), Span::new(31, 40).unwrap())
        .unwrap();
    for c in 31..=40 {
        let res: Vec<f64> = t.entries().iter().filter(|e| e.c == c).map(|e| e.re).collect();
        assert_eq!(res.len(), 70);
        let spread = res.iter().fold(0.0f64, |m, r| m.max((r - res[0]).abs()));
        assert!(spread < 1e-6, "c={c}: spread {spread}");
    }
}

#[test]
fn sum_mean_alternates_and_trains_on_sv() {
    let cfg = TrainConfig { epochs: 3, batch_size: 8, ..TrainConfig::default() };
    let out = train(&small(ModelKind::SumMean, Task::Sv), &cfg, 2).unwrap();
    assert_eq!(out.history.len(), 3 * cfg.lr_candidates.len());
    assert!(out.history.iter().all(|r| r.train_loss.is_finite() && r.val_loss.is_finite()));
    assert!(cfg.lr_candidates.contains(&out.lr));
}

#[test]
fn entries_are_nonnegative_and_aggregates_consistent() {
    let cfg = TrainConfig { epochs: 1, batch_size: 8, ..TrainConfig::default() };
    let out = train(&small(ModelKind::Sum, Task::Uc), &cfg, 3).unwrap();
    let t = evaluate_re(&out.model, Task::Uc, ModelKind::Sum, 3, Span::new(7, 9).unwrap(), Span::new(7, 9).unwrap())
        .unwrap();
    assert!(t.entries().iter().all(|e| e.re >= 0.0));
    for ((_, _, k, c), s) in t.aggregates() {
        let e = t.entries().iter().find(|e| e.k == k && e.c == c).unwrap();
        assert_eq!((s.median, s.mean, s.seeds), (e.re, e.re, 1));
    }
}
