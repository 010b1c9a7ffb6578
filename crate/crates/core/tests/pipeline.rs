use std::sync::Arc;

use pllcop::dataset::{load_samples, save_samples};
use pllcop::experiment::{run_iteration, with_big_stack};
use pllcop::logic::{generate_ra_set, parse_problem, Problem};
use pllcop::losses::{derivation_logprob, LossKind};
use pllcop::model::{load_model, save_model, train, ModelConfig, ProblemIndex, TrainConfig};
use pllcop::search::{run_mcts, Guidance, MctsConfig, Unguided};
use pllcop::tableau::{check_proof, TableauState, PELLETIER21};
use pllcop::{Model, Model32};

fn index(problems: &[Arc<Problem>]) -> ProblemIndex {
    problems.iter().map(|p| (p.name.clone(), p.clone())).collect()
}

#[test]
fn search_train_store_and_search_again() {
    with_big_stack(|| {
        let problems: Vec<Arc<Problem>> = generate_ra_set(60, 4, 3, 10).into_iter().map(Arc::new).collect();
        let mcts = MctsConfig { inference_budget: 1500, ..MctsConfig::default() };
        let out = run_iteration(&problems, &Unguided, &mcts, 1);
        assert!(!out.samples.is_empty(), "no problem solved unguided");
        let idx = index(&problems);
        for s in &out.samples {
            for d in &s.proofs {
                assert!(check_proof(&idx[&s.problem], mcts.calculus(), &d.actions));
            }
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.jsonl");
        save_samples(&out.samples, &path).unwrap();
        let samples = load_samples(&path).unwrap();
        assert_eq!(samples, out.samples);

        for loss in ["nll", "uniform", "merit:0.3", "libra", "bs", "short", "rand±"] {
            let mut model = Model::new(ModelConfig { dim: 1 << 14, hidden: 2, init_seed: 1 });
            let cfg = TrainConfig { loss: loss.parse::<LossKind>().unwrap(), epochs: 2, ..TrainConfig::default() };
            let stats = train(&mut model, &samples, &idx, mcts.calculus(), &cfg).unwrap();
            assert_eq!(stats.epoch_loss.len(), 2);
            assert!(stats.epoch_loss.iter().all(|l| l.is_finite()), "{loss}: {:?}", stats.epoch_loss);

            let file = dir.path().join(format!("{loss}.bin"));
            save_model(&model, &file).unwrap();
            let loaded: Model = load_model(&file).unwrap();
            assert_eq!(loaded, model);

            let guided = run_iteration(&problems[..10], &loaded, &mcts, 1);
            assert_eq!(guided.trees.len(), 10);
        }
    });
}

#[test]
fn training_raises_the_probability_of_found_proofs() {
    let problem = Arc::new(parse_problem(PELLETIER21).unwrap());
    let mcts = MctsConfig { inference_budget: 200, ..MctsConfig::default() };
    let tree = run_mcts(&problem, &Unguided, &mcts).unwrap();
    let sample = pllcop::dataset::extract_sample(&tree).unwrap();
    let idx = index(std::slice::from_ref(&problem));
    let total = |g: &dyn Guidance| -> f64 { sample.proofs.iter().map(|d| derivation_logprob(&problem, mcts.calculus(), &d.actions, g).unwrap().0.exp()).sum() };
    let mut model = Model::new(ModelConfig { dim: 1 << 12, ..ModelConfig::default() });
    let before = total(&model);
    assert!((before - total(&Unguided)).abs() < 1e-12);
    train(&mut model, std::slice::from_ref(&sample), &idx, mcts.calculus(), &TrainConfig { epochs: 20, ..TrainConfig::default() }).unwrap();
    let after = total(&model);
    assert!(after > before, "proof mass {before} -> {after}");
}

#[test]
fn single_precision_model_is_a_usable_guide() {
    let problem = Arc::new(parse_problem(PELLETIER21).unwrap());
    let model = Model32::new(ModelConfig { dim: 1 << 10, hidden: 3, init_seed: 2 });
    let root = TableauState::root(problem.clone(), Default::default());
    let state = root.apply_action(root.legal_actions()[0]).unwrap();
    let actions = state.legal_actions();
    let p = model.policy(&state, &actions);
    assert_eq!(p.len(), actions.len());
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    let tree = run_mcts(&problem, &model, &MctsConfig { inference_budget: 200, ..MctsConfig::default() }).unwrap();
    assert!(tree.solved());
}
