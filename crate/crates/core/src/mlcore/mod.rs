//! Logistic fatigue classifier, cross-validation, metrics and baselines.

mod cv;
mod llm;
mod logit;
mod metrics;
mod score;

pub use cv::{cross_validate, group_folds, CvResult, LambdaScore, DEFAULT_LAMBDA_GRID};
pub use llm::{
    llm_pairwise_baseline, pairwise_prompt, parse_choice, ChatEndpoint, PairOutcome, PairwiseReport, PAIRWISE_PROMPT,
};
pub use logit::{
    logit_gradient, logit_objective, sigmoid, train_logit, LogitModel, GRADIENT_TOLERANCE, MAX_NEWTON_ITERATIONS,
};
pub use metrics::{accuracy, auc_roc, bootstrap_ci, evaluate, f1_score, BootstrapCi, EvalConfig, EvalReport};
pub use score::{score_notes, FatigueScore};
