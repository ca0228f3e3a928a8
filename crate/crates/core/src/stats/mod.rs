//! Dice evaluation and the hypothesis tests used to compare arms.

pub mod dice;
pub mod hypothesis;
pub mod special;

pub use dice::{dice_score, summarize, DiceResult, Summary};
pub use hypothesis::{
    anova_oneway, choose_paired_test, paired_t_test, shapiro_wilk, wilcoxon_signed_rank, StatTestResult,
    DEFAULT_ALPHA,
};
pub use special::regularized_incomplete_beta;
