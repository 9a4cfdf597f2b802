//! Flag spellings of the library's enumerations.

use clap::ValueEnum;
use serde::Serialize;

use screenclean::normal::CriticalKind;
use screenclean::pipeline::{KRule, SplitScheme};
use screenclean::selection::LooMode;
use screenclean::simulation::ModelKind;
use screenclean::Screener;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScreenerArg {
    Lasso,
    Stepwise,
    Marginal,
}

impl From<ScreenerArg> for Screener {
    fn from(s: ScreenerArg) -> Self {
        match s {
            ScreenerArg::Lasso => Screener::Lasso,
            ScreenerArg::Stepwise => Screener::Stepwise,
            ScreenerArg::Marginal => Screener::Marginal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    /// Screen, select and clean on three separate parts.
    #[value(alias = "3")]
    TriSplit,
    /// Screen on one half; select and clean on the other with the
    /// conservative two-split threshold.
    TwoSplitConservative,
    /// Screen and select by leave-one-out on one half; clean on the other.
    #[value(alias = "2")]
    TwoSplitLoo,
}

impl From<SchemeArg> for SplitScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::TriSplit => SplitScheme::TriSplit,
            SchemeArg::TwoSplitConservative => SplitScheme::TwoSplitConservative,
            SchemeArg::TwoSplitLoo => SplitScheme::TwoSplitLoo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KRuleArg {
    /// `floor(sqrt(n))`.
    SqrtN,
    /// `floor(a ln n)`, with `a` from `--k-const`.
    ALogN,
}

pub fn k_rule(rule: KRuleArg, a: f64) -> KRule {
    match rule {
        KRuleArg::SqrtN => KRule::SqrtN,
        KRuleArg::ALogN => KRule::ALogN { a },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalArg {
    Normal,
    StudentT,
    TwoSplit,
}

impl From<CriticalArg> for CriticalKind {
    fn from(c: CriticalArg) -> Self {
        match c {
            CriticalArg::Normal => CriticalKind::Normal,
            CriticalArg::StudentT => CriticalKind::StudentT,
            CriticalArg::TwoSplit => CriticalKind::TwoSplit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LooArg {
    Rescreen,
    FrozenPath,
    Penalized,
}

impl From<LooArg> for LooMode {
    fn from(m: LooArg) -> Self {
        match m {
            LooArg::Rescreen => LooMode::Rescreen,
            LooArg::FrozenPath => LooMode::FrozenPath,
            LooArg::Penalized => LooMode::Penalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ModelArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
    #[value(name = "C", alias = "c")]
    C,
    #[value(name = "D", alias = "d")]
    D,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::A => ModelKind::A,
            ModelArg::B => ModelKind::B,
            ModelArg::C => ModelKind::C,
            ModelArg::D => ModelKind::D,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Lasso,
    Stepwise,
    Marginal,
    AdaptiveLasso,
}
