use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ArrayConstruct,
    ArrayIndex,
    ArraySwap1,
    ArraySwap2,
    ConditionIf,
    ConditionIndex,
    ConditionLoop,
    DataSimple,
    FunctionParameter,
    FunctionReturn,
    LogicCombination,
    LogicComparison,
    LogicNot,
    MathIncrement,
    MathInitial,
    MathOperator,
    MathValues,
    /// The unmodified pipeline.
    Control,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Self::ArrayConstruct => "array_construct",
            Self::ArrayIndex => "array_index",
            Self::ArraySwap1 => "array_swap1",
            Self::ArraySwap2 => "array_swap2",
            Self::ConditionIf => "condition_if",
            Self::ConditionIndex => "condition_index",
            Self::ConditionLoop => "condition_loop",
            Self::DataSimple => "data_simple",
            Self::FunctionParameter => "function_parameter",
            Self::FunctionReturn => "function_return",
            Self::LogicCombination => "logic_combination",
            Self::LogicComparison => "logic_comparison",
            Self::LogicNot => "logic_not",
            Self::MathIncrement => "math_increment",
            Self::MathInitial => "math_initial",
            Self::MathOperator => "math_operator",
            Self::MathValues => "math_values",
            Self::Control => "control",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pipeline stage a fault is injected into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Screen,
    Assemble,
    Factor,
    RankCheck,
    BackSubstitute,
    Output,
    None,
}

macro_rules! faults {
    ($( $variant:ident = $id:literal, $cat:ident, $stage:ident, $desc:literal; )*) => {
        /// A seeded behavioural fault of the solver pipeline.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Fault { $( $variant, )* }

        impl Fault {
            pub const ALL: &'static [Fault] = &[ $( Fault::$variant, )* ];

            pub fn id(self) -> &'static str {
                match self { $( Fault::$variant => $id, )* }
            }

            pub fn category(self) -> Category {
                match self { $( Fault::$variant => Category::$cat, )* }
            }

            pub fn stage(self) -> Stage {
                match self { $( Fault::$variant => Stage::$stage, )* }
            }

            pub fn description(self) -> &'static str {
                match self { $( Fault::$variant => $desc, )* }
            }
        }
    };
}

faults! {
    Noop = "noop", Control, None, "unmodified pipeline";

    DropIntercept = "drop-intercept", ArrayConstruct, Assemble,
        "intercept column left out of the design matrix; 0 reported as the intercept";
    InterceptDoubled = "intercept-doubled", ArrayConstruct, Assemble,
        "intercept column filled with 2 instead of 1";
    InterceptNegated = "intercept-negated", ArrayConstruct, Assemble,
        "intercept column filled with -1 instead of 1";

    YIndexShift = "y-index-shift", ArrayIndex, Assemble,
        "response of row i read from row i+1 (wrapping)";
    XRowLag = "x-row-lag", ArrayIndex, Assemble,
        "independent variables of row i read from row i-1 (row 0 unchanged)";
    YIndexOverrun = "y-index-overrun", ArrayIndex, Assemble,
        "response read one row ahead without wrapping; reads past the last row";

    ColumnOrder = "column-order", ArraySwap1, Assemble,
        "columns reordered by ascending mean and coefficients reported in that order";
    ReflectorPivotIndex = "reflector-pivot-index", ArraySwap1, Factor,
        "reflector dot product uses v[k] for every row instead of v[i]";
    BacksubRhsIndex = "backsub-rhs-index", ArraySwap1, BackSubstitute,
        "back-substitution starts every row from (Q^T y)[0]";

    BacksubTranspose = "backsub-transpose", ArraySwap2, BackSubstitute,
        "back-substitution reads R[j][i] instead of R[i][j]";
    DiagFromUpper = "diag-from-upper", ArraySwap2, BackSubstitute,
        "divides by the last column's stored entry instead of the diagonal of R";

    SkipReflectors = "skip-reflectors", ConditionIf, Factor,
        "zero-norm guard always taken, so no reflector is applied";
    ZeroGuardNever = "zero-guard-never", ConditionIf, Factor,
        "zero-norm guard removed; differs only on exactly zero columns";
    RankGuardAlways = "rank-guard-always", ConditionIf, RankCheck,
        "rank check always reports a deficient matrix";

    ReflectorRowsFromZero = "reflector-rows-from-zero", ConditionIndex, Factor,
        "reflector applied to rows 0..n instead of k..n";
    BacksubInnerFromDiagonal = "backsub-inner-from-diagonal", ConditionIndex, BackSubstitute,
        "inner back-substitution loop starts at the diagonal, where beta is still zero";
    NormFromZero = "norm-from-zero", ConditionIndex, Factor,
        "column norm accumulated over rows 0..n instead of k..n";

    FactorEarlyBreak = "factor-early-break", ConditionLoop, Factor,
        "factorisation loop stops after the first column";
    InfiniteLoop = "infinite-loop", ConditionLoop, BackSubstitute,
        "inner back-substitution index never advances";
    SkipLastRow = "skip-last-row", ConditionLoop, Factor,
        "column norm skips the last row";

    TruncateY = "truncate-y", DataSimple, Assemble,
        "responses truncated to integers";
    SinglePrecisionDot = "single-precision-dot", DataSimple, Factor,
        "reflector dot products accumulated in f32";
    TruncateCoefficients = "truncate-coefficients", DataSimple, Output,
        "coefficients truncated to integers";

    SqrtArgDoubled = "sqrt-arg-doubled", FunctionParameter, Factor,
        "column norm computed as sqrt(2 * sum of squares)";
    ReflectorScaleDoubled = "reflector-scale-doubled", FunctionParameter, Factor,
        "reflector applied with factor 4 s / v^T v instead of 2 s / v^T v";
    ZeroDivisor = "zero-divisor", FunctionParameter, BackSubstitute,
        "back-substitution divides by R[i][i] * 0";

    NegatedOutput = "negated-output", FunctionReturn, Output,
        "coefficients returned negated";
    NullOutput = "null-output", FunctionReturn, Output,
        "nothing returned";
    NormReturnsOne = "norm-returns-one", FunctionReturn, Factor,
        "column norm helper returns 1";

    GuardOrFirstColumn = "guard-or-first-column", LogicCombination, Factor,
        "zero-norm guard `norm == 0` widened to `norm == 0 || k > 0`";
    ScreenAndNot = "screen-and-not", LogicCombination, Screen,
        "row screen keeps rows with finite x and non-finite y";
    RankGuardAnd = "rank-guard-and", LogicCombination, RankCheck,
        "rank check `||` weakened to `&&`; differs only on rank-deficient input";

    BacksubBoundShort = "backsub-bound-short", LogicComparison, BackSubstitute,
        "inner back-substitution bound `j < p` narrowed to `j < p - 1`";
    RowBoundOverrun = "row-bound-overrun", LogicComparison, Factor,
        "right-hand-side reflection loop `i < n` widened to `i <= n`";
    RankCheckFlipped = "rank-check-flipped", LogicComparison, RankCheck,
        "rank check comparison inverted";

    InterceptFlagNegated = "intercept-flag-negated", LogicNot, Assemble,
        "intercept flag negated when assembling the design matrix";
    ScreenNegated = "screen-negated", LogicNot, Screen,
        "row screen keeps only rows containing non-finite values";

    DesignCopyStrideTwo = "design-copy-stride-two", MathIncrement, Assemble,
        "design matrix copy advances two rows at a time";
    FactorStrideTwo = "factor-stride-two", MathIncrement, Factor,
        "factorisation loop advances two columns at a time";

    NormInitOne = "norm-init-one", MathInitial, Factor,
        "sum of squares for the column norm starts at 1";
    BacksubSumInitZero = "backsub-sum-init-zero", MathInitial, BackSubstitute,
        "back-substitution accumulator starts at 0 instead of (Q^T y)[i]";
    BetaBufferInitOne = "beta-buffer-init-one", MathInitial, BackSubstitute,
        "coefficient buffer initialised to 1; every entry is overwritten before use";

    DotSub = "dot-sub", MathOperator, Factor,
        "reflector dot product subtracts instead of adds";
    BacksubMultiply = "backsub-multiply", MathOperator, BackSubstitute,
        "back-substitution multiplies by R[i][i] instead of dividing";

    YPlusOne = "y-plus-one", MathValues, Assemble,
        "every response increased by 1";
    DiagPlusOne = "diag-plus-one", MathValues, BackSubstitute,
        "back-substitution divides by R[i][i] + 1";
}

impl Fault {
    pub fn spec(self) -> FaultSpec {
        FaultSpec { id: self.id().into(), category: self.category(), description: self.description().into(), stage: self.stage() }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.iter().copied().find(|f| f.id() == s.trim()).ok_or_else(|| Error::UnknownFault(s.to_string()))
    }
}

impl Serialize for Fault {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Fault {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Manifest entry for one fault.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub id: String,
    pub category: Category,
    pub description: String,
    pub stage: Stage,
}

impl FaultSpec {
    pub fn fault(&self) -> Result<Fault> {
        self.id.parse()
    }
}

pub fn catalog() -> Vec<FaultSpec> {
    Fault::ALL.iter().map(|f| f.spec()).collect()
}

/// The catalog as a pretty-printed JSON array.
pub fn manifest_json() -> String {
    serde_json::to_string_pretty(&catalog()).expect("catalog serializes")
}

/// Parses a comma-separated fault list; `all` selects the whole catalog.
pub fn parse_fault_list(list: &str) -> Result<Vec<Fault>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(Fault::ALL.to_vec());
    }
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}
