//! Error type shared by the parser, grounder and solvers.

use thiserror::Error;

/// Everything that can go wrong between program text and answer sets.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AspError {
    /// Lexical or grammatical error, with a 1-based source position.
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },

    /// A rule variable that no positive body literal, range or assignment
    /// aggregate can bind.
    #[error("unsafe rule #{rule}: variable {variable} cannot be bound")]
    UnsafeRule { rule: usize, variable: String },

    /// A term that should have been ground still contains a variable or an
    /// unevaluated arithmetic expression.
    #[error("non-ground term: {term}")]
    NonGround { term: String },

    /// Grounding exceeded a configured limit.
    #[error("grounding budget exceeded: {reason}")]
    GroundingBudgetExceeded { reason: String },

    /// An optimization tuple whose first element is not an integer was
    /// satisfied while searching for an optimum.
    #[error("non-integer weight in optimization tuple: {term}")]
    NonIntegerWeight { term: String },

    /// `#maximize` and `#minimize` statements cannot be mixed; all
    /// statements merge into a single objective.
    #[error("program mixes #maximize and #minimize statements")]
    MixedOptimization,

    /// The brute-force enumerator refused to run: too many atoms remain
    /// undetermined after fixing facts and unsupported atoms.
    #[error("oracle budget exceeded: {free} free atoms, budget {budget}")]
    OracleBudgetExceeded { free: usize, budget: usize },
}

impl AspError {
    pub(crate) fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        AspError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }
}
