//! Running a packing program against an encoded buffer.

use asp_engine::{ground, solve, solve_optimal, AnswerSet, AspError, Limits, Program};

use crate::buffer::BufferState;
use crate::encode::encode_facts;

/// Whether to take the first answer set in enumeration order or an optimal
/// one under the program's objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    First,
    Optimal,
}

/// Grounds `program` together with the buffer's input facts and returns at
/// most one answer set; `None` means the program is inconsistent for this
/// buffer and nothing should happen.
pub fn evaluate(
    program: &Program,
    buffer: &BufferState,
    mode: EvalMode,
    limits: &Limits,
) -> Result<Option<AnswerSet>, AspError> {
    let facts = encode_facts(buffer);
    let gp = ground(program, &facts, limits)?;
    match mode {
        EvalMode::First => Ok(solve(&gp, Some(1)).into_iter().next()),
        EvalMode::Optimal => solve_optimal(&gp),
    }
}
