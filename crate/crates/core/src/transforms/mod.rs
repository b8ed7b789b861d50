//! Source-to-source augmentation passes. Each pass maps a program to a
//! program; all but line subsampling preserve behavior.

mod compress;
mod dce;
mod fold;
mod insert;
mod rename;
pub mod scope;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::syntax::{parse, print, PrintStyle, Program, SyntaxError};

pub use compress::compress;
pub use dce::eliminate_dead_code;
pub use fold::{fold_constants, swap_booleans};
pub use insert::{insert_dead_code, subsample_lines};
pub use rename::{mangle_identifiers, rename_variables, WORDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformId {
    R,
    B,
    C,
    DCE,
    T,
    CF,
    VR,
    IM,
    DCI,
    SW,
    LS,
}

impl TransformId {
    pub const ALL: [TransformId; 11] = [
        TransformId::R,
        TransformId::B,
        TransformId::C,
        TransformId::DCE,
        TransformId::T,
        TransformId::CF,
        TransformId::VR,
        TransformId::IM,
        TransformId::DCI,
        TransformId::SW,
        TransformId::LS,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TransformId::R => "R",
            TransformId::B => "B",
            TransformId::C => "C",
            TransformId::DCE => "DCE",
            TransformId::T => "T",
            TransformId::CF => "CF",
            TransformId::VR => "VR",
            TransformId::IM => "IM",
            TransformId::DCI => "DCI",
            TransformId::SW => "SW",
            TransformId::LS => "LS",
        }
    }
}

impl fmt::Display for TransformId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransformId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TransformId::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown transform `{s}`"))
    }
}

/// False only for line subsampling, which may drop live code.
pub fn semantics_preserving(id: TransformId) -> bool {
    id != TransformId::LS
}

/// Whether the pass works on a tree. Subword regularization happens at
/// tokenization time, so it leaves the program as it is.
pub fn requires_ast(id: TransformId) -> bool {
    id != TransformId::SW
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub id: TransformId,
    pub probability: f64,
}

impl TransformSpec {
    pub fn new(id: TransformId, probability: f64) -> Result<Self, TransformError> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(TransformError::Precondition {
                id,
                reason: format!("probability {probability} outside [0, 1]"),
            });
        }
        Ok(TransformSpec { id, probability })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProgramForm {
    Ast(Program),
    Source(String),
}

impl ProgramForm {
    pub fn into_ast(self) -> Result<Program, SyntaxError> {
        match self {
            ProgramForm::Ast(p) => Ok(p),
            ProgramForm::Source(s) => parse(&s),
        }
    }

    /// Lower to text, printing trees in the beautified style.
    pub fn into_source(self) -> String {
        match self {
            ProgramForm::Ast(p) => print(&p, PrintStyle::Beautified),
            ProgramForm::Source(s) => s,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TransformError {
    #[error("{id}: {source}")]
    Syntax {
        id: TransformId,
        #[source]
        source: SyntaxError,
    },
    #[error("{id}: {reason}")]
    Precondition { id: TransformId, reason: String },
}

/// Apply one pass. Formatting passes (R, B, C) emit text; tree passes
/// return a tree; SW passes its input through.
pub fn apply_transform<R: Rng + ?Sized>(
    id: TransformId,
    form: ProgramForm,
    rng: &mut R,
) -> Result<ProgramForm, TransformError> {
    if !requires_ast(id) {
        return Ok(form);
    }
    let mut program = form.into_ast().map_err(|source| TransformError::Syntax { id, source })?;
    Ok(match id {
        TransformId::R => ProgramForm::Source(print(&program, PrintStyle::Reformatted)),
        TransformId::B => ProgramForm::Source(print(&program, PrintStyle::Beautified)),
        TransformId::C => {
            compress(&mut program);
            ProgramForm::Source(print(&program, PrintStyle::Compact))
        }
        TransformId::DCE => {
            eliminate_dead_code(&mut program);
            ProgramForm::Ast(program)
        }
        TransformId::T => {
            swap_booleans(&mut program);
            ProgramForm::Ast(program)
        }
        TransformId::CF => {
            fold_constants(&mut program);
            ProgramForm::Ast(program)
        }
        TransformId::VR => {
            rename_variables(&mut program, rng);
            ProgramForm::Ast(program)
        }
        TransformId::IM => {
            mangle_identifiers(&mut program);
            ProgramForm::Ast(program)
        }
        TransformId::DCI => {
            insert_dead_code(&mut program, rng);
            ProgramForm::Ast(program)
        }
        TransformId::LS => {
            subsample_lines(&mut program, 0.9, rng);
            ProgramForm::Ast(program)
        }
        TransformId::SW => unreachable!(),
    })
}
