//! Pipeline orchestration behind the `specmap` binary.
//!
//! Everything the binary does is exposed as library functions so integration
//! tests can drive the pipeline in-process: [`config`] resolves the effective
//! experiment configuration, [`pipeline`] implements the subcommands, and
//! [`report`] defines the evaluation report written to disk.

// Validation guards are written `!(x > 0.0)` so NaN also fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipeline;
pub mod report;

use specmap_core::Error;

/// Maps an error to the process exit code contract: 2 for configuration
/// errors, 4 for training and checkpoint-selection failures, 3 for everything
/// else (data, file format, and runtime errors).
pub fn exit_code(error: &Error) -> u8 {
    match error {
        Error::InvalidParameter(_)
        | Error::InvalidWindowLength(_)
        | Error::InvalidSamplingRate(_)
        | Error::InvalidSplit { .. } => 2,
        Error::SelectionFailed { .. } | Error::NonFiniteGradient { .. } => 4,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_documented_contract() {
        assert_eq!(exit_code(&Error::InvalidParameter("x".to_string())), 2);
        assert_eq!(exit_code(&Error::InvalidWindowLength(3)), 2);
        assert_eq!(
            exit_code(&Error::InvalidSplit {
                da: 0.5,
                tune: 0.5,
                test: 0.5
            }),
            2
        );
        assert_eq!(
            exit_code(&Error::SelectionFailed {
                evals: 4,
                reason: "all capped".to_string()
            }),
            4
        );
        assert_eq!(
            exit_code(&Error::NonFiniteGradient {
                tensor: 0,
                iteration: 1
            }),
            4
        );
        assert_eq!(
            exit_code(&Error::EmptyRecordFile {
                path: "x.csv".into()
            }),
            3
        );
        assert_eq!(exit_code(&Error::AllScoresCapped { count: 5 }), 3);
    }
}
