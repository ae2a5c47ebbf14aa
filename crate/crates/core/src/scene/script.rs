//! Line-oriented pose scripts.
//!
//! One command per line, `#` starts a comment, blank lines are ignored.
//! Angles are degrees.
//!
//! ```text
//! mode fk|ik
//! switch
//! rot <joint-name> <degrees>
//! effector <x> <y> <z>
//! policy integrated|external-sim
//! assert_tip <x> <y> <z> <tol>
//! reset
//! dump
//! ```

use super::FormatError;
use crate::chain::Vec3;
use crate::rig::{Mode, SyncPolicy};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Mode(Mode),
    Switch,
    /// Absolute joint angle, converted to radians.
    Rotate {
        joint: String,
        angle: f64,
    },
    Effector(Vec3),
    Policy(SyncPolicy),
    AssertTip {
        target: Vec3,
        tolerance: f64,
    },
    Reset,
    Dump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptCommand {
    /// 1-based source line.
    pub line: usize,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseScript {
    pub commands: Vec<ScriptCommand>,
}

impl PoseScript {
    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }
}

pub fn parse_script(text: &str) -> Result<PoseScript, FormatError> {
    let mut commands = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(verb) = tokens.next() else { continue };
        let args: Vec<&str> = tokens.collect();
        let command = parse_command(line, verb, &args)?;
        commands.push(ScriptCommand { line, command });
    }
    Ok(PoseScript { commands })
}

fn parse_command(line: usize, verb: &str, args: &[&str]) -> Result<Command, FormatError> {
    let arity = |expected: usize| {
        if args.len() == expected {
            Ok(())
        } else {
            Err(FormatError::Arity {
                line,
                verb: verb.to_string(),
                expected,
                found: args.len(),
            })
        }
    };
    let number = |token: &str| -> Result<f64, FormatError> {
        token
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| FormatError::Syntax {
                line,
                message: format!("`{token}` is not a finite number"),
            })
    };
    let vector = |tokens: &[&str]| -> Result<Vec3, FormatError> {
        Ok(Vec3::new(
            number(tokens[0])?,
            number(tokens[1])?,
            number(tokens[2])?,
        ))
    };

    let command = match verb {
        "mode" => {
            arity(1)?;
            match args[0] {
                "fk" => Command::Mode(Mode::Fk),
                "ik" => Command::Mode(Mode::Ik),
                other => {
                    return Err(FormatError::Syntax {
                        line,
                        message: format!("unknown mode `{other}` (expected fk or ik)"),
                    })
                }
            }
        }
        "switch" => {
            arity(0)?;
            Command::Switch
        }
        "rot" => {
            arity(2)?;
            Command::Rotate {
                joint: args[0].to_string(),
                angle: number(args[1])?.to_radians(),
            }
        }
        "effector" => {
            arity(3)?;
            Command::Effector(vector(args)?)
        }
        "policy" => {
            arity(1)?;
            match args[0] {
                "integrated" => Command::Policy(SyncPolicy::Integrated),
                "external-sim" => Command::Policy(SyncPolicy::ExternalSolverSim),
                other => {
                    return Err(FormatError::Syntax {
                        line,
                        message: format!(
                            "unknown policy `{other}` (expected integrated or external-sim)"
                        ),
                    })
                }
            }
        }
        "assert_tip" => {
            arity(4)?;
            let tolerance = number(args[3])?;
            if tolerance < 0.0 {
                return Err(FormatError::Syntax {
                    line,
                    message: "assert_tip tolerance must be non-negative".to_string(),
                });
            }
            Command::AssertTip {
                target: vector(&args[..3])?,
                tolerance,
            }
        }
        "reset" => {
            arity(0)?;
            Command::Reset
        }
        "dump" => {
            arity(0)?;
            Command::Dump
        }
        other => {
            return Err(FormatError::Syntax {
                line,
                message: format!("unknown command `{other}`"),
            })
        }
    };
    Ok(command)
}
