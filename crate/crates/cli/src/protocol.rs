//! Session wire protocol.
//!
//! Every message is one JSON object. Requests carry a client-assigned `id`;
//! each request gets exactly one response with the same `id`:
//!
//! ```json
//! -> {"kind": "set_mode", "id": 2, "payload": {"mode": "ik"}}
//! <- {"kind": "state", "id": 2, "payload": {"mode": "ik", ...}}
//! <- {"kind": "error", "id": 2, "payload": {"code": "wrong_mode", "message": "..."}}
//! ```
//!
//! See `docs/protocol.md` for the payload schemas.

use kinesnap::scene::{format_number, parse_chain_file};
use kinesnap::{
    ChainDefinition, Mode, RigError, RigSession, SolverConfig, SyncPolicy, TraceEntry, Vec3,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Response {
    pub kind: &'static str,
    pub id: Option<i64>,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Deserialize)]
struct Request {
    kind: String,
    id: Option<i64>,
    #[serde(default)]
    payload: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetModePayload {
    mode: Mode,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum JointRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RotPayload {
    joint: JointRef,
    degrees: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MoveEffectorPayload {
    target: [f64; 3],
    #[serde(default)]
    trace: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetPolicyPayload {
    policy: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadChainPayload {
    chain: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

struct Failure {
    code: &'static str,
    message: String,
}

impl Failure {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<RigError> for Failure {
    fn from(err: RigError) -> Self {
        let code = match err {
            RigError::WrongMode { .. } => "wrong_mode",
            RigError::IndexOutOfRange { .. } => "index_out_of_range",
            RigError::NonFinite(_) => "bad_payload",
            RigError::Solver(_) => "solver",
        };
        Failure::new(code, err.to_string())
    }
}

/// One client's rig session plus the protocol state around it.
pub struct ProtocolSession {
    rig: RigSession,
    last_trace: Option<Vec<TraceEntry>>,
}

impl ProtocolSession {
    pub fn new(chain: ChainDefinition) -> Self {
        Self {
            rig: RigSession::new(chain, SolverConfig::default()),
            last_trace: None,
        }
    }

    pub fn rig(&self) -> &RigSession {
        &self.rig
    }

    /// Handles one raw message and returns the serialized response.
    pub fn handle_text(&mut self, text: &str) -> String {
        serde_json::to_string(&self.handle(text)).expect("responses always serialize")
    }

    pub fn handle(&mut self, text: &str) -> Response {
        let request: Request = match serde_json::from_str(text) {
            Ok(r) => r,
            Err(e) => {
                // salvage the id when the envelope parses but is incomplete
                let id = serde_json::from_str::<Value>(text)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_i64));
                return error(id, Failure::new("malformed", e.to_string()));
            }
        };
        let id = request.id;
        match self.dispatch(&request) {
            Ok(()) => Response {
                kind: "state",
                id,
                payload: self.state(),
            },
            Err(failure) => error(id, failure),
        }
    }

    fn dispatch(&mut self, request: &Request) -> Result<(), Failure> {
        self.last_trace = None;
        match request.kind.as_str() {
            "get_state" => {
                payload::<Empty>(&request.payload)?;
            }
            "set_mode" => {
                let p: SetModePayload = payload(&request.payload)?;
                match (self.rig.mode(), p.mode) {
                    (Mode::Fk, Mode::Ik) => {
                        self.rig.switch_to_ik()?;
                    }
                    (Mode::Ik, Mode::Fk) => {
                        self.rig.switch_to_fk()?;
                    }
                    _ => {}
                }
            }
            "rot" => {
                let p: RotPayload = payload(&request.payload)?;
                let index = match p.joint {
                    JointRef::Index(i) => i,
                    JointRef::Name(name) => {
                        self.rig.chain().joint_index(&name).ok_or_else(|| {
                            Failure::new("unknown_joint", format!("no joint named `{name}`"))
                        })?
                    }
                };
                self.rig.rotate_joint(index, p.degrees.to_radians())?;
            }
            "move_effector" => {
                let p: MoveEffectorPayload = payload(&request.payload)?;
                let goal = Vec3::from(p.target);
                if p.trace
                    && self.rig.mode() == Mode::Ik
                    && self.rig.policy() == SyncPolicy::Integrated
                {
                    let traced = kinesnap::solve_ik_traced(
                        self.rig.chain(),
                        self.rig.dofs(),
                        &goal,
                        self.rig.solver_config(),
                    )
                    .map_err(|e| Failure::new("solver", e.to_string()))?;
                    self.last_trace = traced.trace;
                }
                self.rig.move_effector(goal)?;
            }
            "set_policy" => {
                let p: SetPolicyPayload = payload(&request.payload)?;
                let policy = match p.policy.as_str() {
                    "integrated" => SyncPolicy::Integrated,
                    "external-sim" => SyncPolicy::ExternalSolverSim,
                    other => {
                        return Err(Failure::new(
                            "bad_payload",
                            format!(
                                "unknown policy `{other}` (expected integrated or external-sim)"
                            ),
                        ))
                    }
                };
                self.rig.set_policy(policy)?;
            }
            "reset" => {
                payload::<Empty>(&request.payload)?;
                self.rig.reset()?;
            }
            "load_chain" => {
                let p: LoadChainPayload = payload(&request.payload)?;
                let chain = parse_chain_file(&p.chain.to_string())
                    .map_err(|e| Failure::new("invalid_chain", e.to_string()))?;
                self.rig = RigSession::new(chain, self.rig.solver_config().clone());
            }
            other => {
                return Err(Failure::new(
                    "unknown_kind",
                    format!("unknown request kind `{other}`"),
                ))
            }
        }
        Ok(())
    }

    /// Full state snapshot. Joint positions are included so clients never need
    /// their own forward kinematics.
    pub fn state(&self) -> Value {
        let rig = &self.rig;
        let pose = rig.pose();
        let triple = |v: Vec3| json!([v.x, v.y, v.z]);
        let last = rig.last_solve();
        let mut state = json!({
            "chain": rig.chain().name(),
            "joint_names": rig.chain().joints().iter().map(|j| j.name.as_str()).collect::<Vec<_>>(),
            "mode": rig.mode().as_str(),
            "policy": rig.policy().as_str(),
            "angles_deg": rig.dofs().to_degrees(),
            "joint_positions": pose.joint_positions.iter().map(|p| triple(*p)).collect::<Vec<_>>(),
            "tip": triple(rig.tip()),
            "effector_goal": triple(rig.effector_goal()),
            "tolerance": rig.solver_config().tolerance,
            "last_status": last.map(|r| r.status.as_str()),
            "last_residual": last.map(|r| r.residual),
            "last_iterations": last.map(|r| r.iterations_used),
            "events": rig.history().len(),
        });
        if let Some(trace) = &self.last_trace {
            state["trace"] = json!(trace
                .iter()
                .map(|t| json!({
                    "residual": t.residual,
                    "strategy": t.strategy.map(|s| s.as_str()),
                }))
                .collect::<Vec<_>>());
        }
        state
    }
}

fn payload<T: for<'de> Deserialize<'de>>(value: &Value) -> Result<T, Failure> {
    let value = match value {
        Value::Null => json!({}),
        Value::Object(_) => value.clone(),
        _ => return Err(Failure::new("bad_payload", "payload must be an object")),
    };
    serde_json::from_value(value).map_err(|e| Failure::new("bad_payload", e.to_string()))
}

fn error(id: Option<i64>, failure: Failure) -> Response {
    Response {
        kind: "error",
        id,
        payload: json!(ErrorPayload {
            code: failure.code.to_string(),
            message: failure.message,
        }),
    }
}

/// Short human summary of a state snapshot, for logs.
pub fn describe(state: &Value) -> String {
    let tip = state["tip"]
        .as_array()
        .map(|v| {
            v.iter()
                .map(|x| format_number(x.as_f64().unwrap_or(f64::NAN)))
                .collect::<Vec<_>>()
                .join(",")
        })
        .unwrap_or_default();
    format!("mode={} tip=({tip})", state["mode"].as_str().unwrap_or("?"))
}
