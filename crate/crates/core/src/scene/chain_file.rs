//! JSON chain documents.
//!
//! ```json
//! {"name": "arm2",
//!  "joints": [{"name": "j1", "offset": [0,0,0], "axis": [0,0,1]},
//!             {"name": "j2", "offset": [1,0,0], "axis": [0,0,1], "limits_deg": [-90, 90]}],
//!  "tip_offset": [1,0,0]}
//! ```

use serde::{Deserialize, Serialize};

use super::FormatError;
use crate::chain::{ChainDefinition, JointLimits, JointSpec, Vec3};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainDoc {
    name: String,
    joints: Vec<JointDoc>,
    tip_offset: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    name: String,
    offset: [f64; 3],
    axis: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    limits_deg: Option<[f64; 2]>,
}

pub fn parse_chain_file(text: &str) -> Result<ChainDefinition, FormatError> {
    let doc: ChainDoc = serde_json::from_str(text).map_err(|e| FormatError::Syntax {
        line: e.line(),
        message: e.to_string(),
    })?;
    let joints = doc
        .joints
        .into_iter()
        .map(|j| {
            let spec = JointSpec::new(j.name, Vec3::from(j.offset), Vec3::from(j.axis));
            match j.limits_deg {
                Some([min, max]) => spec.with_limits(JointLimits::from_degrees(min, max)),
                None => spec,
            }
        })
        .collect();
    Ok(ChainDefinition::new(
        doc.name,
        joints,
        Vec3::from(doc.tip_offset),
    )?)
}

/// Pretty-printed JSON that [`parse_chain_file`] reads back to an identical chain.
pub fn serialize_chain(chain: &ChainDefinition) -> String {
    let doc = ChainDoc {
        name: chain.name().to_string(),
        joints: chain
            .joints()
            .iter()
            .map(|j| JointDoc {
                name: j.name.clone(),
                offset: j.offset.into(),
                axis: j.axis.into(),
                limits_deg: j.limits.map(|l| [l.min_deg, l.max_deg]),
            })
            .collect(),
        tip_offset: chain.tip_offset().into(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("chain documents always serialize");
    text.push('\n');
    text
}
