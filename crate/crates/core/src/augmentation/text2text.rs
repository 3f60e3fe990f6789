use serde::{Deserialize, Serialize};

use crate::corpus::Example;
use crate::{Error, Result};

/// Control tag for a reversed entailment example.
pub const REVERSE_ENTAILMENT: &str = "reverse-entailment";

/// `(control_label, input_text) -> target_text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Text2TextPair {
    pub control_label: String,
    pub input_text: String,
    pub target_text: String,
}

/// The control label of the reversed pair. Entailment gets its own tag;
/// contradiction and neutral are symmetric.
pub fn reversed_label(label: &str) -> String {
    match label {
        "entailment" => REVERSE_ENTAILMENT.to_owned(),
        other => other.to_owned(),
    }
}

/// Cast a labeled pair into the generator's training format. `class_name`
/// is the example's label name in the auxiliary label space.
pub fn to_text2text(example: &Example, class_name: &str, include_reversed: bool) -> Result<Vec<Text2TextPair>> {
    let b = example
        .segment_b
        .as_deref()
        .ok_or_else(|| Error::Validation(format!("example `{}` has no segment_b", example.id)))?;
    if example.label.and_then(|l| l.class()).is_none() {
        return Err(Error::Validation(format!(
            "example `{}` needs a categorical label",
            example.id
        )));
    }
    let mut out = vec![Text2TextPair {
        control_label: class_name.to_owned(),
        input_text: example.segment_a.clone(),
        target_text: b.to_owned(),
    }];
    if include_reversed {
        out.push(Text2TextPair {
            control_label: reversed_label(class_name),
            input_text: b.to_owned(),
            target_text: example.segment_a.clone(),
        });
    }
    Ok(out)
}
