use super::PipelineError;
use crate::backends::PromptRefiner;

/// Marker put in front of a coarse prompt when no refiner is configured.
pub const FALLBACK_PREFIX: &str = "fine: ";

/// Coarse prompt parts plus their refined forms once available.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptSpec {
    pub clothes: String,
    pub face: String,
    pub background: String,
    pub refined_clothes: Option<String>,
    pub refined_face: Option<String>,
}

impl PromptSpec {
    pub fn new(
        clothes: impl Into<String>,
        face: impl Into<String>,
        background: impl Into<String>,
    ) -> Result<Self, PipelineError> {
        let spec = PromptSpec {
            clothes: clothes.into(),
            face: face.into(),
            background: background.into(),
            refined_clothes: None,
            refined_face: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, v) in [("clothes", &self.clothes), ("face", &self.face), ("background", &self.background)] {
            if v.trim().is_empty() {
                return Err(PipelineError::Input(format!("prompt field `{name}` is empty")));
            }
        }
        Ok(())
    }

    /// `"<clothes>, <face>, <background>"`, preferring refined parts.
    pub fn full_prompt(&self) -> String {
        format!(
            "{}, {}, {}",
            self.refined_clothes.as_deref().unwrap_or(&self.clothes),
            self.refined_face.as_deref().unwrap_or(&self.face),
            self.background
        )
    }
}

pub fn clothes_template(clothes: &str) -> String {
    format!(
        "Imagine an image with {clothes}, and describe the attribute of the clothes in 20 single words with detailed precision, making sure that the words correspond to one and only one clothes only."
    )
}

pub fn face_template(face: &str) -> String {
    format!(
        "Imagine the {face} and describe it with 20 single words, focusing on facial and hair details, making sure that the description of the face and hair corresponds to the face and hair of one and only one person."
    )
}

/// Fills the refined fields, either from the refiner's answers to the two
/// templates or, without a refiner, as the coarse text behind
/// [`FALLBACK_PREFIX`].
pub fn refine_prompts(
    spec: &PromptSpec,
    llm: Option<&dyn PromptRefiner>,
) -> Result<PromptSpec, PipelineError> {
    spec.validate()?;
    let mut out = spec.clone();
    match llm {
        Some(llm) => {
            let ask = |template: String| {
                llm.refine(&template)
                    .map_err(|source| PipelineError::Refinement { template, source })
            };
            out.refined_clothes = Some(ask(clothes_template(&spec.clothes))?);
            out.refined_face = Some(ask(face_template(&spec.face))?);
        }
        None => {
            out.refined_clothes = Some(format!("{FALLBACK_PREFIX}{}", spec.clothes));
            out.refined_face = Some(format!("{FALLBACK_PREFIX}{}", spec.face));
        }
    }
    Ok(out)
}
