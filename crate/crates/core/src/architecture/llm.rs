use super::{ArchitectureError, FunctionCatalog};
use crate::gateway::{extract_results, Gateway, GatewayError, PromptEnvelope, Resource};
use crate::WithWarnings;

pub const FUNCTION_IDENTIFICATION_INSTRUCTIONS: &str = include_str!("../../assets/function_identification.txt");

/// Prompt asking a model to list the catalog of `model_text`.
pub fn function_identification_envelope(model_text: &str) -> PromptEnvelope {
    PromptEnvelope::new(FUNCTION_IDENTIFICATION_INSTRUCTIONS)
        .resource(Resource::text("architecture_model", model_text).expect("static tag is valid"))
}

/// Asks the gateway for the catalog and validates the reply.
pub fn extract_catalog_llm(
    model_text: &str,
    gateway: &Gateway,
) -> Result<WithWarnings<FunctionCatalog>, ArchitectureError> {
    let reply = gateway.send(&function_identification_envelope(model_text).render())?;
    parse_catalog_reply(&reply.text)
}

/// Converts a `{"results": {<system>: {<alias>: <lineage>}}}` reply into a catalog.
pub fn parse_catalog_reply(raw: &str) -> Result<WithWarnings<FunctionCatalog>, ArchitectureError> {
    let (results, repairs) = extract_results(raw).map_err(|e| match e {
        GatewayError::MissingResultsRoot | GatewayError::NoJsonFound => {
            ArchitectureError::SchemaViolation(e.to_string())
        }
        other => ArchitectureError::Gateway(other),
    })?;
    let mut out = FunctionCatalog::from_json(&results)?;
    out.warnings.splice(0..0, repairs.into_iter().map(|r| format!("reply JSON repaired: {r}")));
    Ok(out)
}
