pub mod analytics;
pub mod frontend;
pub mod llm;
pub mod pipeline;
pub mod report;
pub mod rules;
pub mod service;
pub mod synth;
