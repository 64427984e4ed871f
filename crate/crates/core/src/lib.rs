pub mod augment;
pub mod eval;
pub mod features;
pub mod gtw;
pub mod mlp;
pub mod pipeline;
pub mod preprocess;
pub mod recognizer;
pub mod recording;
pub mod service;
pub mod synth;
pub mod view;

#[cfg(test)]
mod testdata;
