pub const SAMPLE_RECORDING: &str = include_str!("../data/292927.json");
