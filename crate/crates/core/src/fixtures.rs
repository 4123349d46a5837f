//! Fixed statement sets used by tests, examples and the default CLI demo.

/// Ten consistent statements about Paris and France.
pub const TRUSTED_CONTEXT: &[&str] = &[
    "Paris is the capital of France",
    "France's capital city is Paris",
    "The French government is seated in Paris",
    "Paris is the political center of France",
    "France is a country in Western Europe",
    "France belongs to the European Union",
    "Paris is known for the Eiffel Tower",
    "The Louvre Museum is located in Paris",
    "The Seine River flows through Paris",
    "Paris is famous for museums, monuments, and architecture",
];

/// Responses fully supported by [`TRUSTED_CONTEXT`].
pub const DENSE_AGREEMENT: &[&str] = &[
    "Paris is the capital of France",
    "The French government is based in Paris",
    "Paris contains the Eiffel Tower and the Louvre",
];

/// A mix of supported and contradicting responses.
pub const PARTIAL_SUPPORT: &[&str] = &[
    "Paris is the capital of France",
    "France is located in Europe",
    "Madrid is the capital of France",
];

/// Responses contradicting [`TRUSTED_CONTEXT`].
pub const SPARSE_DISAGREEMENT: &[&str] = &[
    "Berlin is the capital of France",
    "The Eiffel Tower is located in Rome",
    "France is a country in South America",
];

/// Seven sentences with near-duplicate paraphrases, used for clustering-robustness checks.
pub const PARAPHRASE_SET: &[&str] = &[
    "Paris is France's capital city.",
    "Paris is the capital of France.",
    "The capital of France is Paris.",
    "France is a country in Europe.",
    "Paris is known for the Eiffel Tower.",
    "Berlin is France capital.",
    "Paris is in France and is the capital.",
];
