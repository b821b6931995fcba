//! Skip-aggregation graph neural network for stance classification of posts
//! in a user-post bipartite interaction graph, plus the weak-labeling
//! pipeline, synthetic benchmark generator, and evaluation tooling around it.

pub mod dataset;
pub mod eval;
pub mod graph;
pub mod model;
pub mod nn;
pub mod sampler;
pub mod synth;
pub mod weak_label;
