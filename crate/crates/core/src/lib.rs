//! Peptide–microbe–disease association prediction on a tripartite
//! heterogeneous graph: sequence and interaction-profile similarities,
//! prompt-guided graph augmentation, a dual GCN/Transformer encoder trained
//! with a contrastive and a supervised objective, and a cross-validation
//! harness.

pub mod augment;
pub mod config;
pub mod entities;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod rng;
pub mod similarity;
pub mod synthetic;
pub mod tensor;

pub use augment::{augment_graph, compute_prompt_scores, select_prompt_nodes, AugmentedView, PerturbScope, PromptSet};
pub use entities::{load_associations, load_entities, redundancy_filter, EntityRegistry, NamedEntity, Peptide, Relation};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use eval::{run_cross_validation, MetricsReport};
pub use graph::{AssociationStore, BinaryMatrix, HeteroGraph};
pub use model::{Model, ModelConfig, TrainConfig};
pub use similarity::{AlignmentParams, BandwidthMode, EntityClass, SimilarityMatrix};
pub use tensor::{AdamConfig, Tensor};
