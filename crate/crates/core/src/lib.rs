//! Batch reverse k-nearest-neighbor queries for moving objects on road
//! networks.
//!
//! * [`roadnet`]: network container, DIMACS loading, metric validation.
//! * [`spatial_index`]: count-augmented R-tree for circular range counts.
//! * [`engine`]: expansion, verification and the per-batch SSSP cache.
//! * [`oracle`]: brute-force ground truth.
//! * [`workload`]: seeded generation and text formats for objects and queries.
//! * [`synth`]: synthetic networks.
//!
//! With the default `parallel` feature, the oracle and the engine's optional
//! parallel batch mode run on rayon; without it everything is sequential.

pub mod engine;
pub mod error;
pub mod oracle;
pub mod roadnet;
pub mod spatial_index;
pub mod synth;
pub mod workload;

pub use engine::{batch_rknn, BatchResult, EngineConfig, MovingObject, ObjectId, QuerySpec};
pub use error::{Error, Result};
pub use roadnet::{CoordScaling, Point2D, RoadNetwork, VertexId};
pub use spatial_index::{FacilityIndex, PruneMode};
