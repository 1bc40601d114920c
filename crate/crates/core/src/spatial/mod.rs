//! Spatial queries: k-nearest-neighbor bandwidths and Delaunay candidate
//! generation. Both structures are immutable after construction and safe to
//! share across estimation workers; they are rebuilt once per stage.

mod delaunay;
mod knn;

pub use delaunay::{delaunay_centroids, Triangulation};
pub use knn::{default_k, Neighbor, SpatialIndex};
