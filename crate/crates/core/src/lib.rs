//! Core engine for semantic knowledge maps: corpus types, the provider
//! gateway, the UMAP-style reducer, the ingestion pipeline, map
//! cartography and recipe-based idea synthesis.

pub mod corpus;
pub mod gateway;
pub mod cartography;
pub mod reduce;
pub mod pipeline;
pub mod synthesis;
pub mod synthetic;
