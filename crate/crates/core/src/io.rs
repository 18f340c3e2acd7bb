//! File-format helpers: `.npy` arrays and a sectioned binary tensor archive.

pub mod npy;
pub mod tensor_archive;
