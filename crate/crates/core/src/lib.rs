pub mod chem;
pub mod fingerprint;
pub mod tokenizer;
pub mod net;
pub mod train;
pub mod corpus;
pub mod search;
pub mod recovery;
pub mod transfer;
pub mod landscape;
pub mod config;
