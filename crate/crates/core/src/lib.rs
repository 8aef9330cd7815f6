pub mod client;
pub mod compare;
pub mod harness;
pub mod he;
pub mod levelsite;
pub mod net;
pub mod tree;
pub mod wire;
