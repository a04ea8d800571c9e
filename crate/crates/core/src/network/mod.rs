//! Distributed encoding over OR-forwarding networks.
//!
//! `n` encoders share one codebook of `n·T` bins, encoder `m` owning bins
//! `m·T .. (m+1)·T`. Each encoder produces its own register; relays forward
//! the OR of whatever arrives on intact links, and the decoder ORs its
//! inputs. Because OR is associative the decoder sees exactly the register a
//! single encoder would have produced for the concatenated ensemble, as long
//! as every encoder still has a path to it.

mod distributed;
mod graph;

pub use distributed::{encode_distributed, gen_joint_sparse, split_ensemble, DistributedCodebook};
pub use graph::{Edge, LayeredDag, NetworkGraph, Node, NodeKind, Topology};
