//! Element store, relation taxonomy, tree views and derivation checks.

mod derive;
mod kind;
mod network;
mod tree;
mod value;

pub use derive::{check_derived_network, enumerate_derivations, Derivation, DerivedMapping, Layered};
pub(crate) use derive::{search_order, topology_ok};
pub use kind::{BasicRelationKind, Dimension, Orientation};
pub use network::{
    CognitiveNetwork, Concept, Element, ElementId, NetworkRole, Payload, Relation, RelationStats,
    Term, TreeDecl, TreeStats,
};
pub use tree::{classify_tree_network, knowledge_trees, NetworkFragment, TreeNetworkView};
pub use value::{Param, ValueTerm};
