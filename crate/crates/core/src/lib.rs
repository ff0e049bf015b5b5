// SPDX-License-Identifier: Apache-2.0

//! Partially synchronous Bullshark: a pure DAG ordering core and a
//! deterministic discrete-event simulator that builds the DAG under
//! adversarial schedules and checks agreement between parties.
//!
//! * [`dag`]: vertices, a party's local view, reachability and anchors.
//! * [`ordering`]: the commit rule and total order over committed anchors.
//! * [`round_engine`]: when an honest party leaves a round, with timeouts.
//! * [`sim`]: the event-driven network, broadcast layer and Byzantine modes.
//! * [`harness`]: scenarios, figure fixtures, property checkers and exports.

pub mod dag;
pub mod harness;
pub mod ordering;
pub mod round_engine;
pub mod sim;
pub mod time;

pub use dag::{Committee, DagError, DagView, PartyId, Round, Vertex, VertexId};
pub use ordering::{OrderingState, RuleVariant};
pub use time::SimTime;
