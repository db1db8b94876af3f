//! Stationary distributions and subexponential tail asymptotics for
//! GI/G/1-type Markov chains, with BMAP/GI/1 and MAP/GI^(a,b)/1 queue
//! front ends and independent numerical oracles.

pub mod asymptotics;
pub mod blockseq;
pub mod bmapq;
pub mod bulkq;
pub mod gig1core;
pub mod heavytail;
pub mod model;
pub mod numeric;
pub mod simoracle;
