#![allow(dead_code)]

pub mod corpus;
pub mod golden;
pub mod stub;
pub mod fuzz;
pub mod sandbox;
pub mod oracle;
