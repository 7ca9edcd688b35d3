pub mod lang;
pub mod typed;
pub mod gateway;
pub mod verdict;
pub mod conceptualizer;
pub mod program;
pub mod fraction;
pub mod cot;
pub mod analogy;
pub mod selection;
pub mod harness;
