pub mod attacks;
pub mod bench;
pub mod codec;
pub mod merkle;
pub mod model;
pub mod protocol;
pub mod refereed;
pub mod separation;
