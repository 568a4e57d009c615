pub mod factor;
pub mod kernels;
pub mod reference;
pub mod runtime;
pub mod stability;
pub mod tilemat;
