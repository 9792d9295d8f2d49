pub mod abelian;
pub mod charsum;
pub mod constructions;
pub mod driver;
pub mod modular;
pub mod par;
pub mod permcore;
pub mod search;
