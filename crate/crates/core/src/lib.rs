pub mod cli;
pub mod evolution;
pub mod io;
pub mod kernel;
pub mod lattice;
pub mod linalg;
pub mod oracles;
pub mod par;
pub mod spaces;
pub mod symbol;
pub mod transform;
