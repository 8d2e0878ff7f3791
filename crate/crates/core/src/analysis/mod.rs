//! Verification machinery: describing sets for Sum-GNNs on parameterized
//! families, piece counting, the discrete minimax oracle and counterexample
//! search.

mod describe;
pub mod lp;
mod minimax;
mod pieces;
mod poly;
mod search;

pub use describe::{
    check_description, describe, DescribeTarget, DescriptionCheck, Violation, DEFAULT_SET_CAP,
    DESCRIBE_REL_TOL,
};
pub use minimax::{default_kn, minimax_gap, scan_gap, GapResult, ScanResult, ZERO_GAP};
pub use pieces::{detect_pieces, piece_bound, pieces_on_family, PieceReport, PIECE_REL_TOL};
pub use poly::{Poly2, PolySet, COEFF_TOL};
pub use search::{counterexample_search, ladder, GridBudget, Witness};
