//! JSON traces. Non-finite values are written as `null`; numbers use the
//! shortest representation that parses back to the same `f64`.

use serde::Serialize;

use crate::barycenter::BarycenterRecord;
use crate::transport::TraceRecord;

fn array<T: Serialize>(items: &[T]) -> Vec<u8> {
    if items.is_empty() {
        return b"[]".to_vec();
    }
    let mut out = b"[\n".to_vec();
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.extend_from_slice(b",\n");
        }
        // Plain structs of numbers cannot fail to serialize.
        serde_json::to_writer(&mut out, item).expect("trace record serializes");
    }
    out.extend_from_slice(b"\n]\n");
    out
}

/// JSON array with keys `iter`, `row_err`, `col_err`, `primal`, `dual`,
/// `theta_res`; `dual` is `null` when unavailable.
pub fn write_trace_json(trace: &[TraceRecord]) -> Vec<u8> {
    array(trace)
}

/// Barycenter counterpart: `iter`, `row_errs` (one per input),
/// `consensus_err`, `beta_residual`, `fallbacks`.
pub fn write_barycenter_trace_json(trace: &[BarycenterRecord]) -> Vec<u8> {
    array(trace)
}
