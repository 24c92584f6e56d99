//! Fuzzes the CSV row loaders: the same bytes are offered to every row
//! schema the toolkit reads back (metrics, ROC points, training curves,
//! embedding coordinates). Malformed quoting, wrong arity, and non-UTF-8
//! payloads must all surface as errors, never panics.

#![no_main]

use libfuzzer_sys::fuzz_target;
use recap_core::io::{read_csv, CurveRow, MetricsRow, RocRow, TsneRow};

fuzz_target!(|data: &[u8]| {
    let _ = read_csv::<MetricsRow, _>(data);
    let _ = read_csv::<RocRow, _>(data);
    let _ = read_csv::<CurveRow, _>(data);
    let _ = read_csv::<TsneRow, _>(data);
});
