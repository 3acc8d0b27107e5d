//! Exact arithmetic for orbit points whose dynamics reduce to tail shifts or
//! fixed-point addition, with thresholds evaluated to rigorous enclosures.

pub mod cf;
pub mod compare;
pub mod digits;
pub mod dyadic;
pub mod rotation;
pub mod threshold;

pub use cf::{cf_tail_in_interval, CfSource, CfStream};
pub use digits::{make_digit_stream, tail_in_interval, DigitSource, DigitStream};
pub use dyadic::Dyadic;
pub use rotation::{rotation_in_interval, RealPoint, RotationAngle};
pub use threshold::{threshold_eval, Threshold, ThresholdForm, ThresholdParams};
