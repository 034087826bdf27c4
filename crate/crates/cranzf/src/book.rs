//! Compiles the book's code blocks as doctests, keeping the narrative guide
//! in `book/` from drifting out of sync with the crate.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/channel-model.md")]
mod channel_model {}

#[doc = include_str!("../../../book/src/quantized-feedback.md")]
mod quantized_feedback {}

#[doc = include_str!("../../../book/src/zero-forcing.md")]
mod zero_forcing {}

#[doc = include_str!("../../../book/src/precode-and-quantize.md")]
mod precode_and_quantize {}

#[doc = include_str!("../../../book/src/rate-bounds.md")]
mod rate_bounds {}

#[doc = include_str!("../../../book/src/monte-carlo.md")]
mod monte_carlo {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
