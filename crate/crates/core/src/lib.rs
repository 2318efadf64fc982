pub mod attacks;
pub mod dumpio;
pub mod entropy;
pub mod error;
pub mod evalkit;
pub mod pipeline;
pub mod synthbench;
pub mod videostats;

pub use error::{Error, Result};

// keep the guide's snippets compiling and passing
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/entropy.md")]
    mod entropy {}
    #[doc = include_str!("../../../book/src/video-statistics.md")]
    mod video_statistics {}
    #[doc = include_str!("../../../book/src/dumps.md")]
    mod dumps {}
    #[doc = include_str!("../../../book/src/attacks.md")]
    mod attacks {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic-data.md")]
    mod synthetic_data {}
    #[doc = include_str!("../../../book/src/command-line.md")]
    mod command_line {}
}
