#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}
#[doc = include_str!("../../../book/src/tables.md")]
mod tables {}
#[doc = include_str!("../../../book/src/logical-forms.md")]
mod logical_forms {}
#[doc = include_str!("../../../book/src/parsing.md")]
mod parsing {}
#[doc = include_str!("../../../book/src/features.md")]
mod features {}
#[doc = include_str!("../../../book/src/learning.md")]
mod learning {}
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}
