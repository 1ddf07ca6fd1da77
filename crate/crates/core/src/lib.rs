//! Recurrent networks (RNN, LSTM, GRU) with exact backpropagation through
//! time, and a walk-forward stock-selection backtester built on them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod cells;
pub mod cli;
pub mod error;
pub mod marketdata;
pub mod metrics;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
