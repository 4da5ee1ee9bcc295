//! Configuration, data files, synthetic noise, plots and reports.

pub mod config;
pub mod noise;
pub mod plot;
pub mod report;
pub mod table;

pub use config::{load_config, load_config_file, save_config, AxisSpec, Drive, ProtocolConfig, RunConfig, SolverConfig, UUnits};
pub use noise::{add_noise, NoiseModel, Noisy};
pub use plot::{plot_grid, plot_series, PlotStyle};
pub use report::{CrossCheck, FitReport};
pub use table::{read_grid, read_series, write_grid, write_series};

use crate::error::Result;
use crate::protocols::{ExperimentSeries, RamseyGrid};

/// Either kind of data set.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Series(ExperimentSeries),
    Grid(RamseyGrid),
}

impl Dataset {
    pub fn with_noise(&self, noise: &NoiseModel) -> Self {
        match self {
            Self::Series(s) => Self::Series(s.with_noise(noise)),
            Self::Grid(g) => Self::Grid(g.with_noise(noise)),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        match self {
            Self::Series(s) => write_series(s, out),
            Self::Grid(g) => write_grid(g, out),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Series(s) => s.len(),
            Self::Grid(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn emit_plot(data: &Dataset, style: &PlotStyle) -> Result<String> {
    match data {
        Dataset::Series(s) => plot_series(s, style),
        Dataset::Grid(g) => plot_grid(g, style),
    }
}
