pub mod metric_oracles;
