pub mod barriers;
pub mod cli_io;
pub mod dyadic_cz;
pub mod envelope_abp;
pub mod field;
pub mod grid;
pub mod kernel_ops;
pub mod quadrature;
pub mod regularity_lab;
pub mod solver;
