pub mod ei_oracle;
