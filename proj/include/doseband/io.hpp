#pragma once

// Tidy CSV files shared with external plotting and coverage jobs.
//
//   dataset: u,x_0,...,x_{d-1},t,y   (u optional)
//   oracle:  x,t,u,capo_u,capo,lambda_star

#include <string>
#include <vector>

#include "doseband/density.hpp"
#include "doseband/synthetic.hpp"

namespace doseband {

// Shortest text that round-trips the double.
std::string format_double(double v);

Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const Dataset& data);

std::vector<OracleRow> read_oracle_csv(const std::string& path);
void write_oracle_csv(const std::string& path, const std::vector<OracleRow>& rows);

// Splits a line on commas and trims surrounding whitespace.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace doseband
