#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpseg/train.hpp"

namespace mpseg {

struct MetricsReport {
  std::string command;  // "train" or "eval"
  std::string variant;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string dataset_hash;
  std::string split;
  EvalResult eval;
  std::vector<double> epoch_loss;
};

/// Stable key order, percentages and losses with 6 decimals.
std::string render_report(const MetricsReport& r);
/// layer,miou_l,util with layer 0 leaving mIoU-L empty.
std::string render_layer_csv(const EvalResult& e);

/// Table-1-style text rendering of an analysis.
std::string render_analysis_table(const AnalysisResult& a);
std::string render_analysis_csv(const AnalysisResult& a);

/// Refinement study rows.
std::string refinement_csv_header();
std::string refinement_csv_row(std::size_t index, double sigma, const RefinementBounds& b);

std::string fixed6(double v);

}  // namespace mpseg
