#pragma once

// CSV and plain-text renderings of training metrics, association dumps,
// evaluation reports and association dynamics. Every CSV starts with a
// "# mtml-<kind> v<version>" comment line followed by a header row.

#include <string>
#include <string_view>
#include <vector>

#include "mtml/association.hpp"
#include "mtml/eval.hpp"
#include "mtml/trainer.hpp"

namespace mtml {

inline constexpr int kReportFormatVersion = 1;

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochRecord& record);

struct MetricsRow {
  std::string phase;
  int iteration = 0;
  int epoch = 0;
  double lr = 0.0;
  double mt_loss = 0.0;
  double ml_loss = 0.0;
  double total = 0.0;
  std::size_t pairs_discovered = 0;
  std::optional<double> association_precision;
};

std::vector<MetricsRow> parse_metrics_csv(std::string_view data);

std::string association_dump_csv(std::span<const AssociationDumpRow> rows);
std::vector<AssociationDumpRow> parse_association_dump(std::string_view data);

// association_round_NN.csv
std::string association_dump_filename(int round);

std::string eval_report_csv(const EvalReport& report);
std::string eval_report_table(const EvalReport& report);

std::string dynamics_csv(std::span<const DynamicsRow> rows);
std::string dynamics_table(std::span<const DynamicsRow> rows);

std::string distance_matrix_csv(const Matrix& dist);

}  // namespace mtml
