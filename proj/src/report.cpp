#include "mtml/report.hpp"

#include <cstdio>

#include "mtml/error.hpp"
#include "text.hpp"

namespace mtml {

namespace {

std::string banner(std::string_view kind) {
  return "# mtml-" + std::string(kind) + " v" + std::to_string(kReportFormatVersion) + "\n";
}

std::string precision_field(const std::optional<double>& p) {
  return p ? text::format_real(*p) : std::string("-");
}

// Returns the data rows after checking the banner and header lines.
std::vector<std::string_view> body(std::string_view data, std::string_view kind, std::string_view header) {
  auto rows = text::lines(data);
  const std::string expected = banner(kind);
  if (rows.size() < 2 || rows[0] != std::string_view(expected).substr(0, expected.size() - 1)) {
    fail(ErrorCode::kParseError, "missing '" + expected.substr(0, expected.size() - 1) + "' banner");
  }
  if (rows[1] != header) fail(ErrorCode::kParseError, "line 2: unexpected header");
  return {rows.begin() + 2, rows.end()};
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

constexpr std::string_view kMetricsHeader =
    "phase,iteration,epoch,lr,mt_loss,ml_loss,total,pairs_discovered,association_precision";
constexpr std::string_view kDumpHeader = "round,camera_a,identity_a,camera_b,identity_b,correct";

}  // namespace

std::string metrics_csv_header() { return banner("metrics") + std::string(kMetricsHeader) + "\n"; }

std::string metrics_csv_row(const EpochRecord& r) {
  std::string out(to_string(r.phase));
  out += "," + std::to_string(r.iteration) + "," + std::to_string(r.epoch) + ",";
  text::append_real(out, r.lr);
  out += ',';
  text::append_real(out, r.mt_loss);
  out += ',';
  text::append_real(out, r.ml_loss);
  out += ',';
  text::append_real(out, r.total);
  out += "," + std::to_string(r.pairs_discovered) + "," + precision_field(r.association_precision) + "\n";
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view data) {
  std::vector<MetricsRow> out;
  std::size_t line = 3;
  for (auto row : body(data, "metrics", kMetricsHeader)) {
    auto f = text::split(row, ',');
    MetricsRow m;
    bool ok = f.size() == 9;
    if (ok) {
      m.phase = std::string(f[0]);
      ok = text::parse_int(f[1], m.iteration) && text::parse_int(f[2], m.epoch) && text::parse_real(f[3], m.lr) &&
           text::parse_real(f[4], m.mt_loss) && text::parse_real(f[5], m.ml_loss) &&
           text::parse_real(f[6], m.total) && text::parse_int(f[7], m.pairs_discovered);
      if (ok && text::trim(f[8]) != "-") {
        double p = 0.0;
        ok = text::parse_real(f[8], p);
        m.association_precision = p;
      }
    }
    if (!ok) fail(ErrorCode::kParseError, "metrics line " + std::to_string(line) + " is malformed");
    out.push_back(std::move(m));
    ++line;
  }
  return out;
}

std::string association_dump_csv(std::span<const AssociationDumpRow> rows) {
  std::string out = banner("association") + std::string(kDumpHeader) + "\n";
  for (const auto& r : rows) {
    const char* flag = r.correctness == PairCorrectness::kCorrect     ? "correct"
                       : r.correctness == PairCorrectness::kIncorrect ? "incorrect"
                                                                      : "unknown";
    out += std::to_string(r.round) + "," + std::to_string(r.camera_a) + "," + std::to_string(r.identity_a) + "," +
           std::to_string(r.camera_b) + "," + std::to_string(r.identity_b) + "," + flag + "\n";
  }
  return out;
}

std::vector<AssociationDumpRow> parse_association_dump(std::string_view data) {
  std::vector<AssociationDumpRow> out;
  std::size_t line = 3;
  for (auto row : body(data, "association", kDumpHeader)) {
    auto f = text::split(row, ',');
    AssociationDumpRow r;
    bool ok = f.size() == 6 && text::parse_int(f[0], r.round) && text::parse_int(f[1], r.camera_a) &&
              text::parse_int(f[2], r.identity_a) && text::parse_int(f[3], r.camera_b) &&
              text::parse_int(f[4], r.identity_b);
    if (ok) {
      const auto flag = text::trim(f[5]);
      if (flag == "correct") {
        r.correctness = PairCorrectness::kCorrect;
      } else if (flag == "incorrect") {
        r.correctness = PairCorrectness::kIncorrect;
      } else if (flag == "unknown") {
        r.correctness = PairCorrectness::kUnknown;
      } else {
        ok = false;
      }
    }
    if (!ok) fail(ErrorCode::kParseError, "association dump line " + std::to_string(line) + " is malformed");
    out.push_back(r);
    ++line;
  }
  return out;
}

std::string association_dump_filename(int round) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "association_round_%02d.csv", round);
  return buf;
}

std::string eval_report_csv(const EvalReport& report) {
  std::string out = banner("eval") + "metric,value\n";
  for (const auto& [rank, rate] : report.cmc) out += "R" + std::to_string(rank) + "," + text::format_real(rate) + "\n";
  out += "mAP," + text::format_real(report.map_score) + "\n";
  out += "num_probes_evaluated," + std::to_string(report.num_probes_evaluated) + "\n";
  out += "num_probes_excluded," + std::to_string(report.num_probes_excluded) + "\n";
  return out;
}

std::string eval_report_table(const EvalReport& report) {
  std::string head;
  std::string vals;
  for (const auto& [rank, rate] : report.cmc) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%8s", ("R" + std::to_string(rank)).c_str());
    head += buf;
    std::snprintf(buf, sizeof(buf), "%8s", fixed(100.0 * rate, 1).c_str());
    vals += buf;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%8s", "mAP");
  head += buf;
  std::snprintf(buf, sizeof(buf), "%8s", fixed(100.0 * report.map_score, 1).c_str());
  vals += buf;
  return head + "\n" + vals + "\nprobes evaluated: " + std::to_string(report.num_probes_evaluated) +
         " (excluded: " + std::to_string(report.num_probes_excluded) + ")\n";
}

std::string dynamics_csv(std::span<const DynamicsRow> rows) {
  std::string out = banner("dynamics") + "round,pairs,precision\n";
  for (const auto& r : rows) {
    out += std::to_string(r.round) + "," + std::to_string(r.pairs) + "," + precision_field(r.precision) + "\n";
  }
  return out;
}

std::string dynamics_table(std::span<const DynamicsRow> rows) {
  std::string out = "round     pairs  precision\n";
  for (const auto& r : rows) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%5d  %8zu  %9s\n", r.round, r.pairs,
                  r.precision ? fixed(*r.precision, 4).c_str() : "-");
    out += buf;
  }
  return out;
}

std::string distance_matrix_csv(const Matrix& dist) {
  std::string out = banner("distances") + "probe";
  for (std::size_t j = 0; j < dist.cols; ++j) out += ",g" + std::to_string(j);
  out += '\n';
  for (std::size_t i = 0; i < dist.rows; ++i) {
    out += std::to_string(i);
    for (std::size_t j = 0; j < dist.cols; ++j) {
      out += ',';
      text::append_real(out, dist(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace mtml
