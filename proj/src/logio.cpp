#include "plrank/logio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace plrank {

namespace {

using nlohmann::json;

constexpr const char* kLogFormatName = "plrank-log";
constexpr const char* kModelFormatName = "plrank-model";

json record_to_json(const BannerRecord& record) {
  json products = json::array();
  for (const auto& p : record.displayed) {
    products.push_back({{"id", p.product_id}, {"score", p.logging_score}});
  }
  json clicked = json::array();
  if (record.clicked_rank) clicked.push_back(*record.clicked_rank);
  return json{{"banner_id", record.banner_id},
              {"displayed", std::move(products)},
              {"total_score", record.total_candidate_score},
              {"clicked_ranks", std::move(clicked)},
              {"shuffled", record.shuffled}};
}

// Parses one record line. Returns false on a structural problem (counted as
// malformed); semantic validation happens afterwards.
bool record_from_json(const json& j, BannerRecord& record, bool& multi_click) {
  multi_click = false;
  if (!j.is_object()) return false;
  if (!j.contains("banner_id") || !j["banner_id"].is_string()) return false;
  if (!j.contains("displayed") || !j["displayed"].is_array()) return false;
  if (!j.contains("total_score") || !j["total_score"].is_number()) return false;

  record.banner_id = j["banner_id"].get<std::string>();
  record.displayed.clear();
  for (const auto& p : j["displayed"]) {
    if (!p.is_object() || !p.contains("id") || !p["id"].is_string() ||
        !p.contains("score") || !p["score"].is_number()) {
      return false;
    }
    record.displayed.push_back(
        {p["id"].get<std::string>(), p["score"].get<double>()});
  }
  record.total_candidate_score = j["total_score"].get<double>();

  record.clicked_rank.reset();
  if (j.contains("clicked_ranks")) {
    const auto& clicked = j["clicked_ranks"];
    if (!clicked.is_array()) return false;
    for (const auto& r : clicked) {
      if (!r.is_number_integer()) return false;
    }
    if (clicked.size() > 1) {
      multi_click = true;
      return true;  // structurally fine, rejected by the one-click rule
    }
    if (clicked.size() == 1) record.clicked_rank = clicked[0].get<int>();
  }

  record.shuffled = false;
  if (j.contains("shuffled")) {
    if (!j["shuffled"].is_boolean()) return false;
    record.shuffled = j["shuffled"].get<bool>();
  }
  return true;
}

void count_defect(RecordDefect defect, IngestReport& report) {
  switch (defect) {
    case RecordDefect::kNone: ++report.accepted; break;
    case RecordDefect::kEmptyBanner: ++report.empty_banner; break;
    case RecordDefect::kBannerTooLarge: ++report.banner_too_large; break;
    case RecordDefect::kDuplicateProduct: ++report.duplicate_product; break;
    case RecordDefect::kNonpositiveScore: ++report.nonpositive_score; break;
    case RecordDefect::kScoreOutOfRange: ++report.score_out_of_range; break;
    case RecordDefect::kTotalBelowSum: ++report.total_below_sum; break;
    case RecordDefect::kClickedRankOutOfRange:
      ++report.clicked_rank_out_of_range;
      break;
  }
}

}  // namespace

std::int64_t IngestReport::rejected_total() const {
  return malformed + multiple_clicks + empty_banner + banner_too_large +
         duplicate_product + nonpositive_score + score_out_of_range +
         total_below_sum + clicked_rank_out_of_range;
}

json IngestReport::to_json() const {
  return json{{"lines", lines},
              {"accepted", accepted},
              {"malformed", malformed},
              {"multiple_clicks", multiple_clicks},
              {"empty_banner", empty_banner},
              {"banner_too_large", banner_too_large},
              {"duplicate_product", duplicate_product},
              {"nonpositive_score", nonpositive_score},
              {"score_out_of_range", score_out_of_range},
              {"total_below_sum", total_below_sum},
              {"clicked_rank_out_of_range", clicked_rank_out_of_range}};
}

std::string IngestReport::summary() const {
  std::ostringstream out;
  out << "accepted " << accepted << "/" << lines << " records";
  if (rejected_total() > 0) {
    out << ", rejected " << rejected_total() << " (";
    bool first = true;
    auto add = [&](const char* name, std::int64_t count) {
      if (count == 0) return;
      if (!first) out << ", ";
      out << name << "=" << count;
      first = false;
    };
    add("malformed", malformed);
    add("multiple_clicks", multiple_clicks);
    add("empty_banner", empty_banner);
    add("banner_too_large", banner_too_large);
    add("duplicate_product", duplicate_product);
    add("nonpositive_score", nonpositive_score);
    add("score_out_of_range", score_out_of_range);
    add("total_below_sum", total_below_sum);
    add("clicked_rank_out_of_range", clicked_rank_out_of_range);
    out << ")";
  }
  return out.str();
}

void write_logs(const std::vector<BannerRecord>& records, const std::string& path,
                const LogHeader& header) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RecordDefect defect = validate_record(records[i]);
    if (defect != RecordDefect::kNone) {
      throw std::invalid_argument("record " + std::to_string(i) + " (banner '" +
                                  records[i].banner_id + "') is invalid: " +
                                  std::string(defect_name(defect)));
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  const json head{{"format", kLogFormatName},
                  {"version", header.version},
                  {"seed", header.seed},
                  {"generator", header.generator}};
  out << head.dump() << '\n';
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << record_to_json(records[i]).dump() << '\n';
    if (!out) {
      throw std::runtime_error("I/O failure writing '" + path + "' at record " +
                               std::to_string(i));
    }
  }
  out.flush();
  if (!out) {
    throw std::runtime_error("I/O failure flushing '" + path + "'");
  }
}

ReadLogsResult read_logs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open log file '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("log file '" + path + "' has no header line");
  }

  ReadLogsResult result;
  try {
    const json head = json::parse(line);
    if (head.value("format", "") != kLogFormatName) {
      throw std::runtime_error("not a plrank log file");
    }
    result.header.version = head.value("version", -1);
    if (result.header.version != kLogFormatVersion) {
      throw std::runtime_error("unsupported log format version " +
                               std::to_string(result.header.version));
    }
    result.header.seed = head.value("seed", std::uint64_t{0});
    result.header.generator = head.value("generator", json::object());
  } catch (const json::exception& e) {
    throw std::runtime_error("unreadable header in '" + path + "': " + e.what());
  }

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++result.report.lines;
    BannerRecord record;
    bool multi_click = false;
    bool ok = false;
    try {
      ok = record_from_json(json::parse(line), record, multi_click);
    } catch (const json::exception&) {
      ok = false;
    }
    if (!ok) {
      ++result.report.malformed;
      continue;
    }
    if (multi_click) {
      ++result.report.multiple_clicks;
      continue;
    }
    const RecordDefect defect = validate_record(record);
    count_defect(defect, result.report);
    if (defect == RecordDefect::kNone) {
      result.records.push_back(std::move(record));
    }
  }
  return result;
}

void write_model(const ScoringModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  const json head{{"format", kModelFormatName},
                  {"version", kModelFormatVersion},
                  {"name", model.name}};
  out << head.dump() << '\n';
  // sorted rows keep files reproducible regardless of map iteration order
  std::vector<std::pair<std::string, double>> rows(model.scores.begin(),
                                                   model.scores.end());
  std::sort(rows.begin(), rows.end());
  for (const auto& [id, score] : rows) {
    out << id << '\t' << json(score).dump() << '\n';
  }
  out.flush();
  if (!out) {
    throw std::runtime_error("I/O failure writing '" + path + "'");
  }
}

ScoringModel read_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open model file '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("model file '" + path + "' has no header line");
  }
  ScoringModel model;
  try {
    const json head = json::parse(line);
    if (head.value("format", "") != kModelFormatName) {
      throw std::runtime_error("not a plrank model file");
    }
    if (head.value("version", -1) != kModelFormatVersion) {
      throw std::runtime_error("unsupported model format version");
    }
    model.name = head.value("name", "");
  } catch (const json::exception& e) {
    throw std::runtime_error("unreadable header in '" + path + "': " + e.what());
  }
  if (model.name.empty()) {
    throw std::runtime_error("model file '" + path + "' has no model name");
  }

  std::int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw std::runtime_error("model file '" + path + "' line " +
                               std::to_string(line_no) + ": expected id<TAB>score");
    }
    const std::string id = line.substr(0, tab);
    const std::string value = line.substr(tab + 1);
    std::size_t consumed = 0;
    double score = 0.0;
    try {
      score = std::stod(value, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != value.size() || !std::isfinite(score)) {
      throw std::runtime_error("model file '" + path + "' line " +
                               std::to_string(line_no) + ": bad score '" +
                               value + "'");
    }
    if (!model.scores.emplace(id, score).second) {
      throw std::runtime_error("model file '" + path + "' line " +
                               std::to_string(line_no) + ": duplicate product '" +
                               id + "'");
    }
  }
  return model;
}

}  // namespace plrank
