#include "phrec/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "phrec/error.hpp"

namespace phrec {

namespace {

constexpr std::string_view kModule = "cli";
constexpr std::string_view kHeader = "id,start,stop,event,transplant,age,year,surgery";

struct Row {
  int id;
  double start, stop;
  int event, transplant;
  Covariates cov;
};

double parse_number(const std::string& field, std::size_t line) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw Error(ErrorCode::MalformedRow, kModule,
                "line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return value;
}

int parse_flag(const std::string& field, std::size_t line) {
  const double v = parse_number(field, line);
  if (v != 0.0 && v != 1.0) {
    throw Error(ErrorCode::MalformedRow, kModule,
                "line " + std::to_string(line) + ": expected 0 or 1, got '" + field + "'");
  }
  return static_cast<int>(v);
}

Row parse_row(const std::string& text, std::size_t line) {
  std::vector<std::string> fields;
  std::stringstream ss(text);
  for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
  if (!text.empty() && text.back() == ',') fields.emplace_back();
  if (fields.size() != 8) {
    throw Error(ErrorCode::MalformedRow, kModule,
                "line " + std::to_string(line) + ": expected 8 fields, got " +
                    std::to_string(fields.size()));
  }
  const double id = parse_number(fields[0], line);
  if (id != std::floor(id)) {
    throw Error(ErrorCode::MalformedRow, kModule, "line " + std::to_string(line) + ": id must be an integer");
  }
  Row r{static_cast<int>(id),
        parse_number(fields[1], line),
        parse_number(fields[2], line),
        parse_flag(fields[3], line),
        parse_flag(fields[4], line),
        {parse_number(fields[5], line), parse_number(fields[6], line), parse_flag(fields[7], line)}};
  return r;
}

bool same_covariates(const Covariates& a, const Covariates& b) {
  return a.age == b.age && a.year == b.year && a.surgery == b.surgery;
}

PatientRecord merge(const std::vector<Row>& rows) {
  const int id = rows.front().id;
  const auto nonmonotone = [id](const std::string& what) {
    return Error(ErrorCode::NonmonotoneInterval, kModule, "patient " + std::to_string(id) + ": " + what);
  };
  for (const Row& r : rows) {
    if (!(r.start >= 0.0 && r.stop > r.start)) throw nonmonotone("need 0 <= start < stop");
  }
  PatientRecord p;
  p.id = id;
  p.covariates = rows.front().cov;
  if (rows.size() == 1) {
    const Row& r = rows.front();
    if (r.start != 0.0) throw nonmonotone("a single row must start at 0");
    if (r.transplant != 0) {
      throw Error(ErrorCode::InconsistentPair, kModule,
                  "patient " + std::to_string(id) + ": transplant row without a waiting row");
    }
    p.end_time = r.stop;
    p.died = r.event == 1;
    return p;
  }
  if (rows.size() != 2) {
    throw Error(ErrorCode::InconsistentPair, kModule,
                "patient " + std::to_string(id) + " has " + std::to_string(rows.size()) + " rows");
  }
  const Row& wait = rows[0];
  const Row& after = rows[1];
  if (!same_covariates(wait.cov, after.cov) || wait.transplant != 0 || after.transplant != 1 ||
      wait.event != 0) {
    throw Error(ErrorCode::InconsistentPair, kModule, "patient " + std::to_string(id));
  }
  if (wait.start != 0.0 || after.start != wait.stop) {
    throw nonmonotone("rows must be contiguous from 0");
  }
  p.transplant_time = wait.stop;
  p.end_time = after.stop;
  p.died = after.event == 1;
  return p;
}

Error bad_document(const std::string& what) {
  return Error(ErrorCode::MalformedDocument, kModule, what);
}

}  // namespace

HeartData read_heart_csv(std::istream& in) {
  std::string line;
  std::size_t number = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedRow, kModule, "line 0: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) {
    throw Error(ErrorCode::MalformedRow, kModule, "line 0: expected header '" + std::string(kHeader) + "'");
  }
  std::vector<int> order;
  std::map<int, std::vector<Row>> rows;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Row r = parse_row(line, number);
    auto& bucket = rows[r.id];
    if (bucket.empty()) order.push_back(r.id);
    bucket.push_back(r);
  }
  if (order.empty()) throw Error(ErrorCode::MalformedRow, kModule, "line 0: no data rows");
  HeartData data;
  for (const int id : order) {
    auto& bucket = rows[id];
    std::stable_sort(bucket.begin(), bucket.end(),
                     [](const Row& a, const Row& b) { return a.start < b.start; });
    data.patients.push_back(merge(bucket));
    ++data.scenario_counts[static_cast<int>(data.patients.back().scenario())];
  }
  return data;
}

HeartData read_heart_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedRow, kModule, "line 0: cannot open " + path.string());
  return read_heart_csv(in);
}

nlohmann::json model_to_json(const StageModel& model) {
  nlohmann::json doc;
  doc["k"] = model.k();
  doc["n"] = model.n();
  doc["alpha"] = std::vector<double>(model.alpha().data(), model.alpha().data() + model.dim());
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < model.dim(); ++r) {
    std::vector<double> row(model.dim());
    for (int c = 0; c < model.dim(); ++c) row[c] = model.T()(r, c);
    rows.push_back(row);
  }
  doc["T"] = rows;
  doc["stage_labels"] = model.stage_labels();
  doc["time_unit"] = model.time_unit();
  return doc;
}

StageModel model_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw bad_document("model must be a JSON object");
  for (const char* key : {"k", "n", "alpha", "T"}) {
    if (!doc.contains(key)) throw bad_document(std::string("missing field '") + key + "'");
  }
  try {
    const int k = doc.at("k").get<int>();
    const int n = doc.at("n").get<int>();
    if (k < 1 || n < 1) throw bad_document("k and n must be >= 1");
    const int dim = k * n;
    const auto alpha_values = doc.at("alpha").get<std::vector<double>>();
    const auto rows = doc.at("T").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(alpha_values.size()) != dim) throw bad_document("alpha must have k*n entries");
    if (static_cast<int>(rows.size()) != dim) throw bad_document("T must have k*n rows");
    Matrix T(dim, dim);
    for (int r = 0; r < dim; ++r) {
      if (static_cast<int>(rows[r].size()) != dim) {
        throw Error(ErrorCode::NotSquare, "matrix-core", "row " + std::to_string(r) + " of T");
      }
      for (int c = 0; c < dim; ++c) T(r, c) = rows[r][c];
    }
    RowVector alpha(dim);
    for (int i = 0; i < dim; ++i) alpha(i) = alpha_values[i];
    std::vector<std::string> labels;
    if (doc.contains("stage_labels")) labels = doc.at("stage_labels").get<std::vector<std::string>>();
    const std::string unit = doc.value("time_unit", std::string("unit"));
    return make_stage_model(k, n, T, alpha, labels, unit);
  } catch (const nlohmann::json::exception& e) {
    throw bad_document(e.what());
  }
}

StageModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw bad_document("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw bad_document(e.what());
  }
  return model_from_json(doc);
}

void write_model(const StageModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw bad_document("cannot write " + path.string());
  out << model_to_json(model).dump(2) << '\n';
}

double days_per(const std::string& unit) {
  if (unit == "day" || unit == "days" || unit == "d") return 1.0;
  if (unit == "month" || unit == "months" || unit == "m") return 30.0;
  if (unit == "year" || unit == "years" || unit == "y") return 365.0;
  throw Error(ErrorCode::InvalidConfig, kModule, "unknown time unit '" + unit + "'");
}

double parse_duration(const std::string& text, const std::string& target_unit) {
  const auto number = [&text](const std::string& digits) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size()) {
      throw Error(ErrorCode::InvalidConfig, kModule, "bad duration '" + text + "'");
    }
    return value;
  };
  const char suffix = text.empty() ? '\0' : text.back();
  if (suffix == 'd' || suffix == 'm' || suffix == 'y') {
    return number(text.substr(0, text.size() - 1)) * days_per(std::string(1, suffix)) /
           days_per(target_unit);
  }
  return number(text);
}

}  // namespace phrec
