#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phrec/cancer_model.hpp"
#include "phrec/count_ode.hpp"
#include "phrec/error.hpp"
#include "phrec/fitter.hpp"
#include "phrec/heart_model.hpp"
#include "phrec/io.hpp"
#include "phrec/mc_oracle.hpp"

namespace fs = std::filesystem;
using namespace phrec;

namespace {

constexpr std::string_view kModule = "cli";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Rows of comma-separated cells, written to `path` or stdout when empty.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string str() const {
    std::ostringstream out;
    for (const auto& row : rows_) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
      out << '\n';
    }
    return out.str();
  }

  void write(const std::string& path) const {
    if (path.empty()) {
      std::cout << str();
      return;
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::InvalidConfig, kModule, "cannot write " + path);
    out << str();
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

void write_json(const nlohmann::json& doc, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidConfig, kModule, "cannot write " + path);
  out << doc.dump(2) << '\n';
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) {
    if (!p.empty()) parts.push_back(p);
  }
  return parts;
}

std::vector<double> parse_times(const std::string& text, const std::string& unit) {
  std::vector<double> out;
  for (const auto& p : split(text)) out.push_back(parse_duration(p, unit));
  if (out.empty()) throw Error(ErrorCode::InvalidConfig, kModule, "no time values given");
  return out;
}

// Stage by label or 0-based index; "D"/"death" is allowed when allow_death.
int parse_stage(const StageModel& model, const std::string& text, bool allow_death) {
  if (allow_death && (text == "D" || text == "death")) return model.death();
  const auto& labels = model.stage_labels();
  for (int i = 0; i < model.k(); ++i) {
    if (labels[i] == text) return i;
  }
  int index = -1;
  std::istringstream in(text);
  if (!(in >> index) || !in.eof() || index < 0 || index > (allow_death ? model.death() : model.k() - 1)) {
    throw Error(ErrorCode::IndexOutOfRange, kModule, "unknown stage '" + text + "'");
  }
  return index;
}

std::string stage_name(const StageModel& model, int j) {
  return j == model.death() ? "D" : model.stage_labels()[j];
}

struct Globals {
  int threads = 1;
};

int effective_threads(const Globals& g) {
  if (const char* env = std::getenv("PHREC_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidConfig, kModule, std::string("bad PHREC_THREADS '") + env + "'");
  }
  return std::max(g.threads, 1);
}

void print_aligned(const std::string& title, const Csv& csv) {
  std::cout << title << '\n';
  std::vector<std::vector<std::string>> cells;
  std::stringstream ss(csv.str());
  for (std::string line; std::getline(ss, line);) {
    std::vector<std::string> row;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) row.push_back(c);
    cells.push_back(row);
  }
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], row[c].size());
    }
  }
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) std::cout << std::setw(static_cast<int>(width[c]) + 2) << row[c];
    std::cout << '\n';
  }
  std::cout << '\n';
}

FitConfig fit_config(int n, int starts, std::uint64_t seed, int max_evals, int threads) {
  FitConfig config;
  config.n_states = n;
  config.starts = starts;
  config.seed = seed;
  config.max_evals = max_evals;
  config.threads = threads;
  return config;
}

std::vector<int> parse_frozen(const std::string& text) {
  std::vector<int> frozen;
  for (const auto& name : split(text)) frozen.push_back(param_index(name));
  return frozen;
}

Csv theta_csv(const HeartParams& theta) {
  Csv csv({"parameter", "value"});
  const auto v = theta.to_vector();
  for (int j = 0; j < HeartParams::kCount; ++j) csv.add({HeartParams::name(j), num(v[j])});
  return csv;
}

void heart_demo(const std::string& data, const fs::path& out_dir, bool refit, int starts, int replicates,
                std::uint64_t seed, int threads) {
  fs::create_directories(out_dir);
  const HeartParams theta = reference_estimates();
  const HeartTables tables = heart_tables(theta);
  write_model(build_generator(theta, {30, 3, 0}), out_dir / "heart_model.json");

  Csv counts({"age", "year", "surgery", "l", "1m", "3m", "6m", "1y", "3y"});
  for (const auto& row : tables.counts) {
    for (int l = 0; l <= 2; ++l) {
      std::vector<std::string> cells{num(row.cov.age), num(row.cov.year), std::to_string(row.cov.surgery),
                                     std::to_string(l)};
      for (const double p : row.p[l]) cells.push_back(num(p));
      counts.add(cells);
    }
  }
  Csv sojourn({"age", "1m", "3m", "6m", "1y", "3y"});
  for (const auto& row : tables.sojourn) {
    std::vector<std::string> cells{num(row.age)};
    for (const double d : row.days) cells.push_back(num(d));
    sojourn.add(cells);
  }
  Csv transitions({"from", "to", "1m", "3m", "6m", "1y", "3y"});
  const char* names[3][2] = {{"disease", "transplant"}, {"disease", "death"}, {"transplant", "death"}};
  for (int r = 0; r < 3; ++r) {
    std::vector<std::string> cells{names[r][0], names[r][1]};
    for (const double p : tables.transitions[r]) cells.push_back(num(p));
    transitions.add(cells);
  }

  Csv loglik({"model", "loglik"});
  if (!data.empty()) {
    const HeartData heart = read_heart_csv(fs::path(data));
    std::cout << "patients " << heart.patients.size() << " (censored in disease " << heart.scenario_counts[0]
              << ", censored after transplant " << heart.scenario_counts[1] << ", died in disease "
              << heart.scenario_counts[2] << ", died after transplant " << heart.scenario_counts[3] << ")\n\n";
    loglik.add({"reference", num(log_likelihood(theta, heart.patients))});
    if (refit) {
      const FitConfig config = fit_config(3, starts, seed, 20000, threads);
      const FitResult no_gamma = fit_restricted(heart.patients, config, {6, 7, 8});
      const FitResult no_b = fit_restricted(heart.patients, config, {1});
      FitConfig full_config = config;
      full_config.initial = {no_gamma.theta, no_b.theta};
      const FitResult full = fit(heart.patients, full_config);
      loglik.add({"fit", num(full.loglik)});
      loglik.add({"fit without gamma", num(no_gamma.loglik)});
      loglik.add({"fit without b", num(no_b.loglik)});
      loglik.add({"LRT gamma = 0", num(lrt(full.loglik, no_gamma.loglik))});
      loglik.add({"LRT b = 0", num(lrt(full.loglik, no_b.loglik))});
      theta_csv(full.theta).write((out_dir / "heart_fit.csv").string());
      print_aligned("Refitted parameters", theta_csv(full.theta));
      if (replicates > 0) {
        BootstrapConfig boot;
        boot.replicates = replicates;
        boot.seed = seed;
        boot.threads = threads;
        const BootstrapResult result = bootstrap(heart.patients, config, boot, full.theta);
        Csv summary({"parameter", "estimate", "std", "lower", "upper"});
        const auto v = full.theta.to_vector();
        for (int j = 0; j < HeartParams::kCount; ++j) {
          summary.add({HeartParams::name(j), num(v[j]), num(result.std[j]), num(result.ci95[j][0]),
                       num(result.ci95[j][1])});
        }
        summary.write((out_dir / "heart_bootstrap.csv").string());
        print_aligned("Bootstrap summary", summary);
      }
    }
    loglik.write((out_dir / "heart_loglik.csv").string());
    print_aligned("Log-likelihood", loglik);
  }
  print_aligned("Reference parameters", theta_csv(theta));
  print_aligned("P[N(t) = l] by covariates", counts);
  print_aligned("Expected stay in disease (days), year 3, no surgery", sojourn);
  print_aligned("Stage transition probabilities, age 30, year 3, no surgery", transitions);
  theta_csv(theta).write((out_dir / "heart_reference.csv").string());
  counts.write((out_dir / "heart_counts.csv").string());
  sojourn.write((out_dir / "heart_sojourn.csv").string());
  transitions.write((out_dir / "heart_transitions.csv").string());
}

void cancer_demo(const fs::path& out_dir, ForwardReading reading, int threads) {
  fs::create_directories(out_dir);
  const CancerTables tables = cancer_tables({}, reading, threads);
  const char* months[] = {"6m", "12m", "24m", "36m"};
  Csv counts({"l", "stage", months[0], months[1], months[2], months[3]});
  for (int l = 0; l <= 2; ++l) {
    for (int c = 0; c < 5; ++c) {
      std::vector<std::string> cells{std::to_string(l), std::to_string(c)};
      for (const auto& at : tables.count[c]) cells.push_back(num(at[l]));
      counts.add(cells);
    }
  }
  Csv sojourn({"stage", months[0], months[1], months[2], months[3]});
  for (int c = 0; c < 5; ++c) {
    std::vector<std::string> cells{std::to_string(c)};
    for (const double v : tables.sojourn[c]) cells.push_back(num(v));
    sojourn.add(cells);
  }
  Csv one_step({"stage", "months", "R", "0", "1", "2", "3", "4", "D"});
  for (int c = 0; c < 5; ++c) {
    for (std::size_t h = 0; h < tables.step_horizons.size(); ++h) {
      std::vector<std::string> cells{std::to_string(c), num(tables.step_horizons[h])};
      for (const double v : tables.one_step[c][h]) cells.push_back(num(v));
      one_step.add(cells);
    }
  }
  for (int c = 0; c < 5; ++c) {
    write_model(build_cancer_generator({}, cancer_stage(c), reading),
                out_dir / ("cancer_stage" + std::to_string(c) + ".json"));
  }
  counts.write((out_dir / "cancer_counts.csv").string());
  sojourn.write((out_dir / "cancer_sojourn.csv").string());
  one_step.write((out_dir / "cancer_one_step.csv").string());
  print_aligned("P[N(t) = l] by input stage", counts);
  print_aligned("Expected stay in the input stage (months)", sojourn);
  print_aligned("Probability of one transition into each stage", one_step);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-type multi-state models: transition counts, sojourns, fitting"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals globals;
  app.add_option("--threads", globals.threads, "Worker threads (PHREC_THREADS overrides)");

  OdeTolerances tol;
  const auto add_tol = [&tol](CLI::App* sub) {
    sub->add_option("--rtol", tol.rtol, "ODE relative tolerance");
    sub->add_option("--atol", tol.atol, "ODE absolute tolerance");
  };

  std::string model_path, csv_path, out_path, data_path, t_list, stage_text, to_text, u_text = "0", t_text;
  std::string freeze, reading = "printed";
  int lmax = 2, n_states = 3, starts = 32, replicates = 200, max_evals = 20000;
  std::size_t paths = 100000;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  bool refit = false;

  auto* validate = app.add_subcommand("validate", "Check a model JSON document");
  validate->add_option("model", model_path, "Model JSON")->required();

  auto* fit_cmd = app.add_subcommand("fit", "Maximum-likelihood fit of the heart model");
  fit_cmd->add_option("--data", data_path, "Patient CSV")->required();
  fit_cmd->add_option("--n", n_states, "States per stage");
  fit_cmd->add_option("--starts", starts, "Multi-start count");
  fit_cmd->add_option("--seed", seed, "Seed for the quasi-random starts");
  fit_cmd->add_option("--max-evals", max_evals, "Likelihood evaluations per start");
  fit_cmd->add_option("--freeze", freeze, "Comma-separated parameters held at 0");
  fit_cmd->add_option("--out", out_path, "Result JSON");
  fit_cmd->add_option("--csv", csv_path, "Parameter CSV (stdout when omitted)");

  auto* count_cmd = app.add_subcommand("count-prob", "Distribution of the number of stage transitions");
  count_cmd->add_option("--model", model_path, "Model JSON")->required();
  count_cmd->add_option("--start-stage", stage_text, "Start stage (label or index)")->required();
  count_cmd->add_option("--t", t_list, "Comma-separated horizons, optional d/m/y suffix")->required();
  count_cmd->add_option("--lmax", lmax, "Largest count reported");
  count_cmd->add_option("--csv", csv_path, "Output CSV (stdout when omitted)");
  add_tol(count_cmd);

  auto* sojourn_cmd = app.add_subcommand("sojourn", "Expected continuous stay in a stage");
  sojourn_cmd->add_option("--model", model_path, "Model JSON")->required();
  sojourn_cmd->add_option("--stage", stage_text, "Stage (label or index)")->required();
  sojourn_cmd->add_option("--u", u_text, "Conditioning time");
  sojourn_cmd->add_option("--t", t_list, "Comma-separated window lengths")->required();
  sojourn_cmd->add_option("--csv", csv_path, "Output CSV (stdout when omitted)");

  auto* trans_cmd = app.add_subcommand("transprob", "Stage-to-stage transition probability");
  trans_cmd->add_option("--model", model_path, "Model JSON")->required();
  trans_cmd->add_option("--from", stage_text, "Source stage")->required();
  trans_cmd->add_option("--to", to_text, "Destination stage or D")->required();
  trans_cmd->add_option("--u", u_text, "Conditioning time");
  trans_cmd->add_option("--t", t_list, "Comma-separated window lengths")->required();
  trans_cmd->add_option("--csv", csv_path, "Output CSV (stdout when omitted)");

  auto* boot_cmd = app.add_subcommand("bootstrap", "Bootstrap standard deviations and intervals");
  boot_cmd->add_option("--data", data_path, "Patient CSV")->required();
  boot_cmd->add_option("--replicates", replicates, "Bootstrap replicates");
  boot_cmd->add_option("--seed", seed, "Master seed");
  boot_cmd->add_option("--n", n_states, "States per stage");
  boot_cmd->add_option("--starts", starts, "Multi-start count for the point estimate");
  boot_cmd->add_option("--max-evals", max_evals, "Likelihood evaluations per start");
  boot_cmd->add_option("--out", out_path, "Result JSON");
  boot_cmd->add_option("--csv", csv_path, "Summary CSV (stdout when omitted)");

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo transition counts");
  sim_cmd->add_option("--model", model_path, "Model JSON")->required();
  sim_cmd->add_option("--start-stage", stage_text, "Start stage (label or index)");
  sim_cmd->add_option("--t", t_list, "Comma-separated horizons");
  sim_cmd->add_option("--lmax", lmax, "Largest count tallied separately");
  sim_cmd->add_option("--paths", paths, "Number of paths");
  sim_cmd->add_option("--seed", seed, "Master seed");
  sim_cmd->add_option("--out", out_path, "Summary JSON (stdout when omitted)");
  sim_cmd->add_option("--csv", csv_path, "Count CSV");

  auto* heart_cmd = app.add_subcommand("heart-demo", "Heart transplant example tables");
  heart_cmd->add_option("--data", data_path, "Patient CSV (enables likelihood output)");
  heart_cmd->add_option("--out-dir", out_dir, "Directory for CSV and model files");
  heart_cmd->add_flag("--refit", refit, "Also refit the model and restricted models");
  heart_cmd->add_option("--starts", starts, "Multi-start count for refits");
  heart_cmd->add_option("--replicates", replicates, "Bootstrap replicates after refitting (0 skips)");
  heart_cmd->add_option("--seed", seed, "Seed");

  auto* cancer_cmd = app.add_subcommand("cancer-demo", "Cancer staging example tables");
  cancer_cmd->add_option("--out-dir", out_dir, "Directory for CSV and model files");
  cancer_cmd->add_option("--reading", reading, "Forward-rate index range: printed (l=1..4) or shifted (l=0..3)")
      ->check(CLI::IsMember({"printed", "shifted"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "cli: " << to_string(ErrorCode::UnknownFlag) << " (" << e.what() << ")\n";
    return 1;
  }

  try {
    const int threads = effective_threads(globals);
    if (*validate) {
      const StageModel model = read_model(model_path);
      std::cout << "ok k=" << model.k() << " n=" << model.n() << " dim=" << model.dim()
                << " time_unit=" << model.time_unit() << '\n';
    } else if (*fit_cmd) {
      const HeartData data = read_heart_csv(fs::path(data_path));
      const FitConfig config = fit_config(n_states, starts, seed, max_evals, threads);
      const FitResult result = fit_restricted(data.patients, config, parse_frozen(freeze));
      write_json(to_json(result), out_path);
      Csv csv = theta_csv(result.theta);
      csv.add({"loglik", num(result.loglik)});
      csv.write(csv_path);
    } else if (*count_cmd) {
      const StageModel model = read_model(model_path);
      const int start = parse_stage(model, stage_text, false);
      const auto times = parse_times(t_list, model.time_unit());
      CountOptions options;
      options.tol = tol;
      options.threads = threads;
      const CountDistribution dist = count_distribution(model, start, times, lmax, options);
      std::vector<std::string> header{"t"};
      for (int l = 0; l <= lmax; ++l) header.push_back("P" + std::to_string(l));
      Csv csv(header);
      for (std::size_t h = 0; h < times.size(); ++h) {
        std::vector<std::string> row{num(times[h])};
        for (const double p : dist.probs[h]) row.push_back(num(p));
        csv.add(row);
      }
      csv.write(csv_path);
    } else if (*sojourn_cmd) {
      const StageModel model = read_model(model_path);
      const int stage = parse_stage(model, stage_text, false);
      const double u = parse_duration(u_text, model.time_unit());
      Csv csv({"stage", "u", "t", "expected"});
      for (const double t : parse_times(t_list, model.time_unit())) {
        csv.add({stage_name(model, stage), num(u), num(t), num(expected_sojourn(model, stage, u, t))});
      }
      csv.write(csv_path);
    } else if (*trans_cmd) {
      const StageModel model = read_model(model_path);
      const int from = parse_stage(model, stage_text, false);
      const int to = parse_stage(model, to_text, true);
      const double u = parse_duration(u_text, model.time_unit());
      Csv csv({"from", "to", "u", "t", "probability"});
      for (const double t : parse_times(t_list, model.time_unit())) {
        csv.add({stage_name(model, from), stage_name(model, to), num(u), num(t),
                 num(stage_transition_prob(model, from, to, u, t))});
      }
      csv.write(csv_path);
    } else if (*boot_cmd) {
      const HeartData data = read_heart_csv(fs::path(data_path));
      const FitConfig config = fit_config(n_states, starts, seed, max_evals, threads);
      const FitResult point = fit(data.patients, config);
      BootstrapConfig boot;
      boot.replicates = replicates;
      boot.seed = seed;
      boot.threads = threads;
      const BootstrapResult result = bootstrap(data.patients, config, boot, point.theta);
      write_json(to_json(result, point), out_path);
      Csv csv({"parameter", "estimate", "std", "lower", "upper"});
      const auto v = point.theta.to_vector();
      for (int j = 0; j < HeartParams::kCount; ++j) {
        csv.add({HeartParams::name(j), num(v[j]), num(result.std[j]), num(result.ci95[j][0]),
                 num(result.ci95[j][1])});
      }
      csv.write(csv_path);
    } else if (*sim_cmd) {
      const StageModel model = read_model(model_path);
      int start = 0;
      if (stage_text.empty()) {
        while (model.alpha().segment(model.offset(start), model.n()).sum() <= 0.0) ++start;
      } else {
        start = parse_stage(model, stage_text, false);
      }
      const auto times = t_list.empty() ? std::vector<double>{1.0} : parse_times(t_list, model.time_unit());
      const SimSummary summary = simulate_counts(model, start, times, lmax, paths, seed, threads);
      const auto doc = to_json(summary);
      if (out_path.empty()) {
        std::cout << doc.dump(2) << '\n';
      } else {
        write_json(doc, out_path);
      }
      if (!csv_path.empty()) {
        std::vector<std::string> header{"t"};
        for (int l = 0; l <= lmax; ++l) header.push_back("P" + std::to_string(l));
        header.push_back("Pover");
        Csv csv(header);
        for (std::size_t h = 0; h < times.size(); ++h) {
          std::vector<std::string> row{num(times[h])};
          for (const double p : summary.count_freq[h]) row.push_back(num(p));
          csv.add(row);
        }
        csv.write(csv_path);
      }
    } else if (*heart_cmd) {
      heart_demo(data_path, out_dir, refit, starts, refit ? replicates : 0, seed, threads);
    } else if (*cancer_cmd) {
      cancer_demo(out_dir, reading == "printed" ? ForwardReading::Printed : ForwardReading::Shifted, threads);
    }
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return is_numerical(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "cli: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
