#pragma once

// Serialization of experiment reports and writing of a run's output files:
//
//   <out>/<run_id>/report.json          full report (deterministic bytes)
//   <out>/<run_id>/true_noise.{csv,pgm} psi used for corruption (runs with a noise head)
//   <out>/<run_id>/learned_noise.{csv,pgm}  learned/equivalent noise matrix
//   <out>/results.csv                   one summary row per run id
//
// results.csv columns:
//   run_id,dataset,variant,noise,p,keep,lambda,lr,batch_size,epochs_run,
//   best_epoch,seed,test_error_pct,learned_avg_diag,true_avg_diag,status,wall_clock_s

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "noisylab/errors.hpp"
#include "noisylab/experiment.hpp"
#include "noisylab/noise.hpp"

namespace noisylab {

using Json = nlohmann::ordered_json;

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw FormatError("matrix JSON must be a non-empty array");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j[0].size()) throw FormatError("matrix JSON rows are ragged");
    for (std::size_t k = 0; k < j[i].size(); ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
  }
  return m;
}

template <typename T>
Json optional_to_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline Json config_to_json(const TrainingConfig& c) {
  return Json{{"variant", to_string(c.variant)},
              {"noise", {{"family", to_string(c.noise.family)},
                         {"p", c.noise.p},
                         {"seed", c.noise.seed}}},
              {"keep", optional_to_json(c.keep)},
              {"lambda", optional_to_json(c.lambda)},
              {"lr", c.lr},
              {"halve_lr_on_plateau", c.halve_lr_on_plateau},
              {"head_init", c.head_init},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"patience", c.patience},
              {"seed", c.seed}};
}

inline TrainingConfig config_from_json(const Json& j) {
  TrainingConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.noise.family = parse_noise_family(j.at("noise").at("family").get<std::string>());
  c.noise.p = j.at("noise").at("p").get<double>();
  c.noise.seed = j.at("noise").at("seed").get<std::uint64_t>();
  if (!j.at("keep").is_null()) c.keep = j.at("keep").get<double>();
  if (!j.at("lambda").is_null()) c.lambda = j.at("lambda").get<double>();
  c.lr = j.at("lr").get<double>();
  c.halve_lr_on_plateau = j.at("halve_lr_on_plateau").get<bool>();
  c.head_init = j.at("head_init").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline Json report_to_json(const ExperimentReport& r) {
  Json sources = Json::array();
  for (const auto& s : r.dataset.sources) sources.push_back({{"file", s.file}, {"fnv1a64", s.fnv1a64}});
  Json trials = Json::array();
  for (const auto& t : r.lambda_trials)
    trials.push_back({{"lambda", t.lambda}, {"heldout_noisy_loss", t.heldout_loss}});
  Json j{{"run_id", r.run_id},
         {"status", r.status},
         {"message", r.message},
         {"divergence_step", optional_to_json(r.divergence_step)},
         {"config", config_to_json(r.config)},
         {"network", r.network},
         {"dataset", {{"name", r.dataset.name},
                      {"sources", sources},
                      {"preprocessing", r.dataset.preprocessing},
                      {"train_size", r.dataset.train_size},
                      {"test_size", r.dataset.test_size},
                      {"train_limit", r.dataset.train_limit},
                      {"test_limit", r.dataset.test_limit}}},
         {"training", {{"epoch_noisy_losses", r.epoch_losses},
                       {"epoch_learning_rates", r.epoch_lrs},
                       {"epochs_run", r.epoch_losses.size()},
                       {"best_epoch", r.best_epoch},
                       {"early_stopped", r.early_stopped},
                       {"sgd_steps", r.steps},
                       {"clamped_log_terms", r.clamped_terms},
                       {"lambda_selection", trials}}},
         {"observed_flip_rate", r.observed_flip_rate},
         {"test_error_percent", optional_to_json(r.test_error_percent)}};
  j["true_noise"] = r.true_psi ? matrix_to_json(r.true_psi->matrix()) : Json(nullptr);
  j["true_average_diagonal"] = r.true_psi ? Json(average_diagonal(*r.true_psi)) : Json(nullptr);
  j["learned_noise"] = r.learned_noise ? matrix_to_json(r.learned_noise->matrix()) : Json(nullptr);
  j["learned_average_diagonal"] = optional_to_json(r.learned_average_diagonal());
  return j;
}

inline std::string report_json_text(const ExperimentReport& r) {
  return report_to_json(r).dump(2) + "\n";
}

// ---------------------------------------------------------------------------

/// Creates `dir` and proves it is writable before any training starts.
inline void preflight_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".noisylab-write-probe";
  {
    std::ofstream out(probe, std::ios::binary | std::ios::trunc);
    if (!out || !(out << "ok") || !out.flush())
      throw IoError("output directory " + dir.string() + " is not writable");
  }
  std::filesystem::remove(probe, ec);
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw IoError("error writing " + path.string());
}

inline std::string csv_number(std::optional<double> v, int precision = 6) {
  if (!v || !std::isfinite(*v)) return "";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(precision) << *v;
  return os.str();
}

inline void write_matrix_files(const std::filesystem::path& stem, const Matrix& m,
                               std::vector<std::filesystem::path>& written) {
  std::ostringstream csv;
  write_matrix_csv(csv, m);
  write_text(stem.string() + ".csv", csv.str());
  std::ostringstream pgm;
  write_matrix_pgm(pgm, m, 20);
  write_text(stem.string() + ".pgm", pgm.str());
  written.emplace_back(stem.string() + ".csv");
  written.emplace_back(stem.string() + ".pgm");
}

inline std::mutex& results_csv_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

inline constexpr const char* kResultsCsvHeader =
    "run_id,dataset,variant,noise,p,keep,lambda,lr,batch_size,epochs_run,best_epoch,seed,"
    "test_error_pct,learned_avg_diag,true_avg_diag,status,wall_clock_s";

inline std::string results_csv_row(const ExperimentReport& r) {
  const auto& c = r.config;
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << r.run_id << ',' << r.dataset.name << ',' << to_string(c.variant) << ','
     << to_string(c.noise.family) << ',' << detail::csv_number(c.noise.p) << ','
     << detail::csv_number(c.keep) << ',' << detail::csv_number(c.lambda) << ','
     << detail::csv_number(c.lr) << ',' << c.batch_size << ',' << r.epoch_losses.size() << ','
     << r.best_epoch << ',' << c.seed << ',' << detail::csv_number(r.test_error_percent) << ','
     << detail::csv_number(r.learned_average_diagonal()) << ','
     << detail::csv_number(r.true_psi ? std::optional<double>(average_diagonal(*r.true_psi))
                                      : std::nullopt)
     << ',' << r.status << ',' << detail::csv_number(r.wall_clock_seconds, 4);
  return os.str();
}

/// Writes the run's files and upserts its row in results.csv (rows are keyed
/// by run id, so rerunning an id overwrites rather than duplicates).
inline std::vector<std::filesystem::path> emit_report(const ExperimentReport& r,
                                                      const std::filesystem::path& out_dir) {
  if (r.run_id.empty() || r.run_id.find_first_of("/\\,\n") != std::string::npos)
    throw InvalidInputError("run id must be non-empty and free of '/', '\\', ',' and newlines");
  const auto run_dir = out_dir / r.run_id;
  preflight_output_dir(run_dir);
  std::vector<std::filesystem::path> written;

  detail::write_text(run_dir / "report.json", report_json_text(r));
  written.push_back(run_dir / "report.json");

  // Matrices belong to runs that have a noise head.
  std::error_code ec;
  for (const char* stem : {"true_noise", "learned_noise"})
    for (const char* ext : {".csv", ".pgm"})
      std::filesystem::remove(run_dir / (std::string(stem) + ext), ec);
  if (has_noise_head(r.config.variant) && r.true_psi)
    detail::write_matrix_files(run_dir / "true_noise", r.true_psi->matrix(), written);
  if (r.learned_noise)
    detail::write_matrix_files(run_dir / "learned_noise", r.learned_noise->matrix(), written);

  const auto csv_path = out_dir / "results.csv";
  {
    std::lock_guard lock(detail::results_csv_mutex());
    std::vector<std::string> rows;
    if (std::ifstream in(csv_path); in) {
      std::string line;
      bool first = true;
      while (std::getline(in, line)) {
        if (first) {
          first = false;
          if (line.rfind("run_id,", 0) == 0) continue;
        }
        if (line.empty() || line.substr(0, line.find(',')) == r.run_id) continue;
        rows.push_back(line);
      }
    }
    rows.push_back(results_csv_row(r));
    std::string text = std::string(kResultsCsvHeader) + "\n";
    for (const auto& row : rows) text += row + "\n";
    detail::write_text(csv_path, text);
  }
  written.push_back(csv_path);
  return written;
}

}  // namespace noisylab
