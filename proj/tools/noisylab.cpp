// noisylab command-line tool. Exit codes: 0 ok, 1 usage, 2 data/format/io,
// 3 divergence.

#include <atomic>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "noisylab/cli.hpp"
#include "noisylab/gradcheck.hpp"
#include "noisylab/report.hpp"

namespace {

using namespace noisylab;

std::mutex g_print;

void print_summary(const ExperimentReport& r) {
  std::lock_guard lock(g_print);
  std::cout << std::left << std::setw(40) << r.run_id << ' ' << r.status;
  if (r.test_error_percent)
    std::cout << "  test error " << std::fixed << std::setprecision(2) << *r.test_error_percent
              << '%';
  if (auto d = r.learned_average_diagonal())
    std::cout << "  learned avg diag " << std::setprecision(3) << *d << " (uniform psi "
              << r.uniform_diagonal_reference() << ')';
  if (r.status != "ok") std::cout << "  " << r.message;
  std::cout << std::defaultfloat << '\n';
}

int run_experiments(const CliConfig& cli) {
  const auto runs = expand_runs(cli);
  preflight_output_dir(cli.out_dir);
  auto [train_set, test_set] = load_data(data_source(cli), cli.seeds.front());
  const NetworkSpec spec =
      default_network(cli.dataset, train_set.shape, train_set.classes());

  std::atomic<std::size_t> next{0};
  std::atomic<bool> diverged{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < runs.size();) {
      try {
        std::ostream* log = cli.quiet || cli.jobs > 1 ? nullptr : &std::cerr;
        // Blobs are regenerated from each run's seed, as run_experiment(config, src) does.
        auto sets = cli.dataset == "blobs" ? load_data(data_source(cli), runs[i].config.seed)
                                           : std::pair{train_set, test_set};
        auto report = run_experiment(runs[i].config, std::move(sets.first), sets.second, spec,
                                     runs[i].run_id, log);
        report.dataset.train_limit = cli.train_limit;
        report.dataset.test_limit = cli.test_limit;
        emit_report(report, cli.out_dir);
        print_summary(report);
        if (report.status != "ok") diverged = true;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = runs.size();
      }
    }
  };
  const std::size_t n_threads = std::min(cli.jobs, runs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  std::cout << "results: " << (cli.out_dir / "results.csv").string() << '\n';
  return diverged ? 3 : 0;
}

int inspect_noise(const CliConfig& cli) {
  const NoiseMatrix psi = [&] {
    if (!cli.matrix_csv.empty()) {
      std::ifstream in(cli.matrix_csv);
      if (!in) throw IoError("cannot open " + cli.matrix_csv.string());
      return NoiseMatrix(read_matrix_csv(in));
    }
    return build_psi({parse_noise_family(cli.noise), cli.p.front(), cli.seeds.front()},
                     cli.classes);
  }();
  write_matrix_csv(std::cout, psi.matrix());
  std::cout << "average diagonal " << average_diagonal(psi) << '\n';
  if (!cli.pgm_out.empty()) {
    std::ofstream out(cli.pgm_out, std::ios::binary);
    if (!out) throw IoError("cannot write " + cli.pgm_out.string());
    write_matrix_pgm(out, psi.matrix(), 20);
    std::cout << "heatmap " << cli.pgm_out.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const CliConfig cli = parse_cli(argc, argv);
    if (cli.subcommand == "gradcheck") {
      const auto summary = run_gradchecks(standard_gradchecks(), &std::cout);
      std::cout << (summary.all_passed() ? "all gradient checks passed" : "gradient check FAILED")
                << " (worst " << summary.worst() << ")\n";
      return summary.all_passed() ? 0 : 2;
    }
    if (cli.subcommand == "inspect-noise") return inspect_noise(cli);
    return run_experiments(cli);
  } catch (const HelpRequested& h) {
    std::cout << h.text;
    return 0;
  } catch (const Error& e) {
    std::cerr << "noisylab: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "noisylab: " << e.what() << '\n';
    return 2;
  }
}
