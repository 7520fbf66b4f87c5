// lerp: train, evaluate and inspect rule models on a knowledge graph.
#include <cstdio>
#include <cstdlib>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "lerp/checkpoint.hpp"
#include "lerp/checks.hpp"
#include "lerp/evaluator.hpp"
#include "lerp/interpret.hpp"
#include "lerp/trainer.hpp"

namespace {

// LERP_LOG=quiet|info|debug (default info)
int log_level() {
  const char* env = std::getenv("LERP_LOG");
  if (!env) return 1;
  const std::string v = env;
  if (v == "quiet" || v == "0") return 0;
  if (v == "debug" || v == "2") return 2;
  return 1;
}

void info(const std::string& line) {
  if (log_level() >= 1) std::fprintf(stderr, "%s\n", line.c_str());
}

std::string fmt_double(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int run_train(const std::string& data, const std::string& config_path, const std::string& out_dir,
              std::size_t threads, const std::optional<std::uint64_t>& seed, const std::optional<std::size_t>& epochs) {
  const auto graph = lerp::load_dataset(data);
  auto config = lerp::load_config(config_path);
  if (seed) config.seed = *seed;
  if (epochs) config.epochs = *epochs;
  config.validate();
  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  info("dataset " + data + ": " + std::to_string(graph.num_entities()) + " entities, " +
       std::to_string(graph.num_raw_relations()) + " relations, " + std::to_string(graph.train().size()) +
       " train triplets");

  std::string log_text;
  lerp::FitOptions options;
  options.workers = threads;
  options.on_step = [&](const lerp::StepLog& s) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %zu step %zu loss %.6f time %.3f\n", s.epoch, s.step, s.loss, s.seconds);
    log_text += buf;
    if (log_level() >= 2) std::fputs(buf, stderr);
  };
  options.on_epoch = [&](const lerp::EpochStats& e, const lerp::Model& model) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %zu done loss %.6f queries %zu zero-score %zu time %.3f\n", e.epoch, e.loss,
                  e.queries, e.zero_score_queries, e.seconds);
    log_text += buf;
    info(std::string(buf, std::strlen(buf) - 1));
    snprintf(buf, sizeof buf, "epoch-%03zu", e.epoch);
    lerp::save_checkpoint(model, out / buf);
    lerp::write_file_atomic(out / "train.log", log_text);
  };
  const lerp::Model model = lerp::fit(config, graph, options);
  lerp::save_checkpoint(model, out / "final");
  lerp::write_file_atomic(out / "train.log", log_text);
  info("parameters: " + std::to_string(model.num_scalars()) + "; checkpoint written to " + (out / "final").string());
  return 0;
}

int run_evaluate(const std::string& data, const std::string& ckpt, const std::string& report_path,
                 const std::string& split, std::size_t threads) {
  const auto graph = lerp::load_dataset(data);
  auto model = lerp::load_checkpoint(ckpt);
  const auto& triplets = split == "valid" ? graph.valid() : split == "train" ? graph.train() : graph.test();
  const auto report = lerp::evaluate(model, graph, triplets, split, threads);
  const std::string table = lerp::report_to_table(report);
  std::fputs(table.c_str(), stdout);
  lerp::write_file_atomic(report_path, lerp::report_to_json(report));
  lerp::write_file_atomic(report_path + ".txt", table);
  return 0;
}

int run_extract(const std::string& ckpt, const std::string& out, std::string functions, std::size_t top) {
  const auto model = lerp::load_checkpoint(ckpt);
  if (functions.empty()) functions = out + ".functions";
  lerp::write_rules(model, out, top);
  lerp::write_functions(model, functions);
  info("rules written to " + out + ", LERP functions to " + functions);
  return 0;
}

int run_dump(const std::string& data, const std::string& ckpt, const std::string& out) {
  const auto graph = lerp::load_dataset(data);
  auto model = lerp::load_checkpoint(ckpt);
  lerp::dump_lerp_vectors(model, graph, out);
  return 0;
}

int run_oracle_check(std::uint64_t seed, std::size_t graphs, std::size_t instances) {
  const lerp::SuiteResult results[] = {
      lerp::check_oracle_equivalence(graphs, seed),
      lerp::check_gradients(instances, seed + 1),
      lerp::check_op_bound({10, 20, 40}, 40, seed + 2),
      lerp::check_ranges(200, seed + 3),
  };
  bool all = true;
  for (const auto& r : results) {
    std::printf("%-20s %s %zu/%zu passed (%s, %.1fs)\n", r.name.c_str(), r.ok() ? "PASS" : "FAIL", r.passed, r.cases,
                r.detail.c_str(), r.seconds);
    for (const auto& f : r.failures) std::printf("  %s\n", f.c_str());
    all = all && r.ok();
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rule learning with logical entity representations"};
  app.require_subcommand(1);
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::uint64_t> seed;
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "override the random seed");

  std::string data, config, out, ckpt, report, functions, split = "test";
  std::optional<std::size_t> epochs;
  std::size_t top = 0, graphs = 500, instances = 100;

  auto* train = app.add_subcommand("train", "fit a model and write checkpoints plus a loss log");
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--config", config, "JSON config")->required();
  train->add_option("--out", out, "checkpoint directory")->required();
  train->add_option("--epochs", epochs, "override the epoch count");

  auto* eval = app.add_subcommand("evaluate", "filtered MRR and Hits@k on a split");
  eval->add_option("--data", data, "dataset directory")->required();
  eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
  eval->add_option("--report", report, "JSON report path (table goes to <report>.txt)")->required();
  eval->add_option("--split", split, "test, valid or train")->check(CLI::IsMember({"test", "valid", "train"}));

  auto* extract = app.add_subcommand("extract-rules", "decode rules and LERP functions");
  extract->add_option("--ckpt", ckpt, "checkpoint file")->required();
  extract->add_option("--out", out, "rule file")->required();
  extract->add_option("--functions", functions, "function file (default <out>.functions)");
  extract->add_option("--top", top, "rules per target, 0 = all");

  auto* dump = app.add_subcommand("dump-lerp", "write per-entity LERP vectors");
  dump->add_option("--data", data, "dataset directory")->required();
  dump->add_option("--ckpt", ckpt, "checkpoint file")->required();
  dump->add_option("--out", out, "output file")->required();

  auto* oracle = app.add_subcommand("oracle-check", "randomized oracle, gradient, bound and range suites");
  oracle->add_option("--graphs", graphs, "random graphs for the oracle suite");
  oracle->add_option("--instances", instances, "random instances for the gradient suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(data, config, out, threads, seed, epochs);
    if (*eval) return run_evaluate(data, ckpt, report, split, threads);
    if (*extract) return run_extract(ckpt, out, functions, top);
    if (*dump) return run_dump(data, ckpt, out);
    if (*oracle) return run_oracle_check(seed.value_or(1), graphs, instances);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
