// SPDX-License-Identifier: Apache-2.0
// recap: preprocess / train / evaluate / analyze-hops / synth / report.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 config or data error,
// 3 non-finite training loss, 4 checkpoint fingerprint mismatch,
// 5 infeasible synthetic spec.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "recap/checkpoint.hpp"
#include "recap/config.hpp"
#include "recap/pipeline.hpp"
#include "recap/synth.hpp"

namespace {

using namespace recap;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON config of dotted keys");
  cmd->add_option("-s,--set", o.overrides, "Override a config key (key=value); repeatable");
  cmd->add_option("-o,--output-dir", o.output_dir, "Output directory (overrides config and RECAP_OUTPUT_DIR)");
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (const char* env = std::getenv("RECAP_OUTPUT_DIR"); env && *env) c.output_dir = env;
  for (const auto& kv : o.overrides) apply_override(c, kv);
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  c.validate();
  return c;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + " is not valid JSON: " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Keep large activation buffers on the heap instead of mmap/munmap per batch.
  mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
#endif
  CLI::App app{"Long-tail next-POI prediction with transition-graph propagation and revisit calibration"};
  app.require_subcommand(1);

  CommonOptions pre_opts, train_opts, eval_opts, hop_opts;
  std::string data_path;
  auto* pre = app.add_subcommand("preprocess", "Build the instance store from raw check-ins");
  add_common(pre, pre_opts);
  pre->add_option("--data", data_path, "Raw check-in file (overrides data.path)");

  auto* train = app.add_subcommand("train", "Train a model on a preprocessed store");
  add_common(train, train_opts);

  std::string checkpoint_path, split_name = "test";
  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint (default <output_dir>/model.ckpt)");
  eval->add_option("--split", split_name, "val or test")->check(CLI::IsMember({"val", "test"}));

  int max_hops = 5;
  auto* hops = app.add_subcommand("analyze-hops", "Coverage and SNR of unseen test transitions");
  add_common(hops, hop_opts);
  hops->add_option("--max-hops", max_hops, "Largest N");

  std::string spec_path, synth_out, sidecar_out;
  std::vector<std::string> spec_overrides;
  auto* synth = app.add_subcommand("synth", "Generate a planted synthetic world");
  synth->add_option("--spec", spec_path, "JSON world spec");
  synth->add_option("-p,--param", spec_overrides, "Override a spec field (key=value); repeatable");
  synth->add_option("--out", synth_out, "Check-in file to write")->required();
  synth->add_option("--truth", sidecar_out, "Ground-truth sidecar (default <out>.truth.json)");

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Mean and std of metrics across report files");
  report->add_option("reports", report_inputs, "report_*.json files")->required();
  report->add_option("--out", report_out, "Write the aggregate here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*pre) {
      CommonOptions o = pre_opts;
      if (!data_path.empty()) o.overrides.push_back("data.path=" + data_path);
      const auto summary = run_preprocess(resolve(o), std::cerr);
      std::cout << summary.dump(2) << '\n';
    } else if (*train) {
      const RunConfig cfg = resolve(train_opts);
      const auto out = run_train(cfg, std::cerr);
      std::cout << "best epoch " << out.fit.best_epoch << " (val MRR " << out.fit.best_val_mrr << "), checkpoint "
                << out.checkpoint.string() << '\n';
    } else if (*eval) {
      const RunConfig cfg = resolve(eval_opts);
      const std::filesystem::path ckpt =
          checkpoint_path.empty() ? std::filesystem::path(cfg.output_dir) / "model.ckpt" : std::filesystem::path(checkpoint_path);
      run_evaluate(cfg, ckpt, split_name == "val" ? Split::kVal : Split::kTest, std::cout);
    } else if (*hops) {
      run_analyze_hops(resolve(hop_opts), max_hops, std::cout);
    } else if (*synth) {
      nlohmann::json spec_json = spec_path.empty() ? nlohmann::json::object() : read_json(spec_path);
      for (const auto& kv : spec_overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InfeasibleSpecError("spec override '" + kv + "' is not key=value");
        nlohmann::json v;
        try {
          v = nlohmann::json::parse(kv.substr(eq + 1));
        } catch (const nlohmann::json::parse_error&) {
          throw InfeasibleSpecError("spec override '" + kv + "' has a non-numeric value");
        }
        spec_json[kv.substr(0, eq)] = v;
      }
      const SyntheticWorldSpec spec = spec_from_json(spec_json);
      const SyntheticWorld world = generate_world(spec);
      write_checkins(world.checkins, synth_out);
      const std::string truth = sidecar_out.empty() ? synth_out + ".truth.json" : sidecar_out;
      std::ofstream(truth) << world.sidecar(spec).dump(2) << '\n';
      std::cout << "wrote " << world.checkins.size() << " check-ins to " << synth_out << ", " << world.triples.size()
                << " planted triples to " << truth << '\n';
    } else if (*report) {
      std::vector<nlohmann::json> reports;
      for (const auto& p : report_inputs) reports.push_back(read_json(p));
      const auto agg = aggregate_reports(reports);
      if (!report_out.empty()) std::ofstream(report_out) << agg.dump(2) << '\n';
      std::cout << agg.dump(2) << '\n';
    }
  } catch (const NonFiniteLossError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const FingerprintMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const InfeasibleSpecError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 5;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
