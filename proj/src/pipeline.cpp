// SPDX-License-Identifier: Apache-2.0
#include "recap/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "recap/checkpoint.hpp"

namespace recap {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

TransitionStore training_transitions(const InstanceStore& store, bool cross_trajectory) {
  return count_transitions(store.sequences, store.vocab.num_pois(), cross_trajectory);
}

nlohmann::json dataset_summary_json(const InstanceStore& store, int eta, bool cross_trajectory) {
  const auto& s = store.summary;
  const TransitionStore transitions = training_transitions(store, cross_trajectory);
  const TailShare share = tail_share(store.test, transitions, eta);
  nlohmann::json j;
  j["users"] = s.users;
  j["pois"] = s.pois;
  j["categories"] = s.categories;
  j["checkins"] = s.checkins;
  j["train_checkins"] = s.train_checkins;
  j["val_checkins"] = s.val_checkins;
  j["test_checkins"] = s.test_checkins;
  j["train_instances"] = s.train_instances;
  j["val_instances"] = s.val_instances;
  j["test_instances"] = s.test_instances;
  j["dropped_unknown_user"] = s.dropped_unknown_user;
  auto drops = [](const InstanceBuildStats& b) {
    return nlohmann::json{{"unknown_target", b.dropped_unknown_target},
                          {"unknown_source", b.dropped_unknown_source},
                          {"short_trajectories", b.short_trajectories}};
  };
  j["val_dropped"] = drops(s.val_stats);
  j["test_dropped"] = drops(s.test_stats);
  j["train_transitions"] = transitions.num_edges();
  j["eta"] = eta;
  j["test_unique_pairs"] = share.unique_pairs;
  j["test_unique_tail_fraction"] = share.unique_tail_fraction();
  j["test_instance_tail_fraction"] = share.instance_tail_fraction();
  return j;
}

nlohmann::json run_preprocess(const RunConfig& config, std::ostream& log) {
  config.validate();
  if (config.data_path.empty()) throw ConfigError("data.path is required for preprocess");
  LoadResult loaded = load_checkins(config.data_path, config.load_options());
  for (const auto& w : loaded.warnings) log << "warning: " << w << '\n';
  InstanceStore store = prepare_dataset(std::move(loaded.records), config.dataset);
  const fs::path out_dir = config.output_dir;
  const fs::path store_path = config.resolved_store_path();
  if (store_path.has_parent_path()) fs::create_directories(store_path.parent_path());
  save_store(store, store_path);
  nlohmann::json summary = dataset_summary_json(store, config.eta, config.cross_trajectory_counts);
  summary["skipped_rows"] = loaded.skipped;
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  save_config(config, out_dir / "config.json");
  return summary;
}

nlohmann::json epoch_record_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"main_loss", r.main_loss},
          {"warm_loss", r.warm_applied ? nlohmann::json(r.warm_loss) : nlohmann::json(nullptr)},
          {"lambda_warm", r.warm_weight},
          {"graph_scale", r.graph_scale},
          {"prior_active", r.prior_active},
          {"corr_active", r.corr_active},
          {"backbone_lr_scale", r.backbone_lr_scale},
          {"val_hr1", r.val_hr1},
          {"val_hr20", r.val_hr20},
          {"val_mrr", r.val_mrr},
          {"seconds", r.seconds}};
}

TrainOutcome run_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  const InstanceStore store = load_store(config.resolved_store_path());
  if (store.options.k != config.dataset.k)
    throw ConfigError("store was built with dataset.k=" + std::to_string(store.options.k) + " but config has " +
                      std::to_string(config.dataset.k));
  const TransitionStore transitions = training_transitions(store, config.cross_trajectory_counts);
  RecapModel model(config.model, store.vocab, normalize(transitions), config.training.seed);

  const fs::path out_dir = config.output_dir;
  fs::create_directories(out_dir);
  save_config(config, out_dir / "config.json");
  std::ofstream jsonl(out_dir / "train_log.jsonl");
  if (!jsonl) throw DataError("cannot write " + (out_dir / "train_log.jsonl").string());

  TrainOutcome outcome;
  outcome.fit = fit(model, store, transitions, config.training, [&](const EpochRecord& r) {
    jsonl << epoch_record_json(r).dump() << '\n';
    jsonl.flush();
    log << "epoch " << r.epoch << " loss " << r.main_loss << " val_mrr " << r.val_mrr << '\n';
  });
  outcome.fingerprint = config_fingerprint(config, store.vocab);
  outcome.checkpoint = out_dir / "model.ckpt";
  nlohmann::json meta = {{"config", config_to_json(config)},
                         {"best_epoch", outcome.fit.best_epoch},
                         {"best_val_mrr", outcome.fit.best_val_mrr}};
  save_checkpoint(make_checkpoint(model.parameters(), outcome.fingerprint, meta), outcome.checkpoint);
  return outcome;
}

EvalOutcome run_evaluate(const RunConfig& config, const fs::path& checkpoint, Split split, std::ostream& log) {
  config.validate();
  const InstanceStore store = load_store(config.resolved_store_path());
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const std::string expected = config_fingerprint(config, store.vocab);
  if (ckpt.fingerprint != expected)
    throw FingerprintMismatch("checkpoint fingerprint " + ckpt.fingerprint + " does not match config fingerprint " +
                              expected);
  const TransitionStore transitions = training_transitions(store, config.cross_trajectory_counts);
  RecapModel model(config.model, store.vocab, normalize(transitions), config.training.seed);
  restore_parameters(model.parameters(), ckpt);

  const int epoch = ckpt.metadata.value("best_epoch", config.training.epochs);
  const StageFlags flags = curriculum_state(std::max(1, epoch), config.training).flags();
  const auto& instances = split == Split::kVal ? store.val : store.test;
  std::vector<RevisitStats> stats;
  if (config.model.use_history)
    stats = compute_instance_stats(store, instances, config.model.window, config.model.candidate_cap);

  EvalOutcome out;
  out.ranks = rank_instances(model, instances, stats, flags, config.eval_batch_size);
  out.report = build_report(instances, transitions, out.ranks, config.eta);

  const fs::path out_dir = config.output_dir;
  const std::string tag = split == Split::kVal ? "val" : "test";
  write_text(out_dir / ("report_" + tag + ".json"), report_to_json(out.report).dump(2) + "\n");
  write_text(out_dir / ("report_" + tag + ".txt"), report_to_text(out.report));
  write_text(out_dir / ("bins_" + tag + ".csv"), bins_to_csv(out.report));
  save_config(config, out_dir / "eval_config.json");
  log << report_to_text(out.report);
  return out;
}

nlohmann::json run_analyze_hops(const RunConfig& config, int max_hops, std::ostream& log) {
  if (max_hops < 1) throw ConfigError("max hops must be >= 1");
  config.validate();
  const InstanceStore store = load_store(config.resolved_store_path());
  const TransitionStore transitions = training_transitions(store, config.cross_trajectory_counts);
  std::vector<Transition> unseen;
  for (const auto& inst : store.test)
    if (transitions.count(inst.source, inst.target) == 0) unseen.emplace_back(inst.source, inst.target);
  std::vector<int> hops;
  for (int n = 1; n <= max_hops; ++n) hops.push_back(n);
  const HopAnalysis a = coverage_snr(unseen, transitions, hops);

  nlohmann::json j;
  j["unseen_pairs"] = a.unseen;
  j["sources"] = a.sources;
  nlohmann::json rows = nlohmann::json::array();
  log << "N   avg|C|   S_N      M_N       coverage  SNR\n";
  for (const auto& r : a.records) {
    rows.push_back({{"hops", r.hops},
                    {"avg_candidates", r.avg_candidates},
                    {"covered", r.covered},
                    {"candidates", r.candidates},
                    {"coverage", r.coverage},
                    {"snr", r.snr_infinite ? nlohmann::json("inf") : nlohmann::json(r.snr)}});
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-3d %-8.1f %-8zu %-9zu %-9.4f %s\n", r.hops, r.avg_candidates, r.covered,
                  r.candidates, r.coverage, r.snr_infinite ? "inf" : std::to_string(r.snr).c_str());
    log << buf;
  }
  j["records"] = rows;
  write_text(fs::path(config.output_dir) / "hops.json", j.dump(2) + "\n");
  return j;
}

nlohmann::json aggregate_reports(const std::vector<nlohmann::json>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_reports: no reports");
  nlohmann::json out;
  out["runs"] = reports.size();
  for (const char* group : {"overall", "head", "tail", "unseen"}) {
    nlohmann::json g = nlohmann::json::object();
    for (const auto& [metric, first] : reports.front().at(group).items()) {
      if (!first.is_number() || metric == "count") continue;
      std::vector<double> values;
      for (const auto& r : reports) {
        const auto& v = r.at(group).value(metric, nlohmann::json());
        if (v.is_number()) values.push_back(v.get<double>());
      }
      if (values.empty()) continue;
      double mean = 0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0;
      for (double v : values) var += (v - mean) * (v - mean);
      const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
      g[metric] = {{"mean", mean}, {"std", sd}, {"n", values.size()}};
    }
    out[group] = g;
  }
  return out;
}

}  // namespace recap
